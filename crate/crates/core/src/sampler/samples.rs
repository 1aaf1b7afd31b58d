use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ess::{ess, EssEstimate};
use super::McmcConfig;
use crate::data::quantile;
use crate::error::{Error, Result};
use crate::model::{ParamLayout, ParamState, PriorSpec};
use crate::Real;

/// Post-burn-in acceptance rate of one Metropolis block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAcceptance {
    pub block: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub ess: EssEstimate,
}

/// Retained draws in row-major order, one row per kept iteration.
#[derive(Debug, Clone)]
pub struct PosteriorSamples<T> {
    pub layout: ParamLayout,
    pub prior: PriorSpec<T>,
    pub config: Option<McmcConfig>,
    pub acceptance: Vec<BlockAcceptance>,
    draws: Vec<T>,
}

impl<T: Real> PosteriorSamples<T> {
    pub fn from_draws(layout: ParamLayout, prior: PriorSpec<T>, draws: Vec<T>) -> Result<Self> {
        if draws.is_empty() || draws.len() % layout.len() != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill rows of {} parameters",
                draws.len(),
                layout.len()
            )));
        }
        Ok(PosteriorSamples { layout, prior, config: None, acceptance: Vec::new(), draws })
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len() / self.layout.len()
    }

    pub fn n_params(&self) -> usize {
        self.layout.len()
    }

    pub fn draw(&self, i: usize) -> &[T] {
        let k = self.layout.len();
        &self.draws[i * k..(i + 1) * k]
    }

    pub fn state(&self, i: usize) -> ParamState<T> {
        ParamState::from_slice(&self.layout, self.draw(i))
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n_draws()).map(|i| self.draw(i)[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<T>> {
        self.layout.names.iter().position(|n| n == name).map(|j| self.column(j))
    }

    /// Indices `0, stride, 2·stride, …` of the draws used for posterior
    /// aggregation.
    pub fn strided(&self, stride: usize) -> impl Iterator<Item = usize> {
        (0..self.n_draws()).step_by(stride.max(1))
    }

    pub fn posterior_mean(&self) -> ParamState<T> {
        let n = T::of_usize(self.n_draws());
        let mut acc = vec![T::zero(); self.layout.len()];
        for i in 0..self.n_draws() {
            for (a, &v) in acc.iter_mut().zip(self.draw(i)) {
                *a += v;
            }
        }
        let means: Vec<T> = acc.into_iter().map(|a| a / n).collect();
        ParamState::from_slice(&self.layout, &means)
    }

    pub fn ess(&self) -> Result<Vec<EssEstimate>> {
        (0..self.layout.len()).map(|j| ess(&self.column(j))).collect()
    }

    pub fn summary(&self) -> Result<Vec<ParamSummary>> {
        let ess = self.ess()?;
        let mut out = Vec::with_capacity(self.layout.len());
        for (j, e) in ess.into_iter().enumerate() {
            let col: Vec<f64> = self.column(j).iter().map(|v| v.as_f64()).collect();
            out.push(ParamSummary {
                name: self.layout.names[j].clone(),
                mean: crate::stats::mean(&col),
                sd: crate::stats::sample_sd(&col),
                q025: quantile(&col, 0.025)?,
                q975: quantile(&col, 0.975)?,
                ess: e,
            });
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.layout.names)?;
        for i in 0..self.n_draws() {
            wr.write_record(self.draw(i).iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads draws written by [`write_csv`](Self::write_csv); the header must
    /// match the layout's parameter names.
    pub fn read_csv<R: Read>(r: R, layout: ParamLayout, prior: PriorSpec<T>) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        if header != layout.names {
            return Err(Error::InvalidArgument(format!(
                "sample columns {header:?} do not match the fitted layout {:?}",
                layout.names
            )));
        }
        let mut draws = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::NonNumeric {
                    column: header[col].clone(),
                    row: row + 1,
                    value: field.to_owned(),
                })?;
                draws.push(T::lit(v));
            }
        }
        Self::from_draws(layout, prior, draws)
    }

    pub fn load_csv(path: impl AsRef<Path>, layout: ParamLayout, prior: PriorSpec<T>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, layout, prior)
    }

    pub(crate) fn from_run(
        layout: ParamLayout,
        prior: PriorSpec<T>,
        config: McmcConfig,
        acceptance: Vec<BlockAcceptance>,
        draws: Vec<T>,
    ) -> Self {
        PosteriorSamples { layout, prior, config: Some(config), acceptance, draws }
    }
}
