//! Synthetic datasets drawn from the heteroscedastic kernel machine model,
//! and parameter-recovery summaries for fits on them.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{build_variance_design, quantile, standardize_exposures, Covariate, Dataset, Factor, VarianceDesign, VarianceSpec};
use crate::error::{Error, Result};
use crate::kernel::{factor_cov, KernelMatrix};
use crate::linalg;
use crate::model::s_diag;
use crate::sampler::PosteriorSamples;
use crate::Real;

/// Probabilities at which calibration quantiles are given.
pub const CALIBRATION_PROBS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

/// Maternal blood metal quantiles (µg/L) at [`CALIBRATION_PROBS`] for Pb,
/// Hg, Mn and Cd.
pub fn metal_calibration() -> Vec<Calibration> {
    [
        ("Pb", [0.89, 1.20, 1.79, 3.09, 7.20]),
        ("Hg", [1.09, 1.78, 2.95, 5.58, 13.50]),
        ("Mn", [8.11, 10.50, 13.10, 17.40, 22.63]),
        ("Cd", [0.09, 0.13, 0.19, 0.28, 0.37]),
    ]
    .into_iter()
    .map(|(name, quantiles)| Calibration { exposure: name.into(), quantiles })
    .collect()
}

/// Target raw-scale quantiles of one exposure at [`CALIBRATION_PROBS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub exposure: String,
    pub quantiles: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovariateGen {
    Continuous { name: String, mean: f64, sd: f64 },
    /// Level labels with their sampling probabilities; dummy columns are
    /// coded against the lexicographically first label.
    Categorical { name: String, levels: Vec<String>, probs: Vec<f64> },
}

impl CovariateGen {
    fn name(&self) -> &str {
        match self {
            CovariateGen::Continuous { name, .. } | CovariateGen::Categorical { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub exposure_names: Vec<String>,
    /// Correlation of the latent Gaussian exposures; identity when absent.
    #[serde(default)]
    pub correlation: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub covariates: Vec<CovariateGen>,
    /// One coefficient per dummy-expanded covariate column.
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub variance: Vec<VarianceSpec>,
    /// Intercept first, then one entry per variance predictor column.
    pub gamma: Vec<f64>,
    pub tau: f64,
    pub r: Vec<f64>,
    pub seed: u64,
    /// Raw-scale quantile targets; exposures without one are log-normal.
    #[serde(default)]
    pub calibration: Option<Vec<Calibration>>,
    #[serde(default = "default_outcome")]
    pub outcome_name: String,
}

fn default_outcome() -> String {
    "y".into()
}

/// Generating values. `h` and `sigma2` are per observation; `r` refers to the
/// standardized exposure scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub tau: f64,
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    pub sigma2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulated<T> {
    /// Exposures on the raw scale, as written to CSV.
    pub raw: Dataset<T>,
    /// Log-standardized exposures, ready for fitting.
    pub data: Dataset<T>,
    pub design: VarianceDesign<T>,
    pub truth: Truth,
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 1e-12 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

impl SimConfig {
    pub fn m(&self) -> usize {
        self.exposure_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if self.n < 2 || m == 0 {
            return Err(Error::InvalidArgument("simulation needs n ≥ 2 and at least one exposure".into()));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if self.r.len() != m {
            return Err(Error::dims("r", m, self.r.len()));
        }
        if self.r.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument("every r_m must be positive".into()));
        }
        if let Some(c) = &self.correlation {
            if c.len() != m || c.iter().any(|row| row.len() != m) {
                return Err(Error::dims("correlation matrix", m, c.len()));
            }
            for i in 0..m {
                if (c[i][i] - 1.0).abs() > 1e-12 || (0..m).any(|j| (c[i][j] - c[j][i]).abs() > 1e-12) {
                    return Err(Error::InvalidArgument("correlation matrix must be symmetric with unit diagonal".into()));
                }
            }
            if cholesky(c).is_none() {
                return Err(Error::InvalidArgument("correlation matrix is not positive definite".into()));
            }
        }
        for g in &self.covariates {
            match g {
                CovariateGen::Continuous { sd, .. } if !(*sd >= 0.0) => {
                    return Err(Error::InvalidArgument(format!("covariate `{}` needs a nonnegative sd", g.name())));
                }
                CovariateGen::Categorical { levels, probs, .. } => {
                    let total: f64 = probs.iter().sum();
                    if levels.len() < 2 || levels.len() != probs.len() || probs.iter().any(|&p| p < 0.0) || !(total > 0.0) {
                        return Err(Error::InvalidArgument(format!(
                            "covariate `{}` needs at least two levels with nonnegative probabilities",
                            g.name()
                        )));
                    }
                }
                _ => {}
            }
        }
        if let Some(cal) = &self.calibration {
            for c in cal {
                if !self.exposure_names.contains(&c.exposure) {
                    return Err(Error::MissingColumn(c.exposure.clone()));
                }
                if c.quantiles.windows(2).any(|w| !(w[0] < w[1])) || !(c.quantiles[0] > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "calibration quantiles for `{}` must be positive and increasing",
                        c.exposure
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Log raw value as a piecewise-linear function of the normal score through
/// the calibration knots, extended linearly past the outer knots.
fn calibrated_log(score: f64, knots: &[f64; 5], log_q: &[f64; 5]) -> f64 {
    let seg = match knots.iter().position(|&k| score < k) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => 3,
    }
    .min(3);
    let slope = (log_q[seg + 1] - log_q[seg]) / (knots[seg + 1] - knots[seg]);
    log_q[seg] + slope * (score - knots[seg])
}

pub fn generate<T: Real>(c: &SimConfig) -> Result<Simulated<T>> {
    c.validate()?;
    let (n, m) = (c.n, c.m());
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);

    // exposures
    let corr = c.correlation.clone().unwrap_or_else(|| (0..m).map(|i| (0..m).map(|j| (i == j) as u8 as f64).collect()).collect());
    let l = cholesky(&corr).ok_or_else(|| Error::InvalidArgument("correlation matrix is not positive definite".into()))?;
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let knots = CALIBRATION_PROBS.map(|p| std_normal.inverse_cdf(p));
    let cal: Vec<Option<[f64; 5]>> = c
        .exposure_names
        .iter()
        .map(|name| {
            c.calibration
                .as_ref()
                .and_then(|cs| cs.iter().find(|x| &x.exposure == name))
                .map(|x| x.quantiles.map(f64::ln))
        })
        .collect();
    let mut latent = vec![vec![0.0; n]; m];
    for i in 0..n {
        let xi: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        for (j, col) in latent.iter_mut().enumerate() {
            col[i] = (0..=j).map(|k| l[j][k] * xi[k]).sum();
        }
    }
    let mut z_raw = Mat::<T>::zeros(n, m);
    for (j, col) in latent.iter().enumerate() {
        // calibrated columns use rank-based normal scores so sample quantiles
        // track the targets; the Gaussian copula is kept through the ranks
        let scores: Vec<f64> = match &cal[j] {
            Some(_) => crate::stats::average_ranks(col)
                .into_iter()
                .map(|r| std_normal.inverse_cdf(r / (n as f64 + 1.0)))
                .collect(),
            None => col.clone(),
        };
        for (i, &score) in scores.iter().enumerate() {
            let log_value = match &cal[j] {
                Some(lq) => calibrated_log(score, &knots, lq),
                None => score,
            };
            z_raw[(i, j)] = T::lit(log_value.exp());
        }
    }

    // covariates
    let mut x_cols: Vec<Vec<T>> = Vec::new();
    let mut covariate_names = Vec::new();
    let mut covariates = Vec::new();
    for g in &c.covariates {
        match g {
            CovariateGen::Continuous { name, mean, sd } => {
                let col = (0..n).map(|_| { let e: f64 = StandardNormal.sample(&mut rng); T::lit(mean + sd * e) }).collect();
                covariates.push(Covariate::Numeric { name: name.clone(), column: x_cols.len() });
                covariate_names.push(name.clone());
                x_cols.push(col);
            }
            CovariateGen::Categorical { name, levels, probs } => {
                let total: f64 = probs.iter().sum();
                let labels: Vec<&String> = (0..n)
                    .map(|_| {
                        let u = rng.random::<f64>() * total;
                        let mut acc = 0.0;
                        let mut pick = levels.len() - 1;
                        for (k, &p) in probs.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                pick = k;
                                break;
                            }
                        }
                        &levels[pick]
                    })
                    .collect();
                let mut sorted: Vec<String> = levels.clone();
                sorted.sort();
                sorted.dedup();
                let codes: Vec<usize> = labels.iter().map(|l| sorted.iter().position(|s| s == *l).unwrap()).collect();
                let mut dummy_columns = Vec::new();
                for (k, level) in sorted.iter().enumerate().skip(1) {
                    dummy_columns.push(x_cols.len());
                    covariate_names.push(format!("{name}_{level}"));
                    x_cols.push(codes.iter().map(|&cd| if cd == k { T::one() } else { T::zero() }).collect());
                }
                covariates.push(Covariate::Categorical(Factor { name: name.clone(), levels: sorted, codes, dummy_columns }));
            }
        }
    }
    if c.beta.len() != x_cols.len() {
        return Err(Error::dims("beta", x_cols.len(), c.beta.len()));
    }
    let x = Mat::from_fn(n, x_cols.len(), |i, j| x_cols[j][i]);

    let mut raw = Dataset {
        y: vec![T::zero(); n],
        x,
        z: z_raw,
        outcome_name: c.outcome_name.clone(),
        covariate_names,
        exposure_names: c.exposure_names.clone(),
        covariates,
        transforms: None,
    };
    let mut data = standardize_exposures(&raw)?;
    let design = build_variance_design(&data, &c.variance)?;
    if c.gamma.len() != design.w.ncols() {
        return Err(Error::dims("gamma", design.w.ncols(), c.gamma.len()));
    }

    // h once at the realized exposures, with a small nugget for stability
    let r: Vec<T> = c.r.iter().map(|&v| T::lit(v)).collect();
    let k = KernelMatrix::new(data.z.as_ref(), &r)?;
    let tau = T::lit(c.tau);
    let lower = factor_cov(&k, tau, &vec![T::lit(1e-8) * tau; n])?.lower();
    let xi: Vec<T> = (0..n).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect();
    let h = linalg::mat_vec(lower.as_ref(), &xi);

    let gamma: Vec<T> = c.gamma.iter().map(|&v| T::lit(v)).collect();
    let sigma2 = s_diag(&design, &gamma)?;
    let beta: Vec<T> = c.beta.iter().map(|&v| T::lit(v)).collect();
    let xb = linalg::mat_vec(data.x.as_ref(), &beta);
    let y: Vec<T> = (0..n)
        .map(|i| h[i] + xb[i] + sigma2[i].sqrt() * T::lit(StandardNormal.sample(&mut rng)))
        .collect();
    raw.y = y.clone();
    data.y = y;
    data.validate()?;

    Ok(Simulated {
        raw,
        data,
        design,
        truth: Truth {
            beta: c.beta.clone(),
            gamma: c.gamma.clone(),
            tau: c.tau,
            r: c.r.clone(),
            h: h.iter().map(|v| v.as_f64()).collect(),
            sigma2: sigma2.iter().map(|v| v.as_f64()).collect(),
        },
    })
}

/// Recovery of one parameter: posterior mean, bias and whether the central
/// 95% posterior interval covers the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub lower95: f64,
    pub upper95: f64,
    pub covered: bool,
    /// `√τ` and `r` are weakly identified jointly; their rows are reported but
    /// not meant as recovery checks.
    pub informational: bool,
}

pub fn recovery_report<T: Real>(truth: &Truth, samples: &PosteriorSamples<T>) -> Result<Vec<RecoveryRow>> {
    let layout = &samples.layout;
    if truth.beta.len() != layout.p || truth.gamma.len() != layout.q + 1 || truth.r.len() != layout.m {
        return Err(Error::dims("truth parameters", layout.len(), truth.beta.len() + truth.gamma.len() + 1 + truth.r.len()));
    }
    let mut values = truth.beta.clone();
    values.extend(&truth.gamma);
    values.push(truth.tau.sqrt());
    values.extend(&truth.r);
    let mut rows = Vec::with_capacity(values.len());
    for (j, &t) in values.iter().enumerate() {
        let col: Vec<f64> = samples.column(j).iter().map(|v| v.as_f64()).collect();
        let mean = crate::stats::mean(&col);
        let lower95 = quantile(&col, 0.025)?;
        let upper95 = quantile(&col, 0.975)?;
        rows.push(RecoveryRow {
            parameter: layout.names[j].clone(),
            truth: t,
            mean,
            bias: mean - t,
            lower95,
            upper95,
            covered: lower95 <= t && t <= upper95,
            informational: j >= layout.sqrt_tau_index(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Encoding;

    fn base(n: usize, seed: u64) -> SimConfig {
        SimConfig {
            n,
            exposure_names: vec!["a".into(), "b".into()],
            correlation: Some(vec![vec![1.0, 0.4], vec![0.4, 1.0]]),
            covariates: vec![
                CovariateGen::Continuous { name: "age".into(), mean: 0.0, sd: 1.0 },
                CovariateGen::Categorical { name: "site".into(), levels: vec!["north".into(), "east".into()], probs: vec![0.5, 0.5] },
            ],
            beta: vec![0.5, -1.0],
            variance: vec![VarianceSpec::new("site", Encoding::DummySet)],
            gamma: vec![0.0, 0.0],
            tau: 1.0,
            r: vec![1.0, 1.0],
            seed,
            calibration: None,
            outcome_name: "y".into(),
        }
    }

    #[test]
    fn deterministic_and_csv_round_trip() {
        let a = generate::<f64>(&base(50, 3)).unwrap();
        let b = generate::<f64>(&base(50, 3)).unwrap();
        assert_eq!(a.data.y, b.data.y);
        assert_eq!(a.truth, b.truth);
        assert_ne!(generate::<f64>(&base(50, 4)).unwrap().data.y, a.data.y);
        assert_eq!(a.data.covariate_names, ["age", "site_north"]);
        assert_eq!(a.design.column_names, ["(intercept)", "site_north"]);

        let mut buf = Vec::new();
        crate::data::write_csv(&a.raw, &mut buf).unwrap();
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let (back, report) = crate::data::read_csv::<f64, _>(buf.as_slice(), "y", &names(&["a", "b"]), &names(&["age", "site"])).unwrap();
        assert_eq!(report.dropped_rows, 0);
        assert_eq!(back.y, a.raw.y);
        for i in 0..50 {
            for j in 0..2 {
                assert!((back.z[(i, j)] - a.raw.z[(i, j)]).abs() <= 1e-12 * a.raw.z[(i, j)]);
            }
        }
        assert_eq!(back.x, a.raw.x);
    }

    #[test]
    fn homoscedastic_groups_have_equal_spread() {
        let s = generate::<f64>(&base(500, 8)).unwrap();
        let f = s.data.factor("site").unwrap();
        let resid: Vec<f64> = (0..500).map(|i| s.data.y[i] - s.truth.h[i] - 0.5 * s.data.x[(i, 0)] + 1.0 * s.data.x[(i, 1)]).collect();
        let var = |k: usize| {
            let g: Vec<f64> = resid.iter().zip(&f.codes).filter(|(_, &c)| c == k).map(|(&e, _)| e).collect();
            crate::stats::sample_variance(&g)
        };
        let (v0, v1) = (var(0), var(1));
        assert!(v0.max(v1) / v0.min(v1) < 1.5);
    }

    #[test]
    fn calibration_hits_targets() {
        let mut c = base(2000, 21);
        c.exposure_names = ["Pb", "Hg", "Mn", "Cd"].iter().map(|s| s.to_string()).collect();
        c.correlation = None;
        c.r = vec![0.5; 4];
        c.calibration = Some(metal_calibration());
        let s = generate::<f64>(&c).unwrap();
        for (m, cal) in metal_calibration().iter().enumerate() {
            let col: Vec<f64> = (0..2000).map(|i| s.raw.z[(i, m)]).collect();
            for (k, &p) in CALIBRATION_PROBS.iter().enumerate() {
                let q = quantile(&col, p).unwrap();
                assert!((q / cal.quantiles[k] - 1.0).abs() < 0.05, "{} at {p}: {q}", cal.exposure);
            }
        }
    }

    #[test]
    fn total_variance_decomposes() {
        let mut c = base(2000, 5);
        c.variance = vec![VarianceSpec::new("age", Encoding::Identity)];
        c.gamma = vec![-0.5, 0.3];
        c.r = vec![3.0, 3.0];
        let s = generate::<f64>(&c).unwrap();
        let xb: Vec<f64> = (0..2000).map(|i| 0.5 * s.data.x[(i, 0)] - s.data.x[(i, 1)]).collect();
        let want = c.tau + crate::stats::mean(&s.truth.sigma2) + crate::stats::sample_variance(&xb);
        let got = crate::stats::sample_variance(&s.data.y);
        assert!((got / want - 1.0).abs() < 0.15, "{got} vs {want}");
        let my = crate::stats::mean(&s.data.y);
        assert!((my - crate::stats::mean(&xb)).abs() < 0.5 * want.sqrt());
    }

    #[test]
    fn invalid_configs() {
        let mut c = base(20, 1);
        c.correlation = Some(vec![vec![1.0, 1.2], vec![1.2, 1.0]]);
        assert!(generate::<f64>(&c).is_err());
        let mut c = base(20, 1);
        c.tau = 0.0;
        assert!(generate::<f64>(&c).is_err());
        let mut c = base(20, 1);
        c.beta.pop();
        assert!(generate::<f64>(&c).is_err());
        let mut c = base(20, 1);
        c.gamma.push(1.0);
        assert!(generate::<f64>(&c).is_err());
    }
}
