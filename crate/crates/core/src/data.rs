//! Study data: CSV ingestion, exposure standardization, quantile profiles
//! and the variance design matrix.
//!
//! Covariates enter `X` without an intercept column. Location is absorbed by
//! the covariate effects and the zero-mean kernel surface; a user who wants an
//! explicit intercept can supply a constant column. Continuous covariates are
//! left on their original scale.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::stats;
use crate::Real;

/// A categorical covariate with reference-cell dummy coding.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: String,
    /// Levels sorted lexicographically; `levels[0]` is the reference.
    pub levels: Vec<String>,
    /// Level index per observation.
    pub codes: Vec<usize>,
    /// Columns of `X` holding the dummies for `levels[1..]`.
    pub dummy_columns: Vec<usize>,
}

/// One covariate as it appeared in the input, before dummy expansion.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariate {
    Numeric { name: String, column: usize },
    Categorical(Factor),
}

impl Covariate {
    pub fn name(&self) -> &str {
        match self {
            Covariate::Numeric { name, .. } => name,
            Covariate::Categorical(f) => &f.name,
        }
    }
}

/// Record of the log/center/scale transform applied to one exposure:
/// `z_std = (ln(z + shift) - mean) / sd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureTransform<T> {
    pub shift: T,
    pub mean: T,
    pub sd: T,
}

impl<T: Real> ExposureTransform<T> {
    pub fn forward(&self, raw: T) -> T {
        ((raw + self.shift).ln() - self.mean) / self.sd
    }

    pub fn inverse(&self, standardized: T) -> T {
        (standardized * self.sd + self.mean).exp() - self.shift
    }
}

#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub y: Vec<T>,
    /// `N × P` covariates, dummy-expanded.
    pub x: Mat<T>,
    /// `N × M` exposures.
    pub z: Mat<T>,
    pub outcome_name: String,
    pub covariate_names: Vec<String>,
    pub exposure_names: Vec<String>,
    pub covariates: Vec<Covariate>,
    /// Per-exposure transforms; `None` while exposures are on the raw scale.
    pub transforms: Option<Vec<ExposureTransform<T>>>,
}

/// Rows discarded by complete-case filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropReport {
    pub total_rows: usize,
    pub dropped_rows: usize,
}

impl<T: Real> Dataset<T> {
    /// Assembles a dataset of numeric columns, checking shapes and finiteness.
    pub fn new(
        y: Vec<T>,
        x: Mat<T>,
        z: Mat<T>,
        covariate_names: Vec<String>,
        exposure_names: Vec<String>,
    ) -> Result<Self> {
        let covariates = covariate_names
            .iter()
            .enumerate()
            .map(|(column, name)| Covariate::Numeric { name: name.clone(), column })
            .collect();
        let d = Dataset {
            y,
            x,
            z,
            outcome_name: "y".into(),
            covariate_names,
            exposure_names,
            covariates,
            transforms: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 observations, got {n}")));
        }
        if self.z.ncols() == 0 {
            return Err(Error::InvalidArgument("need at least one exposure".into()));
        }
        if self.x.nrows() != n {
            return Err(Error::dims("covariate rows", n, self.x.nrows()));
        }
        if self.z.nrows() != n {
            return Err(Error::dims("exposure rows", n, self.z.nrows()));
        }
        if self.covariate_names.len() != self.x.ncols() {
            return Err(Error::dims("covariate names", self.x.ncols(), self.covariate_names.len()));
        }
        if self.exposure_names.len() != self.z.ncols() {
            return Err(Error::dims("exposure names", self.z.ncols(), self.exposure_names.len()));
        }
        let finite = self.y.iter().all(|v| v.is_finite())
            && (0..self.x.ncols()).all(|j| self.x.col(j).iter().all(|v| v.is_finite()))
            && (0..self.z.ncols()).all(|j| self.z.col(j).iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidArgument("non-finite entry in y, X or Z".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.z.ncols()
    }

    pub fn exposure_index(&self, name: &str) -> Option<usize> {
        self.exposure_names.iter().position(|n| n == name)
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.covariates.iter().find_map(|c| match c {
            Covariate::Categorical(f) if f.name == name => Some(f),
            _ => None,
        })
    }

    pub fn exposure_column(&self, m: usize) -> Vec<T> {
        linalg::col_vec(self.z.as_ref(), m)
    }

    /// Maps a standardized exposure value back to original units. Identity
    /// when the dataset has not been standardized.
    pub fn to_original_units(&self, m: usize, value: T) -> T {
        match &self.transforms {
            Some(t) => t[m].inverse(value),
            None => value,
        }
    }

    /// Keeps the listed rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let pick = |a: MatRef<'_, T>| Mat::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)]);
        let covariates = self
            .covariates
            .iter()
            .map(|c| match c {
                Covariate::Categorical(f) => Covariate::Categorical(Factor {
                    codes: rows.iter().map(|&r| f.codes[r]).collect(),
                    ..f.clone()
                }),
                other => other.clone(),
            })
            .collect();
        let d = Dataset {
            y: rows.iter().map(|&r| self.y[r]).collect(),
            x: pick(self.x.as_ref()),
            z: pick(self.z.as_ref()),
            outcome_name: self.outcome_name.clone(),
            covariate_names: self.covariate_names.clone(),
            exposure_names: self.exposure_names.clone(),
            covariates,
            transforms: self.transforms.clone(),
        };
        d.validate()?;
        Ok(d)
    }

    /// Exposures on the original measurement scale.
    pub fn raw_exposures(&self) -> Mat<T> {
        Mat::from_fn(self.n(), self.m(), |i, j| self.to_original_units(j, self.z[(i, j)]))
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

fn parse_number<T: Real>(cell: &str) -> Option<T> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).map(T::lit)
}

/// Reads a study CSV and assembles a dataset on the raw exposure scale.
///
/// Rows with a missing value (empty, `NA` or `NaN`) in any selected column are
/// dropped. Covariates whose cells are not all numeric are treated as
/// categorical and dummy-coded against their lexicographically first level.
pub fn load_csv<T: Real>(
    path: impl AsRef<Path>,
    outcome: &str,
    exposures: &[String],
    covariates: &[String],
) -> Result<(Dataset<T>, DropReport)> {
    let file = std::fs::File::open(path)?;
    read_csv(file, outcome, exposures, covariates)
}

pub fn read_csv<T: Real, R: Read>(
    reader: R,
    outcome: &str,
    exposures: &[String],
    covariates: &[String],
) -> Result<(Dataset<T>, DropReport)> {
    let table = Table::read(reader)?;
    let outcome_col = table.column(outcome)?;
    let exposure_cols = exposures.iter().map(|e| table.column(e)).collect::<Result<Vec<_>>>()?;
    let covariate_cols = covariates.iter().map(|c| table.column(c)).collect::<Result<Vec<_>>>()?;
    if exposures.is_empty() {
        return Err(Error::InvalidArgument("at least one exposure column is required".into()));
    }

    let selected: Vec<usize> = std::iter::once(outcome_col)
        .chain(exposure_cols.iter().copied())
        .chain(covariate_cols.iter().copied())
        .collect();
    let kept: Vec<usize> = (0..table.rows.len())
        .filter(|&i| selected.iter().all(|&c| !is_missing(&table.rows[i][c])))
        .collect();
    let report = DropReport { total_rows: table.rows.len(), dropped_rows: table.rows.len() - kept.len() };
    if kept.is_empty() {
        return Err(Error::NoUsableRows);
    }

    let numeric = |col: usize, name: &str| -> Result<Vec<T>> {
        kept.iter()
            .map(|&i| {
                let cell = &table.rows[i][col];
                parse_number(cell).ok_or_else(|| Error::NonNumeric {
                    column: name.to_string(),
                    row: i + 1,
                    value: cell.clone(),
                })
            })
            .collect()
    };

    let y = numeric(outcome_col, outcome)?;
    let mut z_cols = Vec::with_capacity(exposures.len());
    for (name, &col) in exposures.iter().zip(&exposure_cols) {
        z_cols.push(numeric(col, name)?);
    }

    let mut x_cols: Vec<Vec<T>> = Vec::new();
    let mut covariate_names = Vec::new();
    let mut covs = Vec::new();
    for (name, &col) in covariates.iter().zip(&covariate_cols) {
        let cells: Vec<&str> = kept.iter().map(|&i| table.rows[i][col].trim()).collect();
        if cells.iter().all(|c| parse_number::<T>(c).is_some()) {
            covs.push(Covariate::Numeric { name: name.clone(), column: x_cols.len() });
            covariate_names.push(name.clone());
            x_cols.push(cells.iter().map(|c| parse_number(c).unwrap()).collect());
        } else {
            let levels: Vec<String> =
                cells.iter().map(|c| c.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
            let factor = encode_factor(name, levels, &cells, &mut x_cols, &mut covariate_names)?;
            covs.push(Covariate::Categorical(factor));
        }
    }

    let n = y.len();
    let d = Dataset {
        y,
        x: Mat::from_fn(n, x_cols.len(), |i, j| x_cols[j][i]),
        z: Mat::from_fn(n, z_cols.len(), |i, j| z_cols[j][i]),
        outcome_name: outcome.to_string(),
        covariate_names,
        exposure_names: exposures.to_vec(),
        covariates: covs,
        transforms: None,
    };
    d.validate()?;
    Ok((d, report))
}

fn encode_factor<T: Real>(
    name: &str,
    levels: Vec<String>,
    cells: &[&str],
    x_cols: &mut Vec<Vec<T>>,
    covariate_names: &mut Vec<String>,
) -> Result<Factor> {
    let index: HashMap<&str, usize> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let codes = cells
        .iter()
        .enumerate()
        .map(|(row, c)| {
            index.get(c).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("unknown level `{c}` for `{name}` at data row {}", row + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dummy_columns = Vec::new();
    for (k, level) in levels.iter().enumerate().skip(1) {
        dummy_columns.push(x_cols.len());
        covariate_names.push(format!("{name}_{level}"));
        x_cols.push(codes.iter().map(|&c| if c == k { T::one() } else { T::zero() }).collect());
    }
    Ok(Factor { name: name.to_string(), levels, codes, dummy_columns })
}

/// Reads a CSV with the same columns as `reference` and encodes it the same
/// way: identical factor levels and, if `reference` is standardized, the same
/// exposure transforms.
pub fn load_csv_like<T: Real>(path: impl AsRef<Path>, reference: &Dataset<T>) -> Result<(Dataset<T>, DropReport)> {
    let file = std::fs::File::open(path)?;
    read_csv_like(file, reference)
}

pub fn read_csv_like<T: Real, R: Read>(reader: R, reference: &Dataset<T>) -> Result<(Dataset<T>, DropReport)> {
    let table = Table::read(reader)?;
    let cov_names: Vec<String> = reference.covariates.iter().map(|c| c.name().to_string()).collect();
    let outcome_col = table.column(&reference.outcome_name)?;
    let exposure_cols =
        reference.exposure_names.iter().map(|e| table.column(e)).collect::<Result<Vec<_>>>()?;
    let covariate_cols = cov_names.iter().map(|c| table.column(c)).collect::<Result<Vec<_>>>()?;
    let selected: Vec<usize> = std::iter::once(outcome_col)
        .chain(exposure_cols.iter().copied())
        .chain(covariate_cols.iter().copied())
        .collect();
    let kept: Vec<usize> = (0..table.rows.len())
        .filter(|&i| selected.iter().all(|&c| !is_missing(&table.rows[i][c])))
        .collect();
    let report = DropReport { total_rows: table.rows.len(), dropped_rows: table.rows.len() - kept.len() };
    if kept.is_empty() {
        return Err(Error::NoUsableRows);
    }
    let numeric = |col: usize, name: &str| -> Result<Vec<T>> {
        kept.iter()
            .map(|&i| {
                let cell = &table.rows[i][col];
                parse_number(cell).ok_or_else(|| Error::NonNumeric {
                    column: name.to_string(),
                    row: i + 1,
                    value: cell.clone(),
                })
            })
            .collect()
    };
    let n = kept.len();
    let y = numeric(outcome_col, &reference.outcome_name)?;
    let mut z = Mat::<T>::zeros(n, reference.m());
    for (m, (&col, name)) in exposure_cols.iter().zip(&reference.exposure_names).enumerate() {
        let raw = numeric(col, name)?;
        for (i, v) in raw.into_iter().enumerate() {
            z[(i, m)] = match &reference.transforms {
                Some(t) => {
                    if v + t[m].shift <= T::zero() {
                        return Err(Error::NonPositiveExposure {
                            column: name.clone(),
                            row: kept[i] + 1,
                            value: v.as_f64(),
                        });
                    }
                    t[m].forward(v)
                }
                None => v,
            };
        }
    }
    let mut x = Mat::<T>::zeros(n, reference.p());
    let mut covariates = Vec::with_capacity(reference.covariates.len());
    for (cov, &col) in reference.covariates.iter().zip(&covariate_cols) {
        match cov {
            Covariate::Numeric { name, column } => {
                for (i, v) in numeric(col, name)?.into_iter().enumerate() {
                    x[(i, *column)] = v;
                }
                covariates.push(cov.clone());
            }
            Covariate::Categorical(f) => {
                let mut codes = Vec::with_capacity(n);
                for (i, &row) in kept.iter().enumerate() {
                    let cell = table.rows[row][col].trim();
                    let code = f.levels.iter().position(|l| l == cell).ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "level `{cell}` of `{}` at data row {} was not seen in the reference data",
                            f.name,
                            row + 1
                        ))
                    })?;
                    if code > 0 {
                        x[(i, f.dummy_columns[code - 1])] = T::one();
                    }
                    codes.push(code);
                }
                covariates.push(Covariate::Categorical(Factor { codes, ..f.clone() }));
            }
        }
    }
    let d = Dataset {
        y,
        x,
        z,
        outcome_name: reference.outcome_name.clone(),
        covariate_names: reference.covariate_names.clone(),
        exposure_names: reference.exposure_names.clone(),
        covariates,
        transforms: reference.transforms.clone(),
    };
    d.validate()?;
    Ok((d, report))
}

/// Writes the dataset in the schema [`load_csv`] reads: outcome, raw
/// exposures, then covariates with factors written as level labels.
pub fn write_csv<T: Real, W: Write>(d: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![d.outcome_name.clone()];
    header.extend(d.exposure_names.iter().cloned());
    header.extend(d.covariates.iter().map(|c| c.name().to_string()));
    w.write_record(&header)?;
    let raw = d.raw_exposures();
    for i in 0..d.n() {
        let mut rec = vec![fmt_num(d.y[i])];
        rec.extend((0..d.m()).map(|m| fmt_num(raw[(i, m)])));
        for c in &d.covariates {
            rec.push(match c {
                Covariate::Numeric { column, .. } => fmt_num(d.x[(i, *column)]),
                Covariate::Categorical(f) => f.levels[f.codes[i]].clone(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_num<T: Real>(v: T) -> String {
    // shortest repr that round-trips
    format!("{}", v.as_f64())
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

/// Log-transforms every exposure, then centers and scales it by its sample
/// mean and sample standard deviation (`n - 1` denominator).
pub fn standardize_exposures<T: Real>(d: &Dataset<T>) -> Result<Dataset<T>> {
    standardize_exposures_with_shift(d, T::zero())
}

/// As [`standardize_exposures`] but applies `ln(z + shift)`.
pub fn standardize_exposures_with_shift<T: Real>(d: &Dataset<T>, shift: T) -> Result<Dataset<T>> {
    if d.transforms.is_some() {
        return Err(Error::InvalidArgument("exposures are already standardized".into()));
    }
    let mut z = d.z.clone();
    let mut transforms = Vec::with_capacity(d.m());
    for m in 0..d.m() {
        let mut logs = Vec::with_capacity(d.n());
        for i in 0..d.n() {
            let v = d.z[(i, m)] + shift;
            if v <= T::zero() {
                return Err(Error::NonPositiveExposure {
                    column: d.exposure_names[m].clone(),
                    row: i + 1,
                    value: d.z[(i, m)].as_f64(),
                });
            }
            logs.push(v.ln());
        }
        let mean = stats::mean(&logs);
        let sd = stats::sample_sd(&logs);
        if sd <= T::zero() {
            return Err(Error::InvalidArgument(format!(
                "exposure `{}` is constant after log transform",
                d.exposure_names[m]
            )));
        }
        for (i, l) in logs.into_iter().enumerate() {
            z[(i, m)] = (l - mean) / sd;
        }
        transforms.push(ExposureTransform { shift, mean, sd });
    }
    Ok(Dataset { z, transforms: Some(transforms), ..d.clone() })
}

/// Type-7 sample quantile: linear interpolation between order statistics at
/// position `h = (n - 1) p` (0-based).
pub fn quantile<T: Real>(v: &[T], p: T) -> Result<T> {
    if v.is_empty() {
        return Err(Error::Empty("quantile of an empty vector"));
    }
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(quantile_sorted(&sorted, p))
}

pub(crate) fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    let h = T::of_usize(n - 1) * p;
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::of_usize(lo);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantileMethod {
    /// Linear interpolation of order statistics, `h = (n - 1) p + 1`.
    Type7,
}

/// Quantiles of each exposure at probabilities 0.05, 0.10, …, 0.95.
#[derive(Debug, Clone)]
pub struct QuantileProfile<T> {
    pub probs: Vec<T>,
    /// `table[m][k]` is the quantile of exposure `m` at `probs[k]`.
    pub table: Vec<Vec<T>>,
    pub method: QuantileMethod,
}

impl<T: Real> QuantileProfile<T> {
    pub fn new(d: &Dataset<T>) -> Self {
        let probs: Vec<T> = (1..=19).map(|k| T::lit(k as f64 * 0.05)).collect();
        let table = (0..d.m())
            .map(|m| {
                let mut col = d.exposure_column(m);
                col.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                probs.iter().map(|&p| quantile_sorted(&col, p)).collect()
            })
            .collect();
        QuantileProfile { probs, table, method: QuantileMethod::Type7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    Identity,
    AbsoluteValue,
    DummySet,
}

/// One variance predictor: a source column of `X` or `Z` (or a categorical
/// covariate for [`Encoding::DummySet`]) and how to encode it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarianceSpec {
    pub source: String,
    pub encoding: Encoding,
}

impl VarianceSpec {
    pub fn new(source: impl Into<String>, encoding: Encoding) -> Self {
        VarianceSpec { source: source.into(), encoding }
    }
}

/// The `N × (Q + 1)` design of the log-linear variance model, first column
/// all ones.
#[derive(Debug, Clone)]
pub struct VarianceDesign<T> {
    pub w: Mat<T>,
    pub recipe: Vec<VarianceSpec>,
    pub column_names: Vec<String>,
    pub full_rank: bool,
}

impl<T: Real> VarianceDesign<T> {
    /// Number of variance predictors excluding the intercept.
    pub fn q(&self) -> usize {
        self.w.ncols() - 1
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Intercept-only design: the homoscedastic special case.
    pub fn intercept_only(n: usize) -> Self {
        VarianceDesign {
            w: Mat::from_fn(n, 1, |_, _| T::one()),
            recipe: Vec::new(),
            column_names: vec!["(intercept)".into()],
            full_rank: true,
        }
    }

    /// Rebuilds the design for other rows sharing the fitted schema.
    pub fn apply(&self, d: &Dataset<T>) -> Result<Mat<T>> {
        let other = build_variance_design(d, &self.recipe)?;
        if other.w.ncols() != self.w.ncols() {
            return Err(Error::dims("variance design columns", self.w.ncols(), other.w.ncols()));
        }
        Ok(other.w)
    }
}

/// Assembles `W` from an ordered recipe of variance predictors.
///
/// Exposure sources are taken as stored in `d` (standardized when
/// [`standardize_exposures`] has been applied).
pub fn build_variance_design<T: Real>(d: &Dataset<T>, recipe: &[VarianceSpec]) -> Result<VarianceDesign<T>> {
    let n = d.n();
    let mut cols: Vec<Vec<T>> = vec![vec![T::one(); n]];
    let mut names = vec!["(intercept)".to_string()];
    for spec in recipe {
        let source = if let Some(m) = d.exposure_index(&spec.source) {
            Some(d.exposure_column(m))
        } else {
            d.covariate_index(&spec.source).map(|p| linalg::col_vec(d.x.as_ref(), p))
        };
        let numeric_source = source.is_some();
        match (spec.encoding, source) {
            (Encoding::Identity, Some(col)) => {
                cols.push(col);
                names.push(spec.source.clone());
            }
            (Encoding::AbsoluteValue, Some(col)) => {
                cols.push(col.into_iter().map(T::abs).collect());
                names.push(format!("|{}|", spec.source));
            }
            (Encoding::DummySet, _) => {
                let f = d.factor(&spec.source).ok_or_else(|| match numeric_source {
                    true => Error::InvalidArgument(format!(
                        "dummy-set encoding needs a categorical source; `{}` is numeric",
                        spec.source
                    )),
                    false => Error::MissingColumn(spec.source.clone()),
                })?;
                for (k, level) in f.levels.iter().enumerate().skip(1) {
                    cols.push(f.codes.iter().map(|&c| if c == k { T::one() } else { T::zero() }).collect());
                    names.push(format!("{}_{}", f.name, level));
                }
            }
            (_, None) => {
                if d.factor(&spec.source).is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "`{}` is categorical; use dummy-set encoding",
                        spec.source
                    )));
                }
                return Err(Error::MissingColumn(spec.source.clone()));
            }
        }
    }
    let w = Mat::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let full_rank = has_full_column_rank(w.as_ref());
    if !full_rank {
        log::warn!("variance design is rank deficient (constant or collinear predictors)");
    }
    Ok(VarianceDesign { w, recipe: recipe.to_vec(), column_names: names, full_rank })
}

fn has_full_column_rank<T: Real>(w: MatRef<'_, T>) -> bool {
    if w.nrows() < w.ncols() {
        return false;
    }
    // scale columns to unit norm so the eigenvalue test is scale free
    let scaled = Mat::from_fn(w.nrows(), w.ncols(), |i, j| {
        let norm = w.col(j).iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        if norm > T::zero() {
            w[(i, j)] / norm
        } else {
            T::zero()
        }
    });
    let gram = linalg::at_b(scaled.as_ref(), scaled.as_ref());
    match linalg::symmetric_min_eigenvalue(gram.as_ref()) {
        Some(min) => min > T::lit(1e-10),
        None => false,
    }
}
