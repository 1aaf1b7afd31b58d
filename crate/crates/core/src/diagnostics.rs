//! Residual-based heteroscedasticity diagnostics and WAIC.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Covariate, Dataset, VarianceDesign};
use crate::error::{Error, Result};
use crate::inference::h_conditional_draw;
use crate::kernel::{factor_cov, KernelMatrix};
use crate::linalg;
use crate::model::{residual, s_diag, ParamState};
use crate::sampler::PosteriorSamples;
use crate::scalar::half_ln_2pi;
use crate::stats;
use crate::Real;

/// `|ρ|` above which an |e|-vs-predictor association is flagged.
pub const SPEARMAN_FLAG: f64 = 0.2;
/// Max/min group residual variance ratio above which a factor is flagged.
pub const VARIANCE_RATIO_FLAG: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualMethod {
    PosteriorMeanH,
    LinearApproximation,
}

/// Association of the absolute residuals with one candidate predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association<T> {
    pub predictor: String,
    /// Spearman ρ(|e|, predictor); absent for categorical predictors.
    pub spearman: Option<T>,
    /// Largest over smallest within-group residual variance; categorical only.
    pub variance_ratio: Option<T>,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport<T> {
    pub method: ResidualMethod,
    pub residuals: Vec<T>,
    pub fitted: Vec<T>,
    pub associations: Vec<Association<T>>,
    /// Regressors kept in the linear approximation (intercept excluded).
    pub regressors: Vec<String>,
}

impl<T: Real> ResidualReport<T> {
    pub fn association(&self, predictor: &str) -> Option<&Association<T>> {
        self.associations.iter().find(|a| a.predictor == predictor)
    }

    pub fn flagged(&self) -> Vec<&str> {
        self.associations.iter().filter(|a| a.flagged).map(|a| a.predictor.as_str()).collect()
    }
}

/// Every exposure and every covariate as entered (factors undivided).
pub fn candidate_predictors<T: Real>(d: &Dataset<T>) -> Vec<String> {
    let mut names = d.exposure_names.clone();
    names.extend(d.covariates.iter().map(|c| c.name().to_owned()));
    names
}

/// Spearman ρ of `|e|` against numeric predictors and group variance ratios
/// for categorical ones.
pub fn association_table<T: Real>(d: &Dataset<T>, e: &[T], predictors: &[String]) -> Result<Vec<Association<T>>> {
    if e.len() != d.n() {
        return Err(Error::dims("residuals", d.n(), e.len()));
    }
    let abs: Vec<T> = e.iter().map(|v| v.abs()).collect();
    let mut out = Vec::with_capacity(predictors.len());
    for name in predictors {
        let numeric = if let Some(m) = d.exposure_index(name) {
            Some(d.exposure_column(m))
        } else {
            d.covariates.iter().find_map(|c| match c {
                Covariate::Numeric { name: n, column } if n == name => Some(linalg::col_vec(d.x.as_ref(), *column)),
                _ => None,
            })
        };
        if let Some(col) = numeric {
            let rho = stats::spearman(&abs, &col);
            out.push(Association {
                predictor: name.clone(),
                spearman: Some(rho),
                variance_ratio: None,
                flagged: rho.abs() > T::lit(SPEARMAN_FLAG),
            });
        } else if let Some(f) = d.factor(name) {
            let ratio = group_variance_ratio(e, &f.codes, f.levels.len());
            out.push(Association {
                predictor: name.clone(),
                spearman: None,
                variance_ratio: Some(ratio),
                flagged: ratio > T::lit(VARIANCE_RATIO_FLAG),
            });
        } else {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    Ok(out)
}

fn group_variance_ratio<T: Real>(e: &[T], codes: &[usize], levels: usize) -> T {
    let mut groups: Vec<Vec<T>> = vec![Vec::new(); levels];
    for (&v, &c) in e.iter().zip(codes) {
        groups[c].push(v);
    }
    let vars: Vec<T> = groups.iter().filter(|g| g.len() >= 2).map(|g| stats::sample_variance(g)).collect();
    if vars.len() < 2 {
        return T::one();
    }
    let max = vars.iter().copied().fold(T::neg_infinity(), T::max);
    let min = vars.iter().copied().fold(T::infinity(), T::min);
    if min > T::zero() {
        max / min
    } else {
        T::infinity()
    }
}

/// `E(h | y)` at the observed exposures for a single parameter value.
pub fn posterior_mean_h<T: Real>(d: &Dataset<T>, w: &VarianceDesign<T>, state: &ParamState<T>) -> Result<Vec<T>> {
    state.check(d, w)?;
    let k = KernelMatrix::new(d.z.as_ref(), &state.r)?;
    let f = factor_cov(&k, state.tau(), &s_diag(w, &state.gamma)?)?;
    let alpha = f.solve(&residual(d, &state.beta));
    let kmat = k.matrix();
    let tau = state.tau();
    Ok((0..d.n()).map(|i| tau * (0..d.n()).fold(T::zero(), |s, j| s + kmat[(i, j)] * alpha[j])).collect())
}

/// Residuals `y − E(h|y) − X E(β|y)` with `E(h|y)` evaluated at the posterior
/// means of `(β, γ, √τ, r)`.
pub fn bayesian_residuals<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    predictors: Option<&[String]>,
) -> Result<ResidualReport<T>> {
    let state = samples.posterior_mean();
    let h = posterior_mean_h(d, w, &state)?;
    let xb = linalg::mat_vec(d.x.as_ref(), &state.beta);
    let fitted: Vec<T> = h.iter().zip(&xb).map(|(&a, &b)| a + b).collect();
    let residuals: Vec<T> = d.y.iter().zip(&fitted).map(|(&y, &f)| y - f).collect();
    let names = predictors.map(<[String]>::to_vec).unwrap_or_else(|| candidate_predictors(d));
    let associations = association_table(d, &residuals, &names)?;
    Ok(ResidualReport { method: ResidualMethod::PosteriorMeanH, residuals, fitted, associations, regressors: Vec::new() })
}

/// OLS residuals of `y` on an intercept, the exposures, all pairwise exposure
/// products and the covariates. Collinear regressors are dropped.
pub fn linear_approx_residuals<T: Real>(d: &Dataset<T>, predictors: Option<&[String]>) -> Result<ResidualReport<T>> {
    let n = d.n();
    let mut cols: Vec<(String, Vec<T>)> = Vec::new();
    for m in 0..d.m() {
        cols.push((d.exposure_names[m].clone(), d.exposure_column(m)));
    }
    for a in 0..d.m() {
        for b in a + 1..d.m() {
            let (za, zb) = (d.exposure_column(a), d.exposure_column(b));
            let prod = za.iter().zip(&zb).map(|(&x, &y)| x * y).collect();
            cols.push((format!("{}:{}", d.exposure_names[a], d.exposure_names[b]), prod));
        }
    }
    for (p, name) in d.covariate_names.iter().enumerate() {
        cols.push((name.clone(), linalg::col_vec(d.x.as_ref(), p)));
    }
    if n <= cols.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "linear approximation needs more than {} rows, got {n}",
            cols.len() + 1
        )));
    }

    // modified Gram–Schmidt on [1, regressors]
    let mut basis: Vec<Vec<T>> = vec![vec![T::one() / T::of_usize(n).sqrt(); n]];
    let mut kept = Vec::new();
    for (name, col) in cols {
        let norm0 = linalg::dot(&col, &col).sqrt();
        let mut v = col;
        for q in &basis {
            let c = linalg::dot(q, &v);
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        let norm = linalg::dot(&v, &v).sqrt();
        if norm0 == T::zero() || norm <= T::lit(1e-8) * norm0 {
            log::warn!("dropping collinear regressor `{name}` from the linear approximation");
            continue;
        }
        basis.push(v.into_iter().map(|x| x / norm).collect());
        kept.push(name);
    }
    let mut residuals = d.y.clone();
    for q in &basis {
        let c = linalg::dot(q, &residuals);
        for (r, &qi) in residuals.iter_mut().zip(q) {
            *r -= c * qi;
        }
    }
    let fitted: Vec<T> = d.y.iter().zip(&residuals).map(|(&y, &e)| y - e).collect();
    let names = predictors.map(<[String]>::to_vec).unwrap_or_else(|| candidate_predictors(d));
    let associations = association_table(d, &residuals, &names)?;
    Ok(ResidualReport { method: ResidualMethod::LinearApproximation, residuals, fitted, associations, regressors: kept })
}

/// Pointwise likelihood used by WAIC.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WaicMode {
    /// `N(xᵢ'β, τ + exp(wᵢ'γ))`, the coordinate marginal of the integrated model.
    #[default]
    Marginal,
    /// `N(xᵢ'β + hᵢ, exp(wᵢ'γ))` with `h` drawn from its conditional per draw.
    ConditionalH { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaicPoint {
    pub lppd: f64,
    pub p_waic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
    pub n_draws: usize,
    pub pointwise: Vec<WaicPoint>,
}

/// WAIC from a draws × observations matrix of log densities (row-major).
/// The pointwise penalty is the sample variance (`S − 1` denominator) of the
/// log density; it is zero for a single draw.
pub fn waic_from_log_lik(log_lik: &[f64], n_obs: usize) -> Result<WaicResult> {
    if n_obs == 0 || log_lik.is_empty() || log_lik.len() % n_obs != 0 {
        return Err(Error::InvalidArgument("log-likelihood matrix shape does not match the observation count".into()));
    }
    let s = log_lik.len() / n_obs;
    let mut pointwise = Vec::with_capacity(n_obs);
    let mut column = vec![0.0; s];
    for i in 0..n_obs {
        for (k, c) in column.iter_mut().enumerate() {
            *c = log_lik[k * n_obs + i];
        }
        let lppd = stats::log_sum_exp(&column) - (s as f64).ln();
        pointwise.push(WaicPoint { lppd, p_waic: stats::sample_variance(&column) });
    }
    let lppd: f64 = pointwise.iter().map(|p| p.lppd).sum();
    let p_waic: f64 = pointwise.iter().map(|p| p.p_waic).sum();
    Ok(WaicResult { waic: -2.0 * (lppd - p_waic), lppd, p_waic, n_draws: s, pointwise })
}

pub fn waic<T: Real>(samples: &PosteriorSamples<T>, d: &Dataset<T>, w: &VarianceDesign<T>) -> Result<WaicResult> {
    waic_with(samples, d, w, WaicMode::Marginal, 1)
}

pub fn waic_with<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    mode: WaicMode,
    stride: usize,
) -> Result<WaicResult> {
    let n = d.n();
    let draws: Vec<usize> = samples.strided(stride).collect();
    if draws.len() < 100 {
        log::warn!("WAIC from only {} draws", draws.len());
    }
    let mut log_lik = Vec::with_capacity(draws.len() * n);
    let mut rng = match mode {
        WaicMode::ConditionalH { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        WaicMode::Marginal => None,
    };
    for i in draws {
        let state = samples.state(i);
        state.check(d, w)?;
        let mean = linalg::mat_vec(d.x.as_ref(), &state.beta);
        let s = s_diag(w, &state.gamma)?;
        match rng.as_mut() {
            None => {
                let tau = state.tau();
                for j in 0..n {
                    log_lik.push(normal_log_pdf(d.y[j] - mean[j], tau + s[j]).as_f64());
                }
            }
            Some(rng) => {
                let h = draw_h(d, w, &state, rng)?;
                for j in 0..n {
                    log_lik.push(normal_log_pdf(d.y[j] - mean[j] - h[j], s[j]).as_f64());
                }
            }
        }
    }
    waic_from_log_lik(&log_lik, n)
}

fn normal_log_pdf<T: Real>(e: T, var: T) -> T {
    -half_ln_2pi::<T>() - T::lit(0.5) * (var.ln() + e * e / var)
}

fn draw_h<T: Real>(d: &Dataset<T>, w: &VarianceDesign<T>, state: &ParamState<T>, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
    let c = h_conditional_draw(d, w, state, d.z.as_ref())?;
    let n = d.n();
    let cov = c.cov;
    let scale = (0..n).fold(T::zero(), |a, i| a + cov[(i, i)].abs()) / T::of_usize(n);
    let mut jitter = T::lit(1e-10) * scale.max(T::lit(1e-300));
    for _ in 0..8 {
        let mut l = Mat::from_fn(n, n, |i, j| cov[(i, j)] + if i == j { jitter } else { T::zero() });
        if linalg::cholesky_in_place(l.as_mut()) {
            let xi: Vec<T> = (0..n).map(|_| T::lit(StandardNormal.sample(rng))).collect();
            return Ok((0..n)
                .map(|i| c.mean[i] + (0..=i).fold(T::zero(), |a, j| a + l[(i, j)] * xi[j]))
                .collect());
        }
        jitter = jitter * T::lit(100.0);
    }
    Err(Error::NotPositiveDefinite { jitter: jitter.as_f64() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub waic: f64,
    pub delta: f64,
    pub p_waic: f64,
    pub lppd: f64,
}

/// Ranks models by WAIC ascending (ties keep input order) with the
/// difference to the best.
pub fn compare(results: &[WaicResult], labels: &[String]) -> Result<Vec<ComparisonRow>> {
    if results.len() < 2 {
        return Err(Error::InvalidArgument("comparison needs at least two models".into()));
    }
    if labels.len() != results.len() {
        return Err(Error::dims("model labels", results.len(), labels.len()));
    }
    let n = results[0].pointwise.len();
    if let Some(r) = results.iter().find(|r| r.pointwise.len() != n) {
        return Err(Error::dims("observations across models", n, r.pointwise.len()));
    }
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[a].waic.partial_cmp(&results[b].waic).unwrap_or(std::cmp::Ordering::Equal));
    let best = results[order[0]].waic;
    Ok(order
        .into_iter()
        .map(|k| ComparisonRow {
            label: labels[k].clone(),
            waic: results[k].waic,
            delta: results[k].waic - best,
            p_waic: results[k].p_waic,
            lppd: results[k].lppd,
        })
        .collect())
}
