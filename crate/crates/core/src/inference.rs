//! Conditional inference on `h` at new exposure profiles and posterior
//! predictive outcomes.
//!
//! Given one posterior draw and `V = τK + S_γ`, the surface at new points is
//! Gaussian with mean `τK(new,Z)V⁻¹(y − Xβ)` and covariance
//! `τK(new,new) − τ²K(new,Z)V⁻¹K(Z,new)`. Across draws the estimate is the mean
//! of the conditional means and its covariance is the mean conditional
//! covariance plus the covariance of the conditional means.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::data::{quantile, Dataset, VarianceDesign};
use crate::error::{Error, Result};
use crate::kernel::{factor_cov, kernel_matrix};
use crate::model::{residual, s_diag, s_diag_rows, MarginalModel, ParamState};
use crate::sampler::PosteriorSamples;
use crate::Real;

pub const Z95: f64 = 1.959964;

/// Default draw stride for conditional inference.
pub const DEFAULT_STRIDE: usize = 10;

/// Mean vector and covariance matrix of a multivariate normal.
#[derive(Debug, Clone)]
pub struct Conditional<T> {
    pub mean: Vec<T>,
    pub cov: Mat<T>,
}

impl<T: Real> Conditional<T> {
    pub fn sd(&self) -> Vec<T> {
        (0..self.mean.len()).map(|i| self.cov[(i, i)].max(T::zero()).sqrt()).collect()
    }

    /// Mean and variance of `h_a − h_b`.
    pub fn contrast(&self, a: usize, b: usize) -> (T, T) {
        let var = self.cov[(a, a)] + self.cov[(b, b)] - self.cov[(a, b)] - self.cov[(b, a)];
        (self.mean[a] - self.mean[b], var.max(T::zero()))
    }

    /// One labelled estimate per coordinate.
    pub fn estimates(&self, labels: &[String]) -> Vec<EffectEstimate<T>> {
        self.sd()
            .into_iter()
            .enumerate()
            .map(|(i, sd)| EffectEstimate::new(labels[i].clone(), self.mean[i], sd))
            .collect()
    }
}

/// Posterior summary of one contrast or point with a normal-approximation
/// 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate<T> {
    pub label: String,
    pub estimate: T,
    pub sd: T,
    pub lower95: T,
    pub upper95: T,
}

impl<T: Real> EffectEstimate<T> {
    pub fn new(label: String, estimate: T, sd: T) -> Self {
        let half = T::lit(Z95) * sd;
        EffectEstimate { label, estimate, sd, lower95: estimate - half, upper95: estimate + half }
    }

    pub fn width(&self) -> T {
        self.upper95 - self.lower95
    }
}

/// Streaming `E(μ)` and `E(Σ) + Cov(μ)` over draws. `Cov(μ)` uses the `n − 1`
/// denominator and is zero for a single draw.
#[derive(Debug, Clone)]
pub struct Aggregator<T> {
    count: usize,
    mean: Vec<T>,
    comoment: Mat<T>,
    sigma_sum: Mat<T>,
}

impl<T: Real> Aggregator<T> {
    pub fn new(dim: usize) -> Self {
        Aggregator { count: 0, mean: vec![T::zero(); dim], comoment: Mat::zeros(dim, dim), sigma_sum: Mat::zeros(dim, dim) }
    }

    pub fn push(&mut self, c: &Conditional<T>) {
        let dim = self.mean.len();
        self.count += 1;
        let n = T::of_usize(self.count);
        let delta: Vec<T> = c.mean.iter().zip(&self.mean).map(|(&x, &m)| x - m).collect();
        for (m, &d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for j in 0..dim {
            let after_j = c.mean[j] - self.mean[j];
            for i in 0..dim {
                self.comoment[(i, j)] += delta[i] * after_j;
                self.sigma_sum[(i, j)] += c.cov[(i, j)];
            }
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<Conditional<T>> {
        if self.count == 0 {
            return Err(Error::Empty("posterior draws"));
        }
        let dim = self.mean.len();
        let n = T::of_usize(self.count);
        let denom = T::of_usize(self.count.max(2) - 1);
        let mut cov = Mat::from_fn(dim, dim, |i, j| self.sigma_sum[(i, j)] / n + self.comoment[(i, j)] / denom);
        for j in 0..dim {
            for i in 0..j {
                let s = T::lit(0.5) * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        Ok(Conditional { mean: self.mean.clone(), cov })
    }
}

fn check_z<T: Real>(d: &Dataset<T>, z_new: MatRef<'_, T>) -> Result<()> {
    if z_new.ncols() != d.m() {
        return Err(Error::dims("new exposure columns", d.m(), z_new.ncols()));
    }
    if z_new.nrows() == 0 {
        return Err(Error::Empty("new exposure rows"));
    }
    Ok(())
}

/// Conditional law of `h(Z_new)` for one parameter draw.
pub fn h_conditional_draw<T: Real>(
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    state: &ParamState<T>,
    z_new: MatRef<'_, T>,
) -> Result<Conditional<T>> {
    check_z(d, z_new)?;
    state.check(d, w)?;
    let k = crate::kernel::KernelMatrix::new(d.z.as_ref(), &state.r)?;
    let f = factor_cov(&k, state.tau(), &s_diag(w, &state.gamma)?)?;
    conditional_with(d, state, &f, z_new)
}

fn conditional_with<T: Real>(
    d: &Dataset<T>,
    state: &ParamState<T>,
    f: &crate::kernel::CovFactor<T>,
    z_new: MatRef<'_, T>,
) -> Result<Conditional<T>> {
    let tau = state.tau();
    let cross = kernel_matrix(d.z.as_ref(), z_new, &state.r)?;
    let a = f.half_solve_mat(cross.as_ref());
    let b = f.half_solve(&residual(d, &state.beta));
    let g = z_new.nrows();
    let mean: Vec<T> = (0..g).map(|j| tau * a.col(j).iter().zip(&b).fold(T::zero(), |s, (&x, &y)| s + x * y)).collect();
    let ata = crate::linalg::at_b(a.as_ref(), a.as_ref());
    let knew = kernel_matrix(z_new, z_new, &state.r)?;
    let cov = Mat::from_fn(g, g, |i, j| tau * knew[(i, j)] - tau * tau * ata[(i, j)]);
    Ok(Conditional { mean, cov })
}

/// Posterior predictive law of `y_new` for one draw: the `h` conditional shifted
/// by `X_new β`, with `S_γ(W_new)` added to the covariance.
pub fn predict_draw<T: Real>(
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    state: &ParamState<T>,
    x_new: MatRef<'_, T>,
    z_new: MatRef<'_, T>,
    w_new: MatRef<'_, T>,
) -> Result<Conditional<T>> {
    check_new_rows(d, w, x_new, z_new, w_new)?;
    let mut c = h_conditional_draw(d, w, state, z_new)?;
    shift_predictive(&mut c, state, x_new, w_new)?;
    Ok(c)
}

fn check_new_rows<T: Real>(
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    x_new: MatRef<'_, T>,
    z_new: MatRef<'_, T>,
    w_new: MatRef<'_, T>,
) -> Result<()> {
    check_z(d, z_new)?;
    let n = z_new.nrows();
    if x_new.nrows() != n || w_new.nrows() != n {
        return Err(Error::dims("new rows", n, if x_new.nrows() != n { x_new.nrows() } else { w_new.nrows() }));
    }
    if x_new.ncols() != d.p() {
        return Err(Error::dims("new covariate columns", d.p(), x_new.ncols()));
    }
    if w_new.ncols() != w.w.ncols() {
        return Err(Error::dims("new variance design columns", w.w.ncols(), w_new.ncols()));
    }
    Ok(())
}

fn shift_predictive<T: Real>(c: &mut Conditional<T>, state: &ParamState<T>, x_new: MatRef<'_, T>, w_new: MatRef<'_, T>) -> Result<()> {
    let xb = crate::linalg::mat_vec(x_new, &state.beta);
    let s = s_diag_rows(w_new, &state.gamma)?;
    for i in 0..c.mean.len() {
        c.mean[i] += xb[i];
        c.cov[(i, i)] += s[i];
    }
    Ok(())
}

/// Aggregated conditional of `h(Z_new)` over every `stride`-th draw.
pub fn h_conditional<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    z_new: MatRef<'_, T>,
    stride: usize,
) -> Result<Conditional<T>> {
    check_z(d, z_new)?;
    aggregate(samples, d, w, stride, z_new.nrows(), |_, _| Ok(()), z_new)
}

fn aggregate<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    stride: usize,
    dim: usize,
    mut adjust: impl FnMut(&mut Conditional<T>, &ParamState<T>) -> Result<()>,
    z_new: MatRef<'_, T>,
) -> Result<Conditional<T>> {
    if samples.layout.p != d.p() || samples.layout.m != d.m() || samples.layout.q + 1 != w.w.ncols() {
        return Err(Error::dims("parameter layout", d.p() + w.w.ncols() + 1 + d.m(), samples.n_params()));
    }
    let model = MarginalModel::new(d, w)?;
    let mut agg = Aggregator::new(dim);
    for i in samples.strided(stride) {
        let state = samples.state(i);
        let k = model.kernel(&state.r)?;
        let f = model.factor(&state, &k)?;
        let mut c = conditional_with(d, &state, &f, z_new)?;
        adjust(&mut c, &state)?;
        agg.push(&c);
    }
    agg.finish()
}

/// Posterior predictive estimates for new rows; `w_new` is the encoded
/// variance design (intercept column first) of those rows.
pub fn predict<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    x_new: MatRef<'_, T>,
    z_new: MatRef<'_, T>,
    w_new: MatRef<'_, T>,
    stride: usize,
) -> Result<Vec<EffectEstimate<T>>> {
    check_new_rows(d, w, x_new, z_new, w_new)?;
    let c = aggregate(samples, d, w, stride, z_new.nrows(), |c, s| shift_predictive(c, s, x_new, w_new), z_new)?;
    let labels: Vec<String> = (0..z_new.nrows()).map(|i| format!("row {}", i + 1)).collect();
    Ok(c.estimates(&labels))
}

/// Empirical quantile of each exposure column on the standardized scale.
pub fn exposure_quantiles<T: Real>(d: &Dataset<T>, p: T) -> Result<Vec<T>> {
    check_quantile(p)?;
    (0..d.m()).map(|m| quantile(&d.exposure_column(m), p)).collect()
}

fn check_quantile<T: Real>(p: T) -> Result<()> {
    if p > T::zero() && p < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("quantile {p} is outside (0, 1)")))
    }
}

fn rows_to_mat<T: Real>(rows: &[Vec<T>], m: usize) -> Mat<T> {
    Mat::from_fn(rows.len(), m, |i, j| rows[i][j])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnivariateCurve<T> {
    pub exposure: String,
    /// Grid on the standardized scale.
    pub grid: Vec<T>,
    /// The same grid in original exposure units.
    pub grid_original: Vec<T>,
    pub estimates: Vec<EffectEstimate<T>>,
}

/// `h` along a `G`-point grid over the 1st–99th percentile of exposure `m`
/// with the other exposures at their medians.
pub fn univariate_curve<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    m: usize,
    grid_size: usize,
    stride: usize,
) -> Result<UnivariateCurve<T>> {
    if m >= d.m() {
        return Err(Error::InvalidArgument(format!("exposure index {m} out of range for {} exposures", d.m())));
    }
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid size must be at least 2".into()));
    }
    let col = d.exposure_column(m);
    let lo = quantile(&col, T::lit(0.01))?;
    let hi = quantile(&col, T::lit(0.99))?;
    let medians = exposure_quantiles(d, T::lit(0.5))?;
    let grid: Vec<T> = (0..grid_size)
        .map(|g| lo + (hi - lo) * T::of_usize(g) / T::of_usize(grid_size - 1))
        .collect();
    let rows: Vec<Vec<T>> = grid
        .iter()
        .map(|&v| {
            let mut r = medians.clone();
            r[m] = v;
            r
        })
        .collect();
    let c = h_conditional(samples, d, w, rows_to_mat(&rows, d.m()).as_ref(), stride)?;
    let name = &d.exposure_names[m];
    let labels: Vec<String> = (0..grid_size).map(|g| format!("{name}[{g}]")).collect();
    Ok(UnivariateCurve {
        exposure: name.clone(),
        grid_original: grid.iter().map(|&v| d.to_original_units(m, v)).collect(),
        grid,
        estimates: c.estimates(&labels),
    })
}

/// A probability printed with at most four decimals, trailing zeros dropped.
fn prob_label<T: Real>(p: T) -> String {
    let s = format!("{:.4}", p.as_f64());
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_string()
}

/// `h(all exposures at q) − h(all at base)` for each target quantile.
pub fn joint_effects<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    base: T,
    targets: &[T],
    stride: usize,
) -> Result<Vec<EffectEstimate<T>>> {
    let mut rows = vec![exposure_quantiles(d, base)?];
    for &q in targets {
        rows.push(exposure_quantiles(d, q)?);
    }
    let c = h_conditional(samples, d, w, rows_to_mat(&rows, d.m()).as_ref(), stride)?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let (est, var) = c.contrast(k + 1, 0);
            EffectEstimate::new(format!("joint {} vs {}", prob_label(q), prob_label(base)), est, var.sqrt())
        })
        .collect())
}

pub fn joint_effect<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    base: T,
    target: T,
    stride: usize,
) -> Result<EffectEstimate<T>> {
    Ok(joint_effects(samples, d, w, base, &[target], stride)?.remove(0))
}

/// For each exposure and each fixed quantile `f`: `h` with that exposure at
/// its 75th percentile minus at its 25th, the others held at quantile `f`.
pub fn single_variable_effects<T: Real>(
    samples: &PosteriorSamples<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    fixed_quantiles: &[T],
    stride: usize,
) -> Result<Vec<EffectEstimate<T>>> {
    let q25 = exposure_quantiles(d, T::lit(0.25))?;
    let q75 = exposure_quantiles(d, T::lit(0.75))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for m in 0..d.m() {
        for &f in fixed_quantiles {
            let fixed = exposure_quantiles(d, f)?;
            let mut hi = fixed.clone();
            hi[m] = q75[m];
            let mut lo = fixed;
            lo[m] = q25[m];
            rows.push(hi);
            rows.push(lo);
            labels.push(format!("{} 0.75 vs 0.25 | others at {}", d.exposure_names[m], prob_label(f)));
        }
    }
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let c = h_conditional(samples, d, w, rows_to_mat(&rows, d.m()).as_ref(), stride)?;
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(k, label)| {
            let (est, var) = c.contrast(2 * k, 2 * k + 1);
            EffectEstimate::new(label, est, var.sqrt())
        })
        .collect())
}
