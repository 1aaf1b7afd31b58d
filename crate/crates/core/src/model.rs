//! Priors and the marginal log-posterior of `(β, γ, √τ, r)` with the kernel
//! surface `h` integrated out: `y ~ MVN(Xβ, τK_r + S_γ)`.

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, VarianceDesign};
use crate::error::{Error, Result};
use crate::kernel::{factor_cov, CovFactor, KernelMatrix, PairwiseDistances};
use crate::linalg;
use crate::scalar::half_ln_2pi;
use crate::Real;

/// Prior on each kernel weight `r_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RPrior<T> {
    /// `1/r ~ Uniform(0, upper)`: support `r > 1/upper`, density `1/(upper·r²)`.
    InverseUniform { upper: T },
    /// `r ~ Uniform(0, upper)`.
    Uniform { upper: T },
}

impl<T: Real> RPrior<T> {
    pub fn log_density(&self, r: T) -> T {
        match *self {
            RPrior::InverseUniform { upper } => {
                if r > T::one() / upper && r.is_finite() {
                    -upper.ln() - T::lit(2.0) * r.ln()
                } else {
                    T::neg_infinity()
                }
            }
            RPrior::Uniform { upper } => {
                if r > T::zero() && r < upper {
                    -upper.ln()
                } else {
                    T::neg_infinity()
                }
            }
        }
    }

    pub fn contains(&self, r: T) -> bool {
        self.log_density(r).is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec<T> {
    /// Standard deviation of the independent normal prior on each `β_p`.
    pub beta_sd: T,
    /// Standard deviation of the independent normal prior on each `γ_q`.
    pub gamma_sd: T,
    /// `√τ ~ Uniform(0, sqrt_tau_upper)`.
    pub sqrt_tau_upper: T,
    pub r_prior: RPrior<T>,
}

impl<T: Real> Default for PriorSpec<T> {
    /// Normal(0, 1000) on β and γ (1000 read as a variance), `√τ ~ U(0, 100)`,
    /// `r_m ~ Inverse-Uniform(0, 100)`.
    fn default() -> Self {
        PriorSpec {
            beta_sd: T::lit(1000f64.sqrt()),
            gamma_sd: T::lit(1000f64.sqrt()),
            sqrt_tau_upper: T::lit(100.0),
            r_prior: RPrior::InverseUniform { upper: T::lit(100.0) },
        }
    }
}

impl<T: Real> PriorSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let upper = match self.r_prior {
            RPrior::InverseUniform { upper } | RPrior::Uniform { upper } => upper,
        };
        if [self.beta_sd, self.gamma_sd, self.sqrt_tau_upper, upper].iter().all(|&v| v > T::zero() && v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument("prior scales and bounds must be positive and finite".into()))
        }
    }
}

/// One point of the marginal parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState<T> {
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
    pub sqrt_tau: T,
    pub r: Vec<T>,
}

impl<T: Real> ParamState<T> {
    pub fn tau(&self) -> T {
        self.sqrt_tau * self.sqrt_tau
    }

    /// Flattens in the fixed order `(β, γ, √τ, r)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.beta.len() + self.gamma.len() + 1 + self.r.len());
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.gamma);
        v.push(self.sqrt_tau);
        v.extend_from_slice(&self.r);
        v
    }

    pub fn from_slice(layout: &ParamLayout, v: &[T]) -> Self {
        assert_eq!(v.len(), layout.len());
        let (p, g) = (layout.p, layout.q + 1);
        ParamState {
            beta: v[..p].to_vec(),
            gamma: v[p..p + g].to_vec(),
            sqrt_tau: v[p + g],
            r: v[p + g + 1..].to_vec(),
        }
    }

    pub(crate) fn check(&self, d: &Dataset<T>, w: &VarianceDesign<T>) -> Result<()> {
        if self.beta.len() != d.p() {
            return Err(Error::dims("beta", d.p(), self.beta.len()));
        }
        if self.gamma.len() != w.w.ncols() {
            return Err(Error::dims("gamma", w.w.ncols(), self.gamma.len()));
        }
        if self.r.len() != d.m() {
            return Err(Error::dims("r", d.m(), self.r.len()));
        }
        if w.n() != d.n() {
            return Err(Error::dims("variance design rows", d.n(), w.n()));
        }
        Ok(())
    }
}

/// Dimensions and column order of a flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub names: Vec<String>,
}

impl ParamLayout {
    pub fn new<T: Real>(d: &Dataset<T>, w: &VarianceDesign<T>) -> Self {
        let mut names: Vec<String> = d.covariate_names.iter().map(|c| format!("beta[{c}]")).collect();
        names.extend(w.column_names.iter().map(|c| format!("gamma[{c}]")));
        names.push("sqrt_tau".into());
        names.extend(d.exposure_names.iter().map(|e| format!("r[{e}]")));
        ParamLayout { p: d.p(), q: w.q(), m: d.m(), names }
    }

    pub fn len(&self) -> usize {
        self.p + self.q + 2 + self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn gamma_offset(&self) -> usize {
        self.p
    }

    pub fn sqrt_tau_index(&self) -> usize {
        self.p + self.q + 1
    }

    pub fn r_offset(&self) -> usize {
        self.p + self.q + 2
    }
}

/// Diagonal of `S_γ`: `exp(wᵢ'γ)` for each row of `W`.
pub fn s_diag<T: Real>(w: &VarianceDesign<T>, gamma: &[T]) -> Result<Vec<T>> {
    s_diag_rows(w.w.as_ref(), gamma)
}

pub fn s_diag_rows<T: Real>(w: MatRef<'_, T>, gamma: &[T]) -> Result<Vec<T>> {
    if gamma.len() != w.ncols() {
        return Err(Error::dims("gamma", w.ncols(), gamma.len()));
    }
    Ok(linalg::mat_vec(w, gamma).into_iter().map(T::exp).collect())
}

pub(crate) fn residual<T: Real>(d: &Dataset<T>, beta: &[T]) -> Vec<T> {
    let xb = linalg::mat_vec(d.x.as_ref(), beta);
    d.y.iter().zip(xb).map(|(&y, f)| y - f).collect()
}

/// `log MVN(y; Xβ, τK_r + S_γ)` evaluated through one Cholesky factorization.
pub fn log_marginal_likelihood<T: Real>(state: &ParamState<T>, d: &Dataset<T>, w: &VarianceDesign<T>) -> Result<T> {
    state.check(d, w)?;
    let k = KernelMatrix::new(d.z.as_ref(), &state.r)?;
    let s = s_diag(w, &state.gamma)?;
    let f = factor_cov(&k, state.tau(), &s)?;
    Ok(gaussian_log_density(&f, &residual(d, &state.beta)))
}

/// `log MVN(e; 0, V)` given the factor of `V`.
pub fn gaussian_log_density<T: Real>(f: &CovFactor<T>, e: &[T]) -> T {
    let n = T::of_usize(e.len());
    -(n * half_ln_2pi::<T>()) - T::lit(0.5) * (f.log_det() + f.quad_form(e))
}

fn normal_log_pdf<T: Real>(x: T, sd: T) -> T {
    -half_ln_2pi::<T>() - sd.ln() - T::lit(0.5) * (x / sd) * (x / sd)
}

/// Log prior density; `-∞` outside the support.
pub fn log_prior<T: Real>(state: &ParamState<T>, p: &PriorSpec<T>) -> T {
    let sqrt_tau = if state.sqrt_tau > T::zero() && state.sqrt_tau < p.sqrt_tau_upper {
        -p.sqrt_tau_upper.ln()
    } else {
        return T::neg_infinity();
    };
    let beta = state.beta.iter().fold(T::zero(), |a, &b| a + normal_log_pdf(b, p.beta_sd));
    let gamma = state.gamma.iter().fold(T::zero(), |a, &g| a + normal_log_pdf(g, p.gamma_sd));
    let r = state.r.iter().fold(T::zero(), |a, &r| a + p.r_prior.log_density(r));
    beta + gamma + sqrt_tau + r
}

/// Unnormalized log posterior; `-∞` when the state is outside the prior
/// support (the likelihood is not evaluated then).
pub fn log_posterior<T: Real>(
    state: &ParamState<T>,
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    p: &PriorSpec<T>,
) -> Result<T> {
    let lp = log_prior(state, p);
    if !lp.is_finite() {
        state.check(d, w)?;
        return Ok(T::neg_infinity());
    }
    Ok(lp + log_marginal_likelihood(state, d, w)?)
}

/// Dataset, variance design and cached exposure distances bundled for
/// repeated likelihood evaluation.
#[derive(Debug, Clone)]
pub struct MarginalModel<'a, T> {
    pub data: &'a Dataset<T>,
    pub design: &'a VarianceDesign<T>,
    distances: PairwiseDistances<T>,
}

impl<'a, T: Real> MarginalModel<'a, T> {
    pub fn new(data: &'a Dataset<T>, design: &'a VarianceDesign<T>) -> Result<Self> {
        if design.n() != data.n() {
            return Err(Error::dims("variance design rows", data.n(), design.n()));
        }
        Ok(MarginalModel { data, design, distances: PairwiseDistances::new(data.z.as_ref()) })
    }

    pub fn kernel(&self, r: &[T]) -> Result<KernelMatrix<T>> {
        self.distances.kernel(r)
    }

    pub(crate) fn distances(&self) -> &PairwiseDistances<T> {
        &self.distances
    }

    pub fn factor(&self, state: &ParamState<T>, k: &KernelMatrix<T>) -> Result<CovFactor<T>> {
        let s = s_diag(self.design, &state.gamma)?;
        factor_cov(k, state.tau(), &s)
    }

    pub fn residual(&self, beta: &[T]) -> Vec<T> {
        residual(self.data, beta)
    }
}
