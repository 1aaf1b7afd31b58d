//! Metropolis-within-Gibbs sampling of `(β, γ, √τ, r)` from the marginal
//! posterior.
//!
//! `β` is drawn exactly from its Gaussian full conditional. `γ` moves as one
//! random-walk block, `√τ` and each `r_m` as random walks on the log scale.
//! Proposal scales adapt toward a target acceptance rate during burn-in and
//! are frozen afterwards.

mod adapt;
pub mod ess;
mod samples;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, VarianceDesign};
use crate::error::{Error, Result};
use crate::kernel::{factor_packed, CovFactor, PackedKernel};
use crate::linalg;
use crate::model::{gaussian_log_density, log_prior, s_diag, MarginalModel, ParamLayout, ParamState, PriorSpec, RPrior};
use crate::stats;
use crate::Real;
use adapt::Proposal;

pub use ess::{ess, EssEstimate};
pub use samples::{BlockAcceptance, ParamSummary, PosteriorSamples};

/// How the kernel weights are proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RUpdate {
    /// One log-scale random walk per `r_m`.
    #[default]
    Componentwise,
    /// All `log r_m` jointly, with a proposal shape learned during burn-in.
    Block,
}

/// Blocks held fixed at their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Freeze {
    pub beta: bool,
    pub gamma: bool,
    pub sqrt_tau: bool,
    pub r: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_burn: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub seed: u64,
    /// Proposals per Robbins–Monro scale update.
    pub adapt_window: usize,
    pub target_scalar: f64,
    pub target_block: f64,
    pub r_update: RUpdate,
    pub freeze: Freeze,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_burn: 20_000,
            n_keep: 80_000,
            thin: 1,
            seed: 1,
            adapt_window: 50,
            target_scalar: 0.44,
            target_block: 0.234,
            r_update: RUpdate::Componentwise,
            freeze: Freeze::default(),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_keep == 0 || self.thin == 0 || self.adapt_window == 0 {
            return Err(Error::InvalidArgument("n_keep, thin and adapt_window must be positive".into()));
        }
        for t in [self.target_scalar, self.target_block] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidArgument(format!("target acceptance {t} is outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.n_burn + self.n_keep * self.thin
    }
}

/// Starting values: least-squares `β`, `γ₁` at the log residual variance with
/// the other `γ` at zero, `√τ` at half the outcome sd and `r_m = 0.1` (moved
/// inside the prior support if needed). A seed jitters these for
/// overdispersed multi-chain starts.
pub fn initialize<T: Real>(
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    prior: &PriorSpec<T>,
    seed: Option<u64>,
) -> Result<ParamState<T>> {
    prior.validate()?;
    if w.n() != d.n() {
        return Err(Error::dims("variance design rows", d.n(), w.n()));
    }
    let beta = least_squares(d);
    let resid = crate::model::residual(d, &beta);
    let mut var = stats::sample_variance(&resid);
    if !(var > T::zero()) || !var.is_finite() {
        var = T::lit(1e-6);
    }
    let mut gamma = vec![T::zero(); w.w.ncols()];
    gamma[0] = var.ln();

    let sd_y = stats::sample_sd(&d.y);
    let upper = prior.sqrt_tau_upper;
    let mut sqrt_tau = T::lit(0.5) * sd_y;
    if !(sqrt_tau > T::zero()) || !sqrt_tau.is_finite() {
        sqrt_tau = T::lit(0.1);
    }
    if sqrt_tau >= upper {
        sqrt_tau = T::lit(0.5) * upper;
    }

    let r0 = match prior.r_prior {
        RPrior::InverseUniform { upper } if T::lit(0.1) * upper <= T::one() => T::lit(2.0) / upper,
        RPrior::Uniform { upper } if upper <= T::lit(0.1) => T::lit(0.5) * upper,
        _ => T::lit(0.1),
    };
    let mut state = ParamState { beta, gamma, sqrt_tau, r: vec![r0; d.m()] };

    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || T::lit(StandardNormal.sample(&mut rng));
        let beta_scale = T::lit(0.1) * sd_y.max(T::lit(1e-3));
        for b in state.beta.iter_mut() {
            *b += beta_scale * normal();
        }
        for g in state.gamma.iter_mut() {
            *g += T::lit(0.5) * normal();
        }
        let cand = state.sqrt_tau * (T::lit(0.5) * normal()).exp();
        if cand < upper {
            state.sqrt_tau = cand;
        }
        for r in state.r.iter_mut() {
            let cand = *r * (T::lit(0.5) * normal()).exp();
            if prior.r_prior.contains(cand) {
                *r = cand;
            }
        }
    }
    Ok(state)
}

fn least_squares<T: Real>(d: &Dataset<T>) -> Vec<T> {
    let p = d.p();
    if p == 0 {
        return Vec::new();
    }
    let x = d.x.as_ref();
    let mut xtx = linalg::at_b(x, x);
    let y = Mat::from_fn(d.n(), 1, |i, _| d.y[i]);
    let xty = linalg::at_b(x, y.as_ref());
    if !linalg::cholesky_in_place(xtx.as_mut()) {
        log::warn!("covariate cross-product is singular; starting beta at zero");
        return vec![T::zero(); p];
    }
    let mut b: Vec<T> = (0..p).map(|j| xty[(j, 0)]).collect();
    linalg::solve_lower_vec(xtx.as_ref(), &mut b);
    linalg::solve_lower_transpose_vec(xtx.as_ref(), &mut b);
    if b.iter().all(|v| v.is_finite()) {
        b
    } else {
        vec![T::zero(); p]
    }
}

/// Runs the sampler from [`initialize`]`(.., None)`.
pub fn fit<T: Real>(
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    prior: &PriorSpec<T>,
    config: &McmcConfig,
) -> Result<PosteriorSamples<T>> {
    let init = initialize(d, w, prior, None)?;
    fit_from(d, w, prior, config, init)
}

pub fn fit_from<T: Real>(
    d: &Dataset<T>,
    w: &VarianceDesign<T>,
    prior: &PriorSpec<T>,
    config: &McmcConfig,
    init: ParamState<T>,
) -> Result<PosteriorSamples<T>> {
    Sampler::new(d, w, *prior, config.clone(), init)?.run()
}

/// Chain state with the cached kernel, covariance factor and log-likelihood
/// of the current point.
pub struct Sampler<'a, T: Real> {
    model: MarginalModel<'a, T>,
    layout: ParamLayout,
    prior: PriorSpec<T>,
    config: McmcConfig,
    rng: ChaCha8Rng,
    state: ParamState<T>,
    kernel: PackedKernel<T>,
    factor: CovFactor<T>,
    resid: Vec<T>,
    loglik: T,
    gamma_prop: Proposal,
    tau_prop: Proposal,
    r_props: Vec<Proposal>,
}

impl<'a, T: Real> Sampler<'a, T> {
    pub fn new(
        d: &'a Dataset<T>,
        w: &'a VarianceDesign<T>,
        prior: PriorSpec<T>,
        config: McmcConfig,
        init: ParamState<T>,
    ) -> Result<Self> {
        config.validate()?;
        prior.validate()?;
        init.check(d, w)?;
        if !log_prior(&init, &prior).is_finite() || init.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInitialization);
        }
        let model = MarginalModel::new(d, w)?;
        let kernel = model.distances().packed(&init.r)?;
        let factor = match factor_packed(&kernel, init.tau(), &s_diag(w, &init.gamma)?) {
            Ok(f) => f,
            Err(Error::NotPositiveDefinite { .. }) => return Err(Error::NonFiniteInitialization),
            Err(e) => return Err(e),
        };
        let resid = model.residual(&init.beta);
        let loglik = gaussian_log_density(&factor, &resid);
        if !loglik.is_finite() {
            return Err(Error::NonFiniteInitialization);
        }
        let g = init.gamma.len();
        let gamma_target = if g == 1 { config.target_scalar } else { config.target_block };
        let r_props = match config.r_update {
            RUpdate::Componentwise => (0..d.m()).map(|_| Proposal::new(1, 0.3, config.target_scalar)).collect(),
            RUpdate::Block => {
                let target = if d.m() == 1 { config.target_scalar } else { config.target_block };
                vec![Proposal::new(d.m(), 0.3 / (d.m() as f64).sqrt(), target)]
            }
        };
        Ok(Sampler {
            layout: ParamLayout::new(d, w),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            gamma_prop: Proposal::new(g, 0.1 / (g as f64).sqrt(), gamma_target),
            tau_prop: Proposal::new(1, 0.1, config.target_scalar),
            r_props,
            model,
            prior,
            config,
            state: init,
            kernel,
            factor,
            resid,
            loglik,
        })
    }

    pub fn state(&self) -> &ParamState<T> {
        &self.state
    }

    pub fn log_posterior(&self) -> T {
        self.loglik + log_prior(&self.state, &self.prior)
    }

    /// One full pass over the unfrozen blocks.
    pub fn sweep(&mut self, burn_in: bool) -> Result<()> {
        let freeze = self.config.freeze;
        if !freeze.beta {
            self.update_beta()?;
        }
        if !freeze.gamma {
            self.update_gamma(burn_in)?;
        }
        if !freeze.sqrt_tau {
            self.update_sqrt_tau(burn_in)?;
        }
        if !freeze.r {
            match self.config.r_update {
                RUpdate::Componentwise => {
                    for m in 0..self.state.r.len() {
                        self.update_r_component(m, burn_in)?;
                    }
                }
                RUpdate::Block => self.update_r_block(burn_in)?,
            }
        }
        Ok(())
    }

    /// Exact draw from `β | γ, τ, r, y`, a Gaussian with precision
    /// `XᵀV⁻¹X + I/σ²` and mean `(XᵀV⁻¹X + I/σ²)⁻¹ XᵀV⁻¹y`.
    pub fn update_beta(&mut self) -> Result<()> {
        let p = self.state.beta.len();
        if p == 0 {
            return Ok(());
        }
        let d = self.model.data;
        let a = self.factor.half_solve_mat(d.x.as_ref());
        let b = self.factor.half_solve(&d.y);
        let mut prec = linalg::at_b(a.as_ref(), a.as_ref());
        let prior_prec = (self.prior.beta_sd * self.prior.beta_sd).recip();
        for j in 0..p {
            prec[(j, j)] += prior_prec;
        }
        let mut mean: Vec<T> = (0..p).map(|j| linalg::dot(&linalg::col_vec(a.as_ref(), j), &b)).collect();
        if !linalg::cholesky_in_place(prec.as_mut()) {
            return Err(Error::NotPositiveDefinite { jitter: 0.0 });
        }
        linalg::solve_lower_vec(prec.as_ref(), &mut mean);
        linalg::solve_lower_transpose_vec(prec.as_ref(), &mut mean);
        let mut noise: Vec<T> = (0..p).map(|_| T::lit(StandardNormal.sample(&mut self.rng))).collect();
        linalg::solve_lower_transpose_vec(prec.as_ref(), &mut noise);
        self.state.beta = mean.iter().zip(&noise).map(|(&m, &e)| m + e).collect();
        self.resid = self.model.residual(&self.state.beta);
        self.loglik = gaussian_log_density(&self.factor, &self.resid);
        Ok(())
    }

    fn evaluate(&self, kernel: &PackedKernel<T>, tau: T, gamma: &[T]) -> Result<Option<(CovFactor<T>, T)>> {
        let s = s_diag(self.model.design, gamma)?;
        if s.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Ok(None);
        }
        match factor_packed(kernel, tau, &s) {
            Ok(f) => {
                let ll = gaussian_log_density(&f, &self.resid);
                Ok(ll.is_finite().then_some((f, ll)))
            }
            Err(Error::NotPositiveDefinite { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn accept(&mut self, log_ratio: T) -> bool {
        if log_ratio.is_nan() {
            return false;
        }
        log_ratio >= T::zero() || T::lit(self.rng.random::<f64>()).ln() < log_ratio
    }

    fn update_gamma(&mut self, burn_in: bool) -> Result<()> {
        let step = self.gamma_prop.step(&mut self.rng);
        let cand: Vec<T> = self.state.gamma.iter().zip(&step).map(|(&g, &s)| g + T::lit(s)).collect();
        let var = self.prior.gamma_sd * self.prior.gamma_sd;
        let prior_diff = cand
            .iter()
            .zip(&self.state.gamma)
            .fold(T::zero(), |a, (&c, &g)| a - T::lit(0.5) * (c * c - g * g) / var);
        let mut accepted = false;
        if let Some((f, ll)) = self.evaluate(&self.kernel, self.state.tau(), &cand)? {
            if self.accept(ll - self.loglik + prior_diff) {
                self.state.gamma = cand;
                self.factor = f;
                self.loglik = ll;
                accepted = true;
            }
        }
        self.gamma_prop.record(accepted, burn_in);
        if burn_in {
            let x: Vec<f64> = self.state.gamma.iter().map(|v| v.as_f64()).collect();
            self.gamma_prop.observe(&x);
            self.gamma_prop.adapt(self.config.adapt_window);
        }
        Ok(())
    }

    fn update_sqrt_tau(&mut self, burn_in: bool) -> Result<()> {
        let step = T::lit(self.tau_prop.step(&mut self.rng)[0]);
        let cand = self.state.sqrt_tau * step.exp();
        let mut accepted = false;
        if cand > T::zero() && cand < self.prior.sqrt_tau_upper {
            if let Some((f, ll)) = self.evaluate(&self.kernel, cand * cand, &self.state.gamma)? {
                // log-scale walk: Jacobian ratio cand / current
                if self.accept(ll - self.loglik + step) {
                    self.state.sqrt_tau = cand;
                    self.factor = f;
                    self.loglik = ll;
                    accepted = true;
                }
            }
        }
        self.tau_prop.record(accepted, burn_in);
        if burn_in {
            self.tau_prop.adapt(self.config.adapt_window);
        }
        Ok(())
    }

    fn try_r(&mut self, cand: Vec<T>, changed: Option<usize>) -> Result<bool> {
        let r_prior = self.prior.r_prior;
        let prior_diff = cand
            .iter()
            .zip(&self.state.r)
            .fold(T::zero(), |a, (&c, &r)| a + r_prior.log_density(c) - r_prior.log_density(r) + (c / r).ln());
        if !prior_diff.is_finite() {
            return Ok(false);
        }
        let kernel = match changed {
            Some(m) => self.model.distances().shifted(&self.kernel, m, cand[m] - self.state.r[m]),
            None => self.model.distances().packed(&cand)?,
        };
        if let Some((f, ll)) = self.evaluate(&kernel, self.state.tau(), &self.state.gamma)? {
            if self.accept(ll - self.loglik + prior_diff) {
                self.state.r = cand;
                self.kernel = kernel;
                self.factor = f;
                self.loglik = ll;
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn update_r_component(&mut self, m: usize, burn_in: bool) -> Result<()> {
        let step = T::lit(self.r_props[m].step(&mut self.rng)[0]);
        let mut cand = self.state.r.clone();
        cand[m] = cand[m] * step.exp();
        let accepted = self.try_r(cand, Some(m))?;
        self.r_props[m].record(accepted, burn_in);
        if burn_in {
            self.r_props[m].adapt(self.config.adapt_window);
        }
        Ok(())
    }

    fn update_r_block(&mut self, burn_in: bool) -> Result<()> {
        let step = self.r_props[0].step(&mut self.rng);
        let cand: Vec<T> = self.state.r.iter().zip(&step).map(|(&r, &s)| r * T::lit(s).exp()).collect();
        let accepted = self.try_r(cand, None)?;
        self.r_props[0].record(accepted, burn_in);
        if burn_in {
            let x: Vec<f64> = self.state.r.iter().map(|v| v.as_f64().ln()).collect();
            self.r_props[0].observe(&x);
            self.r_props[0].adapt(self.config.adapt_window);
        }
        Ok(())
    }

    fn acceptance(&self) -> Vec<BlockAcceptance> {
        let mut out = Vec::new();
        let freeze = self.config.freeze;
        let mut push = |block: String, p: &Proposal| {
            if let Some(rate) = p.acceptance_rate() {
                out.push(BlockAcceptance { block, rate });
            }
        };
        if !freeze.gamma {
            push("gamma".into(), &self.gamma_prop);
        }
        if !freeze.sqrt_tau {
            push("sqrt_tau".into(), &self.tau_prop);
        }
        if !freeze.r {
            match self.config.r_update {
                RUpdate::Componentwise => {
                    for (m, p) in self.r_props.iter().enumerate() {
                        push(self.layout.names[self.layout.r_offset() + m].clone(), p);
                    }
                }
                RUpdate::Block => push("r".into(), &self.r_props[0]),
            }
        }
        out
    }

    /// Runs burn-in then keeps every `thin`-th state until `n_keep` draws are
    /// stored.
    pub fn run(mut self) -> Result<PosteriorSamples<T>> {
        let c = self.config.clone();
        let total = c.total_iterations();
        let mut draws = Vec::with_capacity(c.n_keep * self.layout.len());
        let report_every = (total / 10).max(1);
        for it in 0..total {
            let burn_in = it < c.n_burn;
            self.sweep(burn_in)?;
            if !burn_in && (it - c.n_burn + 1) % c.thin == 0 {
                draws.extend(self.state.to_vec());
            }
            if (it + 1) % report_every == 0 {
                log::info!("iteration {}/{total}, log posterior {}", it + 1, self.log_posterior());
            }
        }
        let acceptance = self.acceptance();
        for a in &acceptance {
            if !(0.05..=0.8).contains(&a.rate) {
                log::warn!("acceptance rate for {} is {:.3}", a.block, a.rate);
            }
        }
        Ok(PosteriorSamples::from_run(self.layout, self.prior, c, acceptance, draws))
    }
}
