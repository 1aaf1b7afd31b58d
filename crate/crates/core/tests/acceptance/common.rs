use std::sync::{Mutex, MutexGuard, OnceLock, PoisonError};
use std::time::Instant;

use faer::Mat;
use hbkmr::data::build_variance_design;
use hbkmr::model::RPrior;
use hbkmr::simulate::{generate, metal_calibration, CovariateGen, SimConfig, Truth};
use hbkmr::{fit, Dataset, Encoding, McmcConfig, PosteriorSamples, PriorSpec, RUpdate, VarianceDesign, VarianceSpec};
use nalgebra::DMatrix;

pub const REPS: usize = 20;
pub const N_TRAIN: usize = 300;
pub const N_HOLDOUT: usize = 60;
pub const DRIVER: &str = "ses";
pub const GAMMA_SLOPE: f64 = 0.8;

static SERIAL: Mutex<()> = Mutex::new(());

/// Criteria share fixtures and one core; run them one at a time.
pub fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(PoisonError::into_inner)
}

pub fn report(criterion: u32, pass: bool, detail: &str, secs: f64, limit_secs: f64) -> bool {
    let in_time = secs < limit_secs;
    let ok = pass && in_time;
    println!(
        "criterion {criterion:>2}: {} | {detail} | runtime {secs:.1}s (limit {limit_secs:.0}s)",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

pub struct Timed<T> {
    pub value: T,
    pub secs: f64,
}

fn timed<T>(f: impl FnOnce() -> T) -> Timed<T> {
    let t = Instant::now();
    let value = f();
    Timed { value, secs: t.elapsed().as_secs_f64() }
}

pub struct Replicate {
    pub train: Dataset,
    pub holdout: Dataset,
    pub design: VarianceDesign,
    pub homo_design: VarianceDesign,
    pub truth: Truth,
}

impl Replicate {
    pub fn holdout_design(&self) -> Mat<f64> {
        self.design.apply(&self.holdout).unwrap()
    }
}

fn recipe() -> Vec<VarianceSpec> {
    vec![VarianceSpec::new(DRIVER, Encoding::Identity)]
}

pub fn scenario(seed: u64, slope: f64) -> SimConfig {
    SimConfig {
        n: N_TRAIN + N_HOLDOUT,
        exposure_names: vec!["Pb".into(), "Hg".into(), "Mn".into(), "Cd".into()],
        correlation: Some((0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.3 }).collect()).collect()),
        covariates: vec![
            CovariateGen::Continuous { name: DRIVER.into(), mean: 0.0, sd: 1.0 },
            CovariateGen::Categorical {
                name: "sex".into(),
                levels: vec!["female".into(), "male".into()],
                probs: vec![0.5, 0.5],
            },
        ],
        beta: vec![0.5, -0.3],
        variance: recipe(),
        gamma: vec![-1.0, slope],
        tau: 0.25,
        r: vec![0.5, 0.25, 0.1, 0.05],
        seed,
        calibration: Some(metal_calibration()),
        outcome_name: "y".into(),
    }
}

fn replicate(seed: u64, slope: f64) -> Replicate {
    let sim = generate::<f64>(&scenario(seed, slope)).unwrap();
    let train_rows: Vec<usize> = (0..N_TRAIN).collect();
    let holdout_rows: Vec<usize> = (N_TRAIN..N_TRAIN + N_HOLDOUT).collect();
    let train = sim.data.subset(&train_rows).unwrap();
    let holdout = sim.data.subset(&holdout_rows).unwrap();
    let design = build_variance_design(&train, &recipe()).unwrap();
    Replicate { homo_design: VarianceDesign::intercept_only(N_TRAIN), train, holdout, design, truth: sim.truth }
}

pub fn het() -> &'static [Replicate] {
    static CELL: OnceLock<Vec<Replicate>> = OnceLock::new();
    CELL.get_or_init(|| (0..REPS as u64).map(|i| replicate(1000 + i, GAMMA_SLOPE)).collect())
}

pub fn homo() -> &'static [Replicate] {
    static CELL: OnceLock<Vec<Replicate>> = OnceLock::new();
    CELL.get_or_init(|| (0..REPS as u64).map(|i| replicate(2000 + i, 0.0)).collect())
}

/// Block updates of the kernel weights; see the README for the timing note.
pub fn mcmc(n_burn: usize, n_keep: usize, seed: u64) -> McmcConfig {
    McmcConfig { n_burn, n_keep, seed, r_update: RUpdate::Block, ..McmcConfig::default() }
}

pub const RECOVERY_CHAIN: (usize, usize) = (5_000, 20_000);
pub const COMPARISON_CHAIN: (usize, usize) = (2_000, 6_000);

fn fit_all(
    reps: &[Replicate],
    heteroscedastic: bool,
    chain: (usize, usize),
    prior: PriorSpec,
    seed: u64,
) -> Vec<PosteriorSamples> {
    reps.iter()
        .enumerate()
        .map(|(i, rep)| {
            let w = if heteroscedastic { &rep.design } else { &rep.homo_design };
            fit(&rep.train, w, &prior, &mcmc(chain.0, chain.1, seed + i as u64)).unwrap()
        })
        .collect()
}

/// HBKMR on heteroscedastic replicates at the recovery chain length.
pub fn hbkmr_het() -> &'static Timed<Vec<PosteriorSamples>> {
    static CELL: OnceLock<Timed<Vec<PosteriorSamples>>> = OnceLock::new();
    CELL.get_or_init(|| timed(|| fit_all(het(), true, RECOVERY_CHAIN, PriorSpec::default(), 10)))
}

pub fn bkmr_het() -> &'static Timed<Vec<PosteriorSamples>> {
    static CELL: OnceLock<Timed<Vec<PosteriorSamples>>> = OnceLock::new();
    CELL.get_or_init(|| timed(|| fit_all(het(), false, COMPARISON_CHAIN, PriorSpec::default(), 40)))
}

pub fn hbkmr_homo() -> &'static Timed<Vec<PosteriorSamples>> {
    static CELL: OnceLock<Timed<Vec<PosteriorSamples>>> = OnceLock::new();
    CELL.get_or_init(|| timed(|| fit_all(homo(), true, COMPARISON_CHAIN, PriorSpec::default(), 70)))
}

pub fn bkmr_homo() -> &'static Timed<Vec<PosteriorSamples>> {
    static CELL: OnceLock<Timed<Vec<PosteriorSamples>>> = OnceLock::new();
    CELL.get_or_init(|| timed(|| fit_all(homo(), false, COMPARISON_CHAIN, PriorSpec::default(), 100)))
}

pub const SENSITIVITY_REPS: usize = 10;

/// HBKMR refits under `r ~ Uniform(0, 5)` on the first heteroscedastic replicates.
pub fn hbkmr_uniform_r() -> &'static Timed<Vec<PosteriorSamples>> {
    static CELL: OnceLock<Timed<Vec<PosteriorSamples>>> = OnceLock::new();
    CELL.get_or_init(|| {
        timed(|| {
            let prior = PriorSpec { r_prior: RPrior::Uniform { upper: 5.0 }, ..PriorSpec::default() };
            fit_all(&het()[..SENSITIVITY_REPS], true, RECOVERY_CHAIN, prior, 10)
        })
    })
}

/// Joint-effect targets `0.10, 0.15, …, 0.90` without the base quantile.
pub fn joint_targets() -> Vec<f64> {
    (0..17).map(|i| 0.10 + 0.05 * i as f64).filter(|q| (q - 0.25f64).abs() > 1e-9).collect()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn quantile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Gaussian kernel assembled entry by entry.
pub fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let d: f64 = (0..r.len()).map(|m| r[m] * (a[(i, m)] - b[(j, m)]).powi(2)).sum();
        (-d).exp()
    })
}

pub fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `log N(y; mean, cov)` through a dense Cholesky.
pub fn mvn_log_density(y: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    let n = y.len();
    let chol = cov.clone().cholesky().expect("covariance is positive definite");
    let e = nalgebra::DVector::from_iterator(n, y.iter().zip(mean).map(|(a, b)| a - b));
    let sol = chol.solve(&e);
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + e.dot(&sol))
}
