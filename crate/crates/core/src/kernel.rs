//! Gaussian kernel `K(zᵢ, zⱼ) = exp(-Σₘ rₘ (zᵢₘ - zⱼₘ)²)` and the Cholesky
//! factor of the marginal covariance `τK + S`.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg;
use crate::Real;

pub fn kernel_entry<T: Real>(zi: &[T], zj: &[T], r: &[T]) -> Result<T> {
    if zi.len() != zj.len() {
        return Err(Error::dims("kernel arguments", zi.len(), zj.len()));
    }
    if r.len() != zi.len() {
        return Err(Error::dims("kernel weights", zi.len(), r.len()));
    }
    let d = zi
        .iter()
        .zip(zj)
        .zip(r)
        .fold(T::zero(), |acc, ((&a, &b), &w)| acc + w * (a - b) * (a - b));
    Ok((-d).exp())
}

/// Cross-kernel between the rows of `za` (`n_a × M`) and `zb` (`n_b × M`).
pub fn kernel_matrix<T: Real>(za: MatRef<'_, T>, zb: MatRef<'_, T>, r: &[T]) -> Result<Mat<T>> {
    if za.ncols() != zb.ncols() {
        return Err(Error::dims("kernel exposure columns", za.ncols(), zb.ncols()));
    }
    if r.len() != za.ncols() {
        return Err(Error::dims("kernel weights", za.ncols(), r.len()));
    }
    let m = za.ncols();
    Ok(Mat::from_fn(za.nrows(), zb.nrows(), |i, j| {
        let mut d = T::zero();
        for k in 0..m {
            let diff = za[(i, k)] - zb[(j, k)];
            d = d + r[k] * diff * diff;
        }
        (-d).exp()
    }))
}

/// Symmetric kernel matrix over one exposure matrix, with its weights.
#[derive(Debug, Clone)]
pub struct KernelMatrix<T> {
    k: Mat<T>,
    r: Vec<T>,
}

impl<T: Real> KernelMatrix<T> {
    pub fn new(z: MatRef<'_, T>, r: &[T]) -> Result<Self> {
        PairwiseDistances::new(z).kernel(r)
    }

    /// Wraps an explicit symmetric matrix (used by tests and oracles).
    pub fn from_matrix(k: Mat<T>, r: Vec<T>) -> Result<Self> {
        if k.nrows() != k.ncols() {
            return Err(Error::dims("kernel matrix columns", k.nrows(), k.ncols()));
        }
        Ok(KernelMatrix { k, r })
    }

    pub fn matrix(&self) -> MatRef<'_, T> {
        self.k.as_ref()
    }

    pub fn weights(&self) -> &[T] {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }
}

/// Per-coordinate squared differences for every pair `i > j`, cached so that
/// rebuilding `K` for new weights costs one exponential per pair.
#[derive(Debug, Clone)]
pub struct PairwiseDistances<T> {
    n: usize,
    // one packed strict lower triangle per exposure, columns top to bottom
    sq: Vec<Vec<T>>,
}

/// Strict lower triangle of `K` in packed column order, with its logarithm.
#[derive(Debug, Clone)]
pub(crate) struct PackedKernel<T> {
    n: usize,
    log_k: Vec<T>,
    k: Vec<T>,
}

impl<T: Real> PackedKernel<T> {
    fn from_log(n: usize, log_k: Vec<T>) -> Self {
        let mut k = log_k.clone();
        T::exp_nonpos_in_place(&mut k);
        PackedKernel { n, log_k, k }
    }

    fn column(&self, j: usize) -> &[T] {
        let start = j * self.n - j * (j + 1) / 2;
        &self.k[start..start + self.n - j - 1]
    }
}

impl<T: Real> PairwiseDistances<T> {
    pub fn new(z: MatRef<'_, T>) -> Self {
        let n = z.nrows();
        let sq = (0..z.ncols())
            .map(|k| {
                let mut v = Vec::with_capacity(n * n.saturating_sub(1) / 2);
                for j in 0..n {
                    for i in j + 1..n {
                        let d = z[(i, k)] - z[(j, k)];
                        v.push(d * d);
                    }
                }
                v
            })
            .collect();
        PairwiseDistances { n, sq }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn packed(&self, r: &[T]) -> Result<PackedKernel<T>> {
        if r.len() != self.sq.len() {
            return Err(Error::dims("kernel weights", self.sq.len(), r.len()));
        }
        let mut log_k = vec![T::zero(); self.n * self.n.saturating_sub(1) / 2];
        for (d, &w) in self.sq.iter().zip(r) {
            for (l, &v) in log_k.iter_mut().zip(d) {
                *l = *l - w * v;
            }
        }
        Ok(PackedKernel::from_log(self.n, log_k))
    }

    /// Kernel after changing weight `m` by `delta`.
    pub(crate) fn shifted(&self, base: &PackedKernel<T>, m: usize, delta: T) -> PackedKernel<T> {
        let log_k = base.log_k.iter().zip(&self.sq[m]).map(|(&l, &v)| l - delta * v).collect();
        PackedKernel::from_log(self.n, log_k)
    }

    pub fn kernel(&self, r: &[T]) -> Result<KernelMatrix<T>> {
        let packed = self.packed(r)?;
        let n = self.n;
        let mut k = Mat::<T>::zeros(n, n);
        for j in 0..n {
            let col = k.col_mut(j).try_as_col_major_mut().expect("owned matrix is column-major").as_slice_mut();
            col[j] = T::one();
            col[j + 1..].copy_from_slice(packed.column(j));
        }
        // mirror the lower triangle in cache-sized tiles
        const TILE: usize = 32;
        for jb in (0..n).step_by(TILE) {
            for ib in (jb..n).step_by(TILE) {
                for j in jb..(jb + TILE).min(n) {
                    for i in ib.max(j + 1)..(ib + TILE).min(n) {
                        k[(j, i)] = k[(i, j)];
                    }
                }
            }
        }
        Ok(KernelMatrix { k, r: r.to_vec() })
    }
}

/// Cholesky factor of `V = τK + diag(s)` with its log-determinant.
#[derive(Debug, Clone)]
pub struct CovFactor<T> {
    // lower triangle holds L; strict upper triangle is scratch
    l: Mat<T>,
    log_det: T,
    jitter: T,
}

impl<T: Real> CovFactor<T> {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// Diagonal jitter that was needed for the factorization (zero normally).
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Lower-triangular factor as an owned matrix with zeros above the diagonal.
    pub fn lower(&self) -> Mat<T> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| if j <= i { self.l[(i, j)] } else { T::zero() })
    }

    /// `L⁻¹ b`.
    pub fn half_solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        linalg::solve_lower_vec(self.l.as_ref(), &mut x);
        x
    }

    /// `V⁻¹ b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = self.half_solve(b);
        linalg::solve_lower_transpose_vec(self.l.as_ref(), &mut x);
        x
    }

    /// `L⁻¹ B` for a matrix right-hand side.
    pub fn half_solve_mat(&self, b: MatRef<'_, T>) -> Mat<T> {
        let mut x = b.to_owned();
        linalg::solve_lower(self.l.as_ref(), x.as_mut());
        x
    }

    /// `V⁻¹ B` for a matrix right-hand side.
    pub fn solve_mat(&self, b: MatRef<'_, T>) -> Mat<T> {
        let mut x = self.half_solve_mat(b);
        linalg::solve_lower_transpose(self.l.as_ref(), x.as_mut());
        x
    }

    /// `bᵀ V⁻¹ b`.
    pub fn quad_form(&self, b: &[T]) -> T {
        let h = self.half_solve(b);
        linalg::dot(&h, &h)
    }
}

/// Factors `τK + diag(s)`. On failure retries once with `1e-10·tr(V)/N` added
/// to the diagonal.
pub fn factor_cov<T: Real>(k: &KernelMatrix<T>, tau: T, s_diag: &[T]) -> Result<CovFactor<T>> {
    let n = k.dim();
    factor_columns(n, tau, s_diag, |j| {
        let col = k.k.col(j);
        (col[j], (j + 1..n).map(move |i| col[i]))
    })
}

pub(crate) fn factor_packed<T: Real>(k: &PackedKernel<T>, tau: T, s_diag: &[T]) -> Result<CovFactor<T>> {
    factor_columns(k.n, tau, s_diag, |j| (T::one(), k.column(j).iter().copied()))
}

fn factor_columns<T: Real, I: Iterator<Item = T>>(
    n: usize,
    tau: T,
    s_diag: &[T],
    column: impl Fn(usize) -> (T, I),
) -> Result<CovFactor<T>> {
    if s_diag.len() != n {
        return Err(Error::dims("variance diagonal", n, s_diag.len()));
    }
    if s_diag.iter().any(|&s| !(s > T::zero())) {
        return Err(Error::InvalidArgument("variance diagonal must be strictly positive".into()));
    }
    if !(tau >= T::zero()) {
        return Err(Error::InvalidArgument(format!("tau must be nonnegative, got {tau}")));
    }
    let build = |extra: T| {
        let mut v = Mat::<T>::zeros(n, n);
        for j in 0..n {
            let (diag, rest) = column(j);
            let col = v.col_mut(j).try_as_col_major_mut().expect("owned matrix is column-major").as_slice_mut();
            col[j] = tau * diag + s_diag[j] + extra;
            for (c, kv) in col[j + 1..].iter_mut().zip(rest) {
                *c = tau * kv;
            }
        }
        v
    };
    let mut v = build(T::zero());
    if linalg::cholesky_in_place(v.as_mut()) {
        return Ok(finish(v, T::zero()));
    }
    let trace = (0..n).fold(T::zero(), |a, j| a + tau * column(j).0 + s_diag[j]);
    let jitter = T::lit(1e-10) * trace / T::of_usize(n);
    let mut v = build(jitter);
    if linalg::cholesky_in_place(v.as_mut()) {
        log::debug!("covariance factorization needed jitter {jitter}");
        return Ok(finish(v, jitter));
    }
    Err(Error::NotPositiveDefinite { jitter: jitter.as_f64() })
}

fn finish<T: Real>(l: Mat<T>, jitter: T) -> CovFactor<T> {
    let log_det = (0..l.nrows()).fold(T::zero(), |a, i| a + l[(i, i)].ln()) * T::lit(2.0);
    CovFactor { l, log_det, jitter }
}
