//! Thin helpers over faer's dense kernels.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor;
use faer::linalg::triangular_solve;
use faer::{Mat, MatMut, MatRef, Par};

use crate::Real;

/// Overwrites the lower triangle of `a` with its Cholesky factor.
///
/// Only the lower triangle is read; the strict upper triangle is left
/// untouched and must be ignored by callers. Returns `false` when `a` is not
/// numerically positive definite.
pub(crate) fn cholesky_in_place<T: Real>(a: MatMut<'_, T>) -> bool {
    let n = a.nrows();
    let mut mem = MemBuffer::new(factor::cholesky_in_place_scratch::<T>(
        n,
        Par::Seq,
        Default::default(),
    ));
    let stack = MemStack::new(&mut mem);
    factor::cholesky_in_place(a, Default::default(), Par::Seq, stack, Default::default()).is_ok()
}

/// Solves `L x = b` in place, reading only the lower triangle of `l`.
pub(crate) fn solve_lower<T: Real>(l: MatRef<'_, T>, rhs: MatMut<'_, T>) {
    triangular_solve::solve_lower_triangular_in_place(l, rhs, Par::Seq);
}

/// Solves `Lᵀ x = b` in place, reading only the lower triangle of `l`.
pub(crate) fn solve_lower_transpose<T: Real>(l: MatRef<'_, T>, rhs: MatMut<'_, T>) {
    triangular_solve::solve_upper_triangular_in_place(l.transpose(), rhs, Par::Seq);
}

/// Solves `L x = b` for a single right-hand side stored in a slice.
pub(crate) fn solve_lower_vec<T: Real>(l: MatRef<'_, T>, b: &mut [T]) {
    let col = faer::ColMut::from_slice_mut(b);
    solve_lower(l, col.as_mat_mut());
}

pub(crate) fn solve_lower_transpose_vec<T: Real>(l: MatRef<'_, T>, b: &mut [T]) {
    let col = faer::ColMut::from_slice_mut(b);
    solve_lower_transpose(l, col.as_mat_mut());
}

/// `Aᵀ B` for column-major matrices with matching row counts.
pub(crate) fn at_b<T: Real>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Mat<T> {
    let mut out = Mat::<T>::zeros(a.ncols(), b.ncols());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        faer::Accum::Replace,
        a.transpose(),
        b,
        T::one(),
        Par::Seq,
    );
    out
}

/// `A x` for a dense matrix and slice vector.
pub(crate) fn mat_vec<T: Real>(a: MatRef<'_, T>, x: &[T]) -> Vec<T> {
    assert_eq!(a.ncols(), x.len());
    let mut out = vec![T::zero(); a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == T::zero() {
            continue;
        }
        let col = a.col(j);
        for (o, &aij) in out.iter_mut().zip(col.iter()) {
            *o = *o + aij * xj;
        }
    }
    out
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn symmetric_min_eigenvalue<T: Real>(a: MatRef<'_, T>) -> Option<T> {
    let vals = a.self_adjoint_eigenvalues(faer::Side::Lower).ok()?;
    vals.into_iter().reduce(|x, y| if y < x { y } else { x })
}

/// Copies column `j` of `a` into a vector.
pub fn col_vec<T: Real>(a: MatRef<'_, T>, j: usize) -> Vec<T> {
    a.col(j).iter().copied().collect()
}
