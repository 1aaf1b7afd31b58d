//! Small descriptive-statistics helpers shared across modules.

use crate::Real;

pub fn mean<T: Real>(v: &[T]) -> T {
    if v.is_empty() {
        return T::nan();
    }
    v.iter().fold(T::zero(), |a, &x| a + x) / T::of_usize(v.len())
}

/// Sample variance with an `n - 1` denominator; zero for fewer than two values.
pub fn sample_variance<T: Real>(v: &[T]) -> T {
    let n = v.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(v);
    v.iter().fold(T::zero(), |a, &x| a + (x - m) * (x - m)) / T::of_usize(n - 1)
}

pub fn sample_sd<T: Real>(v: &[T]) -> T {
    sample_variance(v).sqrt()
}

/// Numerically stable `ln Σ exp(xᵢ)`.
pub fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let s = v.iter().fold(T::zero(), |a, &x| a + (x - max).exp());
    max + s.ln()
}

/// Ranks starting at 1, ties receiving the average of their positions.
pub fn average_ranks<T: Real>(v: &[T]) -> Vec<T> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1..=j)
        let r = T::lit((i + 1 + j) as f64 / 2.0);
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

pub fn pearson<T: Real>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = T::zero();
    let mut saa = T::zero();
    let mut sbb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        sab = sab + (x - ma) * (y - mb);
        saa = saa + (x - ma) * (x - ma);
        sbb = sbb + (y - mb) * (y - mb);
    }
    if saa == T::zero() || sbb == T::zero() {
        return T::zero();
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman<T: Real>(a: &[T], b: &[T]) -> T {
    pearson(&average_ranks(a), &average_ranks(b))
}
