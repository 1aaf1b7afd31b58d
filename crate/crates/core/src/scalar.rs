use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numerical core is written against.
///
/// Arithmetic and transcendental functions come from [`num_traits::Float`];
/// the [`faer::traits::RealField`] bound lets the same type flow through the
/// dense factorizations. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + faer::traits::RealField
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or intermediate into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("Real converts to f64")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }

    /// Replaces each nonpositive entry `x` by `exp(x)`.
    fn exp_nonpos_in_place(v: &mut [Self]) {
        for x in v.iter_mut() {
            *x = x.exp();
        }
    }
}

impl Real for f32 {}
impl Real for f64 {
    fn exp_nonpos_in_place(v: &mut [Self]) {
        fastexp::exp_nonpos_slice(v)
    }
}

/// `0.5 * ln(2π)`.
pub(crate) fn half_ln_2pi<T: Real>() -> T {
    T::lit(0.918_938_533_204_672_7)
}

pub(crate) mod fastexp {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // 1.5·2⁵²: adding it rounds to the nearest integer in the low mantissa bits
    const SHIFT: f64 = 6_755_399_441_055_744.0;

    /// `exp(x)` for `x ≤ 0`; exact zero below -708.
    #[inline(always)]
    pub(crate) fn exp_nonpos(x: f64) -> f64 {
        let xc = if x < -708.0 { -708.0 } else { x };
        let t = xc * LOG2E + SHIFT;
        let k = t - SHIFT;
        let r = xc - k * LN2_HI - k * LN2_LO;
        let mut p = 1.0 / 479_001_600.0;
        p = p * r + 1.0 / 39_916_800.0;
        p = p * r + 1.0 / 3_628_800.0;
        p = p * r + 1.0 / 362_880.0;
        p = p * r + 1.0 / 40_320.0;
        p = p * r + 1.0 / 5_040.0;
        p = p * r + 1.0 / 720.0;
        p = p * r + 1.0 / 120.0;
        p = p * r + 1.0 / 24.0;
        p = p * r + 1.0 / 6.0;
        p = p * r + 0.5;
        p = p * r + 1.0;
        p = p * r + 1.0;
        let ki = (t.to_bits() as i64).wrapping_sub(SHIFT.to_bits() as i64);
        let scale = f64::from_bits(((ki + 1023) as u64) << 52);
        let v = p * scale;
        if x < -708.0 {
            0.0
        } else {
            v
        }
    }

    #[inline(always)]
    fn exp_slice_body(v: &mut [f64]) {
        for x in v.iter_mut() {
            *x = exp_nonpos(*x);
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    fn exp_slice_avx2(v: &mut [f64]) {
        exp_slice_body(v)
    }

    pub(crate) fn exp_nonpos_slice(v: &mut [f64]) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were detected above
            unsafe { exp_slice_avx2(v) };
            return;
        }
        exp_slice_body(v)
    }

}
