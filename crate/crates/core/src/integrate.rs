//! Fixed-step explicit integrators over small state vectors.

use crate::scalar::Scalar;

/// One classical fourth-order Runge-Kutta step of `y' = f(y)` for an autonomous system.
///
/// The right-hand side may change between steps (piecewise-constant inputs) but is held fixed
/// for the four stages of one step.
#[inline]
pub fn rk4_step<T, const N: usize, F>(y: &[T; N], h: T, mut f: F) -> [T; N]
where
    T: Scalar,
    F: FnMut(&[T; N]) -> [T; N],
{
    let half = T::lit(0.5) * h;
    let k1 = f(y);
    let k2 = f(&axpy(y, half, &k1));
    let k3 = f(&axpy(y, half, &k2));
    let k4 = f(&axpy(y, h, &k3));
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = *y;
    for i in 0..N {
        out[i] += sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
    out
}

/// One explicit Euler step.
#[inline]
pub fn euler_step<T, const N: usize, F>(y: &[T; N], h: T, mut f: F) -> [T; N]
where
    T: Scalar,
    F: FnMut(&[T; N]) -> [T; N],
{
    axpy(y, h, &f(y))
}

#[inline(always)]
fn axpy<T: Scalar, const N: usize>(y: &[T; N], a: T, k: &[T; N]) -> [T; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}
