use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Floating-point element type of a [`Matrix`](crate::Matrix).
pub trait Real: Float + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Name used in serialized artifacts.
    const NAME: &'static str;

    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Writes the `m×n` product of an `m×k` matrix `a` and a `k×n` matrix `b`
    /// into row-major `c`. Element `(i, j)` of `a` is `a[i * sa.0 + j * sa.1]`,
    /// likewise for `b`.
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], sa: (usize, usize), b: &[Self], sb: (usize, usize), c: &mut [Self]);
}

fn check_gemm<T>(m: usize, k: usize, n: usize, a: &[T], sa: (usize, usize), b: &[T], sb: (usize, usize), c: &[T]) {
    let last = |rows: usize, cols: usize, s: (usize, usize)| (rows.saturating_sub(1)) * s.0 + cols.saturating_sub(1) * s.1;
    assert!(m * k == 0 || last(m, k, sa) < a.len(), "gemm: lhs out of bounds");
    assert!(k * n == 0 || last(k, n, sb) < b.len(), "gemm: rhs out of bounds");
    assert!(c.len() == m * n, "gemm: output length");
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    fn gemm(m: usize, k: usize, n: usize, a: &[Self], sa: (usize, usize), b: &[Self], sb: (usize, usize), c: &mut [Self]) {
        check_gemm(m, k, n, a, sa, b, sb, c);
        // SAFETY: every index touched is in bounds per check_gemm.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                sa.0 as isize,
                sa.1 as isize,
                b.as_ptr(),
                sb.0 as isize,
                sb.1 as isize,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn gemm(m: usize, k: usize, n: usize, a: &[Self], sa: (usize, usize), b: &[Self], sb: (usize, usize), c: &mut [Self]) {
        check_gemm(m, k, n, a, sa, b, sb, c);
        // SAFETY: every index touched is in bounds per check_gemm.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                sa.0 as isize,
                sa.1 as isize,
                b.as_ptr(),
                sb.0 as isize,
                sb.1 as isize,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}
