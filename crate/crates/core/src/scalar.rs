//! Scalar abstraction shared by every numerical module.
//!
//! All algebra, quadrature and propagation code is written against [`Real`]
//! so the same kernels run in `f32` (cheap previews) and `f64` (reference
//! runs). The only place that needs a concrete type is the dense symmetric
//! eigensolver, which is forwarded to `nalgebra` per implementation.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real floating-point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Eigen-decomposition of a dense real symmetric matrix given in
    /// row-major order. Returns eigenvalues in ascending order and the
    /// matching orthonormal eigenvectors as the columns of a row-major matrix.
    fn symmetric_eigen(matrix: &[Self], dim: usize) -> (Vec<Self>, Vec<Self>);

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn symmetric_eigen(matrix: &[$t], dim: usize) -> (Vec<$t>, Vec<$t>) {
                assert_eq!(matrix.len(), dim * dim, "matrix must be dim x dim");
                let m = DMatrix::<$t>::from_row_slice(dim, dim, matrix);
                let eig = m.symmetric_eigen();
                let mut order: Vec<usize> = (0..dim).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
                let mut vectors = vec![0.0; dim * dim];
                for (col, &k) in order.iter().enumerate() {
                    for row in 0..dim {
                        vectors[row * dim + col] = eig.eigenvectors[(row, k)];
                    }
                }
                (values, vectors)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Purely imaginary complex number `i * x`.
#[inline]
pub(crate) fn imag<T: Real>(x: T) -> Complex<T> {
    Complex::new(T::zero(), x)
}

/// `exp(i * phase)`.
#[inline]
pub(crate) fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}
