//! Dense complex linear algebra used by every other module: solves, Hermitian
//! eigendecomposition, PSD square roots, singular values, operator norms and
//! Cayley transforms.

mod cayley;
mod eig;
mod matrix;
mod solve;
mod svd;

pub use cayley::{cayley_of_beta, cayley_of_theta};
pub use eig::{hermitian_eig, hermitian_eigenvalues, psd_sqrt, HermitianEig};
pub use matrix::{ComplexMatrix, SparseRows};
pub use solve::{solve_linear, solve_matrix, LuFactorization, StepSolver, TridiagonalFactorization};
pub use svd::{numerical_rank, operator_norm, orthonormal_columns, singular_values};

pub use num_complex::Complex64 as C64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Plain (unweighted) Hermitian inner product `sum a_k conj(b_k)`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(alpha: C64, a: &[C64]) -> Vec<C64> {
    a.iter().map(|x| alpha * x).collect()
}
