use super::{solve_matrix, ComplexMatrix, I};
use crate::error::{Error, Result};

/// `(1 - B)(1 + B)^{-1}`, a contraction whenever `B` is accretive.
///
/// Evaluated as `(1 + B)^{-1}(1 - B)`; both factors are functions of `B` and commute.
pub fn cayley_of_beta(b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = b.rows();
    let id = ComplexMatrix::identity(n);
    let plus = &id + b;
    let minus = &id - b;
    solve_matrix(&plus, &minus).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularCayley,
        other => other,
    })
}

/// `(i + Θ)(i - Θ)^{-1}`, unitary for Hermitian `Θ`.
pub fn cayley_of_theta(theta: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = theta.rows();
    let i_id = ComplexMatrix::scaled_identity(n, I);
    let plus = &i_id + theta;
    let minus = &i_id - theta;
    solve_matrix(&minus, &plus).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularCayley,
        other => other,
    })
}
