use super::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-14;

fn inf_norm(a: &ComplexMatrix) -> f64 {
    (0..a.rows())
        .map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
    scale: f64,
}

impl LuFactorization {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        if let Some(index) = a.as_slice().iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFiniteEntry { index });
        }
        let n = a.rows();
        let scale = inf_norm(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmag <= PIVOT_TOL * scale || pmag == 0.0 {
                return Err(Error::SingularMatrix { pivot: pmag, scale });
            }
            min_pivot = min_pivot.min(pmag);
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            let (top, bottom) = lu.split_at_row_mut(k);
            for i in 0..bottom.len() / n {
                let row = &mut bottom[i * n..(i + 1) * n];
                let factor = row[k] / pivot;
                if factor == ZERO {
                    continue;
                }
                row[k] = factor;
                for j in k + 1..n {
                    row[j] -= factor * top[j];
                }
            }
        }
        Ok(Self { lu, perm, min_pivot, scale })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Smallest pivot magnitude relative to the infinity norm of the input.
    pub fn relative_min_pivot(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.min_pivot / self.scale
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "LU solve dimension mismatch");
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in 0..i {
                acc -= row[j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
        x
    }

    pub fn solve_matrix(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let cols: Vec<Vec<C64>> = (0..b.cols()).map(|j| self.solve(&b.column(j))).collect();
        ComplexMatrix::from_columns(self.dim(), &cols)
    }
}

/// Thomas recursion for tridiagonal systems, factored once and reused.
#[derive(Debug, Clone)]
pub struct TridiagonalFactorization {
    lower: Vec<C64>,
    // modified diagonal and upper coefficients after elimination
    diag: Vec<C64>,
    upper: Vec<C64>,
}

impl TridiagonalFactorization {
    /// `lower[i]` couples rows `i+1 -> i`, `upper[i]` couples `i -> i+1`.
    pub fn new(lower: &[C64], diag: &[C64], upper: &[C64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() + 1 != n.max(1) || upper.len() + 1 != n.max(1) {
            return Err(Error::DimensionMismatch { expected: n.saturating_sub(1), found: lower.len() });
        }
        let scale = (0..n)
            .map(|i| {
                diag[i].norm()
                    + if i > 0 { lower[i - 1].norm() } else { 0.0 }
                    + if i + 1 < n { upper[i].norm() } else { 0.0 }
            })
            .fold(0.0, f64::max);
        let mut d = diag.to_vec();
        for i in 1..n {
            if d[i - 1].norm() <= PIVOT_TOL * scale {
                return Err(Error::SingularMatrix { pivot: d[i - 1].norm(), scale });
            }
            let m = lower[i - 1] / d[i - 1];
            d[i] -= m * upper[i - 1];
        }
        if n > 0 && d[n - 1].norm() <= PIVOT_TOL * scale {
            return Err(Error::SingularMatrix { pivot: d[n - 1].norm(), scale });
        }
        Ok(Self { lower: lower.to_vec(), diag: d, upper: upper.to_vec() })
    }

    pub fn from_matrix(a: &ComplexMatrix) -> Result<Self> {
        let n = a.rows();
        let lower: Vec<C64> = (1..n).map(|i| a[(i, i - 1)]).collect();
        let upper: Vec<C64> = (1..n).map(|i| a[(i - 1, i)]).collect();
        Self::new(&lower, &a.diagonal(), &upper)
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.diag.len();
        assert_eq!(b.len(), n, "tridiagonal solve dimension mismatch");
        let mut y = b.to_vec();
        for i in 1..n {
            let m = self.lower[i - 1] / self.diag[i - 1];
            let prev = y[i - 1];
            y[i] -= m * prev;
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                let next = y[i + 1];
                y[i] -= self.upper[i] * next;
            }
            y[i] /= self.diag[i];
        }
        y
    }
}

/// Cached solver for a fixed matrix: Thomas recursion when the matrix is
/// tridiagonal, pivoted LU otherwise.
#[derive(Debug, Clone)]
pub enum StepSolver {
    Tridiagonal(TridiagonalFactorization),
    Dense(LuFactorization),
}

impl StepSolver {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        if a.is_tridiagonal() {
            if let Ok(t) = TridiagonalFactorization::from_matrix(a) {
                return Ok(StepSolver::Tridiagonal(t));
            }
        }
        LuFactorization::new(a).map(StepSolver::Dense)
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        match self {
            StepSolver::Tridiagonal(t) => t.solve(b),
            StepSolver::Dense(lu) => lu.solve(b),
        }
    }

    pub fn is_tridiagonal(&self) -> bool {
        matches!(self, StepSolver::Tridiagonal(_))
    }
}

/// Solve `A x = b`.
pub fn solve_linear(a: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.len() });
    }
    Ok(StepSolver::new(a)?.solve(b))
}

/// Solve `A X = B` column by column.
pub fn solve_matrix(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if b.rows() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.rows() });
    }
    Ok(LuFactorization::new(a)?.solve_matrix(b))
}
