//! Discrete traces, the quadruple maps `G±`, the maximal operator and the
//! Green identity.
//!
//! Every quadruple used in the crate has the form `G± = X±·a + Y±·b` with `a`
//! the values at the interior nodes adjacent to the boundary and `b` the
//! boundary values, so the maps are stored as four `M × M` blocks.

use crate::error::{Error, Result};
use crate::grid::{interior_inner, Grid, Neighbor, Potential, StateVector};
use crate::numerics::{
    dot, norm, numerical_rank, solve_linear, ComplexMatrix, C64, I, ONE, ZERO,
};

const RANK_TOL: f64 = 1e-10;

/// Values on the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceVector {
    pub values: Vec<C64>,
}

impl From<Vec<C64>> for TraceVector {
    fn from(values: Vec<C64>) -> Self {
        Self { values }
    }
}

fn adjacent_values(grid: &Grid, interior: &[C64]) -> Vec<C64> {
    grid.adjacent_indices().into_iter().map(|k| interior[k]).collect()
}

/// `u = (ψ_b + ψ_adj) / 2`.
pub fn dirichlet_trace(grid: &Grid, psi: &StateVector) -> Result<TraceVector> {
    grid.check_state(psi)?;
    let a = adjacent_values(grid, &psi.interior);
    Ok(psi.boundary.iter().zip(&a).map(|(b, a)| (b + a) * 0.5).collect::<Vec<_>>().into())
}

/// Outward difference `d = (ψ_b − ψ_adj) / h`.
pub fn neumann_trace(grid: &Grid, psi: &StateVector) -> Result<TraceVector> {
    grid.check_state(psi)?;
    let a = adjacent_values(grid, &psi.interior);
    let h = grid.h();
    Ok(psi.boundary.iter().zip(&a).map(|(b, a)| (b - a) / h).collect::<Vec<_>>().into())
}

/// `G₊ = (u + i d) / √2`.
pub fn g_plus(grid: &Grid, psi: &StateVector) -> Result<TraceVector> {
    let u = dirichlet_trace(grid, psi)?.values;
    let d = neumann_trace(grid, psi)?.values;
    Ok(u.iter().zip(&d).map(|(u, d)| (u + I * d) * std::f64::consts::FRAC_1_SQRT_2).collect::<Vec<_>>().into())
}

/// `G₋ = (u − i d) / √2`.
pub fn g_minus(grid: &Grid, psi: &StateVector) -> Result<TraceVector> {
    let u = dirichlet_trace(grid, psi)?.values;
    let d = neumann_trace(grid, psi)?.values;
    Ok(u.iter().zip(&d).map(|(u, d)| (u - I * d) * std::f64::consts::FRAC_1_SQRT_2).collect::<Vec<_>>().into())
}

/// `(−Δ_h + V) ψ` at the interior nodes, reading boundary values where the stencil reaches them.
pub fn apply_maximal(grid: &Grid, potential: &Potential, psi: &StateVector) -> Result<Vec<C64>> {
    grid.check_state(psi)?;
    if potential.values.len() != grid.n_interior() {
        return Err(Error::SizeMismatch { expected: grid.n_interior(), found: potential.values.len() });
    }
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let centre = 2.0 * grid.dim() as f64 * inv_h2;
    Ok((0..grid.n_interior())
        .map(|k| {
            let mut acc = psi.interior[k] * (centre + potential.values[k]);
            for nb in grid.neighbors(k) {
                let v = match nb {
                    Neighbor::Interior(j) => psi.interior[j],
                    Neighbor::Boundary(m) => psi.boundary[m],
                };
                acc -= v * inv_h2;
            }
            acc
        })
        .collect())
}

/// Dense stencil matrix with zero boundary values, potential on the diagonal.
pub fn stencil_matrix(grid: &Grid, potential: &Potential) -> ComplexMatrix {
    let n = grid.n_interior();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let centre = 2.0 * grid.dim() as f64 * inv_h2;
    let mut l0 = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        l0[(k, k)] = C64::new(centre + potential.values[k], 0.0);
        for nb in grid.neighbors(k) {
            if let Neighbor::Interior(j) = nb {
                l0[(k, j)] = C64::new(-inv_h2, 0.0);
            }
        }
    }
    l0
}

/// Linear boundary maps `G± = X±·a + Y±·b` on a grid.
#[derive(Debug, Clone)]
pub struct QuadrupleMaps {
    grid: Grid,
    adjacent: Vec<usize>,
    pub x_plus: ComplexMatrix,
    pub y_plus: ComplexMatrix,
    pub x_minus: ComplexMatrix,
    pub y_minus: ComplexMatrix,
}

impl QuadrupleMaps {
    /// The u/d quadruple, checked for orientation.
    pub fn standard(grid: &Grid) -> Result<Self> {
        Self::standard_with_orientation(grid, false).check_orientation()
    }

    /// The u/d quadruple with `d` negated and no orientation check.
    /// Exists so verification suites can prove they detect a sign error.
    pub fn flipped_unchecked(grid: &Grid) -> Self {
        Self::standard_with_orientation(grid, true)
    }

    fn standard_with_orientation(grid: &Grid, flip: bool) -> Self {
        let m = grid.n_boundary();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let id = if flip { -I } else { I } / grid.h();
        // u ± i d with u = (a + b)/2 and d = (b - a)/h
        let xp = (ONE * 0.5 - id) * s;
        let yp = (ONE * 0.5 + id) * s;
        let xm = (ONE * 0.5 + id) * s;
        let ym = (ONE * 0.5 - id) * s;
        Self::from_blocks(
            grid,
            ComplexMatrix::scaled_identity(m, xp),
            ComplexMatrix::scaled_identity(m, yp),
            ComplexMatrix::scaled_identity(m, xm),
            ComplexMatrix::scaled_identity(m, ym),
        )
    }

    /// Wrap explicit blocks. No checks beyond shapes.
    pub fn from_blocks(
        grid: &Grid,
        x_plus: ComplexMatrix,
        y_plus: ComplexMatrix,
        x_minus: ComplexMatrix,
        y_minus: ComplexMatrix,
    ) -> Self {
        let m = grid.n_boundary();
        for blk in [&x_plus, &y_plus, &x_minus, &y_minus] {
            assert!(blk.rows() == m && blk.cols() == m, "quadruple block must be {m}x{m}");
        }
        Self { grid: grid.clone(), adjacent: grid.adjacent_indices(), x_plus, y_plus, x_minus, y_minus }
    }

    /// The constraint `G₊ψ = 0` must produce a strictly negative dissipation
    /// rate; a sign error in the pairing shows up as a positive one.
    pub fn check_orientation(self) -> Result<Self> {
        let grid = &self.grid;
        let n = grid.n_interior();
        let x: Vec<C64> = (0..n)
            .map(|k| {
                let t = k as f64;
                C64::new(1.0 + 0.5 * (0.9 * t).cos(), 0.25 + 0.4 * (1.7 * t + 0.2).sin())
            })
            .collect();
        let a = self.adjacent(&x);
        let rhs: Vec<C64> = self.x_plus.matvec(&a).into_iter().map(|z| -z).collect();
        let b = solve_linear(&self.y_plus, &rhs).map_err(|e| Error::Orientation(format!("cannot impose G+ = 0: {e}")))?;
        let psi = StateVector { interior: x, boundary: b };
        let hx = apply_maximal(grid, &Potential::zero(grid), &psi)?;
        let rate = 2.0 * interior_inner(grid, &hx, &psi.interior).im;
        let gm = self.g_minus(&psi.interior, &psi.boundary);
        let expected = -grid.boundary_weight() * norm(&gm).powi(2);
        if !(rate < 0.0) {
            return Err(Error::Orientation(format!(
                "full absorber gives dissipation rate {rate:.3e}, expected {expected:.3e}"
            )));
        }
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Interior values at the nodes adjacent to the boundary.
    pub fn adjacent(&self, interior: &[C64]) -> Vec<C64> {
        self.adjacent.iter().map(|&k| interior[k]).collect()
    }

    pub fn adjacent_indices(&self) -> &[usize] {
        &self.adjacent
    }

    /// `G₊` from interior and boundary values.
    pub fn g_plus(&self, interior: &[C64], boundary: &[C64]) -> Vec<C64> {
        let a = self.adjacent(interior);
        combine(&self.x_plus, &a, &self.y_plus, boundary)
    }

    pub fn g_minus(&self, interior: &[C64], boundary: &[C64]) -> Vec<C64> {
        let a = self.adjacent(interior);
        combine(&self.x_minus, &a, &self.y_minus, boundary)
    }

    /// Relative residual of
    /// `⟨−iĤ*ψ,φ⟩ + ⟨ψ,−iĤ*φ⟩ = ⟨G₊ψ,G₊φ⟩_∂ − ⟨G₋ψ,G₋φ⟩_∂`,
    /// scaled by the Cauchy–Schwarz bound of the four terms.
    pub fn green_identity_residual(&self, potential: &Potential, psi: &StateVector, phi: &StateVector) -> Result<f64> {
        let grid = &self.grid;
        let hpsi = apply_maximal(grid, potential, psi)?;
        let hphi = apply_maximal(grid, potential, phi)?;
        let lhs = -I * interior_inner(grid, &hpsi, &phi.interior) + I * interior_inner(grid, &psi.interior, &hphi);
        let gp_psi = self.g_plus(&psi.interior, &psi.boundary);
        let gp_phi = self.g_plus(&phi.interior, &phi.boundary);
        let gm_psi = self.g_minus(&psi.interior, &psi.boundary);
        let gm_phi = self.g_minus(&phi.interior, &phi.boundary);
        let w = grid.boundary_weight();
        let rhs = (dot(&gp_psi, &gp_phi) - dot(&gm_psi, &gm_phi)) * w;
        let scale = grid.interior_weight()
            * (norm(&hpsi) * norm(&phi.interior) + norm(&psi.interior) * norm(&hphi))
            + w * (norm(&gp_psi) * norm(&gp_phi) + norm(&gm_psi) * norm(&gm_phi));
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok((lhs - rhs).norm() / scale)
    }

    /// `2M × (N + M)` matrix of `ψ ↦ (G₊ψ, G₋ψ)` on full states.
    pub fn combined_matrix(&self) -> ComplexMatrix {
        let n = self.grid.n_interior();
        let m = self.grid.n_boundary();
        let mut out = ComplexMatrix::zeros(2 * m, n + m);
        for (row_off, x, y) in [(0, &self.x_plus, &self.y_plus), (m, &self.x_minus, &self.y_minus)] {
            for r in 0..m {
                for c in 0..m {
                    out[(row_off + r, self.adjacent[c])] += x[(r, c)];
                    out[(row_off + r, n + c)] = y[(r, c)];
                }
            }
        }
        out
    }

    /// Numerical rank of [`QuadrupleMaps::combined_matrix`].
    pub fn surjectivity_rank(&self) -> Result<usize> {
        numerical_rank(&self.combined_matrix(), RANK_TOL)
    }
}

fn combine(x: &ComplexMatrix, a: &[C64], y: &ComplexMatrix, b: &[C64]) -> Vec<C64> {
    let mut out = x.matvec(a);
    for (o, v) in out.iter_mut().zip(y.matvec(b)) {
        *o += v;
    }
    out
}

/// Green identity residual for the u/d quadruple.
pub fn green_identity_residual(grid: &Grid, potential: &Potential, psi: &StateVector, phi: &StateVector) -> Result<f64> {
    grid.check_state(psi)?;
    grid.check_state(phi)?;
    QuadrupleMaps::standard(grid)?.green_identity_residual(potential, psi, phi)
}

/// Rank of `(G₊, G₋)` for the u/d quadruple.
pub fn surjectivity_rank(grid: &Grid) -> Result<usize> {
    QuadrupleMaps::standard(grid)?.surjectivity_rank()
}

/// Dimension of `{ψ : (Ĥ* − λ)ψ = 0 in the interior, u = d = 0}`.
///
/// `u = d = 0` forces both boundary and adjacent values to vanish, so the
/// count is the nullity of `[L0 − λ; P]` acting on interior values.
pub fn minimal_kernel_dimension(grid: &Grid, potential: &Potential, lambda: C64) -> Result<usize> {
    let n = grid.n_interior();
    let mut shifted = stencil_matrix(grid, potential);
    for k in 0..n {
        shifted[(k, k)] -= lambda;
    }
    let mut p = ComplexMatrix::zeros(grid.n_boundary(), n);
    for (m, k) in grid.adjacent_indices().into_iter().enumerate() {
        p[(m, k)] = ONE;
    }
    let stacked = shifted.vstack(&p);
    Ok(n - numerical_rank(&stacked, RANK_TOL)?)
}

/// Zero trace vector of the right size.
pub fn zero_trace(grid: &Grid) -> TraceVector {
    vec![ZERO; grid.n_boundary()].into()
}
