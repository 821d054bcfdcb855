//! Dirichlet operator, harmonic extension, Dirichlet-to-Neumann map and the
//! η-shifted quadruple in which Neumann, Krein-type and Robin extensions arise
//! as Cayley transforms of boundary operators.
//!
//! With `H_D = L0 + PᵀP/h²` (the `u = 0` extension) and
//! `K(λ) = P (H_D − λ)⁻¹ Pᵀ`, the harmonic extension of boundary data `ξ` is
//! `x = (2/h²)(H_D − λ)⁻¹ Pᵀ ξ`, `b = 2ξ − P x`, and
//! `D(λ) = (2/h)(1 − (2/h²) K(λ))`.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::extensions::{build_extension_in, validate_beta, validate_contraction, Beta, GeneratorExtension};
use crate::grid::{interior_inner, Grid, Potential, StateVector};
use crate::numerics::{
    cayley_of_theta, dot, hermitian_eig, norm, singular_values, solve_linear, ComplexMatrix, LuFactorization, C64, I,
    ONE, ZERO,
};
use crate::quadruple::{apply_maximal, dirichlet_trace, stencil_matrix, QuadrupleMaps};

/// Required gap between η and the Dirichlet and Neumann spectra.
pub const ETA_MIN_DISTANCE: f64 = 0.5;
const RESONANCE_PIVOT: f64 = 1e-12;

/// `H_D = L0 + PᵀP/h²`, Hermitian.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    pub matrix: ComplexMatrix,
    grid: Grid,
    adjacent: Vec<usize>,
}

impl DirichletOperator {
    pub fn new(grid: &Grid, potential: &Potential) -> Result<Self> {
        grid_potential_check(grid, potential)?;
        let mut matrix = stencil_matrix(grid, potential);
        let adjacent = grid.adjacent_indices();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        for &k in &adjacent {
            matrix[(k, k)] += inv_h2;
        }
        Ok(Self { matrix, grid: grid.clone(), adjacent })
    }

    /// Factor `H_D − λ`.
    pub fn resolvent(&self, lambda: f64) -> Result<Resolvent> {
        let mut shifted = self.matrix.clone();
        for k in 0..shifted.rows() {
            shifted[(k, k)] -= lambda;
        }
        let lu = LuFactorization::new(&shifted).map_err(|_| Error::ResonantLambda { lambda })?;
        if lu.relative_min_pivot() < RESONANCE_PIVOT {
            return Err(Error::ResonantLambda { lambda });
        }
        Ok(Resolvent { lu, grid: self.grid.clone(), adjacent: self.adjacent.clone(), lambda })
    }
}

fn grid_potential_check(grid: &Grid, potential: &Potential) -> Result<()> {
    if potential.values.len() != grid.n_interior() {
        return Err(Error::SizeMismatch { expected: grid.n_interior(), found: potential.values.len() });
    }
    Ok(())
}

/// Factored `(H_D − λ)`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    lu: LuFactorization,
    grid: Grid,
    adjacent: Vec<usize>,
    lambda: f64,
}

impl Resolvent {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        self.lu.solve(rhs)
    }

    /// `(H_D − λ)⁻¹ φ` with the `u = 0` boundary values `b = −P x`.
    pub fn dirichlet_solution(&self, phi: &[C64]) -> StateVector {
        let x = self.solve(phi);
        let boundary = self.adjacent.iter().map(|&k| -x[k]).collect();
        StateVector { interior: x, boundary }
    }

    /// State with `u = ξ` solving `(Ĥ* − λ)ψ = 0` in the interior.
    pub fn harmonic(&self, xi: &[C64]) -> StateVector {
        let n = self.grid.n_interior();
        let scale = 2.0 / (self.grid.h() * self.grid.h());
        let mut rhs = vec![ZERO; n];
        for (m, &k) in self.adjacent.iter().enumerate() {
            rhs[k] += xi[m] * scale;
        }
        let x = self.solve(&rhs);
        let boundary = self.adjacent.iter().zip(xi).map(|(&k, xi)| xi * 2.0 - x[k]).collect();
        StateVector { interior: x, boundary }
    }

    /// `K = P (H_D − λ)⁻¹ Pᵀ`, one solve per boundary node.
    pub fn boundary_gram(&self, exec: Execution) -> ComplexMatrix {
        let n = self.grid.n_interior();
        let m = self.adjacent.len();
        let cols: Vec<Vec<C64>> = exec.map(m, |j| {
            let mut rhs = vec![ZERO; n];
            rhs[self.adjacent[j]] = ONE;
            let x = self.solve(&rhs);
            self.adjacent.iter().map(|&k| x[k]).collect()
        });
        ComplexMatrix::from_columns(m, &cols)
    }
}

/// Lower bound on the Dirichlet and Neumann spectra from Gershgorin discs.
fn gershgorin_floor(grid: &Grid, potential: &Potential) -> f64 {
    // Each row of either matrix has diagonal minus off-diagonal mass equal to V_k
    // (Dirichlet adds 1/h² at boundary-adjacent nodes, Neumann removes the missing arm).
    let _ = grid;
    potential.values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Distance from `eta` to the union of the Dirichlet and Neumann spectra,
/// or a certified lower bound when Gershgorin already separates them.
pub fn spectral_distance(grid: &Grid, potential: &Potential, eta: f64) -> Result<f64> {
    grid_potential_check(grid, potential)?;
    let floor = gershgorin_floor(grid, potential);
    if floor - eta >= ETA_MIN_DISTANCE {
        return Ok(floor - eta);
    }
    let dir = DirichletOperator::new(grid, potential)?.matrix;
    let neu = crate::extensions::neumann(grid, potential)?;
    let mut best = f64::INFINITY;
    for m in [&dir, neu.interior_matrix()] {
        for l in hermitian_eig(m)?.eigenvalues {
            best = best.min((l - eta).abs());
        }
    }
    Ok(best)
}

/// `η = −(1 + sup|V|) − 1`, checked against both spectra.
pub fn choose_eta(grid: &Grid, potential: &Potential) -> Result<f64> {
    let eta = -(1.0 + potential.sup_norm) - 1.0;
    validate_eta(grid, potential, eta)?;
    Ok(eta)
}

pub fn validate_eta(grid: &Grid, potential: &Potential, eta: f64) -> Result<()> {
    let distance = spectral_distance(grid, potential, eta)?;
    if distance < ETA_MIN_DISTANCE {
        return Err(Error::EtaTooClose { eta, distance });
    }
    Ok(())
}

pub fn harmonic_extension(grid: &Grid, potential: &Potential, lambda: f64, xi: &[C64]) -> Result<StateVector> {
    grid.check_boundary(xi)?;
    Ok(DirichletOperator::new(grid, potential)?.resolvent(lambda)?.harmonic(xi))
}

/// `D(λ)` acting on `u`-data.
#[derive(Debug, Clone)]
pub struct DtnMap {
    pub lambda: f64,
    pub matrix: ComplexMatrix,
}

impl DtnMap {
    fn from_gram(grid: &Grid, lambda: f64, k: &ComplexMatrix) -> Self {
        let h = grid.h();
        let m = k.rows();
        let matrix = &ComplexMatrix::scaled_identity(m, C64::new(2.0 / h, 0.0)) - &k.scale(C64::new(4.0 / (h * h * h), 0.0));
        Self { lambda, matrix }
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.matrix.hermitian_residual()
    }

    pub fn min_singular_value(&self) -> Result<f64> {
        Ok(singular_values(&self.matrix)?.last().copied().unwrap_or(0.0))
    }

    /// Relative residual of solving `D ξ = r`.
    pub fn inverse_residual(&self, r: &[C64]) -> Result<f64> {
        let xi = solve_linear(&self.matrix, r)?;
        let back = self.matrix.matvec(&xi);
        let diff: Vec<C64> = back.iter().zip(r).map(|(a, b)| a - b).collect();
        Ok(norm(&diff) / (self.matrix.frobenius_norm() * norm(&xi) + norm(r)))
    }
}

pub fn dtn_map(grid: &Grid, potential: &Potential, lambda: f64, exec: Execution) -> Result<DtnMap> {
    let res = DirichletOperator::new(grid, potential)?.resolvent(lambda)?;
    Ok(DtnMap::from_gram(grid, lambda, &res.boundary_gram(exec)))
}

/// Relative residual of `⟨γ(λ)ξ, φ⟩_Ω = −⟨ξ, d((H_D − λ)⁻¹φ)⟩_∂`.
pub fn adjoint_identity_residual(grid: &Grid, potential: &Potential, lambda: f64, xi: &[C64], phi: &[C64]) -> Result<f64> {
    grid.check_boundary(xi)?;
    grid.check_interior(phi)?;
    let res = DirichletOperator::new(grid, potential)?.resolvent(lambda)?;
    let g = res.harmonic(xi);
    let lhs = interior_inner(grid, &g.interior, phi);
    let y = res.dirichlet_solution(phi);
    let d = crate::quadruple::neumann_trace(grid, &y)?.values;
    let rhs = -dot(xi, &d) * grid.boundary_weight();
    let scale = grid.interior_weight() * norm(&g.interior) * norm(phi) + grid.boundary_weight() * norm(xi) * norm(&d);
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).norm() / scale })
}

/// `ψ = ψ_D + ψ_η` with `u(ψ_D) = 0` and `(Ĥ* − η)ψ_η = 0` in the interior.
#[derive(Debug, Clone)]
pub struct EtaDecomposition {
    pub psi_d: StateVector,
    pub psi_eta: StateVector,
}

impl EtaDecomposition {
    /// `(max |u(ψ_D)|, max |(Ĥ* − η)ψ_η|)`.
    pub fn defects(&self, grid: &Grid, potential: &Potential, eta: f64) -> Result<(f64, f64)> {
        let u = dirichlet_trace(grid, &self.psi_d)?.values;
        let u_def = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let hx = apply_maximal(grid, potential, &self.psi_eta)?;
        let h_def = hx
            .iter()
            .zip(&self.psi_eta.interior)
            .map(|(a, b)| (a - b * eta).norm())
            .fold(0.0, f64::max);
        Ok((u_def, h_def))
    }
}

pub fn eta_decomposition(grid: &Grid, potential: &Potential, eta: f64, psi: &StateVector) -> Result<EtaDecomposition> {
    grid.check_state(psi)?;
    let res = DirichletOperator::new(grid, potential)?.resolvent(eta)?;
    decompose_with(&res, potential, psi)
}

fn decompose_with(res: &Resolvent, potential: &Potential, psi: &StateVector) -> Result<EtaDecomposition> {
    let grid = &res.grid;
    let eta = res.lambda;
    let hx = apply_maximal(grid, potential, psi)?;
    let rhs: Vec<C64> = hx.iter().zip(&psi.interior).map(|(a, b)| a - b * eta).collect();
    let psi_d = res.dirichlet_solution(&rhs);
    let psi_eta = StateVector {
        interior: psi.interior.iter().zip(&psi_d.interior).map(|(a, b)| a - b).collect(),
        boundary: psi.boundary.iter().zip(&psi_d.boundary).map(|(a, b)| a - b).collect(),
    };
    Ok(EtaDecomposition { psi_d, psi_eta })
}

/// The η-quadruple `G±ψ = (u(ψ) ± i d(ψ_D)) / √2` with its `D(η)`.
#[derive(Debug, Clone)]
pub struct EtaQuadruple {
    pub eta: f64,
    pub maps: QuadrupleMaps,
    pub dtn: DtnMap,
    potential: Potential,
}

pub fn eta_quadruple(grid: &Grid, potential: &Potential, eta: f64, exec: Execution) -> Result<EtaQuadruple> {
    let res = DirichletOperator::new(grid, potential)?.resolvent(eta)?;
    let k = res.boundary_gram(exec);
    let h = grid.h();
    let m = grid.n_boundary();
    let id = ComplexMatrix::identity(m);
    // d(ψ_D) = Da·a + Db·b
    let da = (&id - &k.scale(C64::new(1.0 / (h * h), 0.0))).scale(C64::new(-2.0 / h, 0.0));
    let db = k.scale(C64::new(2.0 / (h * h * h), 0.0));
    let half = id.scale(C64::new(0.5, 0.0));
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let maps = QuadrupleMaps::from_blocks(
        grid,
        (&half + &da.scale(I)).scale(s),
        (&half + &db.scale(I)).scale(s),
        (&half - &da.scale(I)).scale(s),
        (&half - &db.scale(I)).scale(s),
    )
    .check_orientation()?;
    Ok(EtaQuadruple { eta, maps, dtn: DtnMap::from_gram(grid, eta, &k), potential: potential.clone() })
}

pub fn eta_quadruple_maps(grid: &Grid, potential: &Potential, eta: f64) -> Result<QuadrupleMaps> {
    Ok(eta_quadruple(grid, potential, eta, Execution::Parallel)?.maps)
}

impl EtaQuadruple {
    fn extension(&self, phi: &ComplexMatrix) -> Result<GeneratorExtension> {
        build_extension_in(self.maps.clone(), &self.potential, &validate_contraction(phi)?)
    }

    /// `Φ = 1`: `d(ψ_D) = 0`.
    pub fn krein(&self) -> Result<GeneratorExtension> {
        self.extension(&ComplexMatrix::identity(self.dtn.matrix.rows()))
    }

    /// `Φ = C(D(η))`.
    pub fn neumann(&self) -> Result<GeneratorExtension> {
        self.extension(&cayley_of_theta(&self.dtn.matrix)?)
    }

    /// `Φ = C(D(η) − iβ)`.
    pub fn robin(&self, beta: &Beta) -> Result<GeneratorExtension> {
        let b = beta.to_matrix(self.dtn.matrix.rows())?;
        validate_beta(&b)?;
        let theta = &self.dtn.matrix - &b.scale(I);
        self.extension(&cayley_of_theta(&theta)?)
    }
}

pub fn krein_extension(grid: &Grid, potential: &Potential, eta: f64) -> Result<GeneratorExtension> {
    eta_quadruple(grid, potential, eta, Execution::Parallel)?.krein()
}

pub fn neumann_via_cayley(grid: &Grid, potential: &Potential, eta: f64) -> Result<GeneratorExtension> {
    eta_quadruple(grid, potential, eta, Execution::Parallel)?.neumann()
}

pub fn robin_via_cayley(grid: &Grid, potential: &Potential, eta: f64, beta: &Beta) -> Result<GeneratorExtension> {
    eta_quadruple(grid, potential, eta, Execution::Parallel)?.robin(beta)
}
