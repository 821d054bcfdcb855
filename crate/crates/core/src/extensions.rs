//! Effective generators obtained by eliminating the boundary nodes through
//! `G₊ψ = Φ G₋ψ`, the catalogue of named extensions and dissipativity checks.

use crate::error::{Error, Result};
use crate::grid::{interior_inner, Grid, Potential, StateVector};
use crate::numerics::{
    cayley_of_beta, hermitian_eig, norm_sqr, operator_norm, orthonormal_columns, singular_values, solve_matrix,
    ComplexMatrix, SparseRows, C64, I, ONE,
};
use crate::quadruple::{stencil_matrix, QuadrupleMaps};

const CONTRACTION_TOL: f64 = 1e-10;
const MAX_CONDITION: f64 = 1e12;

/// Boundary map with validated operator norm `≤ 1`.
#[derive(Debug, Clone)]
pub struct ContractionMap {
    phi: ComplexMatrix,
    sigma_max: f64,
}

impl ContractionMap {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.phi
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn dim(&self) -> usize {
        self.phi.rows()
    }

    /// `‖Φ†Φ − 1‖_F`; zero for boundary maps that lose no probability.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.phi.adjoint().matmul(&self.phi);
        (&g - &ComplexMatrix::identity(self.dim())).frobenius_norm()
    }
}

pub fn validate_contraction(phi: &ComplexMatrix) -> Result<ContractionMap> {
    if !phi.is_square() {
        return Err(Error::DimensionMismatch { expected: phi.rows(), found: phi.cols() });
    }
    if let Some(index) = phi.as_slice().iter().position(|z| !z.is_finite()) {
        return Err(Error::NonFiniteEntry { index });
    }
    let sigma_max = operator_norm(phi)?;
    if sigma_max > 1.0 + CONTRACTION_TOL {
        return Err(Error::NotContraction { sigma_max });
    }
    Ok(ContractionMap { phi: phi.clone(), sigma_max })
}

/// Robin coefficient in `d = iβu`.
#[derive(Debug, Clone, PartialEq)]
pub enum Beta {
    /// Same value at every boundary node.
    Scalar(C64),
    /// One value per boundary node.
    PerNode(Vec<C64>),
    /// Full (possibly nonlocal) boundary operator.
    Matrix(ComplexMatrix),
}

impl Beta {
    pub fn to_matrix(&self, m: usize) -> Result<ComplexMatrix> {
        match self {
            Beta::Scalar(b) => Ok(ComplexMatrix::scaled_identity(m, *b)),
            Beta::PerNode(v) => {
                if v.len() != m {
                    return Err(Error::SizeMismatch { expected: m, found: v.len() });
                }
                Ok(ComplexMatrix::from_diag(v))
            }
            Beta::Matrix(b) => {
                if b.rows() != m || b.cols() != m {
                    return Err(Error::SizeMismatch { expected: m, found: b.rows() });
                }
                Ok(b.clone())
            }
        }
    }
}

/// Reject β whose Hermitian part has a negative eigenvalue.
pub fn validate_beta(beta: &ComplexMatrix) -> Result<()> {
    let herm = beta.hermitian_part();
    let eig = hermitian_eig(&herm)?;
    let scale = eig.max_abs_eigenvalue().max(1.0);
    match eig.eigenvalues.first() {
        Some(&lmin) if lmin < -1e-12 * scale => Err(Error::BadBeta { eigenvalue: lmin }),
        _ => Ok(()),
    }
}

/// Smallest eigenvalue of the anti-Hermitian part `(β − β†)/2i`; non-negative
/// when the imaginary part of β is PSD.
pub fn beta_imaginary_part_min(beta: &ComplexMatrix) -> Result<f64> {
    let skew = (beta - &beta.adjoint()).scale(C64::new(0.0, -0.5));
    Ok(hermitian_eig(&skew)?.eigenvalues.first().copied().unwrap_or(0.0))
}

/// Multiplication by `min(1/|x − y|, 1/h)` on the boundary, `y` the boundary node `y_node`.
pub fn hardy_beta(grid: &Grid, y_node: usize) -> Result<ComplexMatrix> {
    let m = grid.n_boundary();
    if y_node >= m {
        return Err(Error::SizeMismatch { expected: m, found: y_node });
    }
    let y = grid.boundary_coords(y_node);
    let cap = 1.0 / grid.h();
    let diag: Vec<f64> = (0..m)
        .map(|k| {
            let x = grid.boundary_coords(k);
            let r = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if r == 0.0 {
                cap
            } else {
                (1.0 / r).min(cap)
            }
        })
        .collect();
    Ok(ComplexMatrix::from_real_diag(&diag))
}

/// Interior generator with the boundary eliminated: `b = R·a`,
/// `H = L0 − Pᵀ R P / h²`.
#[derive(Debug, Clone)]
pub struct GeneratorExtension {
    quad: QuadrupleMaps,
    potential: Potential,
    phi: ContractionMap,
    reconstruction: ComplexMatrix,
    interior_matrix: ComplexMatrix,
    sparse: SparseRows,
    gminus_of_adjacent: ComplexMatrix,
    gplus_of_adjacent: ComplexMatrix,
}

impl GeneratorExtension {
    fn assemble(quad: QuadrupleMaps, potential: &Potential, phi: ContractionMap, reconstruction: ComplexMatrix) -> Self {
        let grid = quad.grid();
        let h2 = grid.h() * grid.h();
        let mut interior_matrix = stencil_matrix(grid, potential);
        let adj = quad.adjacent_indices().to_vec();
        for (r, &kr) in adj.iter().enumerate() {
            for (c, &kc) in adj.iter().enumerate() {
                interior_matrix[(kr, kc)] -= reconstruction[(r, c)] / h2;
            }
        }
        let gminus_of_adjacent = &quad.x_minus + &quad.y_minus.matmul(&reconstruction);
        let gplus_of_adjacent = &quad.x_plus + &quad.y_plus.matmul(&reconstruction);
        let sparse = SparseRows::from_dense(&interior_matrix);
        Self {
            quad,
            potential: potential.clone(),
            phi,
            reconstruction,
            interior_matrix,
            sparse,
            gminus_of_adjacent,
            gplus_of_adjacent,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.quad.grid()
    }

    pub fn quadruple(&self) -> &QuadrupleMaps {
        &self.quad
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn phi(&self) -> &ContractionMap {
        &self.phi
    }

    /// `R` in `b = R·a`.
    pub fn reconstruction(&self) -> &ComplexMatrix {
        &self.reconstruction
    }

    pub fn interior_matrix(&self) -> &ComplexMatrix {
        &self.interior_matrix
    }

    pub fn sparse_matrix(&self) -> &SparseRows {
        &self.sparse
    }

    /// `G₋` as a map of the adjacent values.
    pub fn gminus_map(&self) -> &ComplexMatrix {
        &self.gminus_of_adjacent
    }

    pub fn n_interior(&self) -> usize {
        self.interior_matrix.rows()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.sparse.matvec(x)
    }

    pub fn boundary_values(&self, x: &[C64]) -> Vec<C64> {
        self.reconstruction.matvec(&self.quad.adjacent(x))
    }

    pub fn full_state(&self, x: &[C64]) -> StateVector {
        StateVector { interior: x.to_vec(), boundary: self.boundary_values(x) }
    }

    pub fn g_minus(&self, x: &[C64]) -> Vec<C64> {
        self.gminus_of_adjacent.matvec(&self.quad.adjacent(x))
    }

    pub fn g_plus(&self, x: &[C64]) -> Vec<C64> {
        self.gplus_of_adjacent.matvec(&self.quad.adjacent(x))
    }

    /// `‖G₊ψ − ΦG₋ψ‖` for the reconstructed state.
    pub fn constraint_residual(&self, x: &[C64]) -> f64 {
        let gm = self.g_minus(x);
        let phi_gm = self.phi.matrix().matvec(&gm);
        let gp = self.g_plus(x);
        norm_sqr(&gp.iter().zip(&phi_gm).map(|(a, b)| a - b).collect::<Vec<_>>()).sqrt()
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.interior_matrix.hermitian_residual()
    }
}

/// Eliminate `b` from `(Y₊ − ΦY₋) b = −(X₊ − ΦX₋) a`.
pub fn build_extension_in(quad: QuadrupleMaps, potential: &Potential, phi: &ContractionMap) -> Result<GeneratorExtension> {
    let grid = quad.grid();
    if potential.values.len() != grid.n_interior() {
        return Err(Error::SizeMismatch { expected: grid.n_interior(), found: potential.values.len() });
    }
    if phi.dim() != grid.n_boundary() {
        return Err(Error::SizeMismatch { expected: grid.n_boundary(), found: phi.dim() });
    }
    let p = phi.matrix();
    let lhs = &quad.y_plus - &p.matmul(&quad.y_minus);
    let rhs = (&quad.x_plus - &p.matmul(&quad.x_minus)).scale(-ONE);
    let reconstruction = eliminate(&lhs, &rhs)?;
    Ok(GeneratorExtension::assemble(quad, potential, phi.clone(), reconstruction))
}

/// Solve `lhs · R = rhs`, refusing ill-conditioned `lhs`.
fn eliminate(lhs: &ComplexMatrix, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
    let sv = singular_values(lhs)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularElimination { condition });
    }
    solve_matrix(lhs, rhs).map_err(|_| Error::SingularElimination { condition })
}

/// Extension for `G₊ψ = ΦG₋ψ` in the u/d quadruple.
pub fn build_extension(grid: &Grid, potential: &Potential, phi: &ContractionMap) -> Result<GeneratorExtension> {
    build_extension_in(QuadrupleMaps::standard(grid)?, potential, phi)
}

fn with_phi(grid: &Grid, potential: &Potential, phi: ComplexMatrix) -> Result<GeneratorExtension> {
    build_extension(grid, potential, &validate_contraction(&phi)?)
}

/// `Φ = −1`: `u = 0`.
pub fn dirichlet(grid: &Grid, potential: &Potential) -> Result<GeneratorExtension> {
    with_phi(grid, potential, ComplexMatrix::scaled_identity(grid.n_boundary(), -ONE))
}

/// `Φ = 1`: `d = 0`.
pub fn neumann(grid: &Grid, potential: &Potential) -> Result<GeneratorExtension> {
    with_phi(grid, potential, ComplexMatrix::identity(grid.n_boundary()))
}

/// Endpoint swap on an interval.
pub fn periodic(grid: &Grid, potential: &Potential) -> Result<GeneratorExtension> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported("periodic coupling is defined on intervals only".into()));
    }
    let mut swap = ComplexMatrix::zeros(2, 2);
    swap[(0, 1)] = ONE;
    swap[(1, 0)] = ONE;
    with_phi(grid, potential, swap)
}

/// `Φ = 0`, equivalently `β = 1`.
pub fn full_absorber(grid: &Grid, potential: &Potential) -> Result<GeneratorExtension> {
    with_phi(grid, potential, ComplexMatrix::zeros(grid.n_boundary(), grid.n_boundary()))
}

/// `d = iβu` imposed directly: `(1/h − iβ/2) b = (1/h + iβ/2) a`.
/// The stored boundary map is the Cayley transform of β.
pub fn robin(grid: &Grid, potential: &Potential, beta: &Beta) -> Result<GeneratorExtension> {
    let m = grid.n_boundary();
    let b = beta.to_matrix(m)?;
    validate_beta(&b)?;
    let quad = QuadrupleMaps::standard(grid)?;
    if potential.values.len() != grid.n_interior() {
        return Err(Error::SizeMismatch { expected: grid.n_interior(), found: potential.values.len() });
    }
    let inv_h = ComplexMatrix::scaled_identity(m, C64::new(1.0 / grid.h(), 0.0));
    let half_ib = b.scale(I * 0.5);
    let reconstruction = eliminate(&(&inv_h - &half_ib), &(&inv_h + &half_ib))?;
    let phi = validate_contraction(&cayley_of_beta(&b)?)?;
    Ok(GeneratorExtension::assemble(quad, potential, phi, reconstruction))
}

/// `2 Re⟨−iHψ, ψ⟩`.
pub fn dissipation_rate(ext: &GeneratorExtension, x: &[C64]) -> Result<f64> {
    ext.grid().check_interior(x)?;
    let hx = ext.apply(x);
    Ok(2.0 * interior_inner(ext.grid(), &hx, x).im)
}

/// `‖ΦG₋ψ‖² − ‖G₋ψ‖²` in the boundary inner product.
pub fn boundary_loss_rate(ext: &GeneratorExtension, x: &[C64]) -> Result<f64> {
    ext.grid().check_interior(x)?;
    let gm = ext.g_minus(x);
    let phi_gm = ext.phi().matrix().matvec(&gm);
    Ok(ext.grid().boundary_weight() * (norm_sqr(&phi_gm) - norm_sqr(&gm)))
}

/// Relative mismatch between [`dissipation_rate`] and [`boundary_loss_rate`].
pub fn dissipation_identity_residual(ext: &GeneratorExtension, x: &[C64]) -> Result<f64> {
    let volume = dissipation_rate(ext, x)?;
    let surface = boundary_loss_rate(ext, x)?;
    let hx = ext.apply(x);
    let scale = 2.0 * ext.grid().interior_weight() * norm_sqr(&hx).sqrt() * norm_sqr(x).sqrt()
        + ext.grid().boundary_weight() * norm_sqr(&ext.g_minus(x));
    Ok(if scale == 0.0 { 0.0 } else { (volume - surface).abs() / scale })
}

/// Orthonormal basis of the graph `{(x, R P x)}` inside the full state space.
fn domain_basis(ext: &GeneratorExtension) -> ComplexMatrix {
    let n = ext.n_interior();
    let m = ext.grid().n_boundary();
    let mut g = ComplexMatrix::zeros(n + m, n);
    for k in 0..n {
        g[(k, k)] = ONE;
    }
    let adj = ext.quadruple().adjacent_indices();
    for r in 0..m {
        for (c, &k) in adj.iter().enumerate() {
            g[(n + r, k)] += ext.reconstruction()[(r, c)];
        }
    }
    orthonormal_columns(&g)
}

/// Sine of the largest principal angle between the two domains.
pub fn constraint_subspace_distance(a: &GeneratorExtension, b: &GeneratorExtension) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::SizeMismatch { expected: a.n_interior(), found: b.n_interior() });
    }
    let qa = domain_basis(a);
    let qb = domain_basis(b);
    let proj = qa.matmul(&qa.adjoint_matmul(&qb));
    operator_norm(&(&qb - &proj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid_1d, make_grid_2d, sample_potential, PotentialSpec};
    use crate::numerics::ZERO;
    use crate::quadruple::{dirichlet_trace, neumann_trace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn line(n: usize) -> Grid {
        make_grid_1d(0.0, 1.0, n).unwrap().into()
    }

    fn square(n: usize) -> Grid {
        make_grid_2d(1.0, 1.0, n, n).unwrap().into()
    }

    fn rvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn random_accretive(m: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(m, m, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let s = ComplexMatrix::from_fn(m, m, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        &a.adjoint().matmul(&a) + &(&s - &s.adjoint())
    }

    fn random_contraction(m: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(m, m, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let s = operator_norm(&a).unwrap();
        a.scale(c(rng.gen_range(0.1..1.0) / s, 0.0))
    }

    #[test]
    fn contraction_validation() {
        let z = validate_contraction(&ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(z.sigma_max(), 0.0);
        let bad = ComplexMatrix::from_real_diag(&[1.2, 0.0]);
        assert!(matches!(validate_contraction(&bad), Err(Error::NotContraction { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let beta = random_accretive(4, &mut rng);
            assert!(validate_contraction(&cayley_of_beta(&beta).unwrap()).is_ok());
        }
    }

    #[test]
    fn named_reconstructions() {
        let g = line(10);
        let v = Potential::zero(&g);
        let x = rvec(10, &mut ChaCha8Rng::seed_from_u64(1));
        let d = dirichlet(&g, &v).unwrap();
        let b = d.boundary_values(&x);
        assert!((b[0] + x[0]).norm() < 1e-13 && (b[1] + x[9]).norm() < 1e-13);
        let nm = neumann(&g, &v).unwrap();
        let b = nm.boundary_values(&x);
        assert!((b[0] - x[0]).norm() < 1e-13 && (b[1] - x[9]).norm() < 1e-13);
        // Periodic: G+ at one end equals G- at the other.
        let p = periodic(&g, &v).unwrap();
        let s = p.full_state(&x);
        let u = dirichlet_trace(&g, &s).unwrap().values;
        let dd = neumann_trace(&g, &s).unwrap().values;
        assert!((u[0] - u[1]).norm() < 1e-12);
        assert!((dd[0] + dd[1]).norm() < 1e-10);
        assert!(matches!(periodic(&square(4), &Potential::zero(&square(4))), Err(Error::Unsupported(_))));
    }

    #[test]
    fn unitary_catalogue_is_hermitian() {
        for g in [line(20), square(5)] {
            let v = sample_potential(&g, &PotentialSpec::Constant(1.5)).unwrap();
            assert!(dirichlet(&g, &v).unwrap().hermitian_residual() < 1e-12);
            assert!(neumann(&g, &v).unwrap().hermitian_residual() < 1e-12);
            let gamma: Vec<C64> = (0..g.n_boundary()).map(|k| c(0.0, k as f64 * 0.7 - 2.0)).collect();
            let r = robin(&g, &v, &Beta::PerNode(gamma)).unwrap();
            assert!(r.hermitian_residual() < 1e-12);
            assert!(r.phi().unitarity_defect() < 1e-12);
        }
        assert!(periodic(&line(20), &Potential::zero(&line(20))).unwrap().hermitian_residual() < 1e-12);
    }

    #[test]
    fn full_absorber_is_strictly_dissipative() {
        let g = line(12);
        let ext = full_absorber(&g, &Potential::zero(&g)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = rvec(12, &mut rng);
            assert!(dissipation_rate(&ext, &x).unwrap() < 0.0);
        }
        assert!(ext.hermitian_residual() > 1e-3);
    }

    #[test]
    fn dissipation_identity_for_random_contractions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [line(16), square(5)] {
            let v = sample_potential(&g, &PotentialSpec::Constant(-2.0)).unwrap();
            for _ in 0..10 {
                let phi = validate_contraction(&random_contraction(g.n_boundary(), &mut rng)).unwrap();
                let ext = build_extension(&g, &v, &phi).unwrap();
                let x = rvec(g.n_interior(), &mut rng);
                assert!(ext.constraint_residual(&x) < 1e-10 * (1.0 + norm_sqr(&x).sqrt()));
                assert!(dissipation_identity_residual(&ext, &x).unwrap() < 1e-12);
                let rate = dissipation_rate(&ext, &x).unwrap();
                assert!(rate <= 1e-10 * norm_sqr(&x));
            }
        }
    }

    #[test]
    fn robin_special_cases() {
        let g = line(9);
        let v = Potential::zero(&g);
        let zero = robin(&g, &v, &Beta::Scalar(ZERO)).unwrap();
        assert!(constraint_subspace_distance(&zero, &neumann(&g, &v).unwrap()).unwrap() < 1e-12);
        let one = robin(&g, &v, &Beta::Scalar(ONE)).unwrap();
        assert!(constraint_subspace_distance(&one, &full_absorber(&g, &v).unwrap()).unwrap() < 1e-12);
        let dist = constraint_subspace_distance(&dirichlet(&g, &v).unwrap(), &neumann(&g, &v).unwrap()).unwrap();
        assert!(dist > 0.1);
        assert!(constraint_subspace_distance(&one, &one).unwrap() < 1e-14);
        assert!(matches!(robin(&g, &v, &Beta::Scalar(c(-0.5, 0.0))), Err(Error::BadBeta { .. })));
    }

    #[test]
    fn robin_reconstruction_satisfies_the_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = square(4);
        let v = Potential::zero(&g);
        let beta = random_accretive(g.n_boundary(), &mut rng);
        let ext = robin(&g, &v, &Beta::Matrix(beta.clone())).unwrap();
        let s = ext.full_state(&rvec(g.n_interior(), &mut rng));
        let u = dirichlet_trace(&g, &s).unwrap().values;
        let d = neumann_trace(&g, &s).unwrap().values;
        let ibu: Vec<C64> = beta.matvec(&u).into_iter().map(|z| I * z).collect();
        for (x, y) in d.iter().zip(&ibu) {
            assert!((x - y).norm() < 1e-10 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn robin_matches_cayley_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in [line(12), square(4)] {
            let v = Potential::zero(&g);
            for _ in 0..5 {
                let beta = random_accretive(g.n_boundary(), &mut rng);
                let direct = robin(&g, &v, &Beta::Matrix(beta.clone())).unwrap();
                let phi = validate_contraction(&cayley_of_beta(&beta).unwrap()).unwrap();
                let via = build_extension(&g, &v, &phi).unwrap();
                assert!(constraint_subspace_distance(&direct, &via).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn strictly_accretive_beta_gives_strict_contraction() {
        let g = square(4);
        let beta = ComplexMatrix::from_fn(16, 16, |i, j| if i == j { c(0.3, 0.2 * i as f64) } else { ZERO });
        let ext = robin(&g, &Potential::zero(&g), &Beta::Matrix(beta)).unwrap();
        assert!(ext.phi().sigma_max() < 1.0 - 1e-6);
    }

    #[test]
    fn hardy_beta_is_capped_and_positive() {
        let g = square(9);
        let b = hardy_beta(&g, 4).unwrap();
        assert!((b[(4, 4)].re - 10.0).abs() < 1e-12);
        assert!((b[(3, 3)].re - 10.0).abs() < 1e-9);
        assert!((b[(0, 0)].re - 1.0 / 0.4).abs() < 1e-9);
        assert!(validate_beta(&b).is_ok());
        assert!(beta_imaginary_part_min(&b).unwrap().abs() < 1e-14);
    }
}
