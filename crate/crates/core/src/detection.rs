//! Detection-time density, cumulative distribution and POVM.
//!
//! The exit map sends a state to `j ψ = √(1 − Φ†Φ) G₋ψ` on the boundary. Its
//! squared norm is the rate at which survival probability is lost, so the
//! density at Crank–Nicolson midpoints telescopes exactly into the survival
//! curve. POVM elements are Gram matrices of exit vectors collected along
//! trajectories of the basis states.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::extensions::GeneratorExtension;
use crate::grid::{interior_inner, Grid, StateVector};
use crate::numerics::{dot, hermitian_eigenvalues, norm_sqr, psd_sqrt, ComplexMatrix, C64, I, ONE, ZERO};
use crate::propagator::{make_propagator, TrajectoryRecord};
use crate::quadruple::{dirichlet_trace, neumann_trace};

/// Largest interior dimension for which dense POVM matrices are formed.
pub const POVM_MAX_INTERIOR: usize = 2000;

/// `√(1 − Φ†Φ)` for one extension, reused across time steps.
#[derive(Debug, Clone)]
pub struct ExitOperator {
    sqrt_defect: ComplexMatrix,
    weight: f64,
}

impl ExitOperator {
    pub fn new(ext: &GeneratorExtension) -> Result<Self> {
        let phi = ext.phi().matrix();
        let m = phi.rows();
        let defect = &ComplexMatrix::identity(m) - &phi.adjoint().matmul(phi);
        Ok(Self { sqrt_defect: psd_sqrt(&defect.hermitian_part())?, weight: ext.grid().boundary_weight() })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.sqrt_defect
    }

    /// Exit vector `√(1 − Φ†Φ) g` for a given `g = G₋ψ`.
    pub fn apply(&self, gminus: &[C64]) -> Vec<C64> {
        self.sqrt_defect.matvec(gminus)
    }

    /// `‖√(1 − Φ†Φ) g‖²` in the boundary inner product.
    pub fn density(&self, gminus: &[C64]) -> f64 {
        self.weight * norm_sqr(&self.apply(gminus))
    }
}

/// Detection density at a state given by its interior values; the boundary is reconstructed by `ext`.
pub fn detection_density(ext: &GeneratorExtension, x_mid: &[C64]) -> Result<f64> {
    ext.grid().check_interior(x_mid)?;
    Ok(ExitOperator::new(ext)?.density(&ext.g_minus(x_mid)))
}

/// `2 Im(conj(u) d)` per boundary node (unweighted).
pub fn boundary_flux(grid: &Grid, psi: &StateVector) -> Result<Vec<f64>> {
    let u = dirichlet_trace(grid, psi)?.values;
    let d = neumann_trace(grid, psi)?.values;
    Ok(u.iter().zip(&d).map(|(u, d)| 2.0 * (u.conj() * d).im).collect())
}

/// Boundary-weighted sum of [`boundary_flux`].
pub fn total_flux(grid: &Grid, psi: &StateVector) -> Result<f64> {
    Ok(grid.boundary_weight() * boundary_flux(grid, psi)?.iter().sum::<f64>())
}

#[derive(Debug, Clone)]
pub struct DetectionDensitySeries {
    /// Midpoint times `(k + 1/2)·dt`.
    pub times: Vec<f64>,
    pub density: Vec<f64>,
    /// `dt · Σ_{j ≤ k} density[j]`.
    pub cumulative: Vec<f64>,
    /// Per step, per boundary node.
    pub per_node_flux: Option<Vec<Vec<f64>>>,
}

impl DetectionDensitySeries {
    /// Largest `|cumulative[k] + survival[k+1] − survival[0]|`.
    pub fn telescoping_residual(&self, record: &TrajectoryRecord) -> f64 {
        self.cumulative
            .iter()
            .enumerate()
            .map(|(k, c)| (c + record.survival[k + 1] - record.survival[0]).abs())
            .fold(0.0, f64::max)
    }

    /// Densities divided by the total detected probability (unchanged when nothing was detected).
    pub fn normalized_density(&self) -> Vec<f64> {
        let total = self.cumulative.last().copied().unwrap_or(0.0);
        if total > 0.0 {
            self.density.iter().map(|d| d / total).collect()
        } else {
            self.density.clone()
        }
    }
}

pub fn detection_cdf(record: &TrajectoryRecord, ext: &GeneratorExtension, with_flux: bool) -> Result<DetectionDensitySeries> {
    let steps = record.survival.len().saturating_sub(1);
    if steps == 0 || record.midpoint_gminus.len() != steps || (with_flux && record.midpoint_adjacent.len() != steps) {
        return Err(Error::MissingTraces);
    }
    let exit = ExitOperator::new(ext)?;
    let density: Vec<f64> = record.midpoint_gminus.iter().map(|g| exit.density(g)).collect();
    let mut acc = 0.0;
    let cumulative = density
        .iter()
        .map(|d| {
            acc += record.dt * d;
            acc
        })
        .collect();
    let per_node_flux = if with_flux {
        let grid = ext.grid();
        let h = grid.h();
        Some(
            record
                .midpoint_adjacent
                .iter()
                .map(|a| {
                    let b = ext.reconstruction().matvec(a);
                    a.iter()
                        .zip(&b)
                        .map(|(a, b)| {
                            let u = (a + b) * 0.5;
                            let d = (b - a) / h;
                            2.0 * (u.conj() * d).im
                        })
                        .collect()
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(DetectionDensitySeries { times: record.midpoint_times(), density, cumulative, per_node_flux })
}

/// Relative residual of `⟨jψ, jφ⟩_∂ = ⟨iHψ, φ⟩ + ⟨ψ, iHφ⟩`.
pub fn exit_space_residual(ext: &GeneratorExtension, x: &[C64], y: &[C64]) -> Result<f64> {
    let grid = ext.grid();
    grid.check_interior(x)?;
    grid.check_interior(y)?;
    let exit = ExitOperator::new(ext)?;
    let jx = exit.apply(&ext.g_minus(x));
    let jy = exit.apply(&ext.g_minus(y));
    let lhs = dot(&jx, &jy) * grid.boundary_weight();
    let hx = ext.apply(x);
    let hy = ext.apply(y);
    let rhs = I * interior_inner(grid, &hx, y) - I * interior_inner(grid, x, &hy);
    let scale = grid.boundary_weight() * norm_sqr(&jx).sqrt() * norm_sqr(&jy).sqrt()
        + grid.interior_weight() * (norm_sqr(&hx).sqrt() * norm_sqr(y).sqrt() + norm_sqr(x).sqrt() * norm_sqr(&hy).sqrt());
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).norm() / scale })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PovmInterval {
    /// Steps `start..end`, i.e. midpoint times in `[start·dt, end·dt)`.
    Steps { start: usize, end: usize },
    /// Not detected within `horizon` steps.
    Never { horizon: usize },
}

#[derive(Debug, Clone)]
pub struct PovmElement {
    pub matrix: ComplexMatrix,
    pub interval: PovmInterval,
}

/// Hermiticity and spectrum of a [`PovmElement`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmSpectrum {
    pub hermitian_residual: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl PovmElement {
    pub fn spectrum(&self) -> Result<PovmSpectrum> {
        let hermitian_residual = self.matrix.hermitian_residual();
        let eig = self.eigenvalues()?;
        Ok(PovmSpectrum {
            hermitian_residual,
            min_eigenvalue: eig.first().copied().unwrap_or(0.0),
            max_eigenvalue: eig.last().copied().unwrap_or(0.0),
        })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.matrix.hermitian_part())
    }

    /// `⟨Eψ, ψ⟩` in the interior inner product.
    pub fn expectation(&self, grid: &Grid, x: &[C64]) -> f64 {
        interior_inner(grid, &self.matrix.matvec(x), x).re
    }
}

/// Exit vectors of every basis state over a fixed horizon.
#[derive(Debug, Clone)]
pub struct PovmAssembly {
    grid: Grid,
    n: usize,
    m: usize,
    horizon: usize,
    coef: f64,
    /// Per basis state: exit vectors of steps `0..horizon`, concatenated.
    exits: Vec<Vec<C64>>,
    /// Per basis state: `S_horizon e_j`.
    finals: Vec<Vec<C64>>,
}

pub fn assemble(ext: &GeneratorExtension, dt: f64, horizon: usize, exec: Execution) -> Result<PovmAssembly> {
    let n = ext.n_interior();
    if n > POVM_MAX_INTERIOR {
        return Err(Error::TooLarge { n, max: POVM_MAX_INTERIOR });
    }
    let prop = make_propagator(ext, dt)?;
    let exit = ExitOperator::new(ext)?;
    let m = ext.grid().n_boundary();
    let runs = exec.try_map(n, |j| -> Result<(Vec<C64>, Vec<C64>)> {
        let mut cur = vec![ZERO; n];
        cur[j] = ONE;
        let mut exits = Vec::with_capacity(horizon * m);
        for _ in 0..horizon {
            let (next, mid) = prop.step_with_midpoint(&cur)?;
            exits.extend(exit.apply(&ext.g_minus(&mid)));
            cur = next;
        }
        Ok((exits, cur))
    })?;
    let (exits, finals) = runs.into_iter().unzip();
    let grid = ext.grid().clone();
    let coef = dt * grid.boundary_weight() / grid.interior_weight();
    Ok(PovmAssembly { grid, n, m, horizon, coef, exits, finals })
}

impl PovmAssembly {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `E([start, end))` from the stored exit vectors.
    pub fn element(&self, steps: Range<usize>, exec: Execution) -> Result<PovmElement> {
        if steps.end > self.horizon || steps.start > steps.end {
            return Err(Error::InvalidArgument(format!(
                "step range {}..{} outside the assembled horizon {}",
                steps.start, steps.end, self.horizon
            )));
        }
        let lo = steps.start * self.m;
        let hi = steps.end * self.m;
        let slices: Vec<&[C64]> = self.exits.iter().map(|v| &v[lo..hi]).collect();
        let matrix = gram(&slices, self.coef, exec);
        Ok(PovmElement { matrix, interval: PovmInterval::Steps { start: steps.start, end: steps.end } })
    }

    /// `S_T† S_T` at the assembled horizon.
    pub fn never_detected(&self, exec: Execution) -> PovmElement {
        let slices: Vec<&[C64]> = self.finals.iter().map(|v| v.as_slice()).collect();
        PovmElement { matrix: gram(&slices, 1.0, exec), interval: PovmInterval::Never { horizon: self.horizon } }
    }

    /// `‖E([0,T)) + S_T†S_T − 1‖_F`.
    pub fn completeness_residual(&self, exec: Execution) -> Result<f64> {
        let e = self.element(0..self.horizon, exec)?;
        let s = self.never_detected(exec);
        let total = &e.matrix + &s.matrix;
        Ok((&total - &ComplexMatrix::identity(self.n)).frobenius_norm())
    }

    /// `‖E([0,k)) + E([k,T)) − E([0,T))‖_F`.
    pub fn additivity_residual(&self, split: usize, exec: Execution) -> Result<f64> {
        let a = self.element(0..split, exec)?;
        let b = self.element(split..self.horizon, exec)?;
        let whole = self.element(0..self.horizon, exec)?;
        Ok((&(&a.matrix + &b.matrix) - &whole.matrix).frobenius_norm())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// `coef · Vᴴ V` with `V` the matrix whose columns are `cols`.
fn gram(cols: &[&[C64]], coef: f64, exec: Execution) -> ComplexMatrix {
    let n = cols.len();
    let rows: Vec<Vec<C64>> = exec.map(n, |i| (0..n).map(|j| dot(cols[j], cols[i]) * coef).collect());
    ComplexMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// `E([start, end))` for `ext` with time step `dt`.
pub fn assemble_povm(ext: &GeneratorExtension, dt: f64, steps: Range<usize>, exec: Execution) -> Result<PovmElement> {
    assemble(ext, dt, steps.end, exec)?.element(steps, exec)
}

/// Finite-horizon never-detected effect `S_n† S_n = 1 − E([0, n))`.
pub fn never_detected_operator(ext: &GeneratorExtension, dt: f64, n_steps: usize, exec: Execution) -> Result<PovmElement> {
    Ok(assemble(ext, dt, n_steps, exec)?.never_detected(exec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extensions::{dirichlet, full_absorber, robin, Beta};
    use crate::grid::{gaussian_packet, make_grid_1d, make_grid_2d, Potential};
    use crate::propagator::{evolve, RecordOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> Grid {
        make_grid_1d(0.0, 1.0, n).unwrap().into()
    }

    fn rvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn density_vanishes_for_zero_state_and_unitary_maps() {
        let g = line(10);
        let v = Potential::zero(&g);
        let abs = full_absorber(&g, &v).unwrap();
        assert_eq!(detection_density(&abs, &[ZERO; 10]).unwrap(), 0.0);
        let d = dirichlet(&g, &v).unwrap();
        let x = rvec(10, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(detection_density(&d, &x).unwrap().abs() < 1e-14);
    }

    #[test]
    fn scalar_robin_density_is_two_re_beta_u_squared() {
        let g = line(10);
        let beta = C64::new(0.7, 0.4);
        let ext = robin(&g, &Potential::zero(&g), &Beta::Scalar(beta)).unwrap();
        let x = rvec(10, &mut ChaCha8Rng::seed_from_u64(2));
        let s = ext.full_state(&x);
        let u = dirichlet_trace(&g, &s).unwrap().values;
        let expected: f64 = u.iter().map(|u| 2.0 * beta.re * u.norm_sqr()).sum();
        let dens = detection_density(&ext, &x).unwrap();
        assert!((dens - expected).abs() < 1e-10 * expected);
        assert!((total_flux(&g, &s).unwrap() - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn flux_of_real_states_and_matched_traces() {
        let g = line(6);
        let s = StateVector { interior: vec![C64::new(0.3, 0.0); 6], boundary: vec![C64::new(-1.0, 0.0); 2] };
        assert!(boundary_flux(&g, &s).unwrap().iter().all(|f| *f == 0.0));
        // d = i u with u = 1 at node 0
        let h = g.h();
        let (u, d) = (ONE, I);
        let mut interior = vec![ZERO; 6];
        interior[0] = u - d * (h / 2.0);
        let s = StateVector { interior, boundary: vec![u + d * (h / 2.0), ZERO] };
        assert!((boundary_flux(&g, &s).unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_telescopes_and_flux_matches() {
        let g = line(50);
        let ext = robin(&g, &Potential::zero(&g), &Beta::PerNode(vec![ZERO, ONE])).unwrap();
        let prop = make_propagator(&ext, 2e-4).unwrap();
        let x0 = gaussian_packet(&g, &[0.5], 0.06, &[25.0]).unwrap().interior;
        let rec = evolve(&prop, &x0, 600, RecordOptions::default()).unwrap();
        let series = detection_cdf(&rec, &ext, true).unwrap();
        assert!(series.telescoping_residual(&rec) < 1e-12);
        assert!(series.density.iter().all(|d| *d >= -1e-12));
        let flux = series.per_node_flux.as_ref().unwrap();
        for (k, f) in flux.iter().enumerate() {
            let total: f64 = f.iter().sum::<f64>() * g.boundary_weight();
            assert!((total - series.density[k]).abs() <= 1e-10 * (1.0 + series.density[k]));
        }
        assert!(*series.cumulative.last().unwrap() > 0.1);
    }

    #[test]
    fn cdf_requires_traces() {
        let g = line(5);
        let ext = full_absorber(&g, &Potential::zero(&g)).unwrap();
        let prop = make_propagator(&ext, 1e-3).unwrap();
        let mut rec = evolve(&prop, &[ONE; 5], 3, RecordOptions::default()).unwrap();
        rec.midpoint_gminus.clear();
        assert!(matches!(detection_cdf(&rec, &ext, false), Err(Error::MissingTraces)));
    }

    #[test]
    fn exit_space_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Grid = make_grid_2d(1.0, 1.0, 4, 4).unwrap().into();
        let ext = robin(&g, &Potential::zero(&g), &Beta::Scalar(C64::new(0.5, -0.3))).unwrap();
        for _ in 0..10 {
            let x = rvec(16, &mut rng);
            let y = rvec(16, &mut rng);
            assert!(exit_space_residual(&ext, &x, &y).unwrap() < 1e-12);
        }
    }

    #[test]
    fn povm_structure_on_small_interval() {
        let g = line(12);
        let ext = robin(&g, &Potential::zero(&g), &Beta::PerNode(vec![C64::new(0.5, 0.0), ONE])).unwrap();
        let dt = 5e-3;
        for exec in [Execution::Sequential, Execution::Parallel] {
            let asm = assemble(&ext, dt, 60, exec).unwrap();
            assert!(asm.completeness_residual(exec).unwrap() < 1e-10);
            assert!(asm.additivity_residual(25, exec).unwrap() < 1e-14);
            let e = asm.element(0..60, exec).unwrap();
            let sp = e.spectrum().unwrap();
            assert!(sp.hermitian_residual < 1e-12);
            assert!(sp.min_eigenvalue > -1e-12 && sp.max_eigenvalue < 1.0 + 1e-9);
            assert_eq!(asm.element(10..10, exec).unwrap().matrix.max_abs(), 0.0);
            // Expectation equals the detected probability of an actual run.
            let x0 = rvec(12, &mut ChaCha8Rng::seed_from_u64(4));
            let prop = make_propagator(&ext, dt).unwrap();
            let rec = evolve(&prop, &x0, 60, RecordOptions::default()).unwrap();
            let detected = rec.survival[0] - rec.survival[60];
            assert!((e.expectation(&g, &x0) - detected).abs() < 1e-10 * rec.survival[0]);
        }
    }

    #[test]
    fn unitary_povm_is_trivial() {
        let g = line(8);
        let ext = dirichlet(&g, &Potential::zero(&g)).unwrap();
        let asm = assemble(&ext, 1e-2, 20, Execution::Parallel).unwrap();
        assert!(asm.element(0..20, Execution::Parallel).unwrap().matrix.max_abs() < 1e-14);
        let never = asm.never_detected(Execution::Parallel);
        assert!((&never.matrix - &ComplexMatrix::identity(8)).max_abs() < 1e-12);
    }

    #[test]
    fn povm_size_limit() {
        let g = line(POVM_MAX_INTERIOR + 1);
        let ext = full_absorber(&g, &Potential::zero(&g)).unwrap();
        assert!(matches!(assemble_povm(&ext, 1e-3, 0..1, Execution::Sequential), Err(Error::TooLarge { .. })));
    }
}
