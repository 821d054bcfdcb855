//! Crank–Nicolson time stepping `(1 + i dt/2 H) ψ' = (1 − i dt/2 H) ψ`.
//!
//! The step is the Cayley transform of the generator, so it is a contraction
//! whenever the generator is dissipative, and the norm lost in one step equals
//! `dt` times the boundary loss rate at the midpoint `(ψ + ψ')/2` exactly.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::extensions::GeneratorExtension;
use crate::grid::interior_inner;
use crate::numerics::{hermitian_eig, norm, norm_sqr, HermitianEig, StepSolver, C64, I, ZERO};

#[derive(Debug, Clone)]
pub struct Propagator {
    ext: GeneratorExtension,
    dt: f64,
    solver: StepSolver,
}

pub fn make_propagator(ext: &GeneratorExtension, dt: f64) -> Result<Propagator> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let half = I * (0.5 * dt);
    let n = ext.n_interior();
    let mut a = ext.interior_matrix().scale(half);
    for k in 0..n {
        a[(k, k)] += 1.0;
    }
    let solver = StepSolver::new(&a).map_err(|_| Error::SingularStep)?;
    Ok(Propagator { ext: ext.clone(), dt, solver })
}

/// `h² / 2`.
pub fn default_time_step(h: f64) -> f64 {
    0.5 * h * h
}

impl Propagator {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn extension(&self) -> &GeneratorExtension {
        &self.ext
    }

    pub fn uses_tridiagonal_solver(&self) -> bool {
        self.solver.is_tridiagonal()
    }

    /// One step; returns `(ψ', ψ_mid)`.
    pub fn step_with_midpoint(&self, x: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
        self.ext.grid().check_interior(x)?;
        let half = I * (0.5 * self.dt);
        let hx = self.ext.apply(x);
        let rhs: Vec<C64> = x.iter().zip(&hx).map(|(v, hv)| v - half * hv).collect();
        let next = self.solver.solve(&rhs);
        let mid = x.iter().zip(&next).map(|(a, b)| (a + b) * 0.5).collect();
        Ok((next, mid))
    }

    pub fn step(&self, x: &[C64]) -> Result<Vec<C64>> {
        Ok(self.step_with_midpoint(x)?.0)
    }

    /// `n` steps without recording.
    pub fn advance(&self, x: &[C64], n: usize) -> Result<Vec<C64>> {
        let mut cur = x.to_vec();
        for _ in 0..n {
            cur = self.step(&cur)?;
        }
        Ok(cur)
    }

    /// `dt · (‖ΦG₋ψ_mid‖² − ‖G₋ψ_mid‖²)` in the boundary inner product.
    pub fn midpoint_balance(&self, mid: &[C64]) -> f64 {
        let gm = self.ext.g_minus(mid);
        let phi_gm = self.ext.phi().matrix().matvec(&gm);
        self.dt * self.ext.grid().boundary_weight() * (norm_sqr(&phi_gm) - norm_sqr(&gm))
    }

    /// Relative residual of `‖ψ'‖² − ‖ψ‖² = dt·(‖ΦG₋ψ_mid‖² − ‖G₋ψ_mid‖²)` for one step from `x`.
    pub fn balance_residual(&self, x: &[C64]) -> Result<f64> {
        let (next, mid) = self.step_with_midpoint(x)?;
        let grid = self.ext.grid();
        let before = interior_inner(grid, x, x).re;
        let after = interior_inner(grid, &next, &next).re;
        let predicted = self.midpoint_balance(&mid);
        let scale = before.max(after).max(predicted.abs());
        Ok(if scale == 0.0 { 0.0 } else { ((after - before) - predicted).abs() / scale })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecordOptions {
    /// Keep every `k`-th state (step 0 included); `0` keeps none.
    pub decimate: usize,
}

/// Full-rate survival and midpoint traces plus optional decimated states.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub dt: f64,
    /// `k·dt`, `k = 0..=n_steps`.
    pub times: Vec<f64>,
    /// `‖ψ_k‖²`, `k = 0..=n_steps`.
    pub survival: Vec<f64>,
    /// `G₋ψ_mid` per step.
    pub midpoint_gminus: Vec<Vec<C64>>,
    /// Adjacent interior values of `ψ_mid` per step.
    pub midpoint_adjacent: Vec<Vec<C64>>,
    /// `(step, state)` pairs kept by decimation.
    pub states: Vec<(usize, Vec<C64>)>,
    pub final_state: Vec<C64>,
}

impl TrajectoryRecord {
    pub fn n_steps(&self) -> usize {
        self.midpoint_gminus.len()
    }

    /// Midpoint times `(k + 1/2)·dt`.
    pub fn midpoint_times(&self) -> Vec<f64> {
        (0..self.n_steps()).map(|k| (k as f64 + 0.5) * self.dt).collect()
    }
}

pub fn evolve(prop: &Propagator, x0: &[C64], n_steps: usize, opts: RecordOptions) -> Result<TrajectoryRecord> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let ext = prop.extension();
    let grid = ext.grid();
    grid.check_interior(x0)?;
    let mut rec = TrajectoryRecord {
        dt: prop.dt(),
        times: Vec::with_capacity(n_steps + 1),
        survival: Vec::with_capacity(n_steps + 1),
        midpoint_gminus: Vec::with_capacity(n_steps),
        midpoint_adjacent: Vec::with_capacity(n_steps),
        states: Vec::new(),
        final_state: Vec::new(),
    };
    let mut cur = x0.to_vec();
    rec.times.push(0.0);
    rec.survival.push(interior_inner(grid, &cur, &cur).re);
    if opts.decimate > 0 {
        rec.states.push((0, cur.clone()));
    }
    for k in 1..=n_steps {
        let (next, mid) = prop.step_with_midpoint(&cur)?;
        rec.midpoint_gminus.push(ext.g_minus(&mid));
        rec.midpoint_adjacent.push(ext.quadruple().adjacent(&mid));
        rec.times.push(k as f64 * prop.dt());
        rec.survival.push(interior_inner(grid, &next, &next).re);
        if opts.decimate > 0 && k % opts.decimate == 0 {
            rec.states.push((k, next.clone()));
        }
        cur = next;
    }
    rec.final_state = cur;
    Ok(rec)
}

/// Independent trajectories from several initial states.
pub fn evolve_batch(
    prop: &Propagator,
    initial: &[Vec<C64>],
    n_steps: usize,
    opts: RecordOptions,
    exec: Execution,
) -> Result<Vec<TrajectoryRecord>> {
    exec.try_map(initial.len(), |i| evolve(prop, &initial[i], n_steps, opts))
}

/// Exact `exp(−itH)` for a Hermitian generator.
#[derive(Debug, Clone)]
pub struct HermitianReference {
    eig: HermitianEig,
}

impl HermitianReference {
    pub fn new(ext: &GeneratorExtension) -> Result<Self> {
        Ok(Self { eig: hermitian_eig(ext.interior_matrix())? })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.eigenvalues
    }

    pub fn at(&self, x0: &[C64], t: f64) -> Vec<C64> {
        let u = &self.eig.eigenvectors;
        let coeffs = u.adjoint_matvec(x0);
        let rotated: Vec<C64> = coeffs
            .iter()
            .zip(&self.eig.eigenvalues)
            .map(|(c, &l)| c * C64::from_polar(1.0, -l * t))
            .collect();
        u.matvec(&rotated)
    }
}

pub fn hermitian_reference(ext: &GeneratorExtension, x0: &[C64], t: f64) -> Result<Vec<C64>> {
    ext.grid().check_interior(x0)?;
    Ok(HermitianReference::new(ext)?.at(x0, t))
}

const RADIUS_TOL: f64 = 1e-6;
const RADIUS_MAX_DOUBLINGS: u32 = 18;

/// Spectral radius of the step operator from the long-run growth rate
/// `(‖S^{2k}v‖ / ‖S^k v‖)^{1/k}` over doubling `k`.
pub fn spectral_radius_estimate(prop: &Propagator) -> Result<f64> {
    let n = prop.extension().n_interior();
    let mut v: Vec<C64> = (0..n)
        .map(|k| {
            let t = k as f64;
            C64::new(1.0 + 0.3 * (0.7 * t).sin(), 0.2 * (1.1 * t + 0.4).cos())
        })
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut log_norm = 0.0;
    let mut done = 0usize;
    let mut k = 16usize;
    let advance = |v: &mut Vec<C64>, steps: usize, log_norm: &mut f64| -> Result<()> {
        for _ in 0..steps {
            *v = prop.step(v)?;
            let s = norm(v);
            if s == 0.0 {
                return Ok(());
            }
            *log_norm += s.ln();
            v.iter_mut().for_each(|z| *z /= s);
        }
        Ok(())
    };
    advance(&mut v, k, &mut log_norm)?;
    done += k;
    let mut prev: Option<f64> = None;
    for _ in 0..RADIUS_MAX_DOUBLINGS {
        let start = log_norm;
        advance(&mut v, k, &mut log_norm)?;
        done += k;
        if norm(&v) == 0.0 {
            return Ok(0.0);
        }
        let rho = ((log_norm - start) / k as f64).exp();
        if let Some(p) = prev {
            if (rho - p).abs() <= RADIUS_TOL * rho {
                return Ok(rho);
            }
        }
        prev = Some(rho);
        k = done;
    }
    Err(Error::NoConvergence { iterations: done })
}

/// Zero vector on the interior of `prop`'s grid.
pub fn zero_interior(prop: &Propagator) -> Vec<C64> {
    vec![ZERO; prop.extension().n_interior()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extensions::{dirichlet, full_absorber, neumann, periodic, robin, Beta};
    use crate::grid::{gaussian_packet, make_grid_1d, make_grid_2d, Grid, Potential};
    use crate::numerics::ONE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> Grid {
        make_grid_1d(0.0, 1.0, n).unwrap().into()
    }

    fn rvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn rejects_bad_time_steps() {
        let g = line(8);
        let ext = dirichlet(&g, &Potential::zero(&g)).unwrap();
        assert!(matches!(make_propagator(&ext, 0.0), Err(Error::InvalidTimeStep(_))));
        assert!(matches!(make_propagator(&ext, f64::NAN), Err(Error::InvalidTimeStep(_))));
        assert!(make_propagator(&ext, 1e-3).unwrap().uses_tridiagonal_solver());
    }

    #[test]
    fn unitary_steps_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = line(30);
        let v = Potential::zero(&g);
        for ext in [dirichlet(&g, &v).unwrap(), neumann(&g, &v).unwrap(), periodic(&g, &v).unwrap()] {
            let prop = make_propagator(&ext, 1e-3).unwrap();
            let x = rvec(30, &mut rng);
            let y = prop.step(&x).unwrap();
            assert!((norm(&x) - norm(&y)).abs() < 1e-12 * norm(&x));
        }
    }

    #[test]
    fn absorber_step_is_strict_contraction_with_exact_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = line(20);
        let ext = full_absorber(&g, &Potential::zero(&g)).unwrap();
        let prop = make_propagator(&ext, 2e-3).unwrap();
        for _ in 0..10 {
            let x = rvec(20, &mut rng);
            let y = prop.step(&x).unwrap();
            assert!(norm(&y) < norm(&x));
            assert!(prop.balance_residual(&x).unwrap() < 1e-12);
        }
    }

    #[test]
    fn zero_state_stays_zero_and_semigroup_holds() {
        let g = line(16);
        let ext = robin(&g, &Potential::zero(&g), &Beta::PerNode(vec![ONE * 0.5, ONE])).unwrap();
        let prop = make_propagator(&ext, 1e-3).unwrap();
        let rec = evolve(&prop, &zero_interior(&prop), 5, RecordOptions::default()).unwrap();
        assert!(rec.survival.iter().all(|&s| s == 0.0));
        let x = rvec(16, &mut ChaCha8Rng::seed_from_u64(3));
        let two_n = prop.advance(&x, 40).unwrap();
        let n_then_n = prop.advance(&prop.advance(&x, 20).unwrap(), 20).unwrap();
        let diff: Vec<C64> = two_n.iter().zip(&n_then_n).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-10 * norm(&x));
    }

    #[test]
    fn survival_telescopes_over_a_trajectory() {
        let g = line(40);
        let ext = full_absorber(&g, &Potential::zero(&g)).unwrap();
        let prop = make_propagator(&ext, default_time_step(g.h())).unwrap();
        let x0 = gaussian_packet(&g, &[0.6], 0.08, &[20.0]).unwrap().interior;
        let rec = evolve(&prop, &x0, 400, RecordOptions { decimate: 100 }).unwrap();
        assert_eq!(rec.states.len(), 5);
        assert!(rec.survival.windows(2).all(|w| w[1] <= w[0] + 1e-14));
        let loss: f64 = rec
            .midpoint_gminus
            .iter()
            .map(|gm| prop.dt() * g.boundary_weight() * norm_sqr(gm))
            .sum();
        assert!((rec.survival[0] - rec.survival[400] - loss).abs() < 1e-9);
        assert!(rec.survival[400] < 0.9);
    }

    #[test]
    fn reference_is_exact_for_eigenvectors() {
        let g = line(12);
        let ext = dirichlet(&g, &Potential::zero(&g)).unwrap();
        let r = HermitianReference::new(&ext).unwrap();
        let x = rvec(12, &mut ChaCha8Rng::seed_from_u64(4));
        let back = r.at(&x, 0.0);
        assert!(norm(&back.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-12);
        let lam0 = r.eigenvalues()[0];
        let ev = hermitian_eig(ext.interior_matrix()).unwrap();
        let u0 = ev.eigenvectors.column(0);
        let t = 0.37;
        let out = r.at(&u0, t);
        for (o, u) in out.iter().zip(&u0) {
            assert!((o - u * C64::from_polar(1.0, -lam0 * t)).norm() < 1e-10);
        }
    }

    #[test]
    fn spectral_radius_diagnostic() {
        let g = line(32);
        let v = Potential::zero(&g);
        let d = make_propagator(&dirichlet(&g, &v).unwrap(), 1e-3).unwrap();
        assert!((spectral_radius_estimate(&d).unwrap() - 1.0).abs() < 1e-6);
        let a = make_propagator(&full_absorber(&g, &v).unwrap(), 1e-3).unwrap();
        assert!(spectral_radius_estimate(&a).unwrap() < 1.0);
    }

    #[test]
    fn two_dimensional_absorber_contracts() {
        let g: Grid = make_grid_2d(1.0, 1.0, 6, 6).unwrap().into();
        let ext = full_absorber(&g, &Potential::zero(&g)).unwrap();
        let prop = make_propagator(&ext, 0.01).unwrap();
        let x = rvec(36, &mut ChaCha8Rng::seed_from_u64(5));
        let y = prop.step(&x).unwrap();
        assert!(norm(&y) < norm(&x));
        assert!(prop.balance_residual(&x).unwrap() < 1e-12);
    }
}
