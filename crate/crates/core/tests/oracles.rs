//! Checks against values computed independently of the code under test:
//! closed-form spectra, recurrences, synthesized factorizations and the
//! named boundary conditions on an interval.

use std::f64::consts::PI;

use absorb_core::detection::assemble;
use absorb_core::dtn::{choose_eta, dtn_map, harmonic_extension};
use absorb_core::extensions::{dirichlet, full_absorber, neumann, periodic};
use absorb_core::grid::{gaussian_packet, make_grid_1d, make_grid_2d, sample_potential, Grid, Potential, PotentialSpec};
use absorb_core::numerics::{
    hermitian_eig, hermitian_eigenvalues, norm, orthonormal_columns, singular_values, solve_linear, sub, ComplexMatrix,
};
use absorb_core::propagator::{evolve, make_propagator, HermitianReference, RecordOptions};
use absorb_core::quadruple::{dirichlet_trace, minimal_kernel_dimension, neumann_trace};
use absorb_core::{Execution, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(a: f64, b: f64, n: usize) -> Grid {
    make_grid_1d(a, b, n).unwrap().into()
}

fn cvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    orthonormal_columns(&a)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn max_rel_gap(got: &[f64], want: &[f64], scale: f64) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter().zip(want).map(|(g, w)| (g - w).abs() / scale).fold(0.0, f64::max)
}

#[test]
fn synthesized_hermitian_spectrum_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 24;
    let q = random_unitary(n, &mut rng);
    let want = sorted((0..n).map(|_| rng.gen_range(-5.0..5.0)).collect());
    let a = &(&q * &ComplexMatrix::from_real_diag(&want)) * &q.adjoint();
    let a = a.hermitian_part();
    let full = hermitian_eig(&a).unwrap();
    assert!(max_rel_gap(&sorted(full.eigenvalues.clone()), &want, 5.0) < 1e-12);
    assert!((&full.reconstruct() - &a).max_abs() < 1e-12);
    assert!(max_rel_gap(&hermitian_eigenvalues(&a).unwrap(), &want, 5.0) < 1e-12);
}

#[test]
fn synthesized_singular_values_and_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 20;
    let (u, v) = (random_unitary(n, &mut rng), random_unitary(n, &mut rng));
    let mut want: Vec<f64> = (0..n).map(|k| 10f64.powf(-(k as f64) / 8.0)).collect();
    let a = &(&u * &ComplexMatrix::from_real_diag(&want)) * &v.adjoint();
    want.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let got = singular_values(&a).unwrap();
    assert!(max_rel_gap(&got, &want, 1.0) < 1e-12);

    let x = cvec(n, &mut rng);
    let back = solve_linear(&a, &a.matvec(&x)).unwrap();
    // Condition number 10^(19/8) bounds the forward error.
    assert!(norm(&sub(&back, &x)) / norm(&x) < 1e-11);
}

/// `4/h² sin²(θ)` for the given angles.
fn sine_spectrum(h: f64, angles: impl Iterator<Item = f64>) -> Vec<f64> {
    sorted(angles.map(|t| 4.0 / (h * h) * t.sin().powi(2)).collect())
}

#[test]
fn named_conditions_have_discrete_sine_and_cosine_spectra() {
    let n = 40;
    let grid = line(0.0, 1.0, n);
    let h = grid.h();
    let v = Potential::zero(&grid);
    let scale = 4.0 / (h * h);
    let spec = |ext| sorted(HermitianReference::new(&ext).unwrap().eigenvalues().to_vec());

    // b = −a: zero crossing half a cell outside the last interior node.
    let want = sine_spectrum(h, (1..=n).map(|j| j as f64 * PI / (2 * n) as f64));
    assert!(max_rel_gap(&spec(dirichlet(&grid, &v).unwrap()), &want, scale) < 1e-13);

    // b = a: reflecting half a cell outside.
    let want = sine_spectrum(h, (0..n).map(|j| j as f64 * PI / (2 * n) as f64));
    assert!(max_rel_gap(&spec(neumann(&grid, &v).unwrap()), &want, scale) < 1e-13);

    // Endpoint swap closes the chain into a ring of n sites.
    let want = sine_spectrum(h, (0..n).map(|j| j as f64 * PI / n as f64));
    assert!(max_rel_gap(&spec(periodic(&grid, &v).unwrap()), &want, scale) < 1e-13);
}

#[test]
fn named_conditions_enforce_their_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let grid = line(-1.0, 2.0, 17);
    let v = sample_potential(&grid, &PotentialSpec::Constant(0.7)).unwrap();
    let x = cvec(17, &mut rng);
    let traces = |ext: absorb_core::extensions::GeneratorExtension| {
        let s = ext.full_state(&x);
        (dirichlet_trace(&grid, &s).unwrap().values, neumann_trace(&grid, &s).unwrap().values)
    };
    let small = |z: C64| z.norm() < 1e-13;

    let (u, _) = traces(dirichlet(&grid, &v).unwrap());
    assert!(u.iter().all(|&z| small(z)));
    let (_, d) = traces(neumann(&grid, &v).unwrap());
    assert!(d.iter().all(|&z| small(z)));
    let (u, d) = traces(periodic(&grid, &v).unwrap());
    assert!(small(u[0] - u[1]));
    // Outward derivatives at opposite ends carry opposite signs.
    assert!(small(d[0] + d[1]));
}

/// Dirichlet-to-Neumann map of `−ψ'' = λψ` on a uniform chain, from the
/// two-term recurrence `ψ_k = A r^k + B r^{-k}`, `r + 1/r = 2 − λh²`.
fn recurrence_dtn(n: usize, h: f64, lambda: f64) -> [[f64; 2]; 2] {
    let c = 1.0 - 0.5 * lambda * h * h;
    assert!(c > 1.0, "oracle assumes lambda < 0");
    let r = c + (c * c - 1.0).sqrt();
    let last = n + 1;
    let basis = |k: usize| [r.powi(k as i32), r.powi(-(k as i32))];
    let avg = |k0: usize, k1: usize| {
        let (p, q) = (basis(k0), basis(k1));
        [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]
    };
    let (left, right) = (avg(0, 1), avg(n, last));
    let det = left[0] * right[1] - left[1] * right[0];
    let mut out = [[0.0; 2]; 2];
    for (col, (ul, ur)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
        let a = (ul * right[1] - ur * left[1]) / det;
        let b = (left[0] * ur - right[0] * ul) / det;
        let psi = |k: usize| a * basis(k)[0] + b * basis(k)[1];
        out[0][col] = (psi(0) - psi(1)) / h;
        out[1][col] = (psi(last) - psi(n)) / h;
    }
    out
}

#[test]
fn interval_dtn_matches_recurrence() {
    for (n, lambda) in [(32, -1.0), (9, -20.0), (64, -0.3)] {
        let grid = line(0.0, 1.0, n);
        let d = dtn_map(&grid, &Potential::zero(&grid), lambda, Execution::Sequential).unwrap();
        let want = recurrence_dtn(n, grid.h(), lambda);
        let scale = 2.0 / grid.h();
        for i in 0..2 {
            for j in 0..2 {
                let got = d.matrix[(i, j)];
                assert!((got.re - want[i][j]).abs() <= 1e-10 * scale && got.im.abs() <= 1e-12 * scale, "n={n} ({i},{j})");
            }
        }
    }
}

#[test]
fn harmonic_extension_solves_the_interior_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let grid: Grid = make_grid_2d(1.0, 1.0, 9, 9).unwrap().into();
    let v = sample_potential(&grid, &PotentialSpec::Constant(0.5)).unwrap();
    let lambda = choose_eta(&grid, &v).unwrap();
    let xi = cvec(grid.n_boundary(), &mut rng);
    let s = harmonic_extension(&grid, &v, lambda, &xi).unwrap();
    let u = dirichlet_trace(&grid, &s).unwrap().values;
    assert!(norm(&sub(&u, &xi)) < 1e-12 * norm(&xi));
    let applied = absorb_core::quadruple::apply_maximal(&grid, &v, &s).unwrap();
    let resid: Vec<C64> = applied.iter().zip(&s.interior).map(|(a, x)| a - x * lambda).collect();
    assert!(norm(&resid) < 1e-9 * norm(&applied).max(1.0));
}

#[test]
fn crank_nicolson_is_second_order() {
    let n = 128;
    let grid = line(0.0, 1.0, n);
    let ext = dirichlet(&grid, &Potential::zero(&grid)).unwrap();
    // Narrow enough to vanish at the walls; a truncated tail stalls convergence.
    let x0 = gaussian_packet(&grid, &[0.5], 0.05, &[10.0]).unwrap().interior;
    let t = 0.02;
    let exact = HermitianReference::new(&ext).unwrap().at(&x0, t);
    let err = |steps: usize| {
        let prop = make_propagator(&ext, t / steps as f64).unwrap();
        norm(&sub(&prop.advance(&x0, steps).unwrap(), &exact))
    };
    let (coarse, fine) = (err(160), err(320));
    let ratio = coarse / fine;
    assert!((3.4..=4.6).contains(&ratio), "error ratio {ratio} (coarse {coarse:.3e}, fine {fine:.3e})");
}

#[test]
fn minimal_kernel_is_trivial() {
    let grid = line(0.0, 1.0, 12);
    let v = Potential::zero(&grid);
    // A Dirichlet eigenvalue still gives no element with u = d = 0.
    let ev = HermitianReference::new(&dirichlet(&grid, &v).unwrap()).unwrap().eigenvalues()[3];
    assert_eq!(minimal_kernel_dimension(&grid, &v, C64::new(ev, 0.0)).unwrap(), 0);

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let sq: Grid = make_grid_2d(1.0, 1.0, 9, 9).unwrap().into();
    let v2 = Potential::zero(&sq);
    for _ in 0..3 {
        let lambda = C64::new(rng.gen_range(-50.0..400.0), 0.0);
        assert_eq!(minimal_kernel_dimension(&sq, &v2, lambda).unwrap(), 0);
    }
}

#[test]
fn never_detected_effect_shrinks_with_horizon() {
    let grid = line(0.0, 1.0, 8);
    let ext = full_absorber(&grid, &Potential::zero(&grid)).unwrap();
    let dt = absorb_core::propagator::default_time_step(grid.h());
    let steps = 400;
    let asm = assemble(&ext, dt, 2 * steps, Execution::Sequential).unwrap();
    let long = asm.never_detected(Execution::Sequential).matrix;
    let short = assemble(&ext, dt, steps, Execution::Sequential).unwrap().never_detected(Execution::Sequential).matrix;
    let diff = (&short - &long).hermitian_part();
    let min = hermitian_eigenvalues(&diff).unwrap()[0];
    assert!(min >= -1e-10, "E_never(T) - E_never(2T) has eigenvalue {min}");
}

#[test]
fn full_absorber_survival_decays_monotonically() {
    let grid = line(0.0, 1.0, 32);
    let ext = full_absorber(&grid, &Potential::zero(&grid)).unwrap();
    let prop = make_propagator(&ext, 1e-3).unwrap();
    let x0 = gaussian_packet(&grid, &[0.5], 0.1, &[20.0]).unwrap().interior;
    let rec = evolve(&prop, &x0, 200, RecordOptions::default()).unwrap();
    assert!(rec.survival.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    assert!(rec.survival[200] < rec.survival[0]);
}
