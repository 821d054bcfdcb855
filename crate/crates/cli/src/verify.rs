//! Invariant suites for every module, run on seeded random inputs.
//!
//! A suite never aborts: core errors are reported as failed invariants.

use absorb_core::detection::{assemble, detection_cdf, exit_space_residual};
use absorb_core::dtn::{adjoint_identity_residual, choose_eta, dtn_map, eta_quadruple};
use absorb_core::extensions::{
    self, build_extension, constraint_subspace_distance, dissipation_identity_residual, dissipation_rate,
    validate_contraction, Beta, GeneratorExtension,
};
use absorb_core::grid::{
    gaussian_packet, inner_product, make_grid_1d, make_grid_2d, sample_potential, Grid, Potential, PotentialSpec,
    StateVector,
};
use absorb_core::numerics::{
    cayley_of_theta, hermitian_eig, hermitian_eigenvalues, operator_norm, solve_linear, ComplexMatrix, C64,
};
use absorb_core::propagator::{default_time_step, evolve, make_propagator, RecordOptions};
use absorb_core::quadruple::{minimal_kernel_dimension, QuadrupleMaps};
use absorb_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::scenario::{build, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Passes when `value ≤ tolerance`.
    AtMost,
    /// Passes when `value ≥ tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub module: String,
    pub passed: bool,
    pub invariants: Vec<InvariantResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub failed: usize,
    pub sign_flip_injected: bool,
    pub suites: Vec<SuiteResult>,
    pub config: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Negative control: replace the quadruple in the Green suite by one with `d` negated.
    pub inject_sign_flip: bool,
    pub exec: Execution,
}

struct Collector {
    results: Vec<InvariantResult>,
}

impl Collector {
    fn new() -> Self {
        Self { results: Vec::new() }
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.results.push(InvariantResult {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtMost,
            passed: value <= tolerance,
        });
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.results.push(InvariantResult {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtLeast,
            passed: value >= tolerance,
        });
    }

    /// Record `Err` as a failed invariant named after the check.
    fn run(&mut self, name: &str, f: impl FnOnce(&mut Self) -> absorb_core::Result<()>) {
        if let Err(e) = f(self) {
            self.results.push(InvariantResult {
                name: format!("{name}: {e}"),
                value: f64::NAN,
                tolerance: 0.0,
                comparison: Comparison::AtMost,
                passed: false,
            });
        }
    }
}

fn rvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn rstate(grid: &Grid, rng: &mut ChaCha8Rng) -> StateVector {
    StateVector { interior: rvec(grid.n_interior(), rng), boundary: rvec(grid.n_boundary(), rng) }
}

fn rmatrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_contraction(m: usize, rng: &mut ChaCha8Rng) -> absorb_core::Result<ComplexMatrix> {
    let a = rmatrix(m, rng);
    let s = operator_norm(&a)? * rng.gen_range(1.0..2.0);
    Ok(a.scale(C64::new(1.0 / s, 0.0)))
}

fn random_potential(grid: &Grid, rng: &mut ChaCha8Rng) -> absorb_core::Result<Potential> {
    sample_potential(grid, &PotentialSpec::Table((0..grid.n_interior()).map(|_| rng.gen_range(-3.0..3.0)).collect()))
}

fn line(n: usize) -> Grid {
    make_grid_1d(0.0, 1.0, n).expect("static grid").into()
}

fn square(n: usize) -> Grid {
    make_grid_2d(1.0, 1.0, n, n).expect("static grid").into()
}

fn label(g: &Grid) -> String {
    match g {
        Grid::OneD(g) => format!("1d n={}", g.n_interior),
        Grid::TwoD(g) => format!("2d {}x{}", g.nx, g.ny),
    }
}

fn suite_numerics(rng: &mut ChaCha8Rng, _: &VerifyOptions, c: &mut Collector) {
    c.run("numerics", |c| {
        let a = rmatrix(16, rng).hermitian_part();
        let eig = hermitian_eig(&a)?;
        c.at_most("eigen reconstruction", (&eig.reconstruct() - &a).frobenius_norm() / a.frobenius_norm(), 1e-12);
        let fast = hermitian_eigenvalues(&a)?;
        let gap = fast.iter().zip(&eig.eigenvalues).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        c.at_most("eigenvalue solvers agree", gap, 1e-10);
        let b = rvec(16, rng);
        let m = rmatrix(16, rng);
        let x = solve_linear(&m, &b)?;
        let r: Vec<C64> = m.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        c.at_most("LU solve residual", absorb_core::numerics::norm(&r) / absorb_core::numerics::norm(&b), 1e-12);
        let u = cayley_of_theta(&a)?;
        let defect = (&u.adjoint().matmul(&u) - &ComplexMatrix::identity(16)).max_abs();
        c.at_most("Cayley transform of Hermitian is unitary", defect, 1e-12);
        Ok(())
    });
}

fn suite_grid(rng: &mut ChaCha8Rng, _: &VerifyOptions, c: &mut Collector) {
    c.run("grid", |c| {
        for g in [line(32), square(7)] {
            let (x, y) = (rstate(&g, rng), rstate(&g, rng));
            let xy = inner_product(&g, &x, &y)?;
            let yx = inner_product(&g, &y, &x)?;
            c.at_most(format!("inner product conjugate symmetric ({})", label(&g)), (xy - yx.conj()).norm(), 1e-14);
            let center = vec![0.5; g.dim()];
            let p = gaussian_packet(&g, &center, 0.1, &vec![3.0; g.dim()])?;
            c.at_most(format!("packet normalized ({})", label(&g)), (inner_product(&g, &p, &p)?.re - 1.0).abs(), 1e-13);
        }
        Ok(())
    });
}

/// Grids on which the Green identity is checked.
pub fn green_grids() -> Vec<Grid> {
    vec![line(16), line(64), line(256), square(5), square(9), square(15)]
}

pub const GREEN_PAIRS: usize = 100;
pub const GREEN_TOL: f64 = 1e-10;

fn suite_green(rng: &mut ChaCha8Rng, opts: &VerifyOptions, c: &mut Collector) {
    for g in green_grids() {
        c.run(&format!("green identity ({})", label(&g)), |c| {
            let v = random_potential(&g, rng)?;
            let q = if opts.inject_sign_flip { QuadrupleMaps::flipped_unchecked(&g) } else { QuadrupleMaps::standard(&g)? };
            let mut worst: f64 = 0.0;
            for _ in 0..GREEN_PAIRS {
                let (x, y) = (rstate(&g, rng), rstate(&g, rng));
                worst = worst.max(q.green_identity_residual(&v, &x, &y)?);
            }
            c.at_most(format!("green identity ({})", label(&g)), worst, GREEN_TOL);
            Ok(())
        });
    }
}

fn suite_eta_green(rng: &mut ChaCha8Rng, opts: &VerifyOptions, c: &mut Collector) {
    for g in [line(16), line(64), square(5), square(9)] {
        c.run(&format!("eta green identity ({})", label(&g)), |c| {
            let v = random_potential(&g, rng)?;
            let eta = choose_eta(&g, &v)?;
            let q = eta_quadruple(&g, &v, eta, opts.exec)?;
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let (x, y) = (rstate(&g, rng), rstate(&g, rng));
                worst = worst.max(q.maps.green_identity_residual(&v, &x, &y)?);
            }
            c.at_most(format!("eta green identity ({})", label(&g)), worst, GREEN_TOL);
            Ok(())
        });
    }
}

fn suite_dissipation(rng: &mut ChaCha8Rng, _: &VerifyOptions, c: &mut Collector) {
    for g in [line(16), square(5)] {
        c.run(&format!("dissipation ({})", label(&g)), |c| {
            let v = random_potential(&g, rng)?;
            let (mut worst, mut max_rate) = (0.0f64, f64::NEG_INFINITY);
            for _ in 0..20 {
                let phi = validate_contraction(&random_contraction(g.n_boundary(), rng)?)?;
                let ext = build_extension(&g, &v, &phi)?;
                let x = rvec(g.n_interior(), rng);
                worst = worst.max(dissipation_identity_residual(&ext, &x)?);
                let scale = g.interior_weight() * absorb_core::numerics::norm_sqr(&x) / (g.h() * g.h());
                max_rate = max_rate.max(dissipation_rate(&ext, &x)? / scale);
            }
            c.at_most(format!("loss rate identity ({})", label(&g)), worst, 1e-10);
            c.at_most(format!("relative loss rate is non-positive ({})", label(&g)), max_rate, 1e-12);
            Ok(())
        });
    }
}

fn norm_drift(ext: &GeneratorExtension, x0: &[C64], steps: usize) -> absorb_core::Result<f64> {
    let prop = make_propagator(ext, default_time_step(ext.grid().h()))?;
    let rec = evolve(&prop, x0, steps, RecordOptions::default())?;
    let s0 = rec.survival[0];
    Ok(rec.survival.iter().map(|s| (s - s0).abs()).fold(0.0, f64::max) / s0)
}

fn suite_unitary(rng: &mut ChaCha8Rng, _: &VerifyOptions, c: &mut Collector) {
    let g = line(64);
    c.run("unitary catalogue", |c| {
        let v = Potential::zero(&g);
        let x0 = rvec(64, rng);
        let gamma: Vec<C64> = (0..2).map(|_| C64::new(0.0, rng.gen_range(-2.0..2.0))).collect();
        let cases = [
            ("dirichlet", extensions::dirichlet(&g, &v)?),
            ("neumann", extensions::neumann(&g, &v)?),
            ("periodic", extensions::periodic(&g, &v)?),
            ("imaginary beta", extensions::robin(&g, &v, &Beta::PerNode(gamma))?),
        ];
        for (name, ext) in cases {
            c.at_most(format!("{name} norm drift over 1000 steps"), norm_drift(&ext, &x0, 1000)?, 1e-9);
        }
        Ok(())
    });
}

fn suite_contraction(rng: &mut ChaCha8Rng, _: &VerifyOptions, c: &mut Collector) {
    c.run("contraction", |c| {
        let g = square(6);
        let v = random_potential(&g, rng)?;
        let phi = validate_contraction(&random_contraction(g.n_boundary(), rng)?)?;
        let ext = build_extension(&g, &v, &phi)?;
        let prop = make_propagator(&ext, default_time_step(g.h()))?;
        let mut x = rvec(g.n_interior(), rng);
        let (mut worst_increase, mut worst_balance) = (f64::NEG_INFINITY, 0.0f64);
        for _ in 0..500 {
            let before = absorb_core::numerics::norm_sqr(&x);
            worst_balance = worst_balance.max(prop.balance_residual(&x)?);
            x = prop.step(&x)?;
            worst_increase = worst_increase.max((absorb_core::numerics::norm_sqr(&x) - before) / before);
        }
        c.at_most("per-step norm increase", worst_increase, 1e-13);
        c.at_most("per-step balance", worst_balance, 1e-10);
        Ok(())
    });
}

fn suite_detection(rng: &mut ChaCha8Rng, _: &VerifyOptions, c: &mut Collector) {
    c.run("detection", |c| {
        let g = line(100);
        let v = Potential::zero(&g);
        let beta = vec![C64::new(rng.gen_range(0.0..3.0), 0.0), C64::new(rng.gen_range(0.0..3.0), 0.0)];
        let ext = extensions::robin(&g, &v, &Beta::PerNode(beta.clone()))?;
        let x0 = gaussian_packet(&g, &[0.5], 0.08, &[15.0])?.interior;
        let prop = make_propagator(&ext, default_time_step(g.h()))?;
        let rec = evolve(&prop, &x0, 400, RecordOptions::default())?;
        let series = detection_cdf(&rec, &ext, true)?;
        c.at_most("telescoping", series.telescoping_residual(&rec), 1e-9);
        let flux = series.per_node_flux.as_ref().expect("flux requested");
        let w = g.boundary_weight();
        let mut worst: f64 = 0.0;
        for (k, a) in rec.midpoint_adjacent.iter().enumerate() {
            let b = ext.reconstruction().matvec(a);
            let robin: f64 = (0..2).map(|j| 2.0 * beta[j].re * ((a[j] + b[j]) * 0.5).norm_sqr()).sum::<f64>() * w;
            worst = worst.max((series.density[k] - robin).abs());
            worst = worst.max((series.density[k] - w * flux[k].iter().sum::<f64>()).abs());
        }
        let peak = series.density.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        c.at_most("density equals boundary flux", worst / peak, 1e-10);
        let (x, y) = (rvec(100, rng), rvec(100, rng));
        c.at_most("exit-space identity", exit_space_residual(&ext, &x, &y)?, 1e-10);
        Ok(())
    });
}

fn suite_povm(rng: &mut ChaCha8Rng, opts: &VerifyOptions, c: &mut Collector) {
    c.run("povm", |c| {
        let g = line(16);
        let v = random_potential(&g, rng)?;
        let ext = extensions::robin(&g, &v, &Beta::Scalar(C64::new(rng.gen_range(0.2..2.0), 0.0)))?;
        let asm = assemble(&ext, default_time_step(g.h()), 200, opts.exec)?;
        c.at_most("completeness", asm.completeness_residual(opts.exec)?, 1e-9);
        c.at_most("additivity", asm.additivity_residual(77, opts.exec)?, 1e-12);
        for (name, el) in [("early", asm.element(0..77, opts.exec)?), ("never", asm.never_detected(opts.exec))] {
            let s = el.spectrum()?;
            c.at_most(format!("{name} Hermitian"), s.hermitian_residual, 1e-12);
            c.at_least(format!("{name} smallest eigenvalue"), s.min_eigenvalue, -1e-12);
            c.at_most(format!("{name} largest eigenvalue"), s.max_eigenvalue, 1.0 + 1e-9);
        }
        Ok(())
    });
}

fn suite_dtn(rng: &mut ChaCha8Rng, opts: &VerifyOptions, c: &mut Collector) {
    for g in [line(64), square(9)] {
        c.run(&format!("dtn ({})", label(&g)), |c| {
            let v = Potential::zero(&g);
            let eta = choose_eta(&g, &v)?;
            let d = dtn_map(&g, &v, eta, opts.exec)?;
            c.at_most(format!("D(eta) Hermitian ({})", label(&g)), d.hermitian_residual(), 1e-9);
            c.at_least(format!("D(eta) smallest singular value ({})", label(&g)), d.min_singular_value()?, 1e-6);
            let mut adj: f64 = 0.0;
            for _ in 0..10 {
                adj = adj.max(adjoint_identity_residual(&g, &v, eta, &rvec(g.n_boundary(), rng), &rvec(g.n_interior(), rng))?);
            }
            c.at_most(format!("adjoint identity ({})", label(&g)), adj, 1e-9);
            let q = eta_quadruple(&g, &v, eta, opts.exec)?;
            let neu = extensions::neumann(&g, &v)?;
            c.at_most(format!("Neumann via Cayley ({})", label(&g)), constraint_subspace_distance(&q.neumann()?, &neu)?, 1e-8);
            let beta = Beta::PerNode(
                (0..g.n_boundary()).map(|_| C64::new(rng.gen_range(0.0..2.0), rng.gen_range(-1.0..1.0))).collect(),
            );
            let via = q.robin(&beta)?;
            let direct = extensions::robin(&g, &v, &beta)?;
            c.at_most(format!("Robin via Cayley ({})", label(&g)), constraint_subspace_distance(&via, &direct)?, 1e-8);
            let other = eta_quadruple(&g, &v, eta - 1.5, opts.exec)?.robin(&beta)?;
            c.at_most(format!("Robin independent of eta ({})", label(&g)), constraint_subspace_distance(&via, &other)?, 1e-8);
            Ok(())
        });
    }
    c.run("krein", |c| {
        let g = line(16);
        let v = Potential::zero(&g);
        let q = eta_quadruple(&g, &v, choose_eta(&g, &v)?, opts.exec)?;
        let d = constraint_subspace_distance(&q.krein()?, &extensions::neumann(&g, &v)?)?;
        c.at_least("Krein-type differs from Neumann (1d n=16)", d, 1e-2);
        Ok(())
    });
}

fn suite_kernel(rng: &mut ChaCha8Rng, _: &VerifyOptions, c: &mut Collector) {
    for g in [line(16), square(5)] {
        c.run(&format!("minimal kernel ({})", label(&g)), |c| {
            let v = random_potential(&g, rng)?;
            let mut worst = 0usize;
            for _ in 0..5 {
                let lambda = C64::new(rng.gen_range(-10.0..200.0), rng.gen_range(-1.0..1.0));
                worst = worst.max(minimal_kernel_dimension(&g, &v, lambda)?);
            }
            c.at_most(format!("minimal operator kernel dimension ({})", label(&g)), worst as f64, 0.0);
            Ok(())
        });
    }
}

fn suite_config(sc: &Scenario, rng: &mut ChaCha8Rng, c: &mut Collector) {
    c.run("configured scenario", |c| {
        let ext = &sc.extension;
        let (mut green, mut diss, mut exit, mut bal) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let prop = make_propagator(ext, sc.dt)?;
        for _ in 0..20 {
            let (x, y) = (rstate(&sc.grid, rng), rstate(&sc.grid, rng));
            green = green.max(ext.quadruple().green_identity_residual(&sc.potential, &x, &y)?);
            diss = diss.max(dissipation_identity_residual(ext, &x.interior)?);
            exit = exit.max(exit_space_residual(ext, &x.interior, &y.interior)?);
            bal = bal.max(prop.balance_residual(&x.interior)?);
        }
        c.at_most("configured green identity", green, GREEN_TOL);
        c.at_most("configured loss rate identity", diss, 1e-10);
        c.at_most("configured exit-space identity", exit, 1e-10);
        c.at_most("configured step balance", bal, 1e-10);
        c.at_most("configured constraint residual", ext.constraint_residual(&sc.initial), 1e-10);
        Ok(())
    });
}

type SuiteFn = fn(&mut ChaCha8Rng, &VerifyOptions, &mut Collector);

const SUITES: &[(&str, &str, SuiteFn)] = &[
    ("numerics", "numerics", suite_numerics),
    ("grid", "grid", suite_grid),
    ("green-identity", "quadruple", suite_green),
    ("minimal-kernel", "quadruple", suite_kernel),
    ("dissipation", "extensions", suite_dissipation),
    ("unitary-catalogue", "propagator", suite_unitary),
    ("contraction", "propagator", suite_contraction),
    ("detection", "detection", suite_detection),
    ("povm", "detection", suite_povm),
    ("eta-green-identity", "dtn", suite_eta_green),
    ("dtn", "dtn", suite_dtn),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

fn suite_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn finish(name: &str, module: &str, c: Collector) -> SuiteResult {
    SuiteResult {
        suite: name.into(),
        module: module.into(),
        passed: c.results.iter().all(|r| r.passed),
        invariants: c.results,
    }
}

fn report(opts: &VerifyOptions, suites: Vec<SuiteResult>, config: Option<String>) -> VerifyReport {
    let failed = suites.iter().flat_map(|s| &s.invariants).filter(|r| !r.passed).count();
    VerifyReport { seed: opts.seed, passed: failed == 0, failed, sign_flip_injected: opts.inject_sign_flip, suites, config }
}

/// Every built-in suite, independent of any configuration.
pub fn verify_all(opts: &VerifyOptions) -> VerifyReport {
    let suites = opts.exec.map(SUITES.len(), |i| {
        let (name, module, f) = SUITES[i];
        let mut rng = suite_rng(opts.seed, i);
        let mut c = Collector::new();
        f(&mut rng, opts, &mut c);
        finish(name, module, c)
    });
    report(opts, suites, None)
}

/// Built-in suites plus the identities of the configured generator.
pub fn verify_config(cfg: &ExperimentConfig, opts: &VerifyOptions) -> CliResult<VerifyReport> {
    let sc = build(cfg)?;
    let mut r = verify_all(opts);
    let mut c = Collector::new();
    suite_config(&sc, &mut suite_rng(opts.seed, SUITES.len()), &mut c);
    r.suites.push(finish("configured", "extensions", c));
    Ok(report(opts, r.suites, Some(cfg.echo())))
}
