//! `simulate`, `dtn` and `povm`.

use std::path::PathBuf;
use std::time::Instant;

use absorb_core::detection::{assemble, detection_cdf, exit_space_residual, DetectionDensitySeries};
use absorb_core::dtn::{adjoint_identity_residual, choose_eta, dtn_map, eta_quadruple};
use absorb_core::grid::{interior_inner, StateVector};
use absorb_core::numerics::norm_sqr;
use absorb_core::propagator::{evolve, make_propagator, RecordOptions, TrajectoryRecord};
use absorb_core::{Execution, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv_table, sci, write_json, write_text};
use crate::scenario::{build, Scenario};

/// Tolerance of the per-row `cumulative + survival = ‖ψ₀‖²` check.
pub const TELESCOPING_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub preset: Option<String>,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub dim: usize,
    pub h: f64,
    pub n_interior: usize,
    pub n_boundary: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest relative Green-identity residual over seeded random state pairs.
    pub green: f64,
    /// Largest relative per-step norm-balance residual.
    pub balance: f64,
    /// Largest relative exit-space (norm-loss form) residual.
    pub exit_space: f64,
    /// `max |cumulative[k] + survival[k+1] − ‖ψ₀‖²|`; simulate only.
    pub telescoping: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtnReport {
    pub lambda: f64,
    pub lambda_auto: bool,
    pub hermitian_residual: f64,
    pub min_singular_value: f64,
    pub adjoint_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementReport {
    pub name: String,
    pub start_step: usize,
    pub end_step: usize,
    pub hermitian_residual: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `⟨Eψ₀, ψ₀⟩` for the configured packet.
    pub packet_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmReport {
    pub horizon_steps: usize,
    pub split_step: usize,
    pub completeness_residual: f64,
    pub additivity_residual: f64,
    pub elements: Vec<ElementReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub grid: GridInfo,
    pub dt: f64,
    pub n_steps: usize,
    pub t_final: f64,
    pub initial_norm: f64,
    pub total_detection_probability: Option<f64>,
    pub survival_final: Option<f64>,
    pub residuals: Residuals,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub dtn: Option<DtnReport>,
    pub povm: Option<PovmReport>,
    /// Canonical echo of the effective configuration.
    pub config: String,
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

const RANDOM_PAIRS: usize = 8;

/// Green, balance and exit-space residuals of the configured generator on seeded random inputs.
pub fn identity_residuals(sc: &Scenario, seed: u64) -> CliResult<Residuals> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = &sc.extension;
    let (n, m) = (sc.grid.n_interior(), sc.grid.n_boundary());
    let prop = make_propagator(ext, sc.dt)?;
    let mut r = Residuals { green: 0.0, balance: prop.balance_residual(&sc.initial)?, exit_space: 0.0, telescoping: None };
    for _ in 0..RANDOM_PAIRS {
        let psi = StateVector { interior: random_vec(n, &mut rng), boundary: random_vec(m, &mut rng) };
        let phi = StateVector { interior: random_vec(n, &mut rng), boundary: random_vec(m, &mut rng) };
        r.green = r.green.max(ext.quadruple().green_identity_residual(&sc.potential, &psi, &phi)?);
        r.balance = r.balance.max(prop.balance_residual(&psi.interior)?);
        r.exit_space = r.exit_space.max(exit_space_residual(ext, &psi.interior, &phi.interior)?);
    }
    Ok(r)
}

fn grid_info(sc: &Scenario) -> GridInfo {
    GridInfo { dim: sc.grid.dim(), h: sc.grid.h(), n_interior: sc.grid.n_interior(), n_boundary: sc.grid.n_boundary() }
}

fn base_summary(command: &str, cfg: &ExperimentConfig, sc: &Scenario, opts: &RunOptions, residuals: Residuals) -> RunSummary {
    RunSummary {
        command: command.into(),
        preset: opts.preset.clone(),
        seed: cfg.seed,
        grid: grid_info(sc),
        dt: sc.dt,
        n_steps: sc.n_steps,
        t_final: sc.horizon(),
        initial_norm: interior_inner(&sc.grid, &sc.initial, &sc.initial).re,
        total_detection_probability: None,
        survival_final: None,
        residuals,
        wall_clock_seconds: 0.0,
        outputs: Vec::new(),
        dtn: None,
        povm: None,
        config: cfg.echo(),
    }
}

/// Per-step `|Δ‖ψ‖² − dt·(‖ΦG₋‖² − ‖G₋‖²)|` relative to `‖ψ₀‖²`.
fn trajectory_balance(sc: &Scenario, rec: &TrajectoryRecord) -> f64 {
    let ext = &sc.extension;
    let w = sc.grid.boundary_weight();
    let s0 = rec.survival[0].max(f64::MIN_POSITIVE);
    rec.midpoint_gminus
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let pg = ext.phi().matrix().matvec(g);
            let predicted = rec.dt * w * (norm_sqr(&pg) - norm_sqr(g));
            ((rec.survival[k + 1] - rec.survival[k]) - predicted).abs() / s0
        })
        .fold(0.0, f64::max)
}

/// Rows kept by decimation: every `k`-th step and the last one.
fn kept_rows(n: usize, decimate: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&k| k % decimate == 0 || k + 1 == n)
}

/// Timeseries CSV; checks `cumulative + survival = ‖ψ₀‖²` on every emitted row.
pub fn timeseries_csv(
    rec: &TrajectoryRecord,
    series: &DetectionDensitySeries,
    decimate: usize,
    normalize: bool,
) -> CliResult<String> {
    let s0 = rec.survival[0];
    let density = if normalize { series.normalized_density() } else { series.density.clone() };
    let tol = TELESCOPING_TOL * s0.max(1.0);
    let mut rows = Vec::new();
    for k in kept_rows(series.density.len(), decimate) {
        let defect = (series.cumulative[k] + rec.survival[k + 1] - s0).abs();
        if !(defect <= tol) {
            return Err(CliError::Check {
                module: "detection",
                message: format!("telescoping defect {defect:.3e} at step {k} exceeds {tol:.1e}"),
            });
        }
        rows.push(vec![series.times[k], rec.survival[k + 1], density[k], series.cumulative[k]]);
    }
    Ok(csv_table(&["t_mid", "survival", "density", "cumulative"], rows))
}

/// Per-node contributions `w · 2 Im(ū d)`; each row sums to the density.
pub fn flux_csv(grid_weight: f64, series: &DetectionDensitySeries, decimate: usize) -> Option<String> {
    let flux = series.per_node_flux.as_ref()?;
    let m = flux.first().map_or(0, Vec::len);
    let mut header = vec!["t_mid".to_string()];
    header.extend((0..m).map(|j| format!("node_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = kept_rows(flux.len(), decimate).map(|k| {
        let mut row = vec![series.times[k]];
        row.extend(flux[k].iter().map(|f| f * grid_weight));
        row
    });
    Some(csv_table(&header, rows))
}

pub fn simulate(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<RunSummary> {
    let start = Instant::now();
    let sc = build(cfg)?;
    let prop = make_propagator(&sc.extension, sc.dt)?;
    let rec = evolve(&prop, &sc.initial, sc.n_steps, RecordOptions::default())?;
    let series = detection_cdf(&rec, &sc.extension, cfg.output.flux.is_some())?;
    let mut residuals = identity_residuals(&sc, cfg.seed)?;
    residuals.balance = residuals.balance.max(trajectory_balance(&sc, &rec));
    residuals.telescoping = Some(series.telescoping_residual(&rec));
    residuals.exit_space = residuals.exit_space.max(exit_space_residual(&sc.extension, &sc.initial, &rec.final_state)?);

    let csv = timeseries_csv(&rec, &series, cfg.output.decimate, cfg.output.normalize_density)?;
    let flux = flux_csv(sc.grid.boundary_weight(), &series, cfg.output.decimate);

    let mut summary = base_summary("simulate", cfg, &sc, opts, residuals);
    summary.total_detection_probability = series.cumulative.last().copied();
    summary.survival_final = rec.survival.last().copied();
    write_text(&opts.out, &cfg.output.timeseries, &csv)?;
    summary.outputs.push(cfg.output.timeseries.clone());
    if let (Some(text), Some(name)) = (flux, &cfg.output.flux) {
        write_text(&opts.out, name, &text)?;
        summary.outputs.push(name.clone());
    }
    summary.outputs.push(cfg.output.summary.clone());
    summary.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_json(&opts.out, &cfg.output.summary, &summary)?;
    Ok(summary)
}

pub const DTN_MATRIX_FILE: &str = "dtn_matrix.csv";
pub const POVM_EIGENVALUES_FILE: &str = "povm_eigenvalues.csv";

pub fn dtn(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<RunSummary> {
    let start = Instant::now();
    let sc = build(cfg)?;
    let mut residuals = identity_residuals(&sc, cfg.seed)?;
    let auto = choose_eta(&sc.grid, &sc.potential)?;
    let lambda = cfg.lambda.unwrap_or(auto);
    let map = dtn_map(&sc.grid, &sc.potential, lambda, opts.exec)?;

    // Green identity of the η-shifted quadruple joins the standard one.
    let eq = eta_quadruple(&sc.grid, &sc.potential, auto, opts.exec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let (n, m) = (sc.grid.n_interior(), sc.grid.n_boundary());
    let mut adjoint: f64 = 0.0;
    for _ in 0..RANDOM_PAIRS {
        let psi = StateVector { interior: random_vec(n, &mut rng), boundary: random_vec(m, &mut rng) };
        let phi = StateVector { interior: random_vec(n, &mut rng), boundary: random_vec(m, &mut rng) };
        residuals.green = residuals.green.max(eq.maps.green_identity_residual(&sc.potential, &psi, &phi)?);
        adjoint = adjoint.max(adjoint_identity_residual(&sc.grid, &sc.potential, lambda, &psi.boundary, &phi.interior)?);
    }
    let report = DtnReport {
        lambda,
        lambda_auto: cfg.lambda.is_none(),
        hermitian_residual: map.hermitian_residual(),
        min_singular_value: map.min_singular_value()?,
        adjoint_residual: adjoint,
    };

    let mut csv = String::from("row,col,re,im\n");
    for i in 0..m {
        for j in 0..m {
            let z = map.matrix[(i, j)];
            csv.push_str(&format!("{i},{j},{},{}\n", sci(z.re), sci(z.im)));
        }
    }
    let mut summary = base_summary("dtn", cfg, &sc, opts, residuals);
    summary.dtn = Some(report);
    write_text(&opts.out, DTN_MATRIX_FILE, &csv)?;
    summary.outputs = vec![DTN_MATRIX_FILE.into(), cfg.output.summary.clone()];
    summary.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_json(&opts.out, &cfg.output.summary, &summary)?;
    Ok(summary)
}

pub fn povm(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<RunSummary> {
    let start = Instant::now();
    let sc = build(cfg)?;
    let residuals = identity_residuals(&sc, cfg.seed)?;
    let horizon = sc.n_steps;
    let split = cfg.t_split.map_or(horizon / 2, |t| ((t / sc.dt).round() as usize).min(horizon));
    let asm = assemble(&sc.extension, sc.dt, horizon, opts.exec)?;
    let elements = [
        ("early", asm.element(0..split, opts.exec)?, 0, split),
        ("late", asm.element(split..horizon, opts.exec)?, split, horizon),
        ("never", asm.never_detected(opts.exec), horizon, horizon),
    ];
    let mut csv = String::from("element,index,eigenvalue\n");
    let mut reports = Vec::new();
    for (name, el, s, e) in &elements {
        let eig = el.eigenvalues()?;
        for (i, l) in eig.iter().enumerate() {
            csv.push_str(&format!("{name},{i},{}\n", sci(*l)));
        }
        reports.push(ElementReport {
            name: (*name).into(),
            start_step: *s,
            end_step: *e,
            hermitian_residual: el.matrix.hermitian_residual(),
            min_eigenvalue: eig.first().copied().unwrap_or(0.0),
            max_eigenvalue: eig.last().copied().unwrap_or(0.0),
            packet_probability: el.expectation(&sc.grid, &sc.initial),
        });
    }
    let report = PovmReport {
        horizon_steps: horizon,
        split_step: split,
        completeness_residual: asm.completeness_residual(opts.exec)?,
        additivity_residual: asm.additivity_residual(split, opts.exec)?,
        elements: reports,
    };
    let mut summary = base_summary("povm", cfg, &sc, opts, residuals);
    summary.total_detection_probability = Some(report.elements[0].packet_probability + report.elements[1].packet_probability);
    summary.survival_final = Some(report.elements[2].packet_probability);
    summary.povm = Some(report);
    write_text(&opts.out, POVM_EIGENVALUES_FILE, &csv)?;
    summary.outputs = vec![POVM_EIGENVALUES_FILE.into(), cfg.output.summary.clone()];
    summary.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_json(&opts.out, &cfg.output.summary, &summary)?;
    Ok(summary)
}
