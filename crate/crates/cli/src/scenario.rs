//! Turn an [`ExperimentConfig`] into grid, potential, generator and initial state.

use std::path::Path;

use absorb_core::extensions::{self, hardy_beta, validate_contraction, Beta, GeneratorExtension};
use absorb_core::grid::{gaussian_packet, make_grid_1d, make_grid_2d, sample_potential, Grid, Potential, PotentialSpec};
use absorb_core::numerics::ComplexMatrix;
use absorb_core::propagator::default_time_step;
use absorb_core::C64;

use crate::config::{parse_complex, BoundaryConfig, ConfigError, DomainConfig, ExperimentConfig, PotentialConfig, Side};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid,
    pub potential: Potential,
    pub extension: GeneratorExtension,
    pub initial: Vec<C64>,
    pub dt: f64,
    pub n_steps: usize,
}

impl Scenario {
    /// `n_steps · dt`, the simulated horizon after rounding to whole steps.
    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

pub fn build_grid(cfg: &ExperimentConfig) -> CliResult<Grid> {
    Ok(match cfg.domain {
        DomainConfig::Line { a, b, n } => make_grid_1d(a, b, n)?.into(),
        DomainConfig::Rectangle { lx, ly, nx, ny } => make_grid_2d(lx, ly, nx, ny)?.into(),
    })
}

pub fn build_potential(cfg: &ExperimentConfig, grid: &Grid) -> CliResult<Potential> {
    let spec = match &cfg.potential {
        PotentialConfig::Zero => return Ok(Potential::zero(grid)),
        PotentialConfig::Constant(v) => PotentialSpec::Constant(*v),
        PotentialConfig::Well { depth, lower, upper } => {
            PotentialSpec::Well { depth: *depth, lower: lower.clone(), upper: upper.clone() }
        }
        PotentialConfig::Table(v) => PotentialSpec::Table(v.clone()),
    };
    Ok(sample_potential(grid, &spec)?)
}

/// Boundary nodes on each side, in grid order.
fn side_of_node(grid: &Grid, m: usize) -> Side {
    match grid {
        Grid::OneD(_) => {
            if m == 0 {
                Side::Left
            } else {
                Side::Right
            }
        }
        Grid::TwoD(g) => {
            if m < g.nx {
                Side::Bottom
            } else if m < 2 * g.nx {
                Side::Top
            } else if m < 2 * g.nx + g.ny {
                Side::Left
            } else {
                Side::Right
            }
        }
    }
}

/// Read an `M × M` boundary contraction, one row per line, entries separated by commas.
pub fn read_phi_file(path: &Path, m: usize) -> CliResult<ComplexMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(ConfigError::Invalid(format!("boundary.phi.file {}: {e}", path.display())))
    })?;
    let invalid = |msg: String| CliError::Config(ConfigError::Invalid(format!("boundary.phi.file {}: {msg}", path.display())));
    let mut data = Vec::with_capacity(m * m);
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    if rows.len() != m {
        return Err(invalid(format!("expected {m} rows, found {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        let entries: Vec<&str> = row.split(',').collect();
        if entries.len() != m {
            return Err(invalid(format!("row {} has {} entries, expected {m}", i + 1, entries.len())));
        }
        for e in entries {
            data.push(parse_complex(e).ok_or_else(|| invalid(format!("row {}: bad entry `{}`", i + 1, e.trim())))?);
        }
    }
    Ok(ComplexMatrix::from_row_major(m, m, data)?)
}

pub fn build_extension(cfg: &ExperimentConfig, grid: &Grid, potential: &Potential) -> CliResult<GeneratorExtension> {
    let m = grid.n_boundary();
    Ok(match &cfg.boundary {
        BoundaryConfig::Dirichlet => extensions::dirichlet(grid, potential)?,
        BoundaryConfig::Neumann => extensions::neumann(grid, potential)?,
        BoundaryConfig::Periodic => extensions::periodic(grid, potential)?,
        BoundaryConfig::Robin { beta, sides } => {
            if sides.is_empty() {
                extensions::robin(grid, potential, &Beta::Scalar(*beta))?
            } else {
                let per_node = (0..m).map(|k| *sides.get(&side_of_node(grid, k)).unwrap_or(beta)).collect();
                extensions::robin(grid, potential, &Beta::PerNode(per_node))?
            }
        }
        BoundaryConfig::RobinTable(v) => extensions::robin(grid, potential, &Beta::PerNode(v.clone()))?,
        BoundaryConfig::Hardy { y_node } => {
            extensions::robin(grid, potential, &Beta::Matrix(hardy_beta(grid, *y_node)?))?
        }
        BoundaryConfig::PhiFile(path) => {
            let phi = validate_contraction(&read_phi_file(path, m)?)?;
            extensions::build_extension(grid, potential, &phi)?
        }
    })
}

pub fn build(cfg: &ExperimentConfig) -> CliResult<Scenario> {
    let grid = build_grid(cfg)?;
    let potential = build_potential(cfg, &grid)?;
    let packet = gaussian_packet(&grid, &cfg.packet.center, cfg.packet.sigma, &cfg.packet.momentum)?;
    let dt = cfg.dt.unwrap_or_else(|| default_time_step(grid.h()));
    let n_steps = ((cfg.t_final / dt).round() as usize).max(1);
    let extension = build_extension(cfg, &grid, &potential)?;
    Ok(Scenario { grid, potential, extension, initial: packet.interior, dt, n_steps })
}
