//! Command-line surface.

use std::ffi::OsString;
use std::path::PathBuf;

use absorb_core::Execution;
use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::output::write_json;
use crate::presets;
use crate::run::{dtn, povm, simulate, RunOptions, RunSummary};
use crate::verify::{verify_all, verify_config, VerifyOptions};

pub const THREADS_ENV: &str = "ABSORB_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "absorb-sim", version, about = "Detection-time experiments with absorbing boundary conditions")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Configuration file (flat `key = value` lines).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario instead of a configuration file.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Seed for randomized inputs; overrides `run.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "absorb-out")]
    pub out: PathBuf,
    /// Keep every K-th timeseries row (the last row is always kept); overrides `output.decimate`.
    #[arg(long, global = true, value_name = "K")]
    pub decimate: Option<usize>,
    /// Divide the density column by the total detection probability.
    #[arg(long, global = true)]
    pub normalize_density: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the configured packet and write the detection-time series.
    Simulate,
    /// Run the invariant suites of every module.
    Verify {
        /// Run the built-in suites without a configuration.
        #[arg(long)]
        all: bool,
        /// Test hook: negate the normal derivative in the Green-identity suite.
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// Dirichlet-to-Neumann map of the configured domain and potential.
    Dtn {
        /// Spectral parameter; defaults to `dtn.lambda`, else chosen below both spectra.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
    },
    /// Detection-time POVM over `[0, t_split)`, `[t_split, t_final)` and the never-detected effect.
    Povm {
        /// Split time; defaults to `povm.t_split`, else `t_final / 2`.
        #[arg(long)]
        t_split: Option<f64>,
    },
}

/// Cap rayon's global pool from [`THREADS_ENV`]. Returns the requested count.
pub fn configure_threads() -> CliResult<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    #[cfg(feature = "parallel")]
    {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(Some(n))
}

fn load_config(common: &CommonArgs) -> CliResult<Option<ExperimentConfig>> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(crate::config::ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))
            })?;
            ExperimentConfig::parse(&text)?
        }
        (None, Some(name)) => presets::load(name)?,
        (None, None) => return Ok(None),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(k) = common.decimate {
        cfg.output.decimate = k;
    }
    if common.normalize_density {
        cfg.output.normalize_density = true;
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn require(cfg: Option<ExperimentConfig>, command: &str) -> CliResult<ExperimentConfig> {
    cfg.ok_or_else(|| CliError::Usage(format!("{command} needs --config PATH or --preset NAME")))
}

fn report_run(s: &RunSummary, out: &std::path::Path) {
    let fmt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.9}"));
    println!(
        "{}: detection probability {}, survival {}, residuals green {:.2e} balance {:.2e} exit-space {:.2e}; wrote {}",
        s.command,
        fmt(s.total_detection_probability),
        fmt(s.survival_final),
        s.residuals.green,
        s.residuals.balance,
        s.residuals.exit_space,
        out.display()
    );
}

pub fn execute(cli: Cli) -> CliResult<i32> {
    configure_threads()?;
    let cfg = load_config(&cli.common)?;
    let opts = RunOptions { out: cli.common.out.clone(), preset: cli.common.preset.clone(), exec: Execution::Parallel };
    match cli.command {
        Command::Simulate => {
            let s = simulate(&require(cfg, "simulate")?, &opts)?;
            report_run(&s, &opts.out);
        }
        Command::Dtn { lambda } => {
            let mut cfg = require(cfg, "dtn")?;
            if lambda.is_some() {
                cfg.lambda = lambda;
            }
            let s = dtn(&cfg, &opts)?;
            report_run(&s, &opts.out);
        }
        Command::Povm { t_split } => {
            let mut cfg = require(cfg, "povm")?;
            if t_split.is_some() {
                cfg.t_split = t_split;
                cfg.validate()?;
            }
            let s = povm(&cfg, &opts)?;
            report_run(&s, &opts.out);
        }
        Command::Verify { all, inject_sign_flip } => {
            let seed = cli.common.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
            let vopts = VerifyOptions { seed, inject_sign_flip, exec: Execution::Parallel };
            let report = match cfg {
                Some(cfg) => verify_config(&cfg, &vopts)?,
                None if all => verify_all(&vopts),
                None => return Err(CliError::Usage("verify needs --all, --config PATH or --preset NAME".into())),
            };
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{text}");
            write_json(&cli.common.out, "verify.json", &report)?;
            if !report.passed {
                return Err(CliError::VerifyFailed { failed: report.failed });
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parse arguments and run; returns the process exit code. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
