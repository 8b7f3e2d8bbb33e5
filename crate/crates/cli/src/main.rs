use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use mimetic_swe_cli::config::{parse_sweep, ConfigError, SimConfig, THREADS_ENV};
use mimetic_swe_cli::run::{run, sweep, RunError};

/// Mimetic spectral element shallow water model on the cubed sphere.
///
/// Settings are taken from the defaults, then the config file, then flags.
/// The worker thread count falls back to the MIMETIC_SWE_THREADS environment
/// variable when neither the file nor a flag sets it.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// rest, tc2, tc6 or galewsky.
    #[arg(long, allow_hyphen_values = true)]
    testcase: Option<String>,
    /// Polynomial degree (1..=16).
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    /// Elements per cube-face edge.
    #[arg(long, allow_hyphen_values = true)]
    ne: Option<String>,
    /// Time step in seconds.
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<String>,
    /// Simulated days.
    #[arg(long, allow_hyphen_values = true)]
    days: Option<String>,
    /// Flow angle of tc2 in radians.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Biharmonic coefficient in m⁴/s, or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    c0: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<String>,
    /// Steps between snapshots (0: first and last only).
    #[arg(long, allow_hyphen_values = true)]
    snapshot_interval: Option<String>,
    /// Steps between monitor rows.
    #[arg(long, allow_hyphen_values = true)]
    monitor_interval: Option<String>,
    /// Write shared GLL points once in snapshots.
    #[arg(long)]
    dedup_snapshots: bool,
    /// Relative residual target of the linear solves.
    #[arg(long, allow_hyphen_values = true)]
    solver_tol: Option<String>,
    /// Iteration cap of the linear solves.
    #[arg(long, allow_hyphen_values = true)]
    solver_max_iter: Option<String>,
    /// Worker threads.
    #[arg(long, allow_hyphen_values = true)]
    threads: Option<String>,
    /// Convergence sweep, e.g. `ne=4,8,16`; dt scales with 1/N_e.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Option<String>,
}

impl Cli {
    fn config(&self) -> Result<SimConfig, ConfigError> {
        let mut cfg = SimConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in [
            ("testcase", &self.testcase),
            ("p", &self.p),
            ("ne", &self.ne),
            ("dt", &self.dt),
            ("days", &self.days),
            ("alpha", &self.alpha),
            ("c0", &self.c0),
            ("output", &self.output),
            ("snapshot_interval", &self.snapshot_interval),
            ("monitor_interval", &self.monitor_interval),
            ("solver_tol", &self.solver_tol),
            ("solver_max_iter", &self.solver_max_iter),
            ("threads", &self.threads),
        ] {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.dedup_snapshots {
            cfg.dedup_snapshots = true;
        }
        if cfg.threads.is_none() {
            if let Ok(v) = std::env::var(THREADS_ENV) {
                cfg.threads = Some(v.trim().parse().map_err(|_| ConfigError::Invalid {
                    key: THREADS_ENV.into(),
                    value: v.clone(),
                    reason: "expected a positive integer".into(),
                })?);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let cfg = cli.config()?;
    let nes = cli.sweep.as_deref().map(parse_sweep).transpose()?;
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure {n} threads: {e}");
        }
    }
    match nes {
        Some(nes) => sweep(&cfg, &nes).map(|_| ()),
        None => run(&cfg).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
