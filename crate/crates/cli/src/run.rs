//! Run orchestration and artifact output.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use mimetic_swe::assembly::Operators;
use mimetic_swe::consts::EARTH_RADIUS;
use mimetic_swe::geometry::{lonlat, CubedSphereMesh};
use mimetic_swe::solver::SolverSettings;
use mimetic_swe::swe::{default_c0, Diagnostics, Physics, ShallowWater, State, StepStats};
use mimetic_swe::testcases::{case_errors, init_state, CaseErrors, ErrorNorms, TestCaseSpec};
use serde_json::{json, Number, Value};
use thiserror::Error;

use crate::config::{ConfigError, SimConfig, Viscosity};

pub const MONITORS_FILE: &str = "monitors.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.txt";
pub const FAILED_MARKER: &str = "FAILED";
pub const ORDERS_FILE: &str = "orders.csv";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] mimetic_swe::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Model(mimetic_swe::Error::Config(_)) => 2,
            Self::Model(_) => 3,
            Self::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(num(x).parse::<Number>().expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn norms_json(n: &ErrorNorms) -> Value {
    json!({ "l1": json_num(n.l1), "l2": json_num(n.l2), "linf": json_num(n.linf) })
}

/// A CSV file written row by row.
struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Csv {
    fn create(path: PathBuf, header: &[&str]) -> Result<Self, RunError> {
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut csv = Self {
            out: BufWriter::new(file),
            path,
        };
        csv.row(header.iter().map(|s| s.to_string()))?;
        Ok(csv)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<(), RunError> {
        let line = fields.into_iter().collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(io_err(&self.path))
    }

    fn flush(&mut self) -> Result<(), RunError> {
        self.out.flush().map_err(io_err(&self.path))
    }
}

const MONITOR_HEADER: &[&str] = &[
    "step",
    "t_seconds",
    "mass_rel_err",
    "vorticity_integral",
    "energy_rel_err",
    "potential_enstrophy_rel_err",
    "divergence_L2",
    "solver_iters_momentum",
    "solver_iters_flux",
];

const ERROR_HEADER: &[&str] = &[
    "step",
    "t_seconds",
    "h_l1",
    "h_l2",
    "h_linf",
    "u_l1",
    "u_l2",
    "u_linf",
    "abs_vorticity_l1",
    "abs_vorticity_l2",
    "abs_vorticity_linf",
];

fn error_fields(e: &CaseErrors) -> Vec<f64> {
    [e.h, e.u, e.abs_vorticity]
        .iter()
        .flat_map(|n| [n.l1, n.l2, n.linf])
        .collect()
}

/// Final numbers of a run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub steps: usize,
    pub t_final: f64,
    pub c0: f64,
    pub mass_rel_err: f64,
    pub energy_rel_err: f64,
    pub potential_enstrophy_rel_err: f64,
    pub vorticity_integral: f64,
    pub errors: Option<CaseErrors>,
    pub wall_time: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b) / b
}

struct Recorder<'a> {
    dir: &'a Path,
    cfg: &'a SimConfig,
    spec: &'a TestCaseSpec,
    d0: Diagnostics,
    monitors: Csv,
    errors: Option<Csv>,
}

impl Recorder<'_> {
    fn monitor(&mut self, m: &mut ShallowWater, s: &State, step: usize, it: StepStats) -> Result<Diagnostics, RunError> {
        let d = m.diagnostics(s)?;
        let d0 = &self.d0;
        let energy = rel(d.energy, d0.energy);
        self.monitors.row([
            step.to_string(),
            num(s.t),
            num(rel(d.mass, d0.mass)),
            num(d.vorticity_integral),
            num(energy),
            num(rel(d.potential_enstrophy, d0.potential_enstrophy)),
            num(d.divergence_l2),
            it.momentum_iters.to_string(),
            it.flux_iters.to_string(),
        ])?;
        info!(
            "step {step} t={:.1} s energy drift {energy:.3e} min h {:.3} m iters {}/{}",
            s.t, d.min_depth, it.momentum_iters, it.flux_iters
        );
        if let Some(csv) = &mut self.errors {
            let e = case_errors(self.spec, m, s)?;
            let mut row = vec![step.to_string(), num(s.t)];
            row.extend(error_fields(&e).into_iter().map(num));
            csv.row(row)?;
        }
        Ok(d)
    }

    fn snapshot(&self, m: &ShallowWater, s: &State, step: usize) -> Result<(), RunError> {
        let path = self.dir.join(format!("snap_{step}.csv"));
        write_snapshot(&path, m, s, self.cfg.dedup_snapshots)
    }

    fn flush(&mut self) -> Result<(), RunError> {
        self.monitors.flush()?;
        if let Some(csv) = &mut self.errors {
            csv.flush()?;
        }
        Ok(())
    }
}

/// Writes depth, velocity and vorticity at the element GLL points.
pub fn write_snapshot(path: &Path, m: &ShallowWater, s: &State, dedup: bool) -> Result<(), RunError> {
    let ops = m.ops();
    let mesh = m.mesh();
    let nq = mesh.spaces().num_quad();
    let h = ops.interp_q_physical(&s.h);
    let v = ops.interp_u(&s.u);
    let w = ops.interp_w(&m.diagnose_vorticity(s));
    let mut csv = Csv::create(
        path.to_path_buf(),
        &["lon_deg", "lat_deg", "h", "u_zonal", "u_merid", "vorticity"],
    )?;
    let mut seen = vec![false; mesh.n_w()];
    for e in 0..mesh.num_elements() {
        let geom = mesh.geometry(e);
        for (q, pt) in geom.points.iter().enumerate() {
            if dedup {
                let id = mesh.w_dofs(e)[q];
                if std::mem::replace(&mut seen[id], true) {
                    continue;
                }
            }
            let k = e * nq + q;
            let (lon, lat) = lonlat(pt.xyz);
            let [uz, um] = pt.piola_to_sphere(v[k]);
            csv.row([lon.to_degrees(), lat.to_degrees(), h[k], uz, um, w[k]].map(num))?;
        }
    }
    csv.flush()
}

fn build_model(cfg: &SimConfig, spec: &TestCaseSpec) -> Result<(ShallowWater, f64), RunError> {
    let mesh = CubedSphereMesh::new(cfg.ne, cfg.p, EARTH_RADIUS)?;
    let c0 = match cfg.viscosity() {
        Viscosity::Auto => default_c0(&mesh),
        Viscosity::Fixed(c) => c,
    };
    let settings = SolverSettings {
        tol: cfg.solver_tol,
        max_iter: cfg.solver_max_iter,
    };
    let ops = Operators::new(mesh, settings)?;
    let physics = Physics {
        rotation_axis: spec.rotation_axis(),
        c0,
        ..Physics::default()
    };
    Ok((ShallowWater::new(ops, physics)?, c0))
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Runs one simulation and writes its artifacts into `cfg.output`.
///
/// On a numerical failure the artifacts written so far are kept, a `FAILED`
/// marker with the error message is added, and the error is returned.
pub fn run(cfg: &SimConfig) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let marker = dir.join(FAILED_MARKER);
    let summary = dir.join(SUMMARY_FILE);
    for stale in [&marker, &summary] {
        if stale.exists() {
            fs::remove_file(stale).map_err(io_err(stale))?;
        }
    }
    let result = simulate(cfg, dir);
    if let Err(e) = &result {
        if e.exit_code() == 3 {
            warn!("run failed: {e}");
            write_file(&marker, &format!("{e}\n"))?;
            if !summary.exists() {
                // failed before the first step
                let s = json!({
                    "status": "failed",
                    "testcase": cfg.testcase.to_string(),
                    "p": cfg.p,
                    "ne": cfg.ne,
                    "steps_completed": 0,
                    "message": e.to_string(),
                });
                let text = serde_json::to_string_pretty(&s).expect("summary serialises");
                write_file(&summary, &(text + "\n"))?;
            }
        }
    }
    result
}

fn simulate(cfg: &SimConfig, dir: &Path) -> Result<RunOutcome, RunError> {
    let wall = Instant::now();
    let spec = TestCaseSpec::new(cfg.testcase, EARTH_RADIUS).with_alpha(cfg.alpha);
    let (mut model, c0) = build_model(cfg, &spec)?;
    write_file(&dir.join(CONFIG_ECHO_FILE), &cfg.echo(c0))?;
    info!(
        "{} p={} N_e={} dt={} s, {} steps, c0={c0:.4e}",
        cfg.testcase,
        cfg.p,
        cfg.ne,
        cfg.dt,
        cfg.steps()
    );

    let mut state = init_state(&spec, model.mesh());
    let d0 = model.diagnostics(&state)?;
    let mut rec = Recorder {
        dir,
        cfg,
        spec: &spec,
        d0: d0.clone(),
        monitors: Csv::create(dir.join(MONITORS_FILE), MONITOR_HEADER)?,
        errors: if spec.has_reference() {
            Some(Csv::create(dir.join(ERRORS_FILE), ERROR_HEADER)?)
        } else {
            None
        },
    };
    let mut last = rec.monitor(&mut model, &state, 0, StepStats::default())?;
    rec.snapshot(&model, &state, 0)?;

    let steps = cfg.steps();
    let mut completed = 0;
    let mut failure = None;
    for step in 1..=steps {
        let stats = match model.rk2_step(&state, cfg.dt) {
            Ok((next, stats)) => {
                state = next;
                stats
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        completed = step;
        let at_end = step == steps;
        if step % cfg.monitor_interval == 0 || at_end {
            match rec.monitor(&mut model, &state, step, stats) {
                Ok(d) => last = d,
                Err(RunError::Model(e)) => {
                    failure = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if (cfg.snapshot_interval > 0 && step % cfg.snapshot_interval == 0) || at_end {
            rec.snapshot(&model, &state, step)?;
        }
    }
    rec.flush()?;

    let errors = if failure.is_none() && spec.has_reference() {
        Some(case_errors(&spec, &model, &state)?)
    } else {
        None
    };
    let outcome = RunOutcome {
        steps: completed,
        t_final: state.t,
        c0,
        mass_rel_err: rel(last.mass, d0.mass),
        energy_rel_err: rel(last.energy, d0.energy),
        potential_enstrophy_rel_err: rel(last.potential_enstrophy, d0.potential_enstrophy),
        vorticity_integral: last.vorticity_integral,
        errors,
        wall_time: wall.elapsed().as_secs_f64(),
    };
    let mut summary = json!({
        "status": if failure.is_some() { "failed" } else { "completed" },
        "testcase": cfg.testcase.to_string(),
        "p": cfg.p,
        "ne": cfg.ne,
        "dt": json_num(cfg.dt),
        "steps_requested": steps,
        "steps_completed": outcome.steps,
        "t_final_seconds": json_num(outcome.t_final),
        "c0": json_num(c0),
        "mass_rel_err": json_num(outcome.mass_rel_err),
        "energy_rel_err": json_num(outcome.energy_rel_err),
        "potential_enstrophy_rel_err": json_num(outcome.potential_enstrophy_rel_err),
        "vorticity_integral": json_num(outcome.vorticity_integral),
        "divergence_L2": json_num(last.divergence_l2),
        "min_depth": json_num(last.min_depth),
        "max_depth": json_num(last.max_depth),
        "wall_time_seconds": json_num(outcome.wall_time),
    });
    if let Some(e) = &outcome.errors {
        summary["errors"] = json!({
            "h": norms_json(&e.h),
            "u": norms_json(&e.u),
            "abs_vorticity": norms_json(&e.abs_vorticity),
        });
    }
    if let Some(e) = &failure {
        summary["message"] = Value::String(e.to_string());
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    write_file(&dir.join(SUMMARY_FILE), &(text + "\n"))?;

    match failure {
        Some(e) => {
            warn!("stopped after {completed} steps");
            Err(e.into())
        }
        None => {
            info!("completed {completed} steps in {:.2} s", outcome.wall_time);
            Ok(outcome)
        }
    }
}

/// Runs the configured case at each `N_e`, scaling the time step inversely
/// with resolution, and writes `orders.csv` with `log₂` error ratios of
/// consecutive runs. Each run writes into `ne_<N_e>/` below the output.
pub fn sweep(cfg: &SimConfig, nes: &[usize]) -> Result<Vec<RunOutcome>, RunError> {
    cfg.validate()?;
    let spec = TestCaseSpec::new(cfg.testcase, EARTH_RADIUS);
    if !spec.has_reference() {
        return Err(ConfigError::Invalid {
            key: "sweep".into(),
            value: cfg.testcase.to_string(),
            reason: "test case has no analytic reference".into(),
        }
        .into());
    }
    let mut outcomes = Vec::with_capacity(nes.len());
    let mut dts = Vec::with_capacity(nes.len());
    for &ne in nes {
        let sub = SimConfig {
            ne,
            dt: cfg.dt * nes[0] as f64 / ne as f64,
            output: cfg.output.join(format!("ne_{ne}")),
            ..cfg.clone()
        };
        dts.push(sub.dt);
        outcomes.push(run(&sub)?);
    }
    let path = cfg.output.join(ORDERS_FILE);
    let mut header = vec!["ne_coarse", "ne_fine", "dt_coarse", "dt_fine"];
    header.extend_from_slice(&ERROR_HEADER[2..]);
    let mut csv = Csv::create(path, &header)?;
    for k in 1..nes.len() {
        let (Some(c), Some(f)) = (&outcomes[k - 1].errors, &outcomes[k].errors) else {
            continue;
        };
        let mut row = vec![nes[k - 1].to_string(), nes[k].to_string(), num(dts[k - 1]), num(dts[k])];
        row.extend(
            error_fields(c)
                .into_iter()
                .zip(error_fields(f))
                .map(|(a, b)| num((a / b).log2())),
        );
        csv.row(row)?;
    }
    csv.flush()?;
    Ok(outcomes)
}
