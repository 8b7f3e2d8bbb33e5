use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const EARTH_RADIUS: f64 = 6.37122e6;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mimetic-swe"));
    c.env_remove("MIMETIC_SWE_THREADS").env("RUST_LOG", "warn");
    c
}

fn exec(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Column `name` of a CSV file as floats.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn echo_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("config.txt")).unwrap();
    text.lines()
        .find_map(|l| {
            let l = l.trim_start_matches("# ");
            let (k, v) = l.split_once('=')?;
            (k.trim() == key).then(|| v.trim().to_string())
        })
        .unwrap_or_else(|| panic!("{key} not echoed"))
}

#[test]
fn rest_state_conserves_mass_to_round_off() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("rest");
    let o = exec(bin().args(["--testcase", "rest", "--ne", "2", "--dt", "300", "--days"]).arg(format!("{}", 3000.0 / 86400.0)).arg("-o").arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let mass = column(&out.join("monitors.csv"), "mass_rel_err");
    assert_eq!(mass.len(), 11);
    assert!(mass.iter().all(|m| m.abs() <= 1e-13), "{mass:?}");
    assert!(!out.join("errors.csv").exists());
    assert!(!out.join("FAILED").exists());
}

#[test]
fn tc2_run_writes_all_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("tc2");
    let o = exec(
        bin()
            .args(["--testcase", "tc2", "--p", "3", "--ne", "2", "--dt", "600", "--days", "0.125"])
            .args(["--snapshot-interval", "9", "--monitor-interval", "3"])
            .arg("-o")
            .arg(&out),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["monitors.csv", "errors.csv", "snap_0.csv", "snap_9.csv", "snap_18.csv", "summary.json", "config.txt"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let steps = column(&out.join("monitors.csv"), "step");
    assert_eq!(steps, [0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0]);
    let h_l2 = column(&out.join("errors.csv"), "h_l2");
    assert!(h_l2.iter().all(|e| *e > 0.0 && *e < 0.05));

    // one row per GLL point of every element: 6 N_e² (p+1)²
    let snap = fs::read_to_string(out.join("snap_18.csv")).unwrap();
    assert_eq!(snap.lines().count(), 1 + 6 * 4 * 16);
    assert_eq!(snap.lines().next().unwrap(), "lon_deg,lat_deg,h,u_zonal,u_merid,vorticity");

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "completed");
    assert_eq!(summary["steps_completed"], 18);
    assert!(summary["errors"]["h"]["l2"].is_number());
}

#[test]
fn snapshot_velocity_matches_solid_body_rotation() {
    // tc2 with alpha = 0 is zonal: u = u0 cos(lat), v = 0
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sbr");
    let o = exec(
        bin()
            .args(["--testcase", "tc2", "--ne", "4", "--alpha", "0", "--dt", "60", "--days"])
            .arg(format!("{}", 60.0 / 86400.0))
            .arg("-o")
            .arg(&out),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let path = out.join("snap_0.csv");
    let lat = column(&path, "lat_deg");
    let uz = column(&path, "u_zonal");
    let um = column(&path, "u_merid");
    let u0 = 2.0 * PI * EARTH_RADIUS / (12.0 * 86400.0);
    for k in 0..lat.len() {
        if lat[k].abs() < 89.0 {
            assert!((uz[k] - u0 * lat[k].to_radians().cos()).abs() < 0.05 * u0, "{k}: {}", uz[k]);
            assert!(um[k].abs() < 0.05 * u0, "{k}: {}", um[k]);
        }
    }
}

#[test]
fn numbers_have_17_significant_digits() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("digits");
    let o = exec(bin().args(["--testcase", "tc2", "--ne", "2", "--dt", "600", "--days", "0.01"]).arg("-o").arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("monitors.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    for field in row.split(',').skip(1).take(6) {
        let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{field}");
    }
}

#[test]
fn invalid_values_exit_2_and_name_the_key() {
    let tmp = TempDir::new().unwrap();
    for (args, key) in [
        (vec!["--ne", "0"], "`ne`"),
        (vec!["--p", "17"], "`p`"),
        (vec!["--dt", "-5"], "`dt`"),
        (vec!["--days", "abc"], "`days`"),
        (vec!["--testcase", "tc9"], "`testcase`"),
        (vec!["--sweep", "p=3,4"], "`sweep`"),
    ] {
        let o = exec(bin().args(&args).arg("-o").arg(tmp.path().join("x")));
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains(key), "{args:?}: {}", stderr(&o));
    }
    let o = exec(bin().arg("--no-such-flag"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    let out = tmp.path().join("cfg");
    fs::write(
        &cfg,
        format!("# test run\ntestcase = tc6\nne = 3\ndt = 600\ndays = 0.01\noutput = {}\n", out.display()),
    )
    .unwrap();
    let o = exec(bin().arg("--config").arg(&cfg).args(["--ne", "2"]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(echo_value(&out, "testcase"), "tc6");
    assert_eq!(echo_value(&out, "ne"), "2");
    assert_eq!(echo_value(&out, "c0"), "auto");
    // auto viscosity: 0.0718 Δx^3.2 with Δx the equatorial node spacing
    let dx = 2.0 * PI * EARTH_RADIUS / (4.0 * 2.0 * 3.0);
    let c0: f64 = echo_value(&out, "resolved c0").parse().unwrap();
    assert!(((c0 - 0.0718 * dx.powf(3.2)) / c0).abs() < 1e-12);

    fs::write(&cfg, "ne = 2\nviscosity = 1\n").unwrap();
    let o = exec(bin().arg("--config").arg(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`viscosity`"));
}

#[test]
fn thread_count_from_environment_and_flag() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("threads");
    let base = ["--testcase", "rest", "--ne", "2", "--dt", "600", "--days", "0.01"];
    let o = exec(bin().env("MIMETIC_SWE_THREADS", "many").args(base).arg("-o").arg(&out));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MIMETIC_SWE_THREADS"));
    let o = exec(bin().env("MIMETIC_SWE_THREADS", "many").args(base).args(["--threads", "1"]).arg("-o").arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(echo_value(&out, "threads"), "1");
    let o = exec(bin().env("MIMETIC_SWE_THREADS", "2").args(base).arg("-o").arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(echo_value(&out, "threads"), "2");
}

#[test]
fn identical_runs_are_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = exec(
            bin()
                .args(["--testcase", "tc6", "--ne", "2", "--dt", "600", "--days", "0.05", "--threads", "2"])
                .arg("-o")
                .arg(&out),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("monitors.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn solver_failure_exits_3_and_leaves_marker() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("fail");
    let o = exec(
        bin()
            .args(["--testcase", "tc2", "--ne", "2", "--dt", "600", "--days", "0.1", "--solver-max-iter", "1"])
            .arg("-o")
            .arg(&out),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(out.join("FAILED").exists());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "failed");
    assert!(summary["message"].as_str().unwrap().contains("converge"));
}

#[test]
fn sweep_writes_orders() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sweep");
    let o = exec(
        bin()
            .args(["--testcase", "tc2", "--dt", "600", "--days", "0.05", "--sweep", "ne=2,4"])
            .arg("-o")
            .arg(&out),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("ne_2/errors.csv").exists());
    assert!(out.join("ne_4/errors.csv").exists());
    assert_eq!(echo_value(&out.join("ne_4"), "dt"), "3.0000000000000000e2");
    let h = column(&out.join("orders.csv"), "h_l2");
    assert_eq!(h.len(), 1);
    // p = 3: third order in N_e
    assert!(h[0] > 2.0 && h[0] < 4.0, "{h:?}");
}
