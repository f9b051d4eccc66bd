use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use catlift::commands::{gie_columns, FORCE_COLUMNS, ROBUSTNESS_COLUMNS, TABLE_COLUMNS, TRAJECTORY_COLUMNS, WIGNER_COLUMNS};
use catlift::config::DEFAULT_CONFIG;
use serde_json::Value;

const EXPANSION: &str = include_str!("../scenarios/expansion.toml");

fn catlift(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_catlift"));
    c.args(args);
    match threads {
        Some(t) => c.env("CATLIFT_THREADS", t),
        None => c.env_remove("CATLIFT_THREADS"),
    };
    c.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Runs a subcommand into `out` and returns the parsed CSV.
fn run_csv(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = catlift(&args, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

/// A fast variant of the default scenario for sweeps.
fn quick_config() -> String {
    DEFAULT_CONFIG
        .replace("samples = 100000", "samples = 2000")
        .replace("t_points = 41", "t_points = 5")
        .replace("points = 61", "points = 7")
}

fn assert_schema(header: &[String], rows: &[Vec<String>], columns: &[&str]) {
    assert_eq!(header, columns);
    assert!(!rows.is_empty());
    for row in rows {
        assert_eq!(row.len(), columns.len());
        for cell in &row[1..] {
            assert!(num(cell).is_finite(), "{cell}");
        }
    }
}

#[test]
fn every_subcommand_round_trips_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "quick.toml", &quick_config());
    let gie = gie_columns();
    let gie: Vec<&str> = gie.iter().map(String::as_str).collect();
    for (cmd, cols) in [
        ("table", TABLE_COLUMNS),
        ("trajectory", TRAJECTORY_COLUMNS),
        ("wigner", WIGNER_COLUMNS),
        ("force", FORCE_COLUMNS),
        ("gie", &gie[..]),
        ("robustness", ROBUSTNESS_COLUMNS),
    ] {
        let out = dir.path().join(format!("{cmd}.csv"));
        let (h, rows) = run_csv(cmd, &cfg, &out, &[]);
        assert_schema(&h, &rows, cols);

        let json = dir.path().join(format!("{cmd}.json"));
        let o = catlift(&[cmd, "--config", cfg.to_str().unwrap(), "--out", json.to_str().unwrap(), "--format", "json"], None);
        assert!(o.status.success());
        let v: Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
        let records = v.as_array().unwrap();
        assert_eq!(records.len(), rows.len());
        let keys: Vec<&str> = records[0].as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, cols);
        for (rec, row) in records.iter().zip(&rows) {
            for (k, cell) in cols.iter().zip(row).skip(1) {
                assert_eq!(rec[*k].as_f64().unwrap(), num(cell), "{cmd}.{k}");
            }
        }
    }
}

#[test]
fn table_reproduces_headline_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "table.toml", DEFAULT_CONFIG);
    let (h, rows) = run_csv("table", &cfg, &dir.path().join("t.csv"), &[]);
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    for (row, x0) in rows.iter().zip([7.3e-11, 7.3e-12, 7.3e-13]) {
        assert!((num(&row[col("x0_m")]) / x0 - 1.0).abs() < 0.01);
        // ω t_tot = 3π + 2ωT_o^G.
        let t_o = num(&row[col("t_o_g")]);
        assert!((num(&row[col("t_tot")]) - (3.0 * PI + 2.0 * t_o)).abs() < 1e-10);
        let w = num(&row[col("omega_rad_s")]);
        assert!((num(&row[col("t_tot_s")]) * w - num(&row[col("t_tot")])).abs() < 1e-10);
    }
    assert!((num(&rows[1][col("g_g")]) / 2.1e-15 - 1.0).abs() < 0.01);
    // 0.34 s and 0.12 s for set-up 2, to the printed rounding.
    assert!((num(&rows[1][col("t_tot_s")]) - 0.34).abs() < 0.01);
    assert!((num(&rows[1][col("t_o_g_s")]) - 0.12).abs() < 0.01);
}

#[test]
fn trajectory_of_small_cat_swaps_branches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "expansion.toml", EXPANSION);
    let (h, rows) = run_csv("trajectory", &cfg, &dir.path().join("traj.csv"), &[]);
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    let first = &rows[0];
    let last = rows.last().unwrap();
    let xp = |r: &Vec<String>| [num(&r[col("x_plus")]), num(&r[col("p_plus")]), num(&r[col("x_minus")]), num(&r[col("p_minus")])];
    assert_eq!(num(&first[col("t_minus")]), 0.6 * PI);
    assert_eq!(xp(first), [3.0, 0.0, -3.0, 0.0]);
    let end = xp(last);
    for (g, w) in end.iter().zip([-3.0, 0.0, 3.0, 0.0]) {
        assert!((g - w).abs() < 1e-12, "{end:?}");
    }
}

#[test]
fn wigner_grid_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "expansion.toml", EXPANSION);
    let (h, rows) = run_csv("wigner", &cfg, &dir.path().join("w.csv"), &[]);
    let (t, w) = (h.iter().position(|c| c == "t").unwrap(), h.iter().position(|c| c == "w").unwrap());
    let cell = (24.0 / 120.0) * (24.0 / 120.0);
    let first_t = num(&rows[0][t]);
    let total: f64 = rows.iter().filter(|r| num(&r[t]) == first_t).map(|r| num(&r[w])).sum::<f64>() * cell;
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn uncoupled_gie_never_entangles() {
    let dir = tempfile::tempdir().unwrap();
    let text = quick_config().replace("distance = 40e-6", "distance = 40e-6\ng_g = 0.0");
    let cfg = write(dir.path(), "g0.toml", &text);
    let (h, rows) = run_csv("gie", &cfg, &dir.path().join("g.csv"), &[]);
    let k = h.iter().position(|c| c == "lambda_pt").unwrap();
    assert!(rows.iter().all(|r| num(&r[k]) >= -1e-12));
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "quick.toml", &quick_config());
    let c = cfg.to_str().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let s = dir.path().join("s.csv");
    assert!(catlift(&["robustness", "--config", c, "--out", a.to_str().unwrap(), "--seed", "5"], Some("1")).status.success());
    assert!(catlift(&["robustness", "--config", c, "--out", b.to_str().unwrap(), "--seed", "5"], Some("3")).status.success());
    assert!(catlift(&["robustness", "--config", c, "--out", s.to_str().unwrap(), "--seed", "6"], None).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&s).unwrap());
}

#[test]
fn stdout_is_used_without_an_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "quick.toml", &quick_config());
    let o = catlift(&["force", "--config", cfg.to_str().unwrap()], None);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with(&FORCE_COLUMNS.join(",")));
}

#[test]
fn invalid_configs_fail_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write(dir.path(), "k.toml", &DEFAULT_CONFIG.replace("density = 3.5e3\n", "density = 3.5e3\nspin = 1\n"));
    let o = catlift(&["table", "--config", bad_key.to_str().unwrap()], None);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("spin") && err.contains("line"), "{err}");

    let bad_value = write(dir.path(), "v.toml", &DEFAULT_CONFIG.replacen("omega = 10.0", "omega = -10.0", 1));
    let o = catlift(&["table", "--config", bad_value.to_str().unwrap()], None);
    assert!(String::from_utf8_lossy(&o.stderr).contains("setup[0].omega"));

    let missing = dir.path().join("absent.toml");
    assert!(!catlift(&["table", "--config", missing.to_str().unwrap()], None).status.success());
}

#[test]
fn failures_leave_no_output_behind() {
    let dir = tempfile::tempdir().unwrap();
    // A zero force has no optimal time, so `force` fails after parsing.
    let cfg = write(dir.path(), "f0.toml", &quick_config().replace("force = 1e-30", "force = 0.0"));
    let out = dir.path().join("force.csv");
    let o = catlift(&["force", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(!o.status.success());
    assert!(!out.exists());
    let unwritable = dir.path().join("no/such/dir/t.csv");
    let good = write(dir.path(), "quick.toml", &quick_config());
    let o = catlift(&["table", "--config", good.to_str().unwrap(), "--out", unwritable.to_str().unwrap()], None);
    assert!(!o.status.success());
    let left: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left.len(), 2, "{left:?}");
}

#[test]
fn thread_cap_must_be_a_positive_integer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "quick.toml", &quick_config());
    for bad in ["0", "many"] {
        let o = catlift(&["table", "--config", cfg.to_str().unwrap()], Some(bad));
        assert!(!o.status.success());
        assert!(String::from_utf8_lossy(&o.stderr).contains("CATLIFT_THREADS"));
    }
}
