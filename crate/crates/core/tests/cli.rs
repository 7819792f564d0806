use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nalgebra::DMatrix;
use pglqr::cli::{
    execute, format_matrix, load_matrices, read_summary, read_trace, write_trace, Algorithm, MatrixFiles,
    RunConfig, TraceRow, TRACE_COLUMNS,
};
use pglqr::fit::running_min;
use tempfile::TempDir;

fn pglqr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pglqr")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn scalar(v: f64) -> String {
    format_matrix(&DMatrix::from_element(1, 1, v))
}

/// Writes the scalar plant `A = −1`, `B = Q = R = Σ = 1` and returns the dir.
fn scalar_plant_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    for (name, v) in [("A", -1.0), ("B", 1.0), ("Q", 1.0), ("R", 1.0), ("S", 1.0)] {
        write(dir.path(), &format!("{name}.txt"), &scalar(v));
    }
    dir
}

const SCALAR_KEYS: &str = "a = A.txt\nb = B.txt\nq = Q.txt\nr = R.txt\nsigma = S.txt\n";

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn scalar_files_run_kleinman_newton() {
    let dir = scalar_plant_dir();
    let cfg = write(dir.path(), "run.cfg", &format!("{SCALAR_KEYS}algorithm = kn\nout = out\n"));
    let out = pglqr(&["descent", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), TRACE_COLUMNS.join(","));
    let summary = read_summary(&dir.path().join("out/summary.json")).unwrap();
    assert!((summary.f_star - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    assert_eq!(read_trace(&dir.path().join("out/trace.csv")).unwrap().len(), summary.iterations.unwrap() + 1);
}

#[test]
fn invalid_configs_exit_2() {
    let dir = scalar_plant_dir();
    let p = dir.path();
    let missing = p.join("nope.cfg");
    assert_eq!(code(&pglqr(&["descent", "--config", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&pglqr(&["descent"])), 2);

    let bad = write(p, "bad.cfg", "preset = path20\nalgorithm = gd\nhorizon = 2\n");
    assert_eq!(code(&pglqr(&["descent", "--config", &bad])), 2);

    let wrong_command = write(p, "flow.cfg", "preset = path20\nalgorithm = flow:gradient\n");
    assert_eq!(code(&pglqr(&["descent", "--config", &wrong_command])), 2);
    assert_eq!(code(&pglqr(&["flow", "--config", &wrong_command, "--max-iter", "3"])), 2);
    assert_eq!(code(&pglqr(&["flow", "--config", &wrong_command, "--adaptive"])), 2);
}

#[test]
fn plant_violations_exit_2_with_report() {
    let dir = scalar_plant_dir();
    let p = dir.path();
    write(p, "Qneg.txt", &scalar(-1.0));
    let cfg = write(p, "q.cfg", "a = A.txt\nb = B.txt\nq = Qneg.txt\nr = R.txt\nalgorithm = kn\n");
    let out = pglqr(&["descent", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Q not PSD"));

    write(p, "B2.txt", "2 1\n1\n1\n");
    let cfg = write(p, "b.cfg", "a = A.txt\nb = B2.txt\nq = Q.txt\nr = R.txt\nalgorithm = kn\n");
    assert_eq!(code(&pglqr(&["descent", "--config", &cfg])), 2);

    write(p, "garbage.txt", "1 1\nx\n");
    let cfg = write(p, "g.cfg", "a = garbage.txt\nb = B.txt\nq = Q.txt\nr = R.txt\nalgorithm = kn\n");
    assert_eq!(code(&pglqr(&["descent", "--config", &cfg])), 2);
}

#[test]
fn load_matrices_reports_violations() {
    let dir = scalar_plant_dir();
    let p = dir.path();
    write(p, "Qneg.txt", &scalar(-1.0));
    let files = MatrixFiles {
        a: p.join("A.txt"),
        b: p.join("B.txt"),
        q: p.join("Qneg.txt"),
        r: p.join("R.txt"),
        sigma: None,
    };
    let err = load_matrices(&files).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("Q not PSD"));
    let ok = MatrixFiles { q: p.join("Q.txt"), ..files };
    assert_eq!(load_matrices(&ok).unwrap().n_states(), 1);
}

#[test]
fn destabilizing_initial_gain_exits_3() {
    let dir = scalar_plant_dir();
    write(dir.path(), "K0.txt", &scalar(-5.0));
    let cfg = write(dir.path(), "run.cfg", &format!("{SCALAR_KEYS}k0 = K0.txt\nalgorithm = gd\n"));
    assert_eq!(code(&pglqr(&["descent", "--config", &cfg])), 3);
}

#[test]
fn iteration_cap_exits_4_after_writing() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.cfg", "preset = path20\nalgorithm = gd\nout = out\n");
    let out = pglqr(&["descent", "--config", &cfg, "--max-iter", "5"]);
    assert_eq!(code(&out), 4);
    let rows = read_trace(&dir.path().join("out/trace.csv")).unwrap();
    assert_eq!(rows.len(), 6);
}

#[test]
fn unwritable_output_exits_5() {
    let dir = scalar_plant_dir();
    write(dir.path(), "blocker", "not a directory");
    let cfg = write(dir.path(), "run.cfg", &format!("{SCALAR_KEYS}algorithm = kn\nout = blocker/sub\n"));
    assert_eq!(code(&pglqr(&["descent", "--config", &cfg])), 5);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let a = write(p, "a.cfg", "preset = lollipop10_10\nalgorithm = pgd\nmax_iter = 300\nseed = 9\nout = a\n");
    let b = write(p, "b.cfg", "preset = lollipop10_10\nalgorithm = pgd\nmax_iter = 300\nseed = 9\nout = b\n");
    assert_eq!(code(&pglqr(&["pgd", "--config", &a])), 4);
    assert_eq!(code(&pglqr(&["pgd", "--config", &b])), 4);
    for file in ["trace.csv", "summary.json"] {
        assert_eq!(fs::read(p.join("a").join(file)).unwrap(), fs::read(p.join("b").join(file)).unwrap());
    }
}

#[test]
fn gradient_descent_trace_on_path() {
    let cfg = RunConfig::for_preset("path20", Algorithm::Gd, "unused");
    let (rows, summary) = execute(&cfg).unwrap();
    assert!(summary.converged);
    assert!(rows.windows(2).all(|w| w[1].f <= w[0].f * (1.0 + 64.0 * f64::EPSILON)));
    assert!(summary.log_gap_fit.unwrap().slope < 0.0);
}

#[test]
fn newton_on_path_converges_quickly() {
    let cfg = RunConfig::for_preset("path20", Algorithm::Kn, "unused");
    let (_, summary) = execute(&cfg).unwrap();
    assert!(summary.grad_norm <= 1e-10);
    assert!(summary.iterations.unwrap() <= 15);
}

#[test]
fn structured_stationarity_running_minimum() {
    let mut cfg = RunConfig::for_preset("lollipop10_10", Algorithm::Pgd, "unused");
    cfg.max_iter = Some(2000);
    let (rows, summary) = execute(&cfg).unwrap();
    assert!(summary.structured_optimum_may_differ);
    let s: Vec<f64> = rows.iter().map(|r| r.stationarity_norm).collect();
    let best = running_min(&s);
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    assert!(best.last().unwrap() < &s[0]);
    assert!(summary.restricted_curvature_max.unwrap() <= summary.lipschitz.unwrap());
}

#[test]
fn trace_round_trip_through_files() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("t.csv");
    write_trace(&[], &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 1);

    let rows: Vec<TraceRow> = (0..3)
        .map(|i| TraceRow {
            iter_or_t: i as f64,
            f: 1.0 / (i as f64 + 3.0),
            f_gap: f64::MIN_POSITIVE * (i + 1) as f64,
            grad_norm: std::f64::consts::PI.powi(i),
            stationarity_norm: 1e300,
            eta_or_dt: -0.0,
            spectral_abscissa: -std::f64::consts::E,
        })
        .collect();
    write_trace(&rows, &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 4);
    assert_eq!(read_trace(&path).unwrap(), rows);
}

#[test]
fn bench_writes_every_run() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    let res = pglqr(&["bench", "--out", out.to_str().unwrap(), "--max-iter", "20"]);
    // gradient descent and PGD stop at the cap
    assert_eq!(code(&res), 4);
    let mut names: Vec<String> =
        fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "lollipop10_10_pgd",
            "path20_flow_gradient",
            "path20_flow_natural_1",
            "path20_flow_quasi_newton",
            "path20_gd",
            "path20_kn",
            "path20_ngd"
        ]
    );
    for n in names {
        assert!(out.join(&n).join("trace.csv").exists() && out.join(&n).join("summary.json").exists());
    }
}

#[test]
fn log_level_from_environment() {
    let dir = scalar_plant_dir();
    let cfg = write(dir.path(), "run.cfg", &format!("{SCALAR_KEYS}algorithm = kn\nout = out\n"));
    let out = Command::new(env!("CARGO_BIN_EXE_pglqr"))
        .args(["descent", "--config", &cfg])
        .env("PGLQR_LOG_LEVEL", "info")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("INFO"));
}
