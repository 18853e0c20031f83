//! End-to-end tests of the `wrapgp` binary.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

fn wrapgp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrapgp"))
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = wrapgp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    wrapgp(dir, args).status.code().expect("exit code")
}

/// Header and numeric rows of a comma-separated file.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn simulate_log_writes_x_y() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "log",
            "--n",
            "100",
            "--seed",
            "1",
            "-o",
            "d.csv",
        ],
    );
    let (header, rows) = table(&path(&dir, "d.csv"));
    assert_eq!(header, ["x", "y"]);
    assert_eq!(rows.len(), 100);
    assert!(rows
        .iter()
        .all(|r| (0.0..=2.5).contains(&r[0]) && (0.0..TAU).contains(&r[1])));
}

#[test]
fn simulate_log_gap_leaves_bands_empty() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "log-gap",
            "--n",
            "200",
            "--seed",
            "2",
            "-o",
            "d.csv",
        ],
    );
    let (_, rows) = table(&path(&dir, "d.csv"));
    assert_eq!(rows.len(), 200);
    for r in &rows {
        let u = r[0] / 2.5;
        assert!(
            !(u > 0.15 && u < 0.25) && !(u > 0.8 && u < 0.9),
            "x = {} in a censored band",
            r[0]
        );
    }
}

#[test]
fn simulate_wgp_truth_reproduces_data() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "wgp",
            "--n",
            "50",
            "--alpha",
            "10",
            "--beta",
            "20",
            "--theta",
            "0.01",
            "--tau2",
            "1",
            "--sigma2",
            "0.05",
            "--nu",
            "5",
            "--seed",
            "1",
            "--with-truth",
            "-o",
            "w.csv",
        ],
    );
    let (_, data) = table(&path(&dir, "w.csv"));
    let (header, truth) = table(&path(&dir, "w_truth.csv"));
    assert_eq!(header, ["x", "z", "k", "noise"]);
    assert_eq!(data.len(), 50);
    for (d, t) in data.iter().zip(&truth) {
        assert_eq!(d[0], t[0]);
        let u = t[1] + t[3];
        assert!((u - TAU * t[2] - d[1]).abs() < 1e-9);
    }
}

#[test]
fn simulate_rfid_writes_groups_and_truth() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "rfid",
            "--distances",
            "1,2,4",
            "--channels",
            "30",
            "--seed",
            "5",
            "--with-truth",
            "-o",
            "g.csv",
        ],
    );
    let text = std::fs::read_to_string(path(&dir, "g.csv")).unwrap();
    assert!(text.starts_with("test_id,distance,frequency,phase"));
    assert_eq!(text.lines().count(), 1 + 3 * 30);
    let truth = std::fs::read_to_string(path(&dir, "g_truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 4);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(dir.path(), &["simulate", "--function", "sine", "--seed", "1"]), 1);
    assert_eq!(code(dir.path(), &["benchmark", "--sizes", "50"]), 1, "seed is required");
    assert_eq!(
        code(
            dir.path(),
            &["fit", "--data", "d.csv", "--iters", "10", "--burnin", "20"]
        ),
        1
    );
    assert_eq!(code(dir.path(), &["fit", "--data", "d.csv", "--thin", "0"]), 1);
    assert_eq!(code(dir.path(), &["predict", "--trace", "t.json"]), 1, "no targets");
    assert_eq!(code(dir.path(), &["--help"]), 0);
    assert_eq!(code(dir.path(), &["--version"]), 0);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wrapgp"))
        .current_dir(dir.path())
        .env("WRAPGP_THREADS", "zero")
        .args(["simulate", "--function", "log", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two_and_name_the_line() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(dir.path(), &["fit", "--data", "missing.csv"]), 2);

    std::fs::write(path(&dir, "bad.csv"), "x,y\n0.1,0.5\n0.2,oops\n").unwrap();
    let out = wrapgp(dir.path(), &["fit", "--data", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    std::fs::write(path(&dir, "cols.csv"), "x,phase\n0.1,0.5\n").unwrap();
    let out = wrapgp(dir.path(), &["fit", "--data", "cols.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'y'"));
}

#[test]
fn degrees_flag_converts_angles() {
    let dir = TempDir::new().unwrap();
    let mut rad = String::from("x,y\n");
    let mut deg = String::from("x,y\n");
    for i in 0..20 {
        let y = (0.3 * i as f64) % TAU;
        rad.push_str(&format!("{i},{y}\n"));
        deg.push_str(&format!("{i},{}\n", y.to_degrees()));
    }
    std::fs::write(path(&dir, "rad.csv"), rad).unwrap();
    std::fs::write(path(&dir, "deg.csv"), deg).unwrap();
    let chain = ["--iters", "40", "--burnin", "20", "--thin", "1", "--seed", "3"];
    let mut a = vec!["fit", "--data", "rad.csv", "-o", "a.json"];
    a.extend(chain);
    let mut b = vec!["fit", "--data", "deg.csv", "--degrees", "-o", "b.json"];
    b.extend(chain);
    ok(dir.path(), &a);
    ok(dir.path(), &b);
    let ta: serde_json::Value = serde_json::from_slice(&std::fs::read(path(&dir, "a.json")).unwrap()).unwrap();
    let tb: serde_json::Value = serde_json::from_slice(&std::fs::read(path(&dir, "b.json")).unwrap()).unwrap();
    let ya = ta["data"]["y"].as_array().unwrap();
    let yb = tb["data"]["y"].as_array().unwrap();
    for (p, q) in ya.iter().zip(yb) {
        assert!((p.as_f64().unwrap() - q.as_f64().unwrap()).abs() < 1e-12);
    }
    assert_eq!(
        code(dir.path(), &["fit", "--data", "deg.csv"]),
        2,
        "degrees read as radians are out of range"
    );
}

#[test]
fn mismatched_trace_schema_is_rejected() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "log",
            "--n",
            "30",
            "--seed",
            "4",
            "-o",
            "d.csv",
        ],
    );
    ok(
        dir.path(),
        &[
            "fit", "--data", "d.csv", "--iters", "30", "--burnin", "10", "--thin", "1", "-o", "t.json",
        ],
    );
    let text = std::fs::read_to_string(path(&dir, "t.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["meta"]["schema_version"] = serde_json::json!(999);
    std::fs::write(path(&dir, "t.json"), v.to_string()).unwrap();
    let out = wrapgp(dir.path(), &["predict", "--trace", "t.json", "--grid", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn eval_scores_perfect_predictions_as_zero() {
    let dir = TempDir::new().unwrap();
    let xs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (7.0 * x) % TAU).collect();
    let mut data = String::from("x,y\n");
    let mut pred = String::from("x,mean_wrapped,var\n");
    let mut samples = String::from("x,s0,s1,s2\n");
    for (x, y) in xs.iter().zip(&ys) {
        data.push_str(&format!("{x},{y}\n"));
        pred.push_str(&format!("{x},{y},0\n"));
        samples.push_str(&format!("{x},{y},{y},{y}\n"));
    }
    std::fs::write(path(&dir, "d.csv"), data).unwrap();
    std::fs::write(path(&dir, "p.csv"), pred).unwrap();
    std::fs::write(path(&dir, "s.csv"), samples).unwrap();
    let out = ok(
        dir.path(),
        &["eval", "--data", "d.csv", "--pred", "p.csv", "--samples", "s.csv"],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rmse_circular"].as_f64(), Some(0.0));
    assert_eq!(v["rmse_circular_sqrt"].as_f64(), Some(0.0));
    assert_eq!(v["crps"].as_f64(), Some(0.0));
}

#[test]
fn negate_flag_restores_original_orientation() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "log",
            "--n",
            "60",
            "--seed",
            "8",
            "-o",
            "d.csv",
        ],
    );
    // Reflect the data so the phase decreases with x.
    let (_, rows) = table(&path(&dir, "d.csv"));
    let mut down = String::from("x,y\n");
    for r in &rows {
        down.push_str(&format!("{},{}\n", r[0], (TAU - r[1]) % TAU));
    }
    std::fs::write(path(&dir, "down.csv"), down).unwrap();
    ok(
        dir.path(),
        &[
            "fit", "--data", "down.csv", "--negate", "--method", "coupled", "--iters", "600", "--burnin", "300",
            "--thin", "3", "-o", "t.json",
        ],
    );
    ok(
        dir.path(),
        &[
            "predict",
            "--trace",
            "t.json",
            "--at-file",
            "down.csv",
            "--samples",
            "s.csv",
            "-o",
            "p.csv",
        ],
    );
    let out = ok(
        dir.path(),
        &["eval", "--data", "down.csv", "--pred", "p.csv", "--samples", "s.csv"],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rmse = v["rmse_circular_sqrt"].as_f64().unwrap();
    assert!(rmse < 0.5, "in-sample circular RMSE {rmse} on the reflected data");
}

#[test]
fn round_trip_at_paper_chain_length() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "log",
            "--n",
            "50",
            "--seed",
            "11",
            "-o",
            "train.csv",
        ],
    );
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "log",
            "--n",
            "500",
            "--seed",
            "12",
            "-o",
            "test.csv",
        ],
    );
    ok(
        dir.path(),
        &[
            "fit",
            "--data",
            "train.csv",
            "--iters",
            "10000",
            "--burnin",
            "5000",
            "--thin",
            "10",
            "--seed",
            "1",
            "-o",
            "t.json",
        ],
    );
    let trace: serde_json::Value = serde_json::from_slice(&std::fs::read(path(&dir, "t.json")).unwrap()).unwrap();
    assert_eq!(trace["samples"].as_array().unwrap().len(), 500);

    ok(
        dir.path(),
        &["predict", "--trace", "t.json", "--grid", "500", "-o", "grid.csv"],
    );
    let (header, rows) = table(&path(&dir, "grid.csv"));
    assert_eq!(rows.len(), 500);
    assert_eq!(header[0], "x");

    ok(
        dir.path(),
        &[
            "predict",
            "--trace",
            "t.json",
            "--at-file",
            "test.csv",
            "--samples",
            "s.csv",
            "-o",
            "p.csv",
        ],
    );
    let out = ok(
        dir.path(),
        &["eval", "--data", "test.csv", "--pred", "p.csv", "--samples", "s.csv"],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["rmse_circular", "rmse_circular_sqrt", "crps"] {
        let s = v[key].as_f64().unwrap();
        assert!(s.is_finite() && s >= 0.0, "{key} = {s}");
    }
    assert!(start.elapsed().as_secs() < 600);
}

#[test]
fn hierarchical_commands_run() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--function",
            "rfid",
            "--distances",
            "1,2,3",
            "--channels",
            "25",
            "--seed",
            "2",
            "-o",
            "g.csv",
        ],
    );
    ok(
        dir.path(),
        &[
            "hfit", "--data", "g.csv", "--iters", "200", "--burnin", "100", "--thin", "2", "-o", "h.json",
        ],
    );
    ok(
        dir.path(),
        &["hpredict", "--trace", "h.json", "--grid", "7", "-o", "dp.csv"],
    );
    let (header, rows) = table(&path(&dir, "dp.csv"));
    assert_eq!(header[0], "distance");
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0][0], 1.0);
    assert_eq!(rows[6][0], 3.0);
}

#[test]
fn benchmark_single_cell_and_plot_files() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "benchmark",
            "--seed",
            "1",
            "--sizes",
            "20",
            "--reps",
            "1",
            "--methods",
            "ordinary",
            "--iters",
            "60",
            "--burnin",
            "30",
            "--thin",
            "1",
            "-o",
            "b.csv",
        ],
    );
    let text = std::fs::read_to_string(path(&dir, "b.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,size,rep,rmse_circular,crps,error");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("ordinary,20,0,"));
    for metric in ["rmse_circular", "crps"] {
        let plot = std::fs::read_to_string(path(&dir, &format!("b_{metric}.txt"))).unwrap();
        assert!(plot.contains(metric));
    }
}

#[test]
fn benchmark_table_has_one_row_per_fit() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "benchmark",
            "--seed",
            "2",
            "--sizes",
            "15,20",
            "--reps",
            "2",
            "--methods",
            "wgp,coupled,ordinary",
            "--iters",
            "30",
            "--burnin",
            "10",
            "--thin",
            "2",
            "-o",
            "b.csv",
        ],
    );
    let text = std::fs::read_to_string(path(&dir, "b.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
}
