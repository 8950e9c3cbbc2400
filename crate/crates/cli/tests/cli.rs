use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mfgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfgrid")).args(args).env_remove("FP_WORKERS").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = mfgrid(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    mfgrid(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_grid(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec![
        "grid", "enumerate", "--function", "forrester", "--n-high-max", "4", "--n-low-max", "8", "--iterations", "2",
        "--seed", "3", "--quiet", "--out", s(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let o = s(&out);
    assert_eq!(code(&["grid", "enumerate", "--function", "trid", "--out", o]), 2);
    assert_eq!(code(&["grid", "enumerate", "--function", "nope", "--out", o]), 2);
    assert_eq!(code(&["grid", "enumerate", "--function", "booth", "--n-high-max", "5", "--n-low-max", "5", "--out", o]), 2);
    assert_eq!(code(&["grid", "enumerate", "--function", "booth", "--workers", "0", "--out", o]), 2);
    assert_eq!(code(&["doe", "generate", "--function", "booth", "--n-high", "5", "--n-low", "5"]), 2);
    let fit = tmp.path().join("fit.json");
    fs::write(&fit, "{}").unwrap();
    assert_eq!(code(&["analyze", "split", "--fit", s(&fit), "--phi", "1.5", "--budget", "10"]), 2);

    let bad = mfgrid(&["analyze", "split", "--fit", s(&fit), "--phi", "0.4", "--budget", "-1"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("--budget"));
}

#[test]
fn degenerate_fit_exits_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g");
    ok(&["grid", "enumerate", "--function", "forrester", "--n-high-max", "2", "--n-low-max", "6", "--iterations", "1", "--quiet", "--out", s(&g)]);
    assert_eq!(code(&["analyze", "fit", "--in", s(&g.join("grid.csv"))]), 4);
}

#[test]
fn output_directories_are_reproducible_across_runs_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small_grid(tmp.path(), "a", &["--workers", "1"]);
    let b = small_grid(tmp.path(), "b", &["--workers", "1"]);
    let c = small_grid(tmp.path(), "c", &["--workers", "3"]);
    let files = dir_contents(&a);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["grid.csv", "heatmap.csv", "manifest.json", "median.csv"]);
    assert_eq!(files, dir_contents(&b));
    assert_eq!(files, dir_contents(&c));

    let mut sub = Vec::new();
    for (name, workers) in [("s1", "1"), ("s2", "2")] {
        let out = tmp.path().join(name);
        ok(&[
            "grid", "subsample", "--function", "currin", "--n-high-max", "5", "--n-low-max", "9", "--iterations", "2",
            "--test-mode", "external", "--test-size-factor", "5", "--workers", workers, "--quiet", "--out", s(&out),
        ]);
        sub.push(dir_contents(&out));
    }
    assert_eq!(sub[0], sub[1]);
}

#[test]
fn workers_default_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small_grid(tmp.path(), "a", &[]);
    let out = tmp.path().join("b");
    let status = Command::new(env!("CARGO_BIN_EXE_mfgrid"))
        .args(["grid", "enumerate", "--function", "forrester", "--n-high-max", "4", "--n-low-max", "8"])
        .args(["--iterations", "2", "--seed", "3", "--quiet", "--out", s(&out)])
        .env("FP_WORKERS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(dir_contents(&a), dir_contents(&out));
    let bad = Command::new(env!("CARGO_BIN_EXE_mfgrid"))
        .args(["grid", "enumerate", "--function", "forrester", "--out", s(&out)])
        .env("FP_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn record_time_only_touches_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small_grid(tmp.path(), "a", &[]);
    let b = small_grid(tmp.path(), "b", &["--record-time"]);
    assert!(fs::read_to_string(b.join("manifest.json")).unwrap().contains("created_unix"));
    assert!(!fs::read_to_string(a.join("manifest.json")).unwrap().contains("created_unix"));
    for f in ["grid.csv", "median.csv", "heatmap.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn functions_list_json() {
    let out = ok(&["functions", "list", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 12);
    let trid = entries.iter().find(|e| e["name"] == "trid").unwrap();
    assert_eq!(trid["dim"], 10);
    assert_eq!(trid["adjustable"], true);
    let text = String::from_utf8(ok(&["functions", "list"]).stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("borehole")));
}

#[test]
fn doe_generate_layout() {
    let out = ok(&["doe", "generate", "--function", "park91a", "--n-high", "3", "--n-low", "7", "--seed", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "fidelity,x0,x1,x2,x3,y");
    assert_eq!(lines.len(), 11);
    assert_eq!(lines.iter().filter(|l| l.starts_with("high,")).count(), 3);
    assert!(lines[1..].iter().all(|l| !l.ends_with(',')));
    let again = ok(&["doe", "generate", "--function", "park91a", "--n-high", "3", "--n-low", "7", "--seed", "2"]);
    assert_eq!(text.as_bytes(), again.stdout.as_slice());
    let bare = ok(&["doe", "generate", "--function", "park91a", "--n-high", "3", "--n-low", "7", "--unevaluated"]);
    assert!(String::from_utf8(bare.stdout).unwrap().lines().skip(1).all(|l| l.ends_with(',')));
}

#[test]
fn grid_to_split_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g");
    ok(&[
        "grid", "enumerate", "--function", "currin", "--n-high-max", "6", "--n-low-max", "14", "--iterations", "2",
        "--quiet", "--out", s(&g),
    ]);
    let grid = g.join("grid.csv");
    let med = tmp.path().join("median.csv");
    let heat = tmp.path().join("heat.csv");
    ok(&["grid", "median", "--in", s(&grid), "--out", s(&med), "--heatmap", s(&heat)]);
    assert_eq!(fs::read(&med).unwrap(), fs::read(g.join("median.csv")).unwrap());
    assert_eq!(fs::read(&heat).unwrap(), fs::read(g.join("heatmap.csv")).unwrap());
    let median_text = fs::read_to_string(&med).unwrap();
    assert_eq!(median_text.lines().next(), Some("n_high,n_low,log10_median_mse"));
    assert_eq!(median_text.lines().count(), 1 + (2..=6).map(|h| 14 - h).sum::<usize>());

    let fit = tmp.path().join("fit.json");
    ok(&["analyze", "fit", "--in", s(&grid), "--ci-propagated", "--out", s(&fit)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&fit).unwrap()).unwrap();
    assert!(v["theta_deg"].is_f64());
    assert_eq!(v["n_points"], 2 * (2..=6).map(|h| 14 - h).sum::<usize>());
    assert!(v["theta_ci_propagated_deg"].is_array());

    let medians = ok(&["analyze", "fit", "--in", s(&grid), "--fit-on", "medians", "--fit-min-nh", "3"]);
    let vm: serde_json::Value = serde_json::from_slice(&medians.stdout).unwrap();
    assert_eq!(vm["n_points"], (3..=6).map(|h| 14 - h).sum::<usize>());

    let split = ok(&["analyze", "split", "--fit", s(&fit), "--phi", "0.4", "--budget", "3", "--initial", "3,7"]);
    let sv: serde_json::Value = serde_json::from_slice(&split.stdout).unwrap();
    let (dh, dl) = (sv["delta_n_h"].as_f64().unwrap(), sv["delta_n_l"].as_f64().unwrap());
    if sv["status"] == "ok" {
        assert!((dh + 0.4 * dl - 3.0).abs() < 1e-9);
    }
    let rounded = sv["rounded"].as_array().unwrap();
    let (rh, rl) = (rounded[0].as_u64().unwrap() as f64, rounded[1].as_u64().unwrap() as f64);
    assert!(rh + 0.4 * rl <= 3.0 + 1e-9);

    let ex = ok(&["analyze", "extrapolate", "--grid", s(&grid), "--fit", s(&fit), "--phi", "0.4", "--budget", "3", "--initial", "3,7"]);
    let text = String::from_utf8(ex.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("angle_deg,median_log10_mse,is_predicted"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 1);

    // Budget reaching past the grid edge.
    let far = mfgrid(&["analyze", "extrapolate", "--grid", s(&grid), "--fit", s(&fit), "--phi", "0.4", "--budget", "10", "--initial", "3,7"]);
    assert_eq!(far.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&far.stderr).contains("(13, 7)"));
}

#[test]
fn grid_manifest_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let g = small_grid(tmp.path(), "a", &[]);
    let manifest = fs::read_to_string(g.join("manifest.json")).unwrap();
    fs::write(g.join("manifest.json"), manifest.replace("\"seed\": 3", "\"seed\": 4")).unwrap();
    assert_eq!(code(&["analyze", "fit", "--in", s(&g.join("grid.csv"))]), 2);
}

#[test]
fn compare_subsampling_single_case() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    let run = ok(&[
        "study", "compare-subsampling", "--case", "adjustable-branin:0.25", "--n-high-max", "5", "--n-low-max", "10",
        "--iterations", "2", "--repeats", "1", "--test-size-factor", "5", "--quiet", "--out", s(&out),
    ]);
    assert!(String::from_utf8_lossy(&run.stdout).contains("correlation with enumeration"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let cases = report["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 1);
    assert!(cases[0]["enumeration_theta"].is_f64());
    assert_eq!(cases[0]["external_thetas"].as_array().unwrap().len(), 1);
    assert_eq!(cases[0]["cv_thetas"].as_array().unwrap().len(), 1);
    let angles = fs::read_to_string(out.join("angles.csv")).unwrap();
    let methods: Vec<&str> = angles.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(methods, ["enumeration", "subsample-external-test", "subsample-cv"], "{angles}");
}

#[test]
fn angle_vs_correlation_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("angles.csv");
    ok(&[
        "study", "angle-vs-correlation", "--case", "booth", "--case", "paciorek:0.1", "--n-high-max", "4",
        "--n-low-max", "8", "--iterations", "1", "--quiet", "--out", s(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "function,A,r,theta_deg,ci_low,ci_high");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("booth,,"));
    assert!(lines[2].starts_with("paciorek,0.1,"));
}
