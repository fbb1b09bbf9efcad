use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn addscreen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_addscreen"))
        .args(args)
        .current_dir(dir)
        .env_remove("ADDSCREEN_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["simulate", "--output", name];
    args.extend_from_slice(extra);
    ok(&addscreen(&args, dir));
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = addscreen(&["fit", "--input", "absent.csv", "--output", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("absent.csv"), "{msg}");
    assert!(!dir.path().join("r.json").exists());

    let out = addscreen(&["screen", "--input", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn screen_keeps_exactly_top_d() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", &["--example", "2", "--n", "80", "--p", "60"]);
    let out = addscreen(
        &["screen", "--input", "d.csv", "--top-d", "37", "--method", "sis", "--output", "s.csv"],
        dir.path(),
    );
    ok(&out);
    let mut rdr = csv::Reader::from_path(dir.path().join("s.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 60);
    let selected = rows.iter().filter(|r| &r[4] == "true").count();
    assert_eq!(selected, 37);
    let scores: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(rows.iter().take(37).all(|r| &r[4] == "true"));
}

#[test]
fn bench_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "bench", "--example", "2", "--n", "60", "--p", "30", "--reps", "10", "--methods",
            "ncrs,sis", "--seed", "5", "--output", out,
        ]
    };
    let a = addscreen(&args("a.csv"), dir.path());
    ok(&a);
    let mut with_threads = args("b.csv");
    with_threads.extend(["--threads", "2"]);
    let b = addscreen(&with_threads, dir.path());
    ok(&b);
    let fa = std::fs::read(dir.path().join("a.csv")).unwrap();
    let fb = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("NCRS") && text.contains("SIS"), "{text}");

    let report = addscreen(&["report", "--input", "a.csv"], dir.path());
    ok(&report);
    // the re-rendered table is the body of the bench output
    let body = String::from_utf8(report.stdout).unwrap();
    assert!(!body.is_empty() && text.contains(&body), "{body}\n---\n{text}");

    let short = addscreen(
        &["bench", "--example", "2", "--n", "60", "--p", "30", "--reps", "3", "--output", "c.csv"],
        dir.path(),
    );
    assert_eq!(short.status.code(), Some(2));
    assert!(!dir.path().join("c.csv").exists());
}

#[test]
fn fit_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "d.csv",
        &["--example", "4", "--n", "150", "--p", "40", "--sigma", "0.5", "--seed", "2"],
    );
    ok(&addscreen(&["fit", "--input", "d.csv", "--output", "r.json"], dir.path()));
    let report: Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("r.json")).unwrap()).unwrap();
    for key in ["intercept", "lambda1", "lambda2", "ebic"] {
        assert!(report[key].is_f64(), "{key}");
    }
    assert!(report.get("loocv_pe").is_none());
    let comps = report["components"].as_array().unwrap();
    assert_eq!(comps.len(), (150.0 / 150f64.ln()).floor() as usize);
    let mut nonzero = 0;
    for c in comps {
        let class = c["class"].as_str().unwrap();
        assert!(["zero", "linear", "nonlinear"].contains(&class));
        assert!(c["name"].as_str().unwrap().starts_with('x'));
        assert_eq!(c.get("slope").is_some(), class == "linear");
        if class == "zero" {
            assert!(c.get("curve").is_none());
        } else {
            nonzero += 1;
            assert_eq!(c["curve"]["x"].as_array().unwrap().len(), 100);
            assert_eq!(c["curve"]["y"].as_array().unwrap().len(), 100);
        }
    }
    assert!(nonzero >= 2, "{report}");
    // x1 carries the sine component
    let x1 = comps.iter().find(|c| c["name"] == "x1").expect("x1 screened in");
    assert_eq!(x1["class"], "nonlinear");
}

#[test]
fn sam_never_reports_linear_components() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "d.csv",
        &["--example", "4", "--n", "120", "--p", "30", "--sigma", "0.5", "--seed", "9"],
    );
    ok(&addscreen(
        &["fit", "--input", "d.csv", "--sam", "--top-d", "12", "--output", "r.json"],
        dir.path(),
    ));
    let report: Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("r.json")).unwrap()).unwrap();
    let comps = report["components"].as_array().unwrap();
    assert_eq!(comps.len(), 12);
    assert!(comps
        .iter()
        .all(|c| c["class"] == "zero" || c["class"] == "nonlinear"));
}

#[test]
fn simulate_then_fit_with_custom_response() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", &["--example", "1", "--n", "60", "--p", "20", "--c", "1"]);
    let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let renamed = text.replacen("y,", "target,", 1);
    std::fs::write(dir.path().join("e.csv"), renamed).unwrap();
    ok(&addscreen(
        &["fit", "--input", "e.csv", "--y-col", "target", "--top-d", "5", "--loocv", "--output", "r.json"],
        dir.path(),
    ));
    let report: Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(report["loocv_pe"].as_f64().unwrap() > 0.0);
    assert_eq!(report["components"].as_array().unwrap().len(), 5);

    let out = addscreen(&["fit", "--input", "e.csv", "--output", "r2.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`y`"));
}

#[test]
fn unwritable_output_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let out = addscreen(
        &["simulate", "--example", "2", "--n", "40", "--p", "12", "--output", "no/such/dir/d.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
