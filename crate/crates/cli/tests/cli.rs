use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_missbeam");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("MISSBEAM_SEED")
        .output()
        .expect("spawn missbeam")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "missbeam {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], needle: &str) {
    let out = run(args);
    assert!(!out.status.success(), "missbeam {args:?} unexpectedly succeeded");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(needle), "stderr of {args:?} lacks `{needle}`:\n{err}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--missions", "3", "--duration", "200", "--out", p(dir)];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    simulate(&a, &["--seed", "7"]);
    simulate(&b, &["--seed", "7"]);
    simulate(&c, &["--seed", "8"]);
    let da = read(&a.join("dataset.csv"));
    assert_eq!(da, read(&b.join("dataset.csv")));
    assert_ne!(da, read(&c.join("dataset.csv")));
    assert!(da.starts_with("time_s,b1,b2,b3,b4,valid,depth_m,vx,vy,vz,mission_id"));
    assert_eq!(da.lines().count(), 1 + 3 * 200);
    let split: serde_json::Value = serde_json::from_str(&read(&a.join("split.json"))).unwrap();
    assert_eq!(split["train"].as_array().unwrap().len(), 2);
    assert_eq!(split["test"].as_array().unwrap().len(), 1);
    let cfg: serde_json::Value = serde_json::from_str(&read(&a.join("config.json"))).unwrap();
    assert_eq!(cfg["seed"], 7);
}

#[test]
fn seed_precedence_flag_file_env_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("conf.json");
    std::fs::write(&conf, r#"{"seed": 5, "duration": 50}"#).unwrap();
    let seed_of = |dir: &Path| -> serde_json::Value {
        serde_json::from_str::<serde_json::Value>(&read(&dir.join("config.json"))).unwrap()["seed"].clone()
    };

    let d = tmp.path().join("fallback");
    ok(&["simulate", "--duration", "50", "--out", p(&d)]);
    assert_eq!(seed_of(&d), 42);

    let d = tmp.path().join("env");
    let out = Command::new(BIN)
        .args(["simulate", "--duration", "50", "--out", p(&d)])
        .env("MISSBEAM_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(seed_of(&d), 11);

    let d = tmp.path().join("file");
    ok(&["simulate", "--config", p(&conf), "--out", p(&d)]);
    assert_eq!(seed_of(&d), 5);
    assert_eq!(read(&d.join("dataset.csv")).lines().count(), 51);

    let d = tmp.path().join("flag");
    ok(&["simulate", "--config", p(&conf), "--seed", "9", "--out", p(&d)]);
    assert_eq!(seed_of(&d), 9);
}

#[test]
fn train_evaluate_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let models = tmp.path().join("models");
    let eval = tmp.path().join("eval");
    simulate(&data, &[]);
    let csv = data.join("dataset.csv");
    let split = data.join("split.json");
    ok(&[
        "train", "--data", p(&csv), "--split", p(&split), "--missing", "2;3,4", "--hidden", "8",
        "--lstm-output", "4", "--epochs", "2", "--out", p(&models),
    ]);
    for f in ["model_2.json", "model_3-4.json", "loss_2.csv", "loss_3-4.csv", "config.json"] {
        assert!(models.join(f).exists(), "{f} missing");
    }
    let loss = read(&models.join("loss_2.csv"));
    assert_eq!(loss.lines().next(), Some("epoch,loss"));
    assert_eq!(loss.lines().count(), 3);

    let stdout = ok(&[
        "evaluate", "--data", p(&csv), "--split", p(&split), "--models", p(&models), "--combinations",
        "2;3,4", "--out", p(&eval),
    ]);
    let header = stdout.lines().next().unwrap();
    assert_eq!(header, missbeam_core::eval::REPORT_COLUMNS.join(","));
    assert_eq!(stdout.lines().count(), 3);
    assert_eq!(stdout, read(&eval.join("report.csv")));
    let table = read(&eval.join("report.txt"));
    assert!(table.contains("MissBeamNet") && table.contains("Three beams"));

    let rep = tmp.path().join("rep");
    let printed = ok(&["report", "--report", p(&eval.join("report.json")), "--out", p(&rep)]);
    assert_eq!(printed, table);
    assert_eq!(read(&rep.join("report.txt")), table);

    let pretty = ok(&[
        "evaluate", "--data", p(&csv), "--split", p(&split), "--methods", "average,virtual",
        "--combinations", "one", "--pretty", "--out", p(&tmp.path().join("e2")),
    ]);
    assert!(pretty.contains("Average (baseline)") && !pretty.contains("MissBeamNet"));
}

#[test]
fn window_sweep_writes_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("sweep");
    simulate(&data, &[]);
    let stdout = ok(&[
        "sweep", "--data", p(&data.join("dataset.csv")), "--min-window", "3", "--max-window", "5",
        "--hidden", "8", "--lstm-output", "4", "--epochs", "1", "--out", p(&out),
    ]);
    assert!(stdout.contains("best window"));
    assert_eq!(read(&out.join("window_sweep.csv")).lines().count(), 4);
    assert!(read(&out.join("window_sweep.svg")).starts_with("<svg"));
    let rep = tmp.path().join("rep");
    ok(&["report", "--sweep", p(&out.join("window_sweep.json")), "--out", p(&rep)]);
    assert_eq!(read(&rep.join("window_sweep.svg")), read(&out.join("window_sweep.svg")));
}

#[test]
fn ingest_column_mapped_recordings() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = tmp.path().join("recordings");
    std::fs::create_dir(&rec).unwrap();
    for name in ["dive_a", "dive_b"] {
        let mut text = String::from("t;v1;v2;v3;v4;ok;press\n");
        for k in 0..20 {
            let bad = if k == 5 { "-32.768" } else { "1.0" };
            text.push_str(&format!("{k};{bad};-0.5;0.3;0.2;1;{}\n", 101.3 + 10.0 * k as f64));
        }
        std::fs::write(rec.join(format!("{name}.txt")), text).unwrap();
    }
    let mapping = tmp.path().join("mapping.json");
    std::fs::write(
        &mapping,
        r#"{"time": "t", "beams": ["v1", "v2", "v3", "v4"], "valid": "ok", "pressure_kpa": "press", "delimiter": ";"}"#,
    )
    .unwrap();
    let out = tmp.path().join("ingested");
    ok(&[
        "ingest", "--input", p(&rec), "--format", "columns", "--mapping", p(&mapping), "--train-fraction", "0.5",
        "--out", p(&out),
    ]);
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("ingest_summary.json"))).unwrap();
    let missions = summary.as_array().unwrap();
    assert_eq!(missions.len(), 2);
    assert_eq!(missions[0]["id"], "dive_a");
    assert_eq!(missions[0]["epochs"], 19);
    assert_eq!(missions[0]["segments"], 2);
    let split: serde_json::Value = serde_json::from_str(&read(&out.join("split.json"))).unwrap();
    assert_eq!(split["train"][0], "dive_a");
    assert_eq!(split["test"][0], "dive_b");
    let csv = read(&out.join("dataset.csv"));
    assert_eq!(csv.lines().count(), 1 + 2 * 19);
}

#[test]
fn invalid_requests_fail_with_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, &[]);
    let csv = data.join("dataset.csv");
    let out = tmp.path().join("x");
    fails(&["train", "--data", p(&csv), "--missing", "1,2,3,4", "--out", p(&out)], "at least one beam");
    fails(&["train", "--data", p(&csv), "--missing", "7", "--out", p(&out)], "7");
    fails(&["train", "--missing", "1", "--out", p(&out)], "--data");
    fails(&["evaluate", "--data", p(&csv), "--out", p(&out)], "--models");
    fails(
        &["evaluate", "--data", p(&csv), "--models", p(tmp.path()), "--combinations", "1", "--out", p(&out)],
        "model",
    );
    fails(&["sweep", "--kind", "hyper", "--draws", "0", "--data", p(&csv), "--out", p(&out)], "draws");
    fails(&["sweep", "--min-window", "5", "--max-window", "4", "--data", p(&csv), "--out", p(&out)], "window");
    fails(&["sweep", "--missing", "one", "--data", p(&csv), "--out", p(&out)], "exactly one");
    fails(&["report", "--out", p(&out)], "--report");
    fails(&["ingest", "--input", p(&csv), "--format", "xml", "--out", p(&out)], "xml");
    let conf = tmp.path().join("bad.json");
    std::fs::write(&conf, r#"{"bogus": 1}"#).unwrap();
    fails(&["simulate", "--config", p(&conf), "--out", p(&out)], "configuration");
}
