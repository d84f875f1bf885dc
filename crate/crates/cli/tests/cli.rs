use std::path::Path;
use std::process::{Command, Output};

fn swarmtab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmtab"))
        .args(args)
        .env("SWARMTAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn small_config(data: &str, front_end: &str, classifier: &str) -> String {
    format!(
        r#"{{
            "data": {data},
            "front_end": {front_end},
            "classifier": {classifier},
            "evaluation": {{"k": 3, "seed": 1}}
        }}"#
    )
}

const SYNTH: &str = r#"{"synthetic": {"n_rows": 90, "n_numerical": 5, "n_categorical": 1, "n_informative": 2, "noise_level": 0.1, "seed": 2}}"#;

#[test]
fn run_writes_every_output_and_inspect_reads_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    write(&config, &small_config(SYNTH, r#"{"pca": {"retain": 0.9}}"#, r#""dt""#));
    let out = dir.path().join("out");
    let o = swarmtab(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "table5.csv", "model.stab", "audit.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["method"], "PCA + Decision Tree");
    assert_eq!(report["config"]["classifier"]["dt"]["max_depth"], 10);

    let o = swarmtab(&["inspect", "--model", out.join("model.stab").to_str().unwrap()]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["kind"], "dt");
    assert_eq!(summary["front_end"]["kind"], "pca");
}

#[test]
fn synth_output_feeds_a_csv_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    write(&spec, r#"{"n_rows": 80, "n_numerical": 4, "n_categorical": 1, "n_informative": 2, "seed": 3}"#);
    let csv = dir.path().join("data.csv");
    let o = swarmtab(&["synth", "--spec", spec.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("planted features"));

    let data = format!(
        r#"{{"csv": {{"path": {:?}, "options": {{"criteria": {{"target_column": "target"}}, "positive_label": "1"}}}}}}"#,
        csv.to_str().unwrap()
    );
    let config = dir.path().join("c.json");
    write(&config, &small_config(&data, r#""none""#, r#"{"rf": {"n_estimators": 10}}"#));
    let out = dir.path().join("out");
    let o = swarmtab(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let audit: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["rows_out"], 80);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let typo = dir.path().join("typo.json");
    write(&typo, &small_config(SYNTH, r#"{"pso": {"swam_size": 10}}"#, r#""dt""#));
    let o = swarmtab(&["run", "--config", typo.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("swam_size"));

    let missing = dir.path().join("missing.json");
    let data = r#"{"csv": {"path": "/does/not/exist.csv", "preset": "hfea"}}"#;
    write(&missing, &small_config(data, r#""none""#, r#""dt""#));
    let o = swarmtab(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let o = swarmtab(&["inspect", "--model", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn matrix_records_a_failing_row_and_signals_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs");
    std::fs::create_dir(&configs).unwrap();
    write(&configs.join("a_dt.json"), &small_config(SYNTH, r#""none""#, r#""dt""#));
    write(&configs.join("b_rf.json"), &small_config(SYNTH, r#""none""#, r#"{"rf": {"n_estimators": 5}}"#));
    let broken = r#"{"csv": {"path": "/does/not/exist.csv", "preset": "hfea"}}"#;
    write(&configs.join("c_broken.json"), &small_config(broken, r#""none""#, r#""dt""#));
    let out = dir.path().join("out");
    let o = swarmtab(&["matrix", "--configs", configs.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));

    let table = std::fs::read_to_string(out.join("matrix.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,accuracy,precision,recall,f1,auc,status,error");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].contains(",ok,"));
    assert!(lines[2].contains(",ok,"));
    assert!(lines[3].contains(",error,"));
    assert!(out.join("comparison.json").exists());
    assert!(out.join("a_dt").join("report.json").exists());

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = swarmtab(&["matrix", "--configs", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
