use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn edgeheal(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeheal")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn export_suite(dir: &Path) -> serde_json::Value {
    let o = edgeheal(&["eval", "--export-suite", "suite", "--incidents", "1", "--windows", "40"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&fs::read_to_string(dir.join("suite/manifest.json")).unwrap()).unwrap()
}

#[test]
fn parse_reason_diagnose_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let manifest = export_suite(dir);
    let case = &manifest["cases"][0];
    let log = format!("suite/{}", case["log_file"].as_str().unwrap());

    let o = edgeheal(&["parse", "-i", &log, "-o", "events.jsonl", "--kb", "suite/kb", "--offline"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["l3"], 0);
    let first: serde_json::Value =
        serde_json::from_str(fs::read_to_string(dir.join("events.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["config_hash"].is_string() && first["template_id"].is_string());

    assert_eq!(code(&edgeheal(&["reason", "-e", "events.jsonl", "-o", "graph.json", "--kb", "suite/kb"], dir)), 0);
    let graph: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("graph.json")).unwrap()).unwrap();
    assert!(graph["config"]["config_hash"].is_string());

    let o = edgeheal(&["diagnose", "-g", "graph.json", "--kb", "suite/kb", "--offline"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["decision_path"], "local");
    assert_eq!(report["root_cause"], case["root_cause_label"]);
    assert_eq!(report["action"], case["action"]);

    let o = edgeheal(&["diagnose", "-g", "graph.json", "--kb", "suite/kb", "--offline", "--validate"], dir);
    assert_eq!(code(&o), 0);
    let stats = edgeheal(&["kb", "stats", "--kb", "suite/kb"], dir);
    let stats: serde_json::Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(stats["pending"], 1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&edgeheal(&["--help"], dir)), 0);
    assert_eq!(code(&edgeheal(&["frobnicate"], dir)), 1);
    assert_eq!(code(&edgeheal(&["eval", "--levels", "0.3"], dir)), 1);
    assert_eq!(code(&edgeheal(&["parse", "-i", "missing.log"], dir)), 2);
    fs::write(dir.join("empty.jsonl"), "").unwrap();
    let o = edgeheal(&["reason", "-e", "empty.jsonl"], dir);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient windows"));
    assert_eq!(code(&edgeheal(&["diagnose", "-g", "graph.json", "--validate"], dir)), 1);
}

#[test]
fn eval_over_budget_exits_three_with_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let o = edgeheal(
        &["eval", "--incidents", "1", "--windows", "20", "--levels", "0.0", "--memory-budget-mb", "0.5", "--output-dir", "out"],
        tmp.path(),
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("out/metrics.csv").exists());
}

#[test]
fn eval_on_an_exported_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    export_suite(dir);
    let run = |out: &str| {
        let o = edgeheal(&["eval", "--suite", "suite", "--levels", "0.0", "--output-dir", out], dir);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(dir.join(out).join("metrics.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().any(|l| l.starts_with("synthetic_storage_deterministic,nesy,0.0,rca,1,")));
}

#[test]
fn dry_run_prints_a_route_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("x.log"), "081109 203615 148 INFO node: hello world\n081109 203616 149 INFO node: hello world\n").unwrap();
    let o = edgeheal(&["parse", "-i", "x.log", "--dry-run"], dir);
    assert_eq!(code(&o), 0);
    let plan = String::from_utf8(o.stdout).unwrap();
    let tiers: Vec<&str> = plan.lines().map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(tiers, ["L3", "L1"]);
    assert!(!dir.join("x.events.jsonl").exists());
}

#[test]
fn kb_lifecycle_and_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&edgeheal(&["kb", "init", "--kb", "kb"], dir)), 0);
    fs::write(dir.join("x.log"), "081109 203615 148 WARN node: disk quota exceeded on volume 3\n").unwrap();
    assert_eq!(code(&edgeheal(&["parse", "-i", "x.log", "--kb", "kb"], dir)), 0);
    let stats: serde_json::Value = serde_json::from_slice(&edgeheal(&["kb", "stats", "--kb", "kb"], dir).stdout).unwrap();
    assert_eq!(stats["pending"], 1);
    assert_eq!(code(&edgeheal(&["kb", "approve", "--kb", "kb", "--all"], dir)), 0);
    let stats: serde_json::Value = serde_json::from_slice(&edgeheal(&["kb", "stats", "--kb", "kb"], dir).stdout).unwrap();
    assert_eq!((stats["pending"].as_u64(), stats["validated_templates"].as_u64()), (Some(0), Some(1)));
    assert_eq!(code(&edgeheal(&["kb", "verify", "--kb", "kb"], dir)), 0);

    let path = dir.join("kb/templates.jsonl");
    let mut entry: serde_json::Value = serde_json::from_str(fs::read_to_string(&path).unwrap().trim()).unwrap();
    let e0 = entry["embedding"][0].as_f64().unwrap();
    entry["embedding"][0] = serde_json::json!(e0 + 0.25);
    fs::write(&path, format!("{entry}\n")).unwrap();
    let o = edgeheal(&["kb", "verify", "--kb", "kb"], dir);
    assert_eq!(code(&o), 2);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ok"], false);
}
