use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mess_plus::metrics::STEP_CSV_HEADER;
use mess_plus::zoo::load_trace;
use mess_plus::RunReport;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mess-plus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn only_subdir(dir: &Path) -> PathBuf {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(entries.len(), 1, "{entries:?}");
    entries.pop().unwrap()
}

#[test]
fn exit_codes() {
    let out = bin(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(bin(&["run", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));

    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.jsonl");
    let out = bin(&[
        "run",
        "--trace",
        missing.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_then_run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("t.jsonl");
    let out_dir = tmp.path().join("out");
    let t = trace.to_str().unwrap();
    let o = out_dir.to_str().unwrap();

    let s = bin(&[
        "synth-trace",
        "--requests",
        "400",
        "--seed",
        "7",
        "--trace",
        t,
    ]);
    assert_eq!(
        s.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&s.stderr)
    );
    assert_eq!(load_trace(&trace).unwrap().len(), 400);

    let r = bin(&[
        "run",
        "--policy",
        "mess_plus",
        "--v",
        "0.1",
        "--c",
        "3",
        "--alpha",
        "0.52",
        "--trace",
        t,
        "--seed",
        "7",
        "--out",
        o,
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let run_dir = only_subdir(&out_dir);
    assert!(run_dir.join("config.toml").is_file());
    let seed_dir = run_dir.join("mess_plus").join("seed-7");
    let csv = std::fs::read_to_string(seed_dir.join("steps.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), STEP_CSV_HEADER);
    assert_eq!(csv.lines().count(), 401);
    let report = RunReport::load(seed_dir.join("report.json")).unwrap();
    assert_eq!(report.t, 400);

    // A second identical run lands in a new directory.
    let again = bin(&["run", "--trace", t, "--seed", "7", "--out", o]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&out_dir).unwrap().count(), 2);

    let rep = bin(&["report", o]);
    assert_eq!(rep.status.code(), Some(0));
    let text = String::from_utf8(rep.stdout).unwrap();
    assert!(text.contains("mess_plus"), "{text}");
    let single = bin(&["report", seed_dir.join("report.json").to_str().unwrap()]);
    assert!(String::from_utf8(single.stdout)
        .unwrap()
        .contains("requests (T)        400"));
}

#[test]
fn synth_trace_with_zero_requests_is_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("empty.jsonl");
    let out = bin(&[
        "synth-trace",
        "--requests",
        "0",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(std::fs::read(&trace).unwrap().len(), 0);
    assert!(load_trace(&trace).unwrap().is_empty());
}

#[test]
fn config_file_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
alpha_sla = 0.315
seeds = [1, 2]
scorer = "rouge1"

[controller]
v = 0.1
c = 3.0

[predictor]
dim = 4096

[trace.synth]
preset = "cnn_dailymail"
requests = 300
"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let r = bin(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--policy",
        "smallest_only,random_constrained",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let run_dir = only_subdir(&out);
    for policy in ["smallest_only", "random_constrained"] {
        for seed in [1, 2] {
            let p = run_dir
                .join(policy)
                .join(format!("seed-{seed}"))
                .join("report.json");
            let report = RunReport::load(&p).unwrap();
            assert_eq!(report.t, 300);
            assert_eq!(report.sla_alpha, 0.315);
        }
    }
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "nonsense_key = 3\n").unwrap();
    assert_eq!(
        bin(&["run", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn infeasible_alpha_is_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin(&[
        "run",
        "--policy",
        "random_constrained",
        "--alpha",
        "0.9",
        "--requests",
        "50",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}
