use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use bsdesign::search::SearchState;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bsdesign"));
    c.env_remove("BSDESIGN_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bsdesign")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (headers, rows)
}

#[test]
fn table2_csv_matches_reference() {
    let o = run(&["tables", "--which", "2", "--format", "csv"]);
    assert!(o.status.success());
    let (headers, rows) = read_csv(&stdout(&o));
    assert_eq!(headers, ["n", "logit", "probit", "cloglog"]);
    assert_eq!(rows.len(), 6);
    let first: Vec<f64> = rows[0][1..].iter().map(|v| v.parse().unwrap()).collect();
    for (got, want) in first.iter().zip([0.91584142, 0.95047339, 0.95394709]) {
        assert!((got - want).abs() < 1e-6);
    }
    let last: f64 = rows[5][3].parse().unwrap();
    assert!((last - 0.00072786).abs() < 1e-6);
}

#[test]
fn table1_text_lists_three_models() {
    let o = run(&["tables", "--which", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["logit", "probit", "cloglog", "-1.543", "0.980", "0.930"] {
        assert!(text.contains(needle), "{needle} missing from\n{text}");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["tables", "--which", "3"]).status.code(), Some(2));
    assert_eq!(run(&["tables", "--which", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["recommend", "--d", "24"]).status.code(), Some(2));
    assert_eq!(run(&["baseline", "--d", "8", "--runs", "10"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--oracle", "telepathy", "--interval", "0,1", "--nk", "2"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--oracle", "simulate:1,0,1", "--interval", "1,0", "--nk", "2"]).status.code(), Some(2));
}

#[test]
fn recommend_uses_published_rule() {
    let o = run(&["recommend", "--model", "cloglog", "--d", "72", "--stage-cost", "228.4"]);
    assert!(stdout(&o).contains(": 14 "), "{}", stdout(&o));
    let o = run(&["recommend", "--a", "1", "--b", "0", "--model", "logit"]);
    assert!(stdout(&o).contains("-1.543"), "{}", stdout(&o));
}

#[test]
fn simulated_run_reaches_existence() {
    let o = run(&["run", "--oracle", "simulate:1,0,42", "--interval", "-5.7,14.3", "--nk", "5", "--model", "cloglog"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("MLEs exist after"));
    assert!(text.contains(": true"));
    assert!(text.contains("method I:") && text.contains("method II:"));
    assert!(text.contains("next design levels"));
}

fn final_state(path: &Path) -> SearchState {
    SearchState::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.json");
    let split = dir.path().join("split.json");
    let base = ["run", "--oracle", "simulate:0.5,1,7", "--interval", "-20,30", "--nk", "3"];

    let o = bin().args(base).arg("--state").arg(&full).output().unwrap();
    assert!(o.status.success());

    let o = bin().args(base).arg("--state").arg(&split).args(["--stop-after", "3"]).output().unwrap();
    assert!(o.status.success());
    let paused = final_state(&split);
    assert_eq!(paused.stages(), 3);
    let reference = final_state(&full);
    let next = paused.next_level().unwrap();
    assert_eq!(next, reference.history[3].x);
    assert!(stdout(&o).contains(&format!("next level {next}")));

    // resuming without --resume would clobber the file
    let o = bin().args(base).arg("--state").arg(&split).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = bin()
        .args(["run", "--oracle", "simulate:0.5,1,7", "--resume", "--state"])
        .arg(&split)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(final_state(&split), reference);
}

#[test]
fn exhausted_script_keeps_state() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.txt");
    let state = dir.path().join("state.json");
    // endpoints, then one bisection stage, then nothing
    fs::write(&script, "0/4 # low end\n4/4\n2/4\n1 0").unwrap();
    let o = bin()
        .args(["run", "--interval", "0,10", "--nk", "4", "--oracle"])
        .arg(format!("script:{}", script.display()))
        .arg("--state")
        .arg(&state)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("script exhausted"));
    let saved = final_state(&state);
    assert_eq!(saved.stages(), 3);

    // more script lets the same search continue
    fs::write(&script, "0/4\n4/4\n2/4\n0/4 4/4 0/4 4/4 2/4 2/4").unwrap();
    let o = bin()
        .args(["run", "--resume", "--oracle"])
        .arg(format!("script:{}", script.display()))
        .arg("--state")
        .arg(&state)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(final_state(&state).stages() > 3);
}

#[test]
fn malformed_state_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    fs::write(&state, "{\"not\": \"a state\"}").unwrap();
    let o = bin().args(["run", "--oracle", "interactive", "--resume", "--state"]).arg(&state).output().unwrap();
    assert_ne!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&state).unwrap(), "{\"not\": \"a state\"}");
}

#[test]
fn interactive_run_reprompts() {
    let mut child = bin()
        .args(["run", "--oracle", "interactive", "--interval", "0,8", "--nk", "2", "--model", "logit"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    // endpoints, a typo, a wrong n, then a mixed midpoint and probes
    child.stdin.take().unwrap().write_all(b"0/2\n2/2\noops\n1/3\n1/2\n1/2\n").unwrap();
    let o = child.wait_with_output().unwrap();
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("could not parse"));
    assert!(text.contains("expected 2 trials"));
    assert!(text.contains("stage 3: measure 2 responses at x = 4"));
    assert!(text.contains("MLEs exist after 4 stages"));
}

#[test]
fn simulate_is_reproducible_and_writes_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--table", "3", "--runs", "30", "--seed", "5", "--format", "csv"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let (headers, rows) = read_csv(&stdout(&a));
    assert_eq!(headers[0], "n_k");
    assert_eq!(rows.len(), 7);

    let o = bin().args(args).env("BSDESIGN_OUT_DIR", dir.path()).output().unwrap();
    assert!(o.status.success());
    let written = fs::read_to_string(dir.path().join("table3_cloglog.csv")).unwrap();
    assert_eq!(written.as_bytes(), &a.stdout[..]);
}

#[test]
fn baseline_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = bin()
        .args(["baseline", "--runs", "50", "--d", "10", "--format", "csv", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let (headers, rows) = read_csv(&fs::read_to_string(&out).unwrap());
    assert_eq!(headers, ["M", "n_m", "d", "runs", "p_no_mle"]);
    assert_eq!(rows.len(), 20);
    for row in rows {
        let p: f64 = row[4].parse().unwrap();
        let runs: f64 = row[3].parse().unwrap();
        assert_eq!((p * runs).round() / runs, p);
    }
}
