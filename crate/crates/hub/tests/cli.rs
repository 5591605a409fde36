use homesense_core::metrics::{AGGREGATE_FILE, EVENT_LOG_FILE};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn homesense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homesense")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_clean_double_reports_one_double() {
    let o = homesense(&["simulate", "--scenario", path(&fixture("clean_double.scn")), "--fast"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("sit-to-stand: 1 double detected, 0 singles detected"), "{out}");
}

#[test]
fn simulate_with_faults_file() {
    let o = homesense(&[
        "simulate",
        "--scenario",
        path(&fixture("clean_double.scn")),
        "--faults",
        path(&fixture("faults_loss_jitter.toml")),
        "--seed",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("1 double detected"));
}

#[test]
fn replay_of_simulated_log_matches_live_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let events = dir.path().join("events.jsonl");
    let o = homesense(&[
        "simulate",
        "--scenario",
        path(&fixture("mixed_day.scn")),
        "--store",
        path(&store),
        "--events",
        path(&events),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let hub_events = std::fs::read_to_string(&events).unwrap();
    assert!(hub_events.lines().any(|l| l.contains("\"kind\":\"repetition_logged\"")));

    let o = homesense(&["replay", "--log", path(&store.join(EVENT_LOG_FILE))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let live = std::fs::read_to_string(store.join(AGGREGATE_FILE)).unwrap();
    assert_eq!(stdout(&o), live);

    let out = dir.path().join("rebuilt.json");
    let o = homesense(&["replay", "--log", path(&store.join(EVENT_LOG_FILE)), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out).unwrap(), live);
}

#[test]
fn report_prints_weekly_table() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    for scenario in ["clean_double.scn", "lift_double.scn"] {
        let o = homesense(&["simulate", "--scenario", path(&fixture(scenario)), "--store", path(&store)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = homesense(&["report", "--store", path(&store), "--week", "2026-03-02"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    let first = table.lines().find(|l| l.starts_with("2026-03-02")).unwrap();
    let cols: Vec<&str> = first.split_whitespace().collect();
    assert_eq!(&cols[1..3], ["1", "0"], "{table}");
    assert_eq!(cols.last(), Some(&"yes"));
    assert!(table.contains("adherence 1/7"), "{table}");
    let band = table.lines().skip_while(|l| *l != "Can Band").find(|l| l.starts_with("2026-03-02")).unwrap();
    assert_eq!(band.split_whitespace().nth(2), Some("1"), "{table}");
}

#[test]
fn bad_arguments_exit_with_usage() {
    let o = homesense(&["simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));

    let o = homesense(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));

    let o = homesense(&["report", "--store", "x", "--week", "not-a-date"]);
    assert_eq!(o.status.code(), Some(1));

    let o = homesense(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulate"));
}

#[test]
fn runtime_failures_exit_two() {
    let o = homesense(&["simulate", "--scenario", "/nonexistent/scenario.scn"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: /nonexistent/scenario.scn"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "sit 5\njump 2\n").unwrap();
    let o = homesense(&["simulate", "--scenario", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let log = dir.path().join("events.jsonl");
    std::fs::write(&log, "{not json}\n").unwrap();
    let o = homesense(&["replay", "--log", path(&log)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn serve_on_occupied_port_fails_clearly() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let o = homesense(&["serve", "--port", &port, "--udp-port", "0", "--store", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(&format!("cannot listen on 127.0.0.1:{port}")), "{err}");
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hub.toml");
    std::fs::write(&cfg, "[detection]\ndouble_gap_s = 2.0\n").unwrap();
    let o = homesense(&["simulate", "--scenario", path(&fixture("clean_double.scn")), "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 doubles detected, 2 singles detected"), "{}", stdout(&o));

    std::fs::write(&cfg, "[detection]\ndouble_gap_s = -1.0\n").unwrap();
    let o = homesense(&["simulate", "--scenario", path(&fixture("clean_double.scn")), "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("double_gap_s"), "{}", stderr(&o));
}
