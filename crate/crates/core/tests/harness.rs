use std::io::BufReader;
use std::path::{Path, PathBuf};

use fogservo::harness::{run, sweep, write_csv, Grid, HarnessError, Placement, Scenario};
use fogservo::ibvs::Outcome;
use fogservo::telemetry::{validate_jsonl, LogKind};
use serde_json::json;

fn scenario(name: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", &format!("{name}.json")].iter().collect();
    Scenario::load(&path).unwrap()
}

fn grid(value: serde_json::Value) -> Grid {
    serde_json::from_value(value).unwrap()
}

fn config_path(err: HarnessError) -> String {
    match err {
        HarnessError::Config { path, .. } => path,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn single_cell_sweep_equals_run() {
    let mut s = scenario("auto_static");
    s.repetitions = 3;
    let rows = sweep(&s, &grid(json!({"seed": [s.seed]}))).unwrap();
    assert_eq!(rows.len(), 1);
    let mut report = run(&s, None).unwrap();
    report.scenario = rows[0].report.scenario.clone();
    assert_eq!(rows[0].report, report);
}

#[test]
fn stop_latency_tracks_link_latency() {
    let s = scenario("latency_probe");
    let g = grid(json!({"link.cloud_edge.latency_ms": [0, 100, 200, 400]}));
    let rows = sweep(&s, &g).unwrap();
    for (row, l) in rows.iter().zip([0.0, 100.0, 200.0, 400.0]) {
        let lat = row.report.reps[0].stop_latency_ms.unwrap();
        // window + fall, the one-way delay, and at most one 5 ms edge tick.
        assert!((lat - (350.0 + l)).abs() <= 5.0, "latency {l}: {lat}");
        assert!(!row.report.reps[0].fell);
    }
}

#[test]
fn sweep_csv_is_reproducible() {
    let mut s = scenario("auto_static_lossy");
    s.repetitions = 2;
    let g = grid(json!({"link.cloud_edge.drop": [0.0, 0.3], "link.cloud_edge.latency_ms": [50, 200]}));
    let render = || {
        let mut buf = Vec::new();
        write_csv(&mut buf, &g, &sweep(&s, &g).unwrap()).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let a = render();
    assert_eq!(a, render());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("link.cloud_edge.drop,link.cloud_edge.latency_ms,reps,successes"));
    assert!(lines[1].starts_with("0.0,50,2,"), "{}", lines[1]);
    assert!(lines[4].starts_with("0.3,200,2,"), "{}", lines[4]);
}

#[test]
fn config_errors_name_the_field() {
    let cases = [
        (r#"{"link": {"cloud_edge": {"drop": "lots"}}}"#, "link.cloud_edge.drop"),
        (r#"{"link": {"cloud_edge": {"drop": 1.5}}}"#, "link.cloud_edge"),
        (r#"{"placement": {"kind": "facing_target", "distanse": 2}}"#, "placement"),
        (r#"{"duration_s": -1}"#, "duration_s"),
        (r#"{"heartbeat": {"window_ms": "x"}}"#, "heartbeat.window_ms"),
    ];
    for (text, want) in cases {
        let got = config_path(Scenario::from_json_str(text).unwrap_err());
        assert!(got.starts_with(want), "{text}: {got}");
    }
    let bad_cell = sweep(&Scenario::default(), &grid(json!({"link.cloud_edge.drop": [2.0]}))).unwrap_err();
    assert!(config_path(bad_cell).starts_with("link.cloud_edge"));
}

fn validate_dir(dir: &Path) -> usize {
    let mut files = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let Some(kind) = LogKind::from_file_name(&name) else { continue };
        let n = validate_jsonl(kind, BufReader::new(std::fs::File::open(&path).unwrap()))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        if kind == LogKind::Telemetry {
            assert!(n > 0, "{name} is empty");
        }
        files += 1;
    }
    files
}

#[test]
fn written_logs_follow_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = scenario("auto_static_lossy");
    s.repetitions = 2;
    let report = run(&s, Some(dir.path())).unwrap();
    // telemetry + phase + four delivery logs per repetition
    assert_eq!(validate_dir(dir.path()), 12);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["successes"], report.successes);
    assert_eq!(metrics["reps"].as_array().unwrap().len(), 2);

    let garbage = "{\"t\": 0.0, \"x\": 1.0}\n";
    assert!(validate_jsonl(LogKind::Telemetry, garbage.as_bytes()).is_err());
}

#[test]
fn tag_behind_the_robot_ends_as_tag_lost() {
    let s = Scenario {
        placement: Placement::Pose { x: -2.0, y: 0.0, heading_deg: 180.0, height: 0.55 },
        duration_s: 30.0,
        ..Scenario::default()
    };
    let r = run(&s, None).unwrap();
    assert_eq!(r.successes, 0);
    assert_eq!(r.reps[0].outcome, Some(Outcome::TagLost));
    assert!(!r.reps[0].fell);
}

#[test]
fn success_does_not_improve_with_more_loss() {
    let mut s = scenario("auto_static");
    s.repetitions = 6;
    s.duration_s = 20.0;
    let rows = sweep(&s, &grid(json!({"link.cloud_edge.drop": [0.0, 0.3, 0.6, 0.9]}))).unwrap();
    let rates: Vec<u32> = rows.iter().map(|r| r.report.successes).collect();
    assert!(rates.windows(2).all(|w| w[0] >= w[1]), "{rates:?}");
    assert!(rates[0] > *rates.last().unwrap(), "{rates:?}");
}
