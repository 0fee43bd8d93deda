use fogservo::harness::{build_topology, run, run_rep, Mode, Scenario};
use fogservo::netsim::LinkProfile;
use fogservo::nodes::operator::OperatorCommand;
use fogservo::nodes::topology::{CLOUD_TO_RCU, EDGE_TO_RCU, RCU_TO_CLOUD, RCU_TO_EDGE};
use fogservo::nodes::TeleopSegment;

fn teleop(forward: f64, start_s: f64, duration_s: f64) -> Scenario {
    Scenario {
        mode: Mode::TeleopScripted,
        duration_s: start_s + duration_s + 5.0,
        settle_s: None,
        teleop: vec![TeleopSegment { start_s, duration_s, command: OperatorCommand::Velocity { forward, yaw: 0.0 } }],
        ..Scenario::default()
    }
}

#[test]
fn one_way_latency_is_both_hops_plus_rcu_delay() {
    let mut s = teleop(0.2, 0.1, 0.01);
    s.link.cloud_edge = LinkProfile::fixed(50.0);
    s.link.rcu_edge = LinkProfile::fixed(20.0);
    let (mut topo, trace) = build_topology(&s, 0).unwrap();
    assert_eq!(trace.messages.len(), 1);

    topo.run_until(171_999);
    assert_eq!(topo.edge().counters().received, 0);
    topo.run_until(172_000);
    assert_eq!(topo.edge().counters().received, 1);

    let down = topo.link(CLOUD_TO_RCU).log();
    assert_eq!((down[0].t_send, down[0].t_deliver), (100_000, Some(150_000)));
    let last = topo.link(RCU_TO_EDGE).log().last().unwrap();
    assert_eq!((last.t_send, last.t_deliver), (152_000, Some(172_000)));
    assert_eq!(down[0].bytes, last.bytes);
}

#[test]
fn uplink_reaches_the_cloud() {
    let mut s = Scenario { duration_s: 1.0, ..Scenario::default() };
    s.link.cloud_edge = LinkProfile::fixed(30.0);
    let (mut topo, _) = build_topology(&s, 0).unwrap();
    topo.run_until(1_000_000);
    let c = topo.cloud().counters();
    assert!(c.observations >= 4, "{c:?}");
    assert!(c.telemetry >= 15, "{c:?}");
    assert_eq!(c.decode_errors, 0);
    assert!(topo.link(EDGE_TO_RCU).stats().delivered > 0);
    assert!(topo.link(RCU_TO_CLOUD).stats().delivered > 0);
    assert_eq!(topo.send_errors(), 0);
}

#[test]
fn held_teleop_drives_and_stops() {
    let s = teleop(0.3, 0.5, 2.0);
    let art = run_rep(&s, 0).unwrap();
    let first = art.telemetry.first().unwrap();
    let last = art.telemetry.last().unwrap();
    assert!(last.x - first.x > 0.3, "moved {}", last.x - first.x);
    assert!(last.v.abs() < 0.05, "still moving at {}", last.v);
    assert!(!art.metrics.fell);
    // Ideal links: window 250 + fall 100 + RCU 2, to within one 5 ms tick.
    let lat = art.metrics.stop_latency_ms.unwrap();
    assert!((lat - 352.0).abs() <= 5.0, "{lat}");
}

#[test]
fn severed_link_leaves_the_robot_upright() {
    let mut s = Scenario { duration_s: 20.0, settle_s: None, ..Scenario::default() };
    s.link.cloud_edge = LinkProfile { drop_prob: 1.0, ..LinkProfile::ideal() };
    let art = run_rep(&s, 0).unwrap();
    assert!(!art.metrics.fell);
    assert!(!art.metrics.success);
    let tail = &art.telemetry[art.telemetry.len() - 20..];
    assert!(tail.iter().all(|r| r.psi.abs() < 0.01 && r.v.abs() < 0.01));
}

#[test]
fn zero_length_scenario() {
    let s = Scenario { duration_s: 0.0, repetitions: 2, ..Scenario::default() };
    let dir = tempfile::tempdir().unwrap();
    let report = run(&s, Some(dir.path())).unwrap();
    assert_eq!(report.repetitions, 2);
    assert_eq!(report.successes, 0);
    assert!(report.reps.iter().all(|m| m.duration_s == 0.0 && !m.fell));
    assert!(dir.path().join("metrics.json").exists());
    assert!(dir.path().join("telemetry_rep1.jsonl").exists());
}

#[test]
fn zero_repetitions() {
    let s = Scenario { repetitions: 0, ..Scenario::default() };
    let report = run(&s, None).unwrap();
    assert_eq!((report.repetitions, report.success_rate), (0, 0.0));
}
