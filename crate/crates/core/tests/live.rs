use fogservo::harness::{build_nodes, run_live_rep, Mode, RepNodes, Scenario};
use fogservo::netsim::LinkProfile;
use fogservo::nodes::live::{LivePorts, LiveTopology};
use fogservo::nodes::operator::OperatorCommand;
use fogservo::nodes::TeleopSegment;

#[test]
fn teleop_over_loopback() {
    let mut s = Scenario {
        mode: Mode::TeleopScripted,
        duration_s: 3.0,
        settle_s: None,
        teleop: vec![TeleopSegment {
            start_s: 0.2,
            duration_s: 1.0,
            command: OperatorCommand::Velocity { forward: 0.3, yaw: 0.0 },
        }],
        ..Scenario::default()
    };
    s.link.cloud_edge = LinkProfile::fixed(20.0);
    let art = run_live_rep(&s, 0).unwrap();
    let first = art.telemetry.first().unwrap();
    let last = art.telemetry.last().unwrap();
    assert!(last.x - first.x > 0.1, "moved {}", last.x - first.x);
    assert!(!art.metrics.fell);
    // Wall-clock scheduling adds slack, but the heartbeat bound still holds
    // roughly: 250 + 100 + 2 * 20 + 2 ms.
    let lat = art.metrics.stop_latency_ms.expect("a stop after release");
    assert!((350.0..600.0).contains(&lat), "{lat}");
}

#[test]
fn uplink_and_proxy_counters() {
    let s = Scenario { mode: Mode::TeleopScripted, ..Scenario::default() };
    let RepNodes { cloud, rcu, edge, links, .. } = build_nodes(&s, 0).unwrap();
    let live = LiveTopology::start(cloud, rcu, edge, &links, &LivePorts::default()).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(600));
    assert!(live.cloud().counters().telemetry > 0);
    assert!(live.cloud().counters().observations > 0);
    let stats = live.shutdown();
    assert_eq!(stats[0].received, 0, "nothing sent downstream without input");
    assert!(stats[3].forwarded > 0 && stats[1].forwarded > 0);
}
