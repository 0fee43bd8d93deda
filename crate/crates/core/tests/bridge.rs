use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use fogservo::harness::{build_topology, Mode, Scenario};
use fogservo::heartbeat::CommandType;
use fogservo::ibvs::Outcome;
use fogservo::nodes::bridge::{serve, BridgeConfig, BridgeStats, UiFrame};
use fogservo::nodes::VirtualTopology;
use fogservo::{micros_from_secs, Micros};
use tungstenite::{Message, WebSocket};

fn start(time_scale: f64) -> (SocketAddr, std::thread::JoinHandle<(VirtualTopology, BridgeStats)>, &'static AtomicBool) {
    let scenario = Scenario { mode: Mode::TeleopScripted, ..Scenario::default() };
    let (topo, _) = build_topology(&scenario, 0).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let stop: &'static AtomicBool = Box::leak(Box::new(AtomicBool::new(false)));
    let config = BridgeConfig { time_scale, until: Some(micros_from_secs(120.0)), ..BridgeConfig::default() };
    let handle = std::thread::spawn(move || serve(topo, listener, &config, stop).unwrap());
    (addr, handle, stop)
}

fn connect(addr: SocketAddr) -> WebSocket<TcpStream> {
    let stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    tungstenite::client(format!("ws://{addr}/"), stream).unwrap().0
}

fn next_frame(ws: &mut WebSocket<TcpStream>) -> UiFrame {
    loop {
        if let Message::Text(t) = ws.read().unwrap() {
            if let Ok(f) = serde_json::from_str::<UiFrame>(&t) {
                return f;
            }
        }
    }
}

fn send(ws: &mut WebSocket<TcpStream>, json: &str) {
    ws.send(Message::text(json.to_string())).unwrap();
}

/// Holds forward at 20 simulated Hz for `sim_s` simulated seconds.
fn hold_forward(ws: &mut WebSocket<TcpStream>, sim_s: f64, time_scale: f64) {
    let t0 = Instant::now();
    let step = Duration::from_secs_f64(0.05 / time_scale);
    let mut k = 0u32;
    while t0.elapsed().as_secs_f64() * time_scale < sim_s {
        send(ws, r#"{"type": "velocity", "forward": 0.3, "yaw": 0.0}"#);
        k += 1;
        let due = step * k;
        if let Some(wait) = due.checked_sub(t0.elapsed()) {
            std::thread::sleep(wait);
        }
    }
}

#[test]
fn frames_match_the_schema() {
    let (addr, handle, stop) = start(1.0);
    let mut ws = connect(addr);
    let a = next_frame(&mut ws);
    let b = next_frame(&mut ws);
    assert!(b.t > a.t);
    assert_eq!(a.link_stats.len(), 4);
    assert_eq!(a.heartbeat.len(), CommandType::ALL.len());
    assert_eq!((a.camera.width, a.camera.height), (640, 480));
    assert!(a.obs.visible && !a.robot.fallen);
    assert_eq!(a.phase, None);

    send(&mut ws, r#"{"type": "jump"}"#);
    let reply = loop {
        if let Message::Text(t) = ws.read().unwrap() {
            if t.contains("\"error\"") {
                break t.to_string();
            }
        }
    };
    assert!(reply.contains("jump"), "{reply}");
    stop.store(true, Ordering::Relaxed);
    let (_, stats) = handle.join().unwrap();
    assert_eq!((stats.clients, stats.rejected), (1, 1));
}

#[test]
fn scripted_session_drives_then_hands_off_to_auto() {
    let scale = 5.0;
    let (addr, handle, stop) = start(scale);
    let mut ws = connect(addr);
    let x0 = next_frame(&mut ws).robot.x;
    hold_forward(&mut ws, 1.0, scale);
    send(&mut ws, r#"{"type": "mode", "value": 1}"#);
    let done = loop {
        let f = next_frame(&mut ws);
        if let Some(o) = f.outcome {
            break (o, f);
        }
    };
    stop.store(true, Ordering::Relaxed);
    let (topo, stats) = handle.join().unwrap();
    assert_eq!(done.0, Outcome::Success, "{:?}", done.1.phase);
    assert!(done.1.robot.x > x0 + 0.05);
    assert!(!done.1.robot.fallen);
    assert!(stats.commands >= 15, "{stats:?}");
    assert!(topo.edge().world().state().grasping);
}

#[test]
fn closing_the_socket_mid_drive_stops_the_robot() {
    let scale = 5.0;
    let (addr, handle, stop) = start(scale);
    let mut ws = connect(addr);
    hold_forward(&mut ws, 1.5, scale);
    drop(ws);
    std::thread::sleep(Duration::from_secs_f64(1.0 / scale));
    stop.store(true, Ordering::Relaxed);
    let (topo, _) = handle.join().unwrap();

    let edge = topo.edge();
    let last: Micros = edge.channels().channel(CommandType::Forward).last_seen().unwrap();
    let stopped = *edge.stops().iter().find(|&&s| s >= last).expect("robot stopped");
    // window 250 ms + fall 100 ms, plus one 5 ms edge tick.
    assert!(stopped - last <= 355_000, "{}", stopped - last);
    assert_eq!(edge.last_command().forward, 0.0);
    assert!(!edge.world().state().fallen);
}
