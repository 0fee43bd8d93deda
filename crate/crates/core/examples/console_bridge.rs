//! Serves the operator-console websocket on a virtual backend and drives it
//! with a small in-process client: hold forward, then engage auto.
//!
//! `cargo run --release --example console_bridge`

use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use fogservo::harness::{build_topology, Mode, Scenario};
use fogservo::nodes::bridge::{serve, BridgeConfig, UiFrame};
use tungstenite::Message;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario { mode: Mode::TeleopScripted, ..Scenario::default() };
    let (topo, _) = build_topology(&scenario, 0)?;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    static STOP: AtomicBool = AtomicBool::new(false);
    let config = BridgeConfig { time_scale: 4.0, ..BridgeConfig::default() };
    let server = std::thread::spawn(move || serve(topo, listener, &config, &STOP));

    let stream = TcpStream::connect(addr)?;
    let (mut ws, _) = tungstenite::client(format!("ws://{addr}/"), stream)?;
    for _ in 0..20 {
        ws.send(Message::text(r#"{"type":"velocity","forward":0.3}"#))?;
        std::thread::sleep(Duration::from_millis(12));
    }
    ws.send(Message::text(r#"{"type":"mode","value":1}"#))?;
    loop {
        let Message::Text(text) = ws.read()? else { continue };
        let Ok(frame) = serde_json::from_str::<UiFrame>(&text) else { continue };
        if (frame.t * 4.0).fract() < 0.05 {
            println!(
                "t {:5.2}  x {:6.3}  psi {:7.4}  phase {:?}  side {:5.1}px",
                frame.t, frame.robot.x, frame.robot.psi, frame.phase, frame.obs.side_px
            );
        }
        if let Some(outcome) = frame.outcome {
            println!("outcome: {outcome:?}");
            break;
        }
    }
    STOP.store(true, Ordering::Relaxed);
    let (_, stats) = server.join().expect("bridge thread")?;
    println!("{stats:?}");
    Ok(())
}
