//! The scripted teleop pickup over real UDP sockets on loopback, with the
//! shaping proxies adding 50 ms each way on the cloud hop.
//!
//! `cargo run --release --example live_loopback`

use std::path::Path;

use fogservo::harness::{run_live_rep, Scenario};
use fogservo::netsim::LinkProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut s = Scenario::load(&dir.join("teleop_then_auto.json"))?;
    s.link.cloud_edge = LinkProfile::fixed(50.0);
    println!("running {} in wall-clock time ...", s.name);
    let art = run_live_rep(&s, 0)?;
    println!("{}", serde_json::to_string_pretty(&art.metrics)?);
    Ok(())
}
