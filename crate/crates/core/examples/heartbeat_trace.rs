//! Reconstructs a held forward command from a lossy 20 Hz stream and prints
//! the edge-side signal around the release.
//!
//! `cargo run --example heartbeat_trace`

use fogservo::heartbeat::{stop_latency_bound, CommandType, HeartbeatChannel, HeartbeatConfig};
use fogservo::netsim::{LinkProfile, Pipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = HeartbeatConfig::default();
    let shape = config.shape()?;
    let mut channel = HeartbeatChannel::new(CommandType::Forward, config.window());
    let mut pipe = Pipe::new(LinkProfile::lossy(40.0, 20.0, 0.3, 5))?;

    // Operator holds the key from 0 to 2 s.
    let mut seq = 0u32;
    let mut send_at = (0..40).map(|k| k * 50_000u64).peekable();
    let release = 1_950_000;

    println!("bound after the last arrival: {} ms", stop_latency_bound(config.window(), shape) / 1000);
    let mut last_arrival = None;
    for tick in 0..600u64 {
        let now = tick * 5_000;
        let mut arrived = Vec::new();
        while send_at.peek().is_some_and(|&t| t <= now) {
            let t = send_at.next().unwrap();
            arrived.extend(pipe.send_at(t, Vec::new())?);
        }
        arrived.extend(pipe.run_until(now));
        for (at, _) in arrived {
            seq += 1;
            channel.ingest(seq, 0.3, at, shape);
            last_arrival = Some(at);
        }
        let out = channel.sample(now, shape);
        if tick % 10 == 0 || (now >= release && now <= release + 600_000 && tick % 2 == 0) {
            println!("{:6.3} s  active {:5}  out {:.3}", now as f64 * 1e-6, channel.is_active(now), out);
        }
    }
    let stats = pipe.link.stats();
    println!("sent {} delivered {} dropped {}", stats.sent, stats.delivered, stats.dropped);
    println!("last arrival {:?} us", last_arrival);
    Ok(())
}
