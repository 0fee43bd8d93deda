//! Delivery statistics of a shaped link: loss rate, delay spread and
//! reordering, plus the first lines of its delivery log.
//!
//! `cargo run --example lossy_link`

use fogservo::netsim::{LinkProfile, Pipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = LinkProfile { reorder_prob: 0.05, ..LinkProfile::lossy(100.0, 30.0, 0.2, 9) };
    let mut pipe = Pipe::new(profile)?;
    let n = 10_000u64;
    let mut arrivals = Vec::new();
    for i in 0..n {
        arrivals.extend(pipe.send_at(i * 10_000, vec![0u8; 32])?);
    }
    arrivals.extend(pipe.run_until(u64::MAX / 2));

    let delays: Vec<f64> = pipe
        .link
        .log()
        .iter()
        .filter_map(|r| r.t_deliver.map(|d| (d - r.t_send) as f64 / 1e3))
        .collect();
    let mean = delays.iter().sum::<f64>() / delays.len() as f64;
    let min = delays.iter().copied().fold(f64::INFINITY, f64::min);
    let max = delays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let stats = pipe.link.stats();
    println!("sent {}  delivered {}  dropped {}  reordered {}", stats.sent, stats.delivered, stats.dropped, stats.reordered);
    println!("delivered fraction {:.4}", stats.delivered as f64 / n as f64);
    println!("delay ms: mean {mean:.1}  min {min:.1}  max {max:.1}");

    println!("first log lines:");
    let mut out = Vec::new();
    pipe.link.write_log(&mut out)?;
    for line in String::from_utf8(out)?.lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
