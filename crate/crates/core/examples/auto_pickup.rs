//! Automatic box pickup from a 2 m standoff, once over an ideal link and
//! once over a slow lossy one.
//!
//! `cargo run --release --example auto_pickup`

use fogservo::harness::{run, Placement, Scenario};
use fogservo::netsim::LinkProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = Scenario {
        name: "auto_pickup".into(),
        seed: 7,
        repetitions: 10,
        placement: Placement::FacingTarget { distance: 2.0, max_bearing_deg: 20.0, height: 0.55 },
        ..Scenario::default()
    };
    let mut lossy = base.clone();
    lossy.link.cloud_edge = LinkProfile::lossy(200.0, 0.0, 0.3, 1);

    for (label, s) in [("ideal", base), ("200 ms + 30% drop", lossy)] {
        let report = run(&s, None)?;
        println!("{label}: {}/{} succeeded", report.successes, report.repetitions);
        for m in &report.reps {
            println!(
                "  rep {:>2}  {:<14} {:>6.1} s  min|e| {:.4}",
                m.rep,
                m.outcome.map(|o| format!("{o:?}")).unwrap_or_else(|| "unfinished".into()),
                m.duration_s,
                m.min_e_norm.unwrap_or(f64::NAN),
            );
        }
    }
    Ok(())
}
