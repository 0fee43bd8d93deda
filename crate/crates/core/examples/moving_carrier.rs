//! Pickup from a box a person is carrying: one path crossing in front of the
//! robot, one walking towards it, and a grasp where the box is pulled away.
//!
//! `cargo run --release --example moving_carrier`

use std::path::Path;

use fogservo::harness::{run, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["carrier_crossing", "carrier_approach", "carrier_yank"] {
        let s = Scenario::load(&dir.join(format!("{name}.json")))?;
        let report = run(&s, None)?;
        let falls = report.reps.iter().filter(|m| m.fell).count();
        println!("{name}: {}/{} succeeded, {falls} falls", report.successes, report.repetitions);
        for m in &report.reps {
            println!("  rep {:>2}  {:?}  {:.1} s", m.rep, m.outcome, m.duration_s);
        }
    }
    Ok(())
}
