//! Stop latency against one-way cloud link latency, as a CSV table.
//!
//! `cargo run --release --example sweep_latency`

use std::path::Path;

use fogservo::harness::{sweep, write_csv, Grid, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let base = Scenario::load(&dir.join("latency_probe.json"))?;
    let grid: Grid = serde_json::from_str(&std::fs::read_to_string(dir.join("grids/latency.json"))?)?;
    let rows = sweep(&base, &grid)?;
    write_csv(std::io::stdout().lock(), &grid, &rows)?;
    Ok(())
}
