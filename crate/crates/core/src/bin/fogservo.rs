use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fogservo::harness::{build_nodes, build_topology, run, run_live, sweep, write_csv, Grid, RepNodes, Scenario};
use fogservo::micros_from_secs;
use fogservo::nodes::bridge::{serve, BridgeConfig};
use fogservo::nodes::live::LiveTopology;
use tracing_subscriber::EnvFilter;

/// Simulated cloud/RCU/edge robot stack.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and print the metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<u32>,
        /// Real UDP sockets on loopback instead of the virtual clock.
        #[arg(long)]
        live: bool,
        /// Directory for JSON-Lines logs and metrics.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of a parameter grid and write a CSV table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// JSON object mapping dotted scenario paths to value lists.
        #[arg(long)]
        grid: PathBuf,
        /// CSV destination; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the websocket bridge for the operator console.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8765)]
        ws_port: u16,
        #[arg(long)]
        live: bool,
        /// Simulated seconds per wall second (virtual backend only).
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
    },
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("FOGSERVO_LOG_LEVEL").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().cmd {
        Cmd::Run { config, seed, reps, live, out } => {
            let mut s = load(&config)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(reps) = reps {
                s.repetitions = reps;
            }
            let report = if live { run_live(&s, out.as_deref())? } else { run(&s, out.as_deref())? };
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
        Cmd::Sweep { config, grid, out } => {
            let s = load(&config)?;
            let text = std::fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let grid: Grid = serde_json::from_str(&text).with_context(|| format!("parsing {}", grid.display()))?;
            let rows = sweep(&s, &grid)?;
            match out {
                Some(p) => write_csv(BufWriter::new(File::create(&p)?), &grid, &rows)?,
                None => write_csv(std::io::stdout().lock(), &grid, &rows)?,
            }
        }
        Cmd::Serve { config, ws_port, live, time_scale } => {
            let s = load(&config)?;
            let listener = TcpListener::bind(("127.0.0.1", ws_port))?;
            eprintln!("console bridge on ws://{}", listener.local_addr()?);
            let stop = AtomicBool::new(false);
            let bridge = BridgeConfig { time_scale, ..BridgeConfig::default() };
            if live {
                let RepNodes { cloud, rcu, edge, links, .. } = build_nodes(&s, 0)?;
                let topo = LiveTopology::start(cloud, rcu, edge, &links, &s.live_ports)?;
                serve(topo, listener, &bridge, &stop)?;
            } else {
                let (topo, _) = build_topology(&s, 0)?;
                let bridge = BridgeConfig { until: Some(micros_from_secs(s.duration_s)), ..bridge };
                serve(topo, listener, &bridge, &stop)?;
            }
        }
    }
    Ok(())
}
