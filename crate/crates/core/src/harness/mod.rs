//! Scenario files, headless repetitions and parameter sweeps.

mod run;
mod scenario;
mod sweep;

pub use run::{
    build_nodes, build_topology, rep_seed, run, run_live, run_live_rep, run_rep, write_artifacts, RepArtifacts, RepMetrics,
    RepNodes, RunReport,
};
pub use scenario::{Mode, Placement, Rates, Scenario};
pub use sweep::{calibration_trial, sweep, write_csv, Grid, SweepRow};

use crate::heartbeat::HeartbeatError;
use crate::ibvs::IbvsError;
use crate::netsim::NetError;
use crate::world::WorldError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Heartbeat(#[from] HeartbeatError),
    #[error(transparent)]
    Ibvs(#[from] IbvsError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
