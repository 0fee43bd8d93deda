//! Headless runs of a scenario.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::scenario::{Mode, Scenario};
use super::HarnessError;
use crate::ibvs::{Outcome, PhaseRecord};
use crate::netsim::DeliveryRecord;
use crate::nodes::edge::EdgeConfig;
use crate::nodes::operator::{expand_script, OperatorCommand, TeleopTrace};
use crate::nodes::topology::LINK_NAMES;
use crate::nodes::live::LiveTopology;
use crate::nodes::{CloudConfig, CloudNode, EdgeNode, LinkSet, RcuNode, VirtualTopology};
use crate::telemetry::{write_jsonl, TelemetryRecord};
use crate::world::{ScriptState, World};
use crate::{derive_seed, micros_from_secs, secs, Micros};

/// Granularity at which a run checks whether it can stop early.
const CHUNK: Micros = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepMetrics {
    pub rep: u32,
    pub success: bool,
    #[serde(default)]
    pub outcome: Option<Outcome>,
    /// From engaging auto (or from the start, for scripted teleop) to the
    /// end of the pickup, or the whole run if it never finished.
    pub duration_s: f64,
    #[serde(default)]
    pub min_e_norm: Option<f64>,
    pub fell: bool,
    /// Worst delay from an operator releasing a held command to the edge
    /// output reaching zero.
    #[serde(default)]
    pub stop_latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub repetitions: u32,
    pub successes: u32,
    pub success_rate: f64,
    pub reps: Vec<RepMetrics>,
}

impl RunReport {
    pub fn from_reps(scenario: &Scenario, reps: Vec<RepMetrics>) -> Self {
        let successes = reps.iter().filter(|m| m.success).count() as u32;
        let n = reps.len() as u32;
        Self {
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            repetitions: n,
            successes,
            success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
            reps,
        }
    }
}

/// Everything one repetition produced.
#[derive(Debug, Clone)]
pub struct RepArtifacts {
    pub metrics: RepMetrics,
    pub telemetry: Vec<TelemetryRecord>,
    pub phase: Vec<PhaseRecord>,
    pub delivery: [Vec<DeliveryRecord>; 4],
}

pub fn rep_seed(scenario: &Scenario, rep: u32) -> u64 {
    derive_seed(scenario.seed, rep as u64)
}

/// The three nodes of one repetition, before they are wired together.
pub struct RepNodes {
    pub cloud: CloudNode,
    pub rcu: RcuNode,
    pub edge: EdgeNode,
    /// Link profiles with the per-repetition seeds filled in.
    pub links: LinkSet,
    pub trace: TeleopTrace,
}

pub fn build_nodes(scenario: &Scenario, rep: u32) -> Result<RepNodes, HarnessError> {
    let seed = rep_seed(scenario, rep);
    let start = scenario.placement.resolve(&scenario.target, derive_seed(seed, 2));
    let world = World::new(
        scenario.dynamics.clone(),
        scenario.camera.clone(),
        scenario.rates.recognition_hz,
        scenario.target.clone(),
        scenario.grasp.clone(),
        start,
        derive_seed(seed, 1),
    )?;
    let edge = EdgeNode::new(
        world,
        &EdgeConfig { heartbeat: scenario.heartbeat.clone(), telemetry_every: scenario.rates.telemetry_every },
    )?;
    let cloud = CloudNode::new(CloudConfig {
        pickup: scenario.ibvs.clone(),
        camera: scenario.controller_camera.clone().unwrap_or_else(|| scenario.camera.clone()),
        publish_hz: scenario.rates.publish_hz,
    })?;
    let mut links = scenario.link.clone();
    links.cloud_edge.seed = derive_seed(seed, 100 + links.cloud_edge.seed);
    links.rcu_edge.seed = derive_seed(seed, 200 + links.rcu_edge.seed);
    let mut trace = expand_script(&scenario.teleop, scenario.rates.teleop_hz);
    if scenario.mode != Mode::TeleopScripted {
        let at = micros_from_secs(scenario.auto_at_s);
        let i = trace.messages.partition_point(|(t, _)| *t <= at);
        trace.messages.insert(i, (at, OperatorCommand::AUTO));
    }
    Ok(RepNodes { cloud, rcu: RcuNode::default(), edge, links, trace })
}

/// Builds the three nodes for one repetition on a virtual clock and queues
/// its operator input.
pub fn build_topology(scenario: &Scenario, rep: u32) -> Result<(VirtualTopology, TeleopTrace), HarnessError> {
    let RepNodes { cloud, rcu, edge, links, trace } = build_nodes(scenario, rep)?;
    let mut topo = VirtualTopology::new(cloud, rcu, edge, &links)?;
    for &(t, cmd) in &trace.messages {
        topo.schedule_operator(t, cmd);
    }
    Ok((topo, trace))
}

/// Delay from each release to the next zero output, over releases after
/// which the operator holds nothing else until that stop.
fn stop_latency_ms(trace: &TeleopTrace, stops: &[Micros]) -> Option<f64> {
    trace
        .releases
        .iter()
        .filter_map(|&r| {
            let s = *stops.iter().find(|&&s| s >= r)?;
            let held_again = trace.messages.iter().any(|(t, c)| *t > r && *t <= s && c.is_held());
            (!held_again).then(|| (s - r) as f64 / 1e3)
        })
        .reduce(f64::max)
}

fn finished(scenario: &Scenario, cloud: &CloudNode, edge: &EdgeNode) -> bool {
    if scenario.mode != Mode::TeleopScripted {
        cloud.outcome().is_some()
    } else {
        matches!(edge.world().script(), ScriptState::Finished { .. })
    }
}

fn collect(
    scenario: &Scenario,
    rep: u32,
    cloud: &CloudNode,
    edge: &EdgeNode,
    trace: &TeleopTrace,
    end: Micros,
    delivery: [Vec<DeliveryRecord>; 4],
) -> RepArtifacts {
    let auto = scenario.mode != Mode::TeleopScripted;
    let telemetry = edge.telemetry().to_vec();
    let phase = cloud.phase_log().to_vec();
    let outcome = cloud.outcome();
    let success = if auto { outcome.is_some_and(Outcome::is_success) } else { edge.world().state().grasping };
    let started = if auto { micros_from_secs(scenario.auto_at_s) } else { 0 };
    let metrics = RepMetrics {
        rep,
        success,
        outcome,
        duration_s: secs(end.saturating_sub(started)),
        min_e_norm: phase.iter().map(|r| r.e_norm).reduce(f64::min),
        fell: edge.world().state().fallen || telemetry.iter().any(|r| r.fallen),
        stop_latency_ms: stop_latency_ms(trace, edge.stops()),
    };
    RepArtifacts { metrics, telemetry, phase, delivery }
}

pub fn run_rep(scenario: &Scenario, rep: u32) -> Result<RepArtifacts, HarnessError> {
    let (mut topo, trace) = build_topology(scenario, rep)?;
    let mut finished_at = None;
    let mut stop_at = micros_from_secs(scenario.duration_s);
    let mut t = topo.now();
    while t < stop_at {
        t = (t + CHUNK).min(stop_at);
        topo.run_until(t);
        if finished_at.is_none() && finished(scenario, topo.cloud(), topo.edge()) {
            finished_at = Some(t);
            if let Some(settle) = scenario.settle_s {
                stop_at = stop_at.min(t + micros_from_secs(settle));
            }
        }
    }
    let delivery = [0, 1, 2, 3].map(|i| topo.link(i).log().to_vec());
    Ok(collect(scenario, rep, topo.cloud(), topo.edge(), &trace, finished_at.unwrap_or(t), delivery))
}

/// One repetition over real loopback sockets, in wall-clock time.
///
/// Timing depends on the host scheduler, so results are not reproducible and
/// delivery logs are not recorded.
pub fn run_live_rep(scenario: &Scenario, rep: u32) -> Result<RepArtifacts, HarnessError> {
    let RepNodes { cloud, rcu, edge, links, trace } = build_nodes(scenario, rep)?;
    let live = LiveTopology::start(cloud, rcu, edge, &links, &scenario.live_ports)?;
    let mut pending = trace.messages.iter().peekable();
    let mut finished_at = None;
    let mut stop_at = micros_from_secs(scenario.duration_s);
    loop {
        let now = live.now();
        if now >= stop_at {
            break;
        }
        while let Some(&&(t, cmd)) = pending.peek() {
            if t > now {
                break;
            }
            live.send_operator(cmd);
            pending.next();
        }
        if finished_at.is_none() && finished(scenario, &live.cloud(), &live.edge()) {
            finished_at = Some(now);
            if let Some(settle) = scenario.settle_s {
                stop_at = stop_at.min(now + micros_from_secs(settle));
            }
        }
        std::thread::sleep(std::time::Duration::from_millis(1));
    }
    let end = finished_at.unwrap_or(live.now());
    let art = collect(scenario, rep, &live.cloud(), &live.edge(), &trace, end, Default::default());
    let stats = live.shutdown();
    tracing::info!(?stats, "live run finished");
    Ok(art)
}

pub fn write_artifacts(dir: &Path, art: &RepArtifacts) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let rep = art.metrics.rep;
    let open = |name: String| -> std::io::Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
    write_jsonl(open(format!("telemetry_rep{rep}.jsonl"))?, &art.telemetry)?;
    write_jsonl(open(format!("phase_rep{rep}.jsonl"))?, &art.phase)?;
    for (i, log) in art.delivery.iter().enumerate() {
        write_jsonl(open(format!("delivery_{}_rep{rep}.jsonl", LINK_NAMES[i]))?, log)?;
    }
    Ok(())
}

/// Runs every repetition (in parallel), optionally writing logs and
/// `metrics.json` into `out`.
pub fn run(scenario: &Scenario, out: Option<&Path>) -> Result<RunReport, HarnessError> {
    run_with(scenario, out, run_rep)
}

/// Like [`run`] but over real sockets, one repetition at a time.
pub fn run_live(scenario: &Scenario, out: Option<&Path>) -> Result<RunReport, HarnessError> {
    let mut reps = Vec::new();
    for rep in 0..scenario.repetitions {
        let art = run_live_rep(scenario, rep)?;
        if let Some(dir) = out {
            write_artifacts(dir, &art)?;
        }
        reps.push(art.metrics);
    }
    finish_report(scenario, out, reps)
}

fn run_with<F>(scenario: &Scenario, out: Option<&Path>, rep_fn: F) -> Result<RunReport, HarnessError>
where
    F: Fn(&Scenario, u32) -> Result<RepArtifacts, HarnessError> + Sync,
{
    let n = scenario.repetitions as usize;
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RepMetrics, HarnessError>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = rep_fn(scenario, i as u32).and_then(|art| {
                    if let Some(dir) = out {
                        write_artifacts(dir, &art)?;
                    }
                    Ok(art.metrics)
                });
                results.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    let reps = results
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect::<Result<Vec<_>, _>>()?;
    finish_report(scenario, out, reps)
}

fn finish_report(scenario: &Scenario, out: Option<&Path>, reps: Vec<RepMetrics>) -> Result<RunReport, HarnessError> {
    let report = RunReport::from_reps(scenario, reps);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let f = BufWriter::new(File::create(dir.join("metrics.json"))?);
        serde_json::to_writer_pretty(f, &report).map_err(std::io::Error::from)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_latency_skips_releases_followed_by_more_input() {
        let fwd = OperatorCommand::Velocity { forward: 0.3, yaw: 0.0 };
        let yaw = OperatorCommand::Velocity { forward: 0.0, yaw: 0.2 };
        let trace = TeleopTrace {
            messages: vec![(0, fwd), (1_000_000, fwd), (1_050_000, yaw), (2_000_000, yaw)],
            releases: vec![1_000_000, 2_000_000],
        };
        assert_eq!(stop_latency_ms(&trace, &[2_355_000]), Some(355.0));
        assert_eq!(stop_latency_ms(&trace, &[]), None);
        let single = TeleopTrace { messages: vec![(0, fwd)], releases: vec![0] };
        assert_eq!(stop_latency_ms(&single, &[100_000, 352_000]), Some(100.0));
    }
}
