//! Websocket bridge for the operator console.
//!
//! The bridge pushes one JSON [`UiFrame`] per frame period and accepts
//! [`OperatorCommand`] JSON from the client, which goes to the cloud node
//! exactly as scripted teleop does. One client at a time; a new connection
//! is accepted after the previous one closes. Closing the socket sends
//! nothing further, so the edge heartbeat brings the robot to a stop.
//!
//! Frame layout:
//!
//! ```json
//! {"t": 1.25,
//!  "robot": {"t": 1.25, "x": -2.0, "y": 0.0, "heading": 0.0, "psi": 0.001, "psi_dot": 0.0,
//!            "v": 0.0, "height": 0.55, "fallen": false, "grasping": false},
//!  "obs": {"visible": true, "center": [320.0, 250.1], "side_px": 24.8,
//!          "corners": [[307.6, 237.7], ...], "timestamp": 1250000},
//!  "phase": "navigate", "outcome": null, "e_norm": 0.002,
//!  "link_stats": [{"name": "cloud_to_rcu", "sent": 40, "delivered": 40, "dropped": 0, "reordered": 0}, ...],
//!  "heartbeat": [{"command": "Forward", "active": false, "latched": 0.0, "ramp": 0.0}, ...],
//!  "camera": {"width": 640, "height": 480, "target_size_px": 100.0, "center_tolerance_px": 5.0}}
//! ```
//!
//! Anything the client sends that does not parse as a command is answered
//! with `{"error": "..."}` and otherwise ignored.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use super::live::LiveTopology;
use super::operator::OperatorCommand;
use super::topology::{VirtualTopology, LINK_NAMES};
use super::{CloudNode, EdgeNode};
use crate::heartbeat::CommandType;
use crate::ibvs::{Outcome, Phase};
use crate::netsim::{LinkStats, ProxyStats};
use crate::telemetry::TelemetryRecord;
use crate::vision::{project, TagObservation};
use crate::{micros_from_secs, secs, Micros};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkFrame {
    pub name: String,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub reordered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFrame {
    pub command: CommandType,
    pub active: bool,
    pub latched: f64,
    /// Ramp position in [0, 1].
    pub ramp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub width: u32,
    pub height: u32,
    pub target_size_px: f64,
    pub center_tolerance_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UiFrame {
    /// Seconds.
    pub t: f64,
    pub robot: TelemetryRecord,
    /// What the robot camera sees now, corners included.
    pub obs: TagObservation,
    pub phase: Option<Phase>,
    pub outcome: Option<Outcome>,
    pub e_norm: Option<f64>,
    pub link_stats: Vec<LinkFrame>,
    pub heartbeat: Vec<ChannelFrame>,
    pub camera: CameraFrame,
}

impl UiFrame {
    pub fn build(now: Micros, cloud: &CloudNode, edge: &EdgeNode, link_stats: Vec<LinkFrame>) -> Self {
        let world = edge.world();
        let camera = world.camera();
        let obs = project(camera, &world.camera_pose(), &world.target_at(now), now);
        let pickup = &cloud.config().pickup;
        UiFrame {
            t: secs(now),
            robot: edge.record(now),
            obs,
            phase: cloud.phase(),
            outcome: cloud.outcome(),
            e_norm: cloud.machine().and_then(|m| m.last_error()).map(|e| e.e.norm()),
            link_stats,
            heartbeat: edge
                .channels()
                .iter()
                .map(|c| ChannelFrame {
                    command: c.command_type(),
                    active: c.is_active(now),
                    latched: c.latched_value(),
                    ramp: c.ramp_pos(),
                })
                .collect(),
            camera: CameraFrame {
                width: camera.width,
                height: camera.height,
                target_size_px: pickup.target_size_px,
                center_tolerance_px: pickup.center_tolerance_px,
            },
        }
    }
}

fn link_frames_virtual(stats: [LinkStats; 4]) -> Vec<LinkFrame> {
    stats
        .iter()
        .zip(LINK_NAMES)
        .map(|(s, name)| LinkFrame {
            name: name.into(),
            sent: s.sent,
            delivered: s.delivered,
            dropped: s.dropped,
            reordered: s.reordered,
        })
        .collect()
}

fn link_frames_live(stats: [ProxyStats; 4]) -> Vec<LinkFrame> {
    stats
        .iter()
        .zip(LINK_NAMES)
        .map(|(s, name)| LinkFrame {
            name: name.into(),
            sent: s.received,
            delivered: s.forwarded,
            dropped: s.dropped + s.oversized,
            reordered: 0,
        })
        .collect()
}

/// What the bridge drives.
pub trait Backend {
    fn now(&self) -> Micros;
    /// Moves simulated time forward. Wall-clock backends ignore this.
    fn advance_to(&mut self, t: Micros);
    fn operator(&mut self, cmd: OperatorCommand);
    fn frame(&self) -> UiFrame;
}

impl Backend for VirtualTopology {
    fn now(&self) -> Micros {
        VirtualTopology::now(self)
    }

    fn advance_to(&mut self, t: Micros) {
        self.run_until(t);
    }

    fn operator(&mut self, cmd: OperatorCommand) {
        let now = VirtualTopology::now(self);
        self.schedule_operator(now, cmd);
    }

    fn frame(&self) -> UiFrame {
        let now = VirtualTopology::now(self);
        UiFrame::build(now, self.cloud(), self.edge(), link_frames_virtual(self.link_stats()))
    }
}

impl Backend for LiveTopology {
    fn now(&self) -> Micros {
        LiveTopology::now(self)
    }

    fn advance_to(&mut self, _t: Micros) {}

    fn operator(&mut self, cmd: OperatorCommand) {
        self.send_operator(cmd);
    }

    fn frame(&self) -> UiFrame {
        let links = link_frames_live(self.proxy_stats());
        let now = LiveTopology::now(self);
        let cloud = self.cloud();
        let edge = self.edge();
        UiFrame::build(now, &cloud, &edge, links)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeConfig {
    pub frame_hz: f64,
    /// Simulated seconds per wall-clock second for virtual backends.
    pub time_scale: f64,
    /// Stop once simulated time reaches this.
    pub until: Option<Micros>,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self { frame_hz: 20.0, time_scale: 1.0, until: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("websocket: {0}")]
    Ws(Box<tungstenite::Error>),
    #[error("invalid bridge config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BridgeStats {
    pub clients: u64,
    pub frames: u64,
    pub commands: u64,
    pub rejected: u64,
}

impl From<tungstenite::Error> for BridgeError {
    fn from(e: tungstenite::Error) -> Self {
        BridgeError::Ws(Box::new(e))
    }
}

#[derive(Serialize)]
struct ErrorReply<'a> {
    error: &'a str,
}

fn accept(listener: &TcpListener) -> Result<Option<WebSocket<TcpStream>>, BridgeError> {
    let stream = match listener.accept() {
        Ok((s, peer)) => {
            tracing::info!(%peer, "console connected");
            s
        }
        Err(e) if e.kind() == ErrorKind::WouldBlock => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(2)))?;
    stream.set_nodelay(true)?;
    let ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            tracing::warn!(%e, "websocket handshake failed");
            return Ok(None);
        }
    };
    ws.get_ref().set_nonblocking(true)?;
    Ok(Some(ws))
}

fn would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if io.kind() == ErrorKind::WouldBlock)
}

/// Reads whatever the client has sent. Returns false once the connection
/// is gone.
fn pump_incoming<B: Backend>(ws: &mut WebSocket<TcpStream>, backend: &mut B, stats: &mut BridgeStats) -> bool {
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => match serde_json::from_str::<OperatorCommand>(&text) {
                Ok(cmd) => {
                    stats.commands += 1;
                    backend.operator(cmd);
                }
                Err(e) => {
                    stats.rejected += 1;
                    let reply = serde_json::to_string(&ErrorReply { error: &e.to_string() }).expect("plain struct");
                    let _ = ws.send(Message::text(reply));
                }
            },
            Ok(Message::Close(_)) => return false,
            Ok(_) => {}
            Err(e) if would_block(&e) => return true,
            Err(e) => {
                tracing::info!(%e, "console disconnected");
                return false;
            }
        }
    }
}

/// Runs the bridge until `stop` is set or `config.until` is reached, and
/// hands the backend back.
pub fn serve<B: Backend>(
    mut backend: B,
    listener: TcpListener,
    config: &BridgeConfig,
    stop: &AtomicBool,
) -> Result<(B, BridgeStats), BridgeError> {
    if !(config.frame_hz > 0.0 && config.time_scale > 0.0) {
        return Err(BridgeError::Config(format!(
            "frame_hz {} and time_scale {} must be > 0",
            config.frame_hz, config.time_scale
        )));
    }
    listener.set_nonblocking(true)?;
    let period = Duration::from_secs_f64(1.0 / config.frame_hz);
    let wall0 = Instant::now();
    let sim0 = backend.now();
    let mut client: Option<WebSocket<TcpStream>> = None;
    let mut stats = BridgeStats::default();
    let mut next_frame = wall0;

    while !stop.load(Ordering::Relaxed) {
        let target = sim0 + micros_from_secs(wall0.elapsed().as_secs_f64() * config.time_scale);
        let target = config.until.map_or(target, |u| target.min(u));
        backend.advance_to(target);
        if config.until.is_some_and(|u| backend.now() >= u) {
            break;
        }

        if client.is_none() {
            client = accept(&listener)?;
            stats.clients += client.is_some() as u64;
        }
        if let Some(ws) = client.as_mut() {
            let mut alive = pump_incoming(ws, &mut backend, &mut stats);
            if alive && Instant::now() >= next_frame {
                let text = serde_json::to_string(&backend.frame()).expect("frame serializes");
                match ws.send(Message::text(text)) {
                    Ok(()) => stats.frames += 1,
                    Err(e) if would_block(&e) => {}
                    Err(e) => {
                        tracing::info!(%e, "console disconnected");
                        alive = false;
                    }
                }
                next_frame += period;
            }
            if !alive {
                client = None;
            }
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    if let Some(mut ws) = client {
        let _ = ws.close(None);
        let _ = ws.flush();
    }
    Ok((backend, stats))
}
