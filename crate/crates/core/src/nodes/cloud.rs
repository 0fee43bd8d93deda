//! Cloud controller: teleoperation relay, tag recognition, visual servoing.

use super::operator::OperatorCommand;
use super::wire::{decode, encode, ObservationMsg, Packet, Payload, TelemetryFlags, TelemetryMsg, MODE_AUTO};
use super::{Node, Outbox, Port};
use crate::ibvs::{GraspStatus, IbvsError, Outcome, Phase, PhaseRecord, PickupConfig, PickupMachine};
use crate::vision::{CameraModel, TagObservation};
use crate::{micros_from_secs, Micros};

#[derive(Debug, Clone)]
pub struct CloudConfig {
    pub pickup: PickupConfig,
    /// The controller's idea of the camera, which may differ from the real one.
    pub camera: CameraModel,
    /// Rate at which servo commands are streamed to the edge.
    pub publish_hz: f64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self { pickup: PickupConfig::default(), camera: CameraModel::default(), publish_hz: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CloudCounters {
    pub observations: u64,
    pub telemetry: u64,
    pub decode_errors: u64,
    /// Held teleop commands discarded because auto mode was engaged.
    pub teleop_ignored: u64,
}

#[derive(Debug)]
pub struct CloudNode {
    config: CloudConfig,
    period: Micros,
    next_publish: Micros,
    seq: u32,
    machine: Option<PickupMachine>,
    phase_log: Vec<PhaseRecord>,
    last_obs: Option<TagObservation>,
    last_telemetry: Option<(Micros, TelemetryMsg)>,
    counters: CloudCounters,
}

pub fn tag_observation(msg: &ObservationMsg) -> TagObservation {
    TagObservation {
        visible: msg.visible,
        center: [msg.cx as f64, msg.cy as f64],
        side_px: msg.side_px as f64,
        corners: [[0.0; 2]; 4],
        timestamp: msg.capture_ts,
    }
}

impl CloudNode {
    pub fn new(config: CloudConfig) -> Result<Self, IbvsError> {
        config.pickup.validate()?;
        if !(config.publish_hz > 0.0 && config.publish_hz <= 1000.0) {
            return Err(IbvsError::InvalidConfig(format!("publish_hz {} out of range", config.publish_hz)));
        }
        let period = micros_from_secs(1.0 / config.publish_hz);
        Ok(Self {
            config,
            period,
            next_publish: period,
            seq: 0,
            machine: None,
            phase_log: Vec::new(),
            last_obs: None,
            last_telemetry: None,
            counters: CloudCounters::default(),
        })
    }

    pub fn config(&self) -> &CloudConfig {
        &self.config
    }

    pub fn phase(&self) -> Option<Phase> {
        self.machine.as_ref().map(|m| m.phase())
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.machine.as_ref().and_then(|m| m.outcome())
    }

    pub fn machine(&self) -> Option<&PickupMachine> {
        self.machine.as_ref()
    }

    pub fn auto_active(&self) -> bool {
        self.machine.as_ref().is_some_and(|m| !m.phase().is_terminal())
    }

    pub fn phase_log(&self) -> &[PhaseRecord] {
        &self.phase_log
    }

    pub fn last_observation(&self) -> Option<&TagObservation> {
        self.last_obs.as_ref()
    }

    pub fn last_telemetry(&self) -> Option<&(Micros, TelemetryMsg)> {
        self.last_telemetry.as_ref()
    }

    pub fn counters(&self) -> CloudCounters {
        self.counters
    }

    fn send(&mut self, now: Micros, payload: Payload, out: &mut Outbox) {
        self.seq += 1;
        out.push(Port::Down, encode(&Packet { seq: self.seq, send_ts: now, payload }));
    }

    /// Handles one operator command. Invalid commands are dropped.
    pub fn on_operator(&mut self, cmd: OperatorCommand, now: Micros, out: &mut Outbox) {
        if let Err(e) = cmd.validate() {
            tracing::warn!(%e, "ignoring operator command");
            return;
        }
        match cmd {
            OperatorCommand::Mode { value } => {
                if value == MODE_AUTO {
                    if !self.auto_active() {
                        let machine = PickupMachine::new(self.config.pickup.clone(), self.config.camera.clone(), now)
                            .expect("config validated in CloudNode::new");
                        self.machine = Some(machine);
                    }
                } else {
                    self.machine = None;
                }
            }
            _ if cmd.is_held() && self.auto_active() => {
                self.counters.teleop_ignored += 1;
                return;
            }
            _ => {}
        }
        self.send(now, cmd.to_payload(), out);
    }

    fn publish(&mut self, now: Micros, out: &mut Outbox) {
        let Some(machine) = self.machine.as_mut() else {
            return;
        };
        let output = machine.poll(now);
        if let Some(e) = output.effort {
            self.send(now, Payload::Velocity { forward: e.forward as f32, yaw: e.yaw_rate as f32 }, out);
            self.send(now, Payload::Height { rate: e.height_rate as f32 }, out);
        }
        if output.grasp {
            self.send(now, Payload::Grasp, out);
        }
    }
}

impl Node for CloudNode {
    fn on_datagram(&mut self, _port: Port, bytes: &[u8], now: Micros, _out: &mut Outbox) {
        let packet = match decode(bytes) {
            Ok(p) => p,
            Err(e) => {
                self.counters.decode_errors += 1;
                tracing::debug!(%e, "cloud dropped malformed datagram");
                return;
            }
        };
        match packet.payload {
            Payload::Observation(msg) => {
                self.counters.observations += 1;
                let obs = tag_observation(&msg);
                if let Some(machine) = self.machine.as_mut() {
                    if let Some(rec) = machine.on_observation(&obs, now) {
                        self.phase_log.push(rec);
                    }
                }
                self.last_obs = Some(obs);
            }
            Payload::Telemetry(msg) => {
                self.counters.telemetry += 1;
                // Keep the freshest sample by edge send time.
                if self.last_telemetry.is_none_or(|(t, _)| packet.send_ts >= t) {
                    self.last_telemetry = Some((packet.send_ts, msg));
                }
                if let Some(machine) = self.machine.as_mut() {
                    let f = msg.flags;
                    let status = GraspStatus {
                        script_active: f.has(TelemetryFlags::SCRIPT_ACTIVE),
                        script_done: f.has(TelemetryFlags::SCRIPT_DONE),
                        grasping: f.has(TelemetryFlags::GRASPING),
                    };
                    machine.on_telemetry(status, now);
                }
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, now: Micros, out: &mut Outbox) {
        while self.next_publish <= now {
            let t = self.next_publish;
            self.next_publish += self.period;
            self.publish(t, out);
        }
    }

    fn next_timer(&self) -> Option<Micros> {
        Some(self.next_publish)
    }
}
