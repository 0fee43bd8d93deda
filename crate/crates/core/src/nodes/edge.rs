//! Edge controller: heartbeat reconstruction and the 200 Hz loop.

use super::wire::{decode, encode, ObservationMsg, Packet, Payload, TelemetryFlags, TelemetryMsg, MODE_AUTO};
use super::{Node, Outbox, Port};
use crate::heartbeat::{ChannelBank, CommandType, HeartbeatConfig, HeartbeatError};
use crate::telemetry::TelemetryRecord;
use crate::vision::TagObservation;
use crate::world::{DriveCommand, ScriptState, World};
use crate::{micros_from_secs, secs, Micros};

#[derive(Debug, Clone)]
pub struct EdgeConfig {
    pub heartbeat: HeartbeatConfig,
    /// Control ticks between telemetry uplinks (10 at 200 Hz gives 20 Hz).
    pub telemetry_every: u32,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self { heartbeat: HeartbeatConfig::default(), telemetry_every: 10 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeCounters {
    pub received: u64,
    pub decode_errors: u64,
    pub ignored: u64,
}

/// Owns the robot. Network input only touches the heartbeat channels; the
/// control tick samples them and advances the world.
#[derive(Debug)]
pub struct EdgeNode {
    world: World,
    bank: ChannelBank,
    tick: Micros,
    next_tick: Micros,
    ticks: u64,
    telemetry_every: u64,
    seq: u32,
    auto: bool,
    moving: bool,
    last_command: DriveCommand,
    telemetry: Vec<TelemetryRecord>,
    stops: Vec<Micros>,
    counters: EdgeCounters,
}

impl EdgeNode {
    pub fn new(world: World, config: &EdgeConfig) -> Result<Self, HeartbeatError> {
        let tick = micros_from_secs(world.dynamics().params().dt);
        let start = world.state().time;
        Ok(Self {
            world,
            bank: ChannelBank::new(&config.heartbeat)?,
            tick,
            next_tick: start + tick,
            ticks: 0,
            telemetry_every: config.telemetry_every.max(1) as u64,
            seq: 0,
            auto: false,
            moving: false,
            last_command: DriveCommand::default(),
            telemetry: Vec::new(),
            stops: Vec::new(),
            counters: EdgeCounters::default(),
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn channels(&self) -> &ChannelBank {
        &self.bank
    }

    pub fn telemetry(&self) -> &[TelemetryRecord] {
        &self.telemetry
    }

    /// Ticks at which the reconstructed drive command returned to exactly zero.
    pub fn stops(&self) -> &[Micros] {
        &self.stops
    }

    pub fn counters(&self) -> EdgeCounters {
        self.counters
    }

    pub fn auto(&self) -> bool {
        self.auto
    }

    pub fn last_command(&self) -> DriveCommand {
        self.last_command
    }

    pub fn record(&self, now: Micros) -> TelemetryRecord {
        let s = self.world.state();
        TelemetryRecord {
            t: secs(now),
            x: s.ground_pos.x,
            y: s.ground_pos.y,
            heading: s.heading,
            psi: s.lean_angle,
            psi_dot: s.lean_rate,
            v: s.com_velocity,
            height: s.body_height,
            fallen: s.fallen,
            grasping: s.grasping,
        }
    }

    fn flags(&self) -> TelemetryFlags {
        let s = self.world.state();
        let script = self.world.script();
        TelemetryFlags::default()
            .with(TelemetryFlags::FALLEN, s.fallen)
            .with(TelemetryFlags::GRASPING, s.grasping)
            .with(TelemetryFlags::SCRIPT_ACTIVE, matches!(script, ScriptState::Running { .. }))
            .with(TelemetryFlags::SCRIPT_DONE, matches!(script, ScriptState::Finished { .. }))
            .with(TelemetryFlags::AUTO, self.auto)
    }

    fn send(&mut self, now: Micros, payload: Payload, out: &mut Outbox) {
        self.seq += 1;
        out.push(Port::Up, encode(&Packet { seq: self.seq, send_ts: now, payload }));
    }
}

pub fn observation_msg(obs: &TagObservation) -> ObservationMsg {
    ObservationMsg {
        visible: obs.visible,
        cx: obs.center[0] as f32,
        cy: obs.center[1] as f32,
        side_px: obs.side_px as f32,
        capture_ts: obs.timestamp,
    }
}

impl Node for EdgeNode {
    fn on_datagram(&mut self, _port: Port, bytes: &[u8], now: Micros, _out: &mut Outbox) {
        let packet = match decode(bytes) {
            Ok(p) => p,
            Err(e) => {
                self.counters.decode_errors += 1;
                tracing::debug!(%e, "edge dropped malformed datagram");
                return;
            }
        };
        self.counters.received += 1;
        let seq = packet.seq;
        let split = |v: f32| ((v as f64).max(0.0), (-(v as f64)).max(0.0));
        let bank = &mut self.bank;
        match packet.payload {
            Payload::Velocity { forward, yaw } => {
                let (f, b) = split(forward);
                let (l, r) = split(yaw);
                bank.ingest(CommandType::Forward, seq, f, now);
                bank.ingest(CommandType::Backward, seq, b, now);
                bank.ingest(CommandType::TurnLeft, seq, l, now);
                bank.ingest(CommandType::TurnRight, seq, r, now);
            }
            Payload::Height { rate } => {
                let (u, d) = split(rate);
                bank.ingest(CommandType::HeightUp, seq, u, now);
                bank.ingest(CommandType::HeightDown, seq, d, now);
            }
            Payload::Grasp => {
                bank.ingest(CommandType::Grasp, seq, 1.0, now);
            }
            Payload::Mode(m) => {
                bank.ingest(CommandType::AutoMode, seq, m as f64, now);
            }
            Payload::Observation(_) | Payload::Telemetry(_) => self.counters.ignored += 1,
        }
    }

    fn on_timer(&mut self, now: Micros, out: &mut Outbox) {
        while self.next_tick <= now {
            let t = self.next_tick;
            self.next_tick += self.tick;
            self.ticks += 1;

            if self.bank.channel_mut(CommandType::Grasp).take_trigger().is_some() && self.world.start_grasp(t) {
                tracing::debug!(t = secs(t), "grasp script started");
            }
            if let Some(m) = self.bank.channel_mut(CommandType::AutoMode).take_trigger() {
                self.auto = m == MODE_AUTO as f64;
            }
            let cmd = DriveCommand {
                forward: self.bank.sample_axis(CommandType::Forward, CommandType::Backward, t),
                yaw_rate: self.bank.sample_axis(CommandType::TurnLeft, CommandType::TurnRight, t),
                height_rate: self.bank.sample_axis(CommandType::HeightUp, CommandType::HeightDown, t),
            };
            let moving = cmd.forward != 0.0 || cmd.yaw_rate != 0.0 || cmd.height_rate != 0.0;
            if self.moving && !moving {
                self.stops.push(t);
            }
            self.moving = moving;
            self.last_command = cmd;
            self.world.step(t, cmd);

            if let Some(obs) = self.world.capture(t) {
                self.send(t, Payload::Observation(observation_msg(&obs)), out);
            }
            if self.ticks.is_multiple_of(self.telemetry_every) {
                let rec = self.record(t);
                let msg = TelemetryMsg {
                    x: rec.x as f32,
                    y: rec.y as f32,
                    heading: rec.heading as f32,
                    psi: rec.psi as f32,
                    psi_dot: rec.psi_dot as f32,
                    v: rec.v as f32,
                    height: rec.height as f32,
                    flags: self.flags(),
                };
                self.telemetry.push(rec);
                self.send(t, Payload::Telemetry(msg), out);
            }
        }
    }

    fn next_timer(&self) -> Option<Micros> {
        Some(self.next_tick)
    }
}
