//! Heartbeat command reconstruction.
//!
//! Each command type has its own [`HeartbeatChannel`]. A packet switches the
//! channel on; it stays on for a sliding window after the most recent
//! arrival and switches off when the window passes without a packet. The
//! on/off signal is then shaped by linear ramps (slower on the way up,
//! sharper on the way down) and scaled by the latched command magnitude.
//!
//! The ramp is integrated exactly between calls, piecewise over the
//! active/inactive boundary, so the output does not depend on how often the
//! channel is sampled.

mod adaptive;

pub use adaptive::AdaptiveWindow;

use serde::{Deserialize, Serialize};

use crate::{micros_from_ms, Micros};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommandType {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    HeightUp,
    HeightDown,
    Grasp,
    AutoMode,
}

impl CommandType {
    pub const ALL: [CommandType; 8] = [
        CommandType::Forward,
        CommandType::Backward,
        CommandType::TurnLeft,
        CommandType::TurnRight,
        CommandType::HeightUp,
        CommandType::HeightDown,
        CommandType::Grasp,
        CommandType::AutoMode,
    ];

    /// Grasp and mode changes fire once per packet instead of being held.
    pub fn is_edge_triggered(self) -> bool {
        matches!(self, CommandType::Grasp | CommandType::AutoMode)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HeartbeatError {
    #[error("invalid ramp shape: {0}")]
    InvalidShape(String),
}

/// Ramp durations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampShape {
    pub rise: Micros,
    pub fall: Micros,
}

impl RampShape {
    pub fn new(rise: Micros, fall: Micros) -> Result<Self, HeartbeatError> {
        if rise == 0 || fall == 0 {
            return Err(HeartbeatError::InvalidShape("ramp times must be > 0".into()));
        }
        if fall >= rise {
            return Err(HeartbeatError::InvalidShape(format!(
                "fall ({fall} us) must be shorter than rise ({rise} us)"
            )));
        }
        Ok(Self { rise, fall })
    }

    pub fn from_ms(rise_ms: f64, fall_ms: f64) -> Result<Self, HeartbeatError> {
        Self::new(micros_from_ms(rise_ms), micros_from_ms(fall_ms))
    }
}

impl Default for RampShape {
    fn default() -> Self {
        Self { rise: 200_000, fall: 100_000 }
    }
}

/// Worst-case delay between the final packet and zero output.
pub fn stop_latency_bound(window: Micros, shape: RampShape) -> Micros {
    window + shape.fall
}

/// Heartbeat configuration as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeartbeatConfig {
    pub window_ms: f64,
    pub rise_ms: f64,
    pub fall_ms: f64,
    /// Size the window from observed inter-arrival statistics.
    pub adaptive: bool,
}

impl Default for HeartbeatConfig {
    fn default() -> Self {
        Self { window_ms: 250.0, rise_ms: 200.0, fall_ms: 100.0, adaptive: false }
    }
}

impl HeartbeatConfig {
    pub fn shape(&self) -> Result<RampShape, HeartbeatError> {
        RampShape::from_ms(self.rise_ms, self.fall_ms)
    }

    pub fn window(&self) -> Micros {
        micros_from_ms(self.window_ms)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ChannelStats {
    pub accepted: u64,
    pub duplicates: u64,
    /// Older sequence numbers: they refresh the window but not the magnitude.
    pub stale: u64,
    pub rejected: u64,
}

/// What happened to an ingested packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingest {
    Accepted,
    Duplicate,
    Stale,
    Rejected,
}

/// Reconstruction state for one command type.
#[derive(Debug, Clone)]
pub struct HeartbeatChannel {
    command_type: CommandType,
    window: Micros,
    last_seen: Option<Micros>,
    last_seq: Option<u32>,
    latched_value: f64,
    ramp_pos: f64,
    ramp_time: Micros,
    pending_trigger: bool,
    adaptive: Option<AdaptiveWindow>,
    stats: ChannelStats,
}

impl HeartbeatChannel {
    pub fn new(command_type: CommandType, window: Micros) -> Self {
        Self {
            command_type,
            window: if command_type.is_edge_triggered() { 0 } else { window },
            last_seen: None,
            last_seq: None,
            latched_value: 0.0,
            ramp_pos: 0.0,
            ramp_time: 0,
            pending_trigger: false,
            adaptive: None,
            stats: ChannelStats::default(),
        }
    }

    /// Enables window sizing from inter-arrival statistics.
    pub fn with_adaptive(mut self, estimator: AdaptiveWindow) -> Self {
        if !self.command_type.is_edge_triggered() {
            self.adaptive = Some(estimator);
        }
        self
    }

    pub fn command_type(&self) -> CommandType {
        self.command_type
    }

    pub fn window(&self) -> Micros {
        self.window
    }

    pub fn last_seen(&self) -> Option<Micros> {
        self.last_seen
    }

    pub fn latched_value(&self) -> f64 {
        self.latched_value
    }

    pub fn ramp_pos(&self) -> f64 {
        self.ramp_pos
    }

    pub fn stats(&self) -> ChannelStats {
        self.stats
    }

    /// True while less than one window has passed since the latest arrival.
    pub fn is_active(&self, now: Micros) -> bool {
        match self.last_seen {
            Some(t) => now >= t && now - t < self.window,
            None => false,
        }
    }

    /// Absorbs one packet arriving at `now`.
    ///
    /// The window only ever extends forward; a duplicate sequence number is a
    /// no-op; the magnitude is re-latched only by a newer sequence number.
    /// Non-finite or negative magnitudes are rejected without touching state.
    pub fn ingest(&mut self, seq: u32, magnitude: f64, now: Micros, shape: RampShape) -> Ingest {
        if !magnitude.is_finite() || magnitude < 0.0 {
            self.stats.rejected += 1;
            return Ingest::Rejected;
        }
        if self.last_seq == Some(seq) {
            self.stats.duplicates += 1;
            return Ingest::Duplicate;
        }
        self.advance(now, shape);
        if let (Some(est), Some(prev)) = (self.adaptive.as_mut(), self.last_seen) {
            if now > prev {
                est.observe(now - prev);
                self.window = est.window();
            }
        }
        self.last_seen = Some(self.last_seen.map_or(now, |t| t.max(now)));
        let newer = self.last_seq.is_none_or(|last| seq > last);
        if newer {
            self.last_seq = Some(seq);
            self.latched_value = magnitude;
            if self.command_type.is_edge_triggered() {
                self.pending_trigger = true;
            }
            self.stats.accepted += 1;
            Ingest::Accepted
        } else {
            self.stats.stale += 1;
            Ingest::Stale
        }
    }

    /// Consumes a pending one-shot trigger (edge-triggered channels).
    pub fn take_trigger(&mut self) -> Option<f64> {
        if std::mem::take(&mut self.pending_trigger) {
            Some(self.latched_value)
        } else {
            None
        }
    }

    /// Shaped control value at `now`: latched magnitude times ramp position.
    pub fn sample(&mut self, now: Micros, shape: RampShape) -> f64 {
        self.advance(now, shape);
        self.latched_value * self.ramp_pos
    }

    /// Integrates the ramp from the last evaluation time up to `now`.
    fn advance(&mut self, now: Micros, shape: RampShape) {
        if now <= self.ramp_time {
            return;
        }
        let from = self.ramp_time;
        self.ramp_time = now;
        let Some(seen) = self.last_seen else {
            return;
        };
        let expiry = seen + self.window;
        let rising = expiry.min(now).saturating_sub(from.max(seen));
        let falling = now - from.max(expiry).min(now);
        // Residues below a microsecond's worth of ramp are rounding noise.
        if rising > 0 {
            let pos = self.ramp_pos + rising as f64 / shape.rise as f64;
            self.ramp_pos = if pos > 1.0 - 0.5 / shape.rise as f64 { 1.0 } else { pos };
        }
        if falling > 0 {
            let pos = self.ramp_pos - falling as f64 / shape.fall as f64;
            self.ramp_pos = if pos < 0.5 / shape.fall as f64 { 0.0 } else { pos };
        }
    }
}

/// The full set of per-command channels used by the edge controller.
#[derive(Debug, Clone)]
pub struct ChannelBank {
    channels: Vec<HeartbeatChannel>,
    shape: RampShape,
}

impl ChannelBank {
    pub fn new(config: &HeartbeatConfig) -> Result<Self, HeartbeatError> {
        let shape = config.shape()?;
        let channels = CommandType::ALL
            .iter()
            .map(|&ct| {
                let ch = HeartbeatChannel::new(ct, config.window());
                if config.adaptive {
                    ch.with_adaptive(AdaptiveWindow::new(config.window()))
                } else {
                    ch
                }
            })
            .collect();
        Ok(Self { channels, shape })
    }

    pub fn shape(&self) -> RampShape {
        self.shape
    }

    pub fn channel(&self, ct: CommandType) -> &HeartbeatChannel {
        &self.channels[ct as usize]
    }

    pub fn channel_mut(&mut self, ct: CommandType) -> &mut HeartbeatChannel {
        &mut self.channels[ct as usize]
    }

    pub fn ingest(&mut self, ct: CommandType, seq: u32, magnitude: f64, now: Micros) -> Ingest {
        let shape = self.shape;
        self.channel_mut(ct).ingest(seq, magnitude, now, shape)
    }

    pub fn sample(&mut self, ct: CommandType, now: Micros) -> f64 {
        let shape = self.shape;
        self.channel_mut(ct).sample(now, shape)
    }

    /// `positive - negative` for a pair of opposing channels.
    pub fn sample_axis(&mut self, positive: CommandType, negative: CommandType, now: Micros) -> f64 {
        self.sample(positive, now) - self.sample(negative, now)
    }

    pub fn iter(&self) -> impl Iterator<Item = &HeartbeatChannel> {
        self.channels.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MS: Micros = 1000;

    fn fwd() -> HeartbeatChannel {
        HeartbeatChannel::new(CommandType::Forward, 250 * MS)
    }

    #[test]
    fn first_packet_turns_channel_on() {
        let mut ch = fwd();
        assert!(!ch.is_active(0));
        ch.ingest(1, 1.0, 0, RampShape::default());
        assert!(ch.is_active(0));
        assert_eq!(ch.last_seen(), Some(0));
    }

    #[test]
    fn window_extends_from_last_packet() {
        let mut ch = fwd();
        for (i, t) in [0, 100, 200].into_iter().enumerate() {
            ch.ingest(i as u32, 1.0, t * MS, RampShape::default());
        }
        assert!(ch.is_active(200 * MS));
        assert!(ch.is_active(449_999));
        assert!(!ch.is_active(450 * MS));
    }

    #[test]
    fn duplicate_sequence_is_idempotent() {
        let shape = RampShape::default();
        let mut once = fwd();
        once.ingest(5, 0.7, 10 * MS, shape);
        let mut twice = fwd();
        twice.ingest(5, 0.7, 10 * MS, shape);
        assert_eq!(twice.ingest(5, 0.7, 10 * MS, shape), Ingest::Duplicate);
        assert_eq!(once.sample(300 * MS, shape), twice.sample(300 * MS, shape));
        assert_eq!(once.last_seen(), twice.last_seen());
    }

    #[test]
    fn stale_packet_refreshes_window_not_value() {
        let shape = RampShape::default();
        let mut ch = fwd();
        ch.ingest(10, 0.5, 0, shape);
        assert_eq!(ch.ingest(9, 0.9, 100 * MS, shape), Ingest::Stale);
        assert_eq!(ch.latched_value(), 0.5);
        assert!(ch.is_active(300 * MS));
    }

    #[test]
    fn malformed_payload_rejected() {
        let shape = RampShape::default();
        let mut ch = fwd();
        assert_eq!(ch.ingest(1, f64::NAN, 0, shape), Ingest::Rejected);
        assert_eq!(ch.ingest(2, -1.0, 0, shape), Ingest::Rejected);
        assert_eq!(ch.stats().rejected, 2);
        assert_eq!(ch.last_seen(), None);
    }

    #[test]
    fn linear_ramp_midpoint() {
        let shape = RampShape::default();
        let mut ch = fwd();
        ch.ingest(1, 1.0, 0, shape);
        assert!((ch.sample(100 * MS, shape) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn never_activated_is_zero() {
        let mut ch = fwd();
        assert_eq!(ch.sample(1_000 * MS, RampShape::default()), 0.0);
    }

    #[test]
    fn single_packet_reaches_zero_at_window_plus_fall() {
        let shape = RampShape::default();
        let mut ch = fwd();
        ch.ingest(1, 1.0, 0, shape);
        assert_eq!(ch.sample(250 * MS, shape), 1.0);
        assert!(ch.sample(349 * MS, shape) > 0.0);
        assert_eq!(ch.sample(350 * MS, shape), 0.0);
    }

    #[test]
    fn output_independent_of_sampling_pattern() {
        let shape = RampShape::default();
        let mut sparse = fwd();
        let mut dense = fwd();
        sparse.ingest(1, 1.0, 0, shape);
        dense.ingest(1, 1.0, 0, shape);
        for t in (0..=290).step_by(5) {
            dense.sample(t * MS, shape);
        }
        assert!((sparse.sample(290 * MS, shape) - dense.sample(290 * MS, shape)).abs() < 1e-12);
    }

    #[test]
    fn stop_bound() {
        assert_eq!(stop_latency_bound(250, RampShape { rise: 200, fall: 100 }), 350);
        assert_eq!(stop_latency_bound(0, RampShape { rise: 0, fall: 0 }), 0);
    }

    #[test]
    fn shape_requires_sharper_stop() {
        assert!(RampShape::from_ms(200.0, 100.0).is_ok());
        assert!(RampShape::from_ms(100.0, 100.0).is_err());
        assert!(RampShape::from_ms(100.0, 0.0).is_err());
    }

    #[test]
    fn grasp_fires_once_per_packet() {
        let shape = RampShape::default();
        let mut ch = HeartbeatChannel::new(CommandType::Grasp, 250 * MS);
        assert_eq!(ch.window(), 0);
        ch.ingest(1, 1.0, 0, shape);
        ch.ingest(1, 1.0, 1, shape);
        assert_eq!(ch.take_trigger(), Some(1.0));
        assert_eq!(ch.take_trigger(), None);
        assert_eq!(ch.sample(10 * MS, shape), 0.0);
    }

    proptest! {
        // Arrival gaps under one window keep the channel on without flicker
        // from the first arrival until one window after the last.
        #[test]
        fn no_flicker_when_gaps_fit_the_window(gaps in prop::collection::vec(1u64..250, 1..40)) {
            let shape = RampShape::default();
            let mut ch = fwd();
            let mut arrivals = vec![0u64];
            for g in &gaps {
                arrivals.push(arrivals.last().unwrap() + g * MS);
            }
            let last = *arrivals.last().unwrap();
            let mut next = 0;
            let mut t = 0;
            while t < last + 250 * MS {
                while next < arrivals.len() && arrivals[next] <= t {
                    ch.ingest(next as u32, 1.0, arrivals[next], shape);
                    next += 1;
                }
                prop_assert!(ch.is_active(t));
                t += MS;
            }
            prop_assert!(!ch.is_active(last + 250 * MS));
        }

        #[test]
        fn reorder_safe(arrivals in prop::collection::vec(0u64..2_000, 1..30), perm_seed in any::<u64>()) {
            let shape = RampShape::default();
            let mut sorted = arrivals.clone();
            sorted.sort();
            // Same arrival times, different sequence numbers attached.
            let mut seqs: Vec<u32> = (0..sorted.len() as u32).collect();
            let n = seqs.len();
            for i in (1..n).rev() {
                let j = ((perm_seed.wrapping_mul(i as u64 + 1)) >> 7) as usize % (i + 1);
                seqs.swap(i, j);
            }
            let trace = |seqs: &[u32]| {
                let mut ch = fwd();
                let mut out = Vec::new();
                let mut k = 0;
                for t in (0..2_500u64).step_by(5) {
                    while k < sorted.len() && sorted[k] * MS <= t * MS {
                        ch.ingest(seqs[k], 1.0, sorted[k] * MS, shape);
                        k += 1;
                    }
                    out.push((ch.is_active(t * MS), ch.ramp_pos()));
                    ch.sample(t * MS, shape);
                }
                out
            };
            let identity: Vec<u32> = (0..n as u32).collect();
            prop_assert_eq!(trace(&identity), trace(&seqs));
        }

        #[test]
        fn continuity_and_bounded_stop(sends in prop::collection::vec(0u64..3_000, 1..30)) {
            let shape = RampShape::default();
            let mut arrivals = sends.clone();
            arrivals.sort();
            let mut ch = fwd();
            let dt = 5 * MS;
            let max_jump = dt as f64 / shape.fall.min(shape.rise) as f64;
            let mut prev = 0.0;
            let mut k = 0;
            let last = *arrivals.last().unwrap() * MS;
            let mut t = 0;
            while t <= last + 400 * MS {
                while k < arrivals.len() && arrivals[k] * MS <= t {
                    ch.ingest(k as u32, 1.0, arrivals[k] * MS, shape);
                    k += 1;
                }
                let v = ch.sample(t, shape);
                prop_assert!((v - prev).abs() <= max_jump + 1e-12);
                prop_assert!((0.0..=1.0).contains(&v));
                if t >= last + stop_latency_bound(250 * MS, shape) {
                    prop_assert_eq!(v, 0.0);
                }
                prev = v;
                t += dt;
            }
        }
    }
}
