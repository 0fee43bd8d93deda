//! Network emulation between nodes.
//!
//! Two backends share one impairment model ([`LinkShaper`]): a
//! deterministic discrete-event backend ([`VirtualClock`] + [`SimLink`]) used
//! for tests and batch runs, and a UDP loopback [`ShapingProxy`] for live
//! demos.

mod clock;
mod link;
mod udp;

pub use clock::{ClockError, EventId, VirtualClock};
pub use link::{JitterMode, LinkProfile, LinkShaper, Verdict};
pub use udp::{ProxyStats, ShapingProxy};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::Micros;

/// Largest datagram any link will carry.
pub const MAX_DATAGRAM: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("datagram of {0} bytes exceeds the {MAX_DATAGRAM}-byte limit")]
    Oversized(usize),
    #[error("invalid link profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A datagram in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub link_seq: u64,
    pub t_send: Micros,
    pub bytes: Vec<u8>,
}

/// One line of a per-link delivery log. Times are microseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeliveryRecord {
    pub t_send: Micros,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_deliver: Option<Micros>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dropped: bool,
    pub seq: u64,
    pub bytes: usize,
}

impl DeliveryRecord {
    /// Exactly one of `t_deliver` and `dropped` must be present.
    pub fn is_well_formed(&self) -> bool {
        self.t_deliver.is_some() != self.dropped
            && self.t_deliver.is_none_or(|t| t >= self.t_send)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub reordered: u64,
}

impl LinkStats {
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.dropped
    }
}

/// One direction of a simulated link, scheduling into a shared clock.
///
/// The caller's event type wraps the [`Datagram`]; `wrap` builds it. When
/// the event fires the caller hands the datagram back via
/// [`SimLink::delivered`] so the log and counters stay exact.
#[derive(Debug)]
pub struct SimLink {
    shaper: LinkShaper,
    stats: LinkStats,
    log: Vec<DeliveryRecord>,
    last_event: Option<(u64, EventId)>,
}

impl SimLink {
    pub fn new(profile: LinkProfile) -> Result<Self, NetError> {
        Ok(Self { shaper: LinkShaper::new(profile)?, stats: LinkStats::default(), log: Vec::new(), last_event: None })
    }

    pub fn profile(&self) -> &LinkProfile {
        self.shaper.profile()
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn log(&self) -> &[DeliveryRecord] {
        &self.log
    }

    pub fn send<E>(
        &mut self,
        clock: &mut VirtualClock<E>,
        bytes: Vec<u8>,
        wrap: impl FnOnce(Datagram) -> E,
    ) -> Result<Verdict, NetError> {
        let now = clock.now();
        let (seq, verdict) = self.shaper.shape(bytes.len(), now)?;
        self.stats.sent += 1;
        match verdict {
            Verdict::Dropped => {
                self.stats.dropped += 1;
                self.log.push(DeliveryRecord { t_send: now, t_deliver: None, dropped: true, seq, bytes: bytes.len() });
            }
            Verdict::Deliver { at, swapped } => {
                if let Some((prev_seq, prev_at)) = swapped {
                    if let Some((id_seq, id)) = self.last_event {
                        if id_seq == prev_seq && clock.reschedule(id, prev_at) {
                            self.stats.reordered += 1;
                        }
                    }
                }
                let id = clock.schedule(at, wrap(Datagram { link_seq: seq, t_send: now, bytes }));
                self.last_event = Some((seq, id));
            }
        }
        Ok(verdict)
    }

    /// Records the arrival of a datagram previously produced by this link.
    pub fn delivered(&mut self, datagram: &Datagram, now: Micros) {
        self.stats.delivered += 1;
        self.log.push(DeliveryRecord {
            t_send: datagram.t_send,
            t_deliver: Some(now),
            dropped: false,
            seq: datagram.link_seq,
            bytes: datagram.bytes.len(),
        });
    }

    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.log {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A single link with its own clock, for link-level experiments.
#[derive(Debug)]
pub struct Pipe {
    pub clock: VirtualClock<Datagram>,
    pub link: SimLink,
}

impl Pipe {
    pub fn new(profile: LinkProfile) -> Result<Self, NetError> {
        Ok(Self { clock: VirtualClock::new(), link: SimLink::new(profile)? })
    }

    /// Sends at time `t` (delivering anything due before it first).
    pub fn send_at(&mut self, t: Micros, bytes: Vec<u8>) -> Result<Vec<(Micros, Datagram)>, NetError> {
        let arrived = self.run_until(t);
        self.link.send(&mut self.clock, bytes, |d| d)?;
        Ok(arrived)
    }

    pub fn run_until(&mut self, t: Micros) -> Vec<(Micros, Datagram)> {
        let t = t.max(self.clock.now());
        let fired = self.clock.run_until(t).expect("target clamped to now");
        for (at, d) in &fired {
            self.link.delivered(d, *at);
        }
        fired
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(profile: LinkProfile, n: u64, period: Micros) -> (Pipe, Vec<(Micros, Datagram)>) {
        let mut pipe = Pipe::new(profile).unwrap();
        let mut got = Vec::new();
        for i in 0..n {
            got.extend(pipe.send_at(i * period, vec![i as u8; 8]).unwrap());
        }
        got.extend(pipe.run_until(u64::MAX / 2));
        (pipe, got)
    }

    #[test]
    fn certain_drop_delivers_nothing() {
        let (pipe, got) = run(LinkProfile { drop_prob: 1.0, ..LinkProfile::ideal() }, 100, 1000);
        assert!(got.is_empty());
        assert_eq!(pipe.link.stats().dropped, 100);
    }

    #[test]
    fn deterministic_pipe() {
        let (_, got) = run(LinkProfile::fixed(200.0), 50, 10_000);
        assert_eq!(got.len(), 50);
        for (i, (at, d)) in got.iter().enumerate() {
            assert_eq!(d.link_seq, i as u64);
            assert_eq!(*at, d.t_send + 200_000);
        }
    }

    #[test]
    fn delivery_log_roundtrip() {
        let (pipe, _) = run(LinkProfile::lossy(10.0, 5.0, 0.5, 1), 20, 1000);
        let mut buf = Vec::new();
        pipe.link.write_log(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 20);
        for line in text.lines() {
            let rec: DeliveryRecord = serde_json::from_str(line).unwrap();
            assert!(rec.is_well_formed(), "{line}");
            assert!(line.contains("\"t_deliver\"") != line.contains("\"dropped\":true"));
        }
    }

    #[test]
    fn conservation_and_bounds() {
        let p = LinkProfile { reorder_prob: 0.2, ..LinkProfile::lossy(80.0, 30.0, 0.2, 42) };
        let (pipe, got) = run(p, 5_000, 7_000);
        let s = pipe.link.stats();
        assert_eq!(s.sent, 5_000);
        assert_eq!(s.delivered + s.dropped, s.sent);
        assert!(s.reordered > 0);
        let mut seen = std::collections::HashSet::new();
        for (at, d) in &got {
            assert!(seen.insert(d.link_seq));
            let lat = at - d.t_send;
            if s.reordered == 0 {
                assert!((50_000..=110_000).contains(&lat));
            } else {
                // A swap moves the arrival by at most one jitter span.
                assert!(lat <= 110_000 + 60_000, "{lat}");
            }
        }
        assert!(got.windows(2).any(|w| w[0].1.link_seq > w[1].1.link_seq));
    }

    #[test]
    fn replay_is_identical() {
        let p = LinkProfile { reorder_prob: 0.1, ..LinkProfile::lossy(50.0, 20.0, 0.3, 7) };
        let (a, _) = run(p.clone(), 2_000, 3_000);
        let (b, _) = run(p, 2_000, 3_000);
        assert_eq!(a.link.log(), b.link.log());
    }
}
