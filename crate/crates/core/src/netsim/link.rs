use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{NetError, MAX_DATAGRAM};
use crate::{micros_from_ms, Micros};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterMode {
    /// Delay offset uniform in `[-jitter, +jitter]`.
    #[default]
    Uniform,
    /// Offset `jitter * (X - 1)` with `X ~ LogNormal(0, 0.5)`: same lower
    /// bound as uniform, heavy upper tail.
    LogNormal,
}

/// Impairments applied to one direction of a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkProfile {
    #[serde(rename = "latency_ms")]
    pub base_latency_ms: f64,
    /// Half-width of the delay spread.
    pub jitter_ms: f64,
    #[serde(rename = "drop")]
    pub drop_prob: f64,
    #[serde(rename = "reorder")]
    pub reorder_prob: f64,
    pub seed: u64,
    pub jitter_mode: JitterMode,
}

impl Default for LinkProfile {
    fn default() -> Self {
        Self::ideal()
    }
}

impl LinkProfile {
    /// No delay, no loss.
    pub fn ideal() -> Self {
        Self {
            base_latency_ms: 0.0,
            jitter_ms: 0.0,
            drop_prob: 0.0,
            reorder_prob: 0.0,
            seed: 0,
            jitter_mode: JitterMode::Uniform,
        }
    }

    pub fn fixed(latency_ms: f64) -> Self {
        Self { base_latency_ms: latency_ms, ..Self::ideal() }
    }

    pub fn lossy(latency_ms: f64, jitter_ms: f64, drop_prob: f64, seed: u64) -> Self {
        Self { base_latency_ms: latency_ms, jitter_ms, drop_prob, seed, ..Self::ideal() }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidProfile(m));
        if !(self.base_latency_ms.is_finite() && self.base_latency_ms >= 0.0) {
            return bad(format!("latency_ms must be >= 0, got {}", self.base_latency_ms));
        }
        if !(self.jitter_ms.is_finite() && self.jitter_ms >= 0.0) {
            return bad(format!("jitter_ms must be >= 0, got {}", self.jitter_ms));
        }
        for (name, p) in [("drop", self.drop_prob), ("reorder", self.reorder_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

/// Outcome of shaping one datagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Dropped,
    Deliver {
        at: Micros,
        /// The previous in-flight datagram (link sequence number) was swapped
        /// with this one and now arrives at the given time.
        swapped: Option<(u64, Micros)>,
    },
}

/// Seeded impairment process for one link direction.
///
/// Every datagram consumes the same draws (drop, delay, reorder) whatever
/// the outcome, so a change in one probability does not shift the random
/// stream for the others.
#[derive(Debug, Clone)]
pub struct LinkShaper {
    profile: LinkProfile,
    rng: ChaCha8Rng,
    lognormal: LogNormal<f64>,
    next_seq: u64,
    last_in_flight: Option<(u64, Micros)>,
}

impl LinkShaper {
    pub fn new(profile: LinkProfile) -> Result<Self, NetError> {
        profile.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(profile.seed),
            lognormal: LogNormal::new(0.0, 0.5).expect("valid lognormal"),
            profile,
            next_seq: 0,
            last_in_flight: None,
        })
    }

    pub fn profile(&self) -> &LinkProfile {
        &self.profile
    }

    /// Assigns the next link sequence number and decides the datagram's fate.
    pub fn shape(&mut self, len: usize, now: Micros) -> Result<(u64, Verdict), NetError> {
        if len > MAX_DATAGRAM {
            return Err(NetError::Oversized(len));
        }
        let seq = self.next_seq;
        self.next_seq += 1;

        let drop_draw: f64 = self.rng.random();
        let unit_offset = match self.profile.jitter_mode {
            JitterMode::Uniform => self.rng.random_range(-1.0..=1.0),
            JitterMode::LogNormal => self.lognormal.sample(&mut self.rng) - 1.0,
        };
        let reorder_draw: f64 = self.rng.random();

        if drop_draw < self.profile.drop_prob {
            return Ok((seq, Verdict::Dropped));
        }
        let delay_ms = self.profile.base_latency_ms + self.profile.jitter_ms * unit_offset;
        let mut at = now + micros_from_ms(delay_ms.max(0.0));
        let mut swapped = None;
        if reorder_draw < self.profile.reorder_prob {
            if let Some((prev_seq, prev_at)) = self.last_in_flight {
                if prev_at > now && prev_at < at {
                    swapped = Some((prev_seq, at));
                    at = prev_at;
                }
            }
        }
        self.last_in_flight = Some((seq, at));
        Ok((seq, Verdict::Deliver { at, swapped }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_validation() {
        assert!(LinkProfile::ideal().validate().is_ok());
        assert!(LinkProfile::fixed(-1.0).validate().is_err());
        assert!(LinkProfile { drop_prob: 1.5, ..LinkProfile::ideal() }.validate().is_err());
        assert!(LinkProfile { jitter_ms: f64::NAN, ..LinkProfile::ideal() }.validate().is_err());
    }

    #[test]
    fn config_keys() {
        let p: LinkProfile = serde_json::from_str(
            r#"{"latency_ms": 200, "jitter_ms": 50, "drop": 0.3, "reorder": 0.1, "seed": 9}"#,
        )
        .unwrap();
        assert_eq!(p.base_latency_ms, 200.0);
        assert_eq!(p.drop_prob, 0.3);
        assert_eq!(p.jitter_mode, JitterMode::Uniform);
        assert!(serde_json::from_str::<LinkProfile>(r#"{"latency": 1}"#).is_err());
    }

    #[test]
    fn oversized_rejected() {
        let mut s = LinkShaper::new(LinkProfile::ideal()).unwrap();
        assert!(matches!(s.shape(513, 0), Err(NetError::Oversized(513))));
        assert!(s.shape(512, 0).is_ok());
    }

    #[test]
    fn draw_stream_independent_of_drop_probability() {
        // Same seed, different drop rates: surviving datagrams get the same delays.
        let base = LinkProfile { jitter_ms: 20.0, base_latency_ms: 50.0, seed: 3, ..LinkProfile::ideal() };
        let mut a = LinkShaper::new(base.clone()).unwrap();
        let mut b = LinkShaper::new(LinkProfile { drop_prob: 0.5, ..base }).unwrap();
        for i in 0..200 {
            let (_, va) = a.shape(10, i * 1000).unwrap();
            let (_, vb) = b.shape(10, i * 1000).unwrap();
            if let Verdict::Deliver { .. } = vb {
                assert_eq!(va, vb);
            }
        }
    }

    #[test]
    fn lognormal_never_below_lower_bound() {
        let p = LinkProfile {
            base_latency_ms: 100.0,
            jitter_ms: 40.0,
            jitter_mode: JitterMode::LogNormal,
            ..LinkProfile::ideal()
        };
        let mut s = LinkShaper::new(p).unwrap();
        let mut above = 0;
        for _ in 0..10_000 {
            if let (_, Verdict::Deliver { at, .. }) = s.shape(1, 0).unwrap() {
                assert!(at >= 60_000);
                above += (at > 140_000) as u32;
            }
        }
        assert!(above > 0);
    }
}
