use crate::Micros;

/// Window sizing from the statistics of packet inter-arrival times:
/// `window = mean + 3 * std`, estimated online (Welford).
///
/// Gaps longer than `max_gap` are treated as separate command bursts and
/// ignored. Until `min_samples` gaps have been seen the configured window is
/// used. The result is clamped to `[min_window, 2 * configured]`.
#[derive(Debug, Clone)]
pub struct AdaptiveWindow {
    configured: Micros,
    min_window: Micros,
    max_gap: Micros,
    min_samples: u64,
    count: u64,
    mean: f64,
    m2: f64,
}

impl AdaptiveWindow {
    pub fn new(configured: Micros) -> Self {
        Self {
            configured,
            min_window: 50_000,
            max_gap: 1_000_000,
            min_samples: 8,
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    pub fn observe(&mut self, gap: Micros) {
        if gap > self.max_gap {
            return;
        }
        self.count += 1;
        let x = gap as f64;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn samples(&self) -> u64 {
        self.count
    }

    pub fn window(&self) -> Micros {
        if self.count < self.min_samples {
            return self.configured;
        }
        let var = self.m2 / (self.count - 1) as f64;
        let w = (self.mean + 3.0 * var.sqrt()).round() as Micros;
        w.clamp(self.min_window, 2 * self.configured)
    }
}
