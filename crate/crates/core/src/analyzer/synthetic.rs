//! Two-segment utilization curves with a known knee, for testing the analyzer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::samples::LinkSample;

/// `U = w N` up to the knee, then `U = w N* + b (N - N*)`, with each point
/// scaled by an independent factor drawn uniformly from `[1 - noise, 1 + noise]`.
/// Flow counts are log-uniform on `[min_flows, max_flows]`, rounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSegmentCurve {
    pub working_slope: f64,
    pub knee_flows: f64,
    pub saturation_slope: f64,
    pub noise: f64,
    pub min_flows: f64,
    pub max_flows: f64,
    /// Timestamp of the first sample, epoch seconds.
    pub start: i64,
    /// Spacing between sample timestamps, seconds.
    pub spacing: i64,
}

impl TwoSegmentCurve {
    /// Knee at 2500 flows and 45% utilization, 5% noise, half-hourly samples.
    pub fn reference() -> Self {
        TwoSegmentCurve {
            working_slope: 0.018,
            knee_flows: 2500.0,
            saturation_slope: 0.0004,
            noise: 0.05,
            min_flows: 100.0,
            max_flows: 100_000.0,
            start: 1_700_000_000,
            spacing: 1800,
        }
    }

    pub fn knee_utilization(&self) -> f64 {
        self.working_slope * self.knee_flows
    }

    /// Intercept of the saturation segment extended to `N = 0`.
    pub fn saturation_intercept(&self) -> f64 {
        self.knee_utilization() - self.saturation_slope * self.knee_flows
    }

    /// Noise-free utilization at `flows`.
    pub fn utilization_at(&self, flows: f64) -> f64 {
        if flows <= self.knee_flows {
            self.working_slope * flows
        } else {
            self.knee_utilization() + self.saturation_slope * (flows - self.knee_flows)
        }
    }

    pub fn generate(&self, count: usize, seed: u64) -> Vec<LinkSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (self.min_flows.ln(), self.max_flows.ln());
        (0..count)
            .map(|i| {
                let flows = rng.random_range(lo..=hi).exp().round();
                let factor = 1.0 + rng.random_range(-self.noise..=self.noise);
                let utilization = (self.utilization_at(flows) * factor).max(0.0);
                LinkSample::new(
                    (self.start + i as i64 * self.spacing) as f64,
                    utilization,
                    flows as u64,
                )
            })
            .collect()
    }
}
