use rayon::prelude::*;
use serde::Serialize;

use super::{simulate_processor_sharing, SimError, SimulationConfig, SimulationMode};
use crate::samples::LinkSample;

/// Steady-state operating point of one processor-sharing run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    /// `100 * lambda * E[S] / C`.
    pub offered_load_percent: f64,
    pub mean_utilization: f64,
    pub mean_active_flows: f64,
}

impl SweepPoint {
    /// As a link sample, with `index` standing in for the timestamp.
    ///
    /// The mean flow count is rounded to the nearest integer.
    pub fn to_link_sample(&self, index: usize) -> LinkSample {
        LinkSample::new(
            index as f64,
            self.mean_utilization,
            self.mean_active_flows.round() as u64,
        )
    }
}

/// One processor-sharing run per arrival rate, returned in increasing `lambda`.
///
/// Every run reuses `base.seed`, so neighbouring points see common random
/// numbers. Runs execute in parallel; output order depends only on `lambda`.
pub fn load_sweep(base: &SimulationConfig, lambdas: &[f64]) -> Result<Vec<SweepPoint>, SimError> {
    if base.mode != SimulationMode::ProcessorSharing {
        return Err(SimError::invalid(
            "sim.mode",
            "load sweep requires processor_sharing",
        ));
    }
    base.validate()?;
    let mut lambdas = lambdas.to_vec();
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(SimError::invalid(
            "model.lambda",
            format!("sweep rate must be finite and >= 0, got {bad}"),
        ));
    }
    lambdas.sort_by(f64::total_cmp);
    let capacity = base.link_capacity.unwrap_or_default();
    let mean_size = base.model.size_dist.mean()?;

    lambdas
        .par_iter()
        .map(|&lambda| {
            let mut config = base.clone();
            config.model = base.model.with_lambda(lambda)?;
            let result = simulate_processor_sharing(&config)?;
            let steady = result.steady_samples(config.warmup);
            let mean_utilization =
                steady.iter().map(|s| s.utilization).sum::<f64>() / steady.len().max(1) as f64;
            Ok(SweepPoint {
                lambda,
                offered_load_percent: 100.0 * lambda * mean_size / capacity,
                mean_utilization,
                mean_active_flows: result.empirical_mean_active.value,
            })
        })
        .collect()
}
