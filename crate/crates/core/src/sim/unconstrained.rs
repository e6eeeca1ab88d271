use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    generate_arrivals, CompletedFlow, SimError, SimulationConfig, SimulationMode, SimulationResult,
};
use crate::model::FlowRecord;

/// M/G/inf run: sampled durations are kept unchanged.
pub fn simulate_unconstrained(config: &SimulationConfig) -> Result<SimulationResult, SimError> {
    check_mode(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let arrivals = generate_arrivals(config.model.lambda, config.horizon, &mut rng);
    let mut flows = Vec::with_capacity(arrivals.len());
    for t in arrivals {
        let size = config.model.size_dist.sample(&mut rng)?;
        let duration = config.model.duration_dist.sample(&mut rng)?;
        flows.push(FlowRecord::new(t, size, duration)?);
    }
    simulate_unconstrained_flows(config, flows)
}

/// Replays a given set of flows instead of sampling from the model.
pub fn simulate_unconstrained_flows(
    config: &SimulationConfig,
    flows: Vec<FlowRecord>,
) -> Result<SimulationResult, SimError> {
    check_mode(config)?;
    let reference = config.utilization_reference()?;
    let times = config.sample_times();
    let mut rates = vec![0.0; times.len()];
    let mut active = vec![0u64; times.len()];

    for flow in &flows {
        let start = flow.arrival_time;
        let end = flow.end_time();
        // first grid index with t_k >= start
        let mut k = ((start / config.sample_interval).ceil() as usize).min(times.len());
        while k > 0 && times[k - 1] >= start {
            k -= 1;
        }
        while k < times.len() && times[k] < start {
            k += 1;
        }
        let rate = flow.peak_rate();
        while k < times.len() && times[k] <= end {
            rates[k] += rate;
            active[k] += 1;
            k += 1;
        }
    }

    let completed = flows
        .iter()
        .filter(|f| f.end_time() <= config.horizon)
        .map(|&flow| CompletedFlow {
            flow,
            served_bits: flow.peak_rate() * flow.duration,
        })
        .collect();

    Ok(SimulationResult::from_series(
        config, &times, rates, active, reference, completed,
    ))
}

fn check_mode(config: &SimulationConfig) -> Result<(), SimError> {
    config.validate()?;
    if config.mode != SimulationMode::Unconstrained {
        return Err(SimError::invalid("sim.mode", "expected unconstrained"));
    }
    Ok(())
}
