//! Egalitarian processor sharing with a per-flow rate cap.
//!
//! All active flows are served at the same rate, so a single "virtual
//! service" clock `V(t)` (bits delivered to any flow that was active over the
//! whole interval) is enough: a flow arriving when the clock reads `v` with
//! size `S` finishes when the clock reaches `v + S`. Pending flows are kept in
//! a min-heap keyed on that finish tag.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    generate_arrivals, CompletedFlow, SimError, SimulationConfig, SimulationMode, SimulationResult,
};
use crate::model::{FlowRecord, ModelError};

#[derive(Debug, Clone, Copy)]
struct Pending {
    finish_tag: f64,
    start_tag: f64,
    arrival: f64,
    size: f64,
    id: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .finish_tag
            .total_cmp(&self.finish_tag)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Processor-sharing run with arrivals and sizes drawn from the model.
///
/// The model's duration law is not used: durations are the outcome of the
/// bandwidth sharing.
pub fn simulate_processor_sharing(config: &SimulationConfig) -> Result<SimulationResult, SimError> {
    check_mode(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let arrivals = generate_arrivals(config.model.lambda, config.horizon, &mut rng);
    let mut jobs = Vec::with_capacity(arrivals.len());
    for t in arrivals {
        jobs.push((t, config.model.size_dist.sample(&mut rng)?));
    }
    simulate_processor_sharing_arrivals(config, &jobs)
}

/// Replays explicit `(arrival_time, size_bits)` pairs, sorted by arrival.
pub fn simulate_processor_sharing_arrivals(
    config: &SimulationConfig,
    jobs: &[(f64, f64)],
) -> Result<SimulationResult, SimError> {
    check_mode(config)?;
    for (i, &(t, s)) in jobs.iter().enumerate() {
        if !(t >= 0.0 && t < config.horizon && s > 0.0 && s.is_finite()) {
            return Err(ModelError::InvalidParameters(format!(
                "job {i}: arrival {t} must lie in [0, horizon) and size {s} must be > 0"
            ))
            .into());
        }
        if i > 0 && jobs[i - 1].0 > t {
            return Err(
                ModelError::InvalidParameters(format!("job {i}: arrivals must be sorted")).into(),
            );
        }
    }
    // validated above
    let capacity = config.link_capacity.unwrap_or_default();
    let peak = config.per_flow_peak_rate.unwrap_or_default();

    let times = config.sample_times();
    let mut rates = Vec::with_capacity(times.len());
    let mut active_counts = Vec::with_capacity(times.len());
    let mut completed = Vec::new();

    let mut heap: BinaryHeap<Pending> = BinaryHeap::new();
    let mut now = 0.0f64;
    let mut virtual_clock = 0.0f64;
    let mut next_job = 0usize;
    let mut next_sample = 0usize;

    let per_flow_rate = |n: usize| -> f64 {
        if n == 0 {
            0.0
        } else {
            peak.min(capacity / n as f64)
        }
    };
    let aggregate_rate = |n: usize| -> f64 {
        let offered = n as f64 * peak;
        if offered >= capacity {
            capacity
        } else {
            offered
        }
    };

    loop {
        let n = heap.len();
        let rate = per_flow_rate(n);
        let t_completion = heap.peek().map_or(f64::INFINITY, |p| {
            now + (p.finish_tag - virtual_clock).max(0.0) / rate
        });
        let t_arrival = jobs.get(next_job).map_or(f64::INFINITY, |j| j.0);
        let t_sample = times.get(next_sample).copied().unwrap_or(f64::INFINITY);

        // Ties: completions before arrivals; a sample at t sees arrivals at t
        // but not completions at t.
        let completion_first = t_completion < t_sample && t_completion <= t_arrival;
        let arrival_first = !completion_first && t_arrival.is_finite() && t_arrival <= t_sample;

        if completion_first {
            if t_completion >= config.horizon {
                break;
            }
            let done = heap.pop().expect("peeked");
            now = t_completion;
            virtual_clock = done.finish_tag;
            let duration = now - done.arrival;
            let flow = FlowRecord {
                arrival_time: done.arrival,
                size: done.size,
                duration,
                profile: Default::default(),
            };
            completed.push(CompletedFlow {
                flow,
                served_bits: virtual_clock - done.start_tag,
            });
        } else if arrival_first {
            virtual_clock += rate * (t_arrival - now);
            now = t_arrival;
            let (arrival, size) = jobs[next_job];
            heap.push(Pending {
                finish_tag: virtual_clock + size,
                start_tag: virtual_clock,
                arrival,
                size,
                id: next_job,
            });
            next_job += 1;
        } else if t_sample.is_finite() {
            virtual_clock += rate * (t_sample - now);
            now = t_sample;
            rates.push(aggregate_rate(n));
            active_counts.push(n as u64);
            next_sample += 1;
        } else {
            break;
        }
    }

    Ok(SimulationResult::from_series(
        config,
        &times,
        rates,
        active_counts,
        capacity,
        completed,
    ))
}

fn check_mode(config: &SimulationConfig) -> Result<(), SimError> {
    config.validate()?;
    if config.mode != SimulationMode::ProcessorSharing {
        return Err(SimError::invalid("sim.mode", "expected processor_sharing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DistributionSpec, TrafficModel};

    fn config(capacity: f64, peak: f64, horizon: f64) -> SimulationConfig {
        let model = TrafficModel::new(
            0.0,
            DistributionSpec::Deterministic { value: 1.0 },
            DistributionSpec::Deterministic { value: 1.0 },
        )
        .unwrap();
        let mut c = SimulationConfig::processor_sharing(model, horizon, 0, capacity, peak).unwrap();
        c.warmup = 0.0;
        c
    }

    #[test]
    fn lone_flow_runs_at_peak() {
        let c = config(1e6, 100.0, 100.0);
        let r = simulate_processor_sharing_arrivals(&c, &[(0.0, 1000.0)]).unwrap();
        assert_eq!(r.completed_flows.len(), 1);
        assert_eq!(r.completed_flows[0].flow.duration, 10.0);
        assert_eq!(r.completed_flows[0].served_bits, 1000.0);
    }

    /// Forward-Euler integration of the fluid equations for two flows sharing
    /// a link; independent of the virtual-clock scheduler.
    fn fluid_two_flows(size: f64, peak: f64, capacity: f64) -> [f64; 2] {
        let dt = 1e-5;
        let mut remaining = [size, size];
        let mut done = [f64::NAN; 2];
        let mut t = 0.0;
        while done.iter().any(|d| d.is_nan()) {
            let n = remaining.iter().filter(|&&r| r > 0.0).count() as f64;
            let rate = peak.min(capacity / n);
            t += dt;
            for i in 0..2 {
                if remaining[i] > 0.0 {
                    remaining[i] -= rate * dt;
                    if remaining[i] <= 0.0 {
                        done[i] = t;
                    }
                }
            }
        }
        done
    }

    #[test]
    fn two_flows_share_capacity() {
        let oracle = fluid_two_flows(1000.0, 100.0, 150.0);
        assert!((oracle[0] - 40.0 / 3.0).abs() < 1e-3);

        let c = config(150.0, 100.0, 100.0);
        let r = simulate_processor_sharing_arrivals(&c, &[(0.0, 1000.0), (0.0, 1000.0)]).unwrap();
        assert_eq!(r.completed_flows.len(), 2);
        for f in &r.completed_flows {
            assert!((f.flow.duration - 1000.0 / 75.0).abs() < 1e-9);
            assert!((f.flow.duration - oracle[0]).abs() < 1e-3);
        }
        // each flow gets 75 b/s, link is full
        assert_eq!(r.samples[5].active_flows, 2);
        assert_eq!(r.samples[5].utilization, 100.0);
        assert_eq!(r.rates[5], 150.0);
        assert_eq!(r.samples[14].active_flows, 0);
    }

    #[test]
    fn staggered_flows_against_hand_schedule() {
        // C = 100, r_peak = 100. A (300 bits) alone for 1 s -> 200 left.
        // From t=1 both at 50 b/s: B (100 bits) done at t=3, A has 100 left.
        // A alone at 100 b/s: done at t=4.
        let c = config(100.0, 100.0, 10.0);
        let r = simulate_processor_sharing_arrivals(&c, &[(0.0, 300.0), (1.0, 100.0)]).unwrap();
        let ends: Vec<f64> = r
            .completed_flows
            .iter()
            .map(|f| f.flow.end_time())
            .collect();
        assert_eq!(ends.len(), 2);
        assert!((ends[0] - 3.0).abs() < 1e-12);
        assert!((ends[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn underload_matches_peak_rate_limit() {
        // offered 0.3 C with r_peak = C / 100: about 30 flows, far from the cap
        let model = TrafficModel::new(
            3.0,
            DistributionSpec::Exponential { mean: 1e5 },
            DistributionSpec::Deterministic { value: 1.0 },
        )
        .unwrap();
        let c = SimulationConfig::processor_sharing(model, 4000.0, 5, 1e6, 1e4).unwrap();
        let r = simulate_processor_sharing(&c).unwrap();
        let active = r.empirical_mean_active.value;
        assert!((active - 30.0).abs() / 30.0 < 0.05, "{active}");
    }

    #[test]
    fn dominance_and_conservation() {
        let model = TrafficModel::new(
            12.0,
            DistributionSpec::LogNormal {
                mu: 11.0,
                sigma: 1.0,
            },
            DistributionSpec::Deterministic { value: 1.0 },
        )
        .unwrap();
        let c = SimulationConfig::processor_sharing(model, 600.0, 8, 1e6, 1e5).unwrap();
        let r = simulate_processor_sharing(&c).unwrap();
        assert!(r.completed_flows.len() > 1000);
        for f in &r.completed_flows {
            assert!(f.flow.duration >= f.flow.size / 1e5 * (1.0 - 1e-9));
            assert!((f.served_bits - f.flow.size).abs() <= 1e-9 * f.flow.size);
        }
        assert!(r.rates.iter().all(|&x| x <= 1e6));
        assert!(r
            .samples
            .iter()
            .all(|s| (0.0..=100.0).contains(&s.utilization)));
    }

    #[test]
    fn rejects_unsorted_jobs() {
        let c = config(10.0, 1.0, 10.0);
        assert!(simulate_processor_sharing_arrivals(&c, &[(2.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(simulate_processor_sharing_arrivals(&c, &[(20.0, 1.0)]).is_err());
    }
}
