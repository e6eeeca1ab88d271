//! Event-driven flow-level simulation of a single link.
//!
//! Two modes share one configuration type:
//!
//! * [`SimulationMode::Unconstrained`]: every flow keeps its sampled duration
//!   and transmits at `size / duration`, so the link behaves as an M/G/inf
//!   queue and the closed-form moments of [`crate::model`] apply.
//! * [`SimulationMode::ProcessorSharing`]: the link has capacity `C` and each
//!   of the `N` active flows is served at `min(r_peak, C / N)` until its size
//!   is delivered. Durations stretch under load, which produces the
//!   working / moderate / overloaded shape of a utilization-vs-flows curve.
//!
//! Both modes observe the link on a fixed grid `t_k = k * sample_interval`
//! and compute statistics over samples with `t_k >= warmup`.

mod processor_sharing;
mod sweep;
mod unconstrained;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;
use thiserror::Error;

use crate::kv::{KvError, KvMap};
use crate::model::{FlowRecord, ModelError, TheoreticalMoments, TrafficModel};
use crate::samples::LinkSample;
use crate::stats::{self, Estimate, DEFAULT_BATCHES};

pub use processor_sharing::{simulate_processor_sharing, simulate_processor_sharing_arrivals};
pub use sweep::{load_sweep, SweepPoint};
pub use unconstrained::{simulate_unconstrained, simulate_unconstrained_flows};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl SimError {
    fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        SimError::InvalidConfig {
            key,
            reason: reason.into(),
        }
    }
}

impl From<KvError> for SimError {
    fn from(e: KvError) -> Self {
        SimError::Model(ModelError::Config(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    Unconstrained,
    ProcessorSharing,
}

impl SimulationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimulationMode::Unconstrained => "unconstrained",
            SimulationMode::ProcessorSharing => "processor_sharing",
        }
    }
}

impl fmt::Display for SimulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimulationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unconstrained" => Ok(SimulationMode::Unconstrained),
            "processor_sharing" | "ps" => Ok(SimulationMode::ProcessorSharing),
            other => Err(format!(
                "unknown mode {other:?} (expected unconstrained or processor_sharing)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub model: TrafficModel,
    /// Arrivals are generated on `[0, horizon)`, seconds.
    pub horizon: f64,
    pub seed: u64,
    pub mode: SimulationMode,
    /// bits/s. Required for processor sharing; optional notional capacity
    /// for utilization in unconstrained mode.
    pub link_capacity: Option<f64>,
    /// bits/s, processor sharing only.
    pub per_flow_peak_rate: Option<f64>,
    pub sample_interval: f64,
    pub warmup: f64,
    pub batches: usize,
}

/// `sim.*` keys understood by [`SimulationConfig::from_kv`].
pub const SIM_KEYS: &[&str] = &[
    "horizon",
    "seed",
    "mode",
    "capacity",
    "peak_rate",
    "sample_interval",
    "warmup",
    "batches",
];

impl SimulationConfig {
    /// Unconstrained configuration with the default warmup of `10 * E[D]`.
    pub fn unconstrained(model: TrafficModel, horizon: f64, seed: u64) -> Result<Self, SimError> {
        let warmup = 10.0 * model.duration_dist.mean()?;
        let config = SimulationConfig {
            model,
            horizon,
            seed,
            mode: SimulationMode::Unconstrained,
            link_capacity: None,
            per_flow_peak_rate: None,
            sample_interval: 1.0,
            warmup,
            batches: DEFAULT_BATCHES,
        };
        Ok(config)
    }

    /// Processor-sharing configuration with the default warmup of
    /// `10 * E[S] / r_peak`.
    pub fn processor_sharing(
        model: TrafficModel,
        horizon: f64,
        seed: u64,
        link_capacity: f64,
        per_flow_peak_rate: f64,
    ) -> Result<Self, SimError> {
        let warmup = 10.0 * model.size_dist.mean()? / per_flow_peak_rate;
        Ok(SimulationConfig {
            model,
            horizon,
            seed,
            mode: SimulationMode::ProcessorSharing,
            link_capacity: Some(link_capacity),
            per_flow_peak_rate: Some(per_flow_peak_rate),
            sample_interval: 1.0,
            warmup,
            batches: DEFAULT_BATCHES,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.model.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::invalid(
                "sim.horizon",
                format!("must be > 0, got {}", self.horizon),
            ));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(SimError::invalid(
                "sim.sample_interval",
                format!("must be > 0, got {}", self.sample_interval),
            ));
        }
        if let Some(c) = self.link_capacity {
            if !(c > 0.0 && c.is_finite()) {
                return Err(SimError::invalid(
                    "sim.capacity",
                    format!("must be > 0, got {c}"),
                ));
            }
        }
        if self.mode == SimulationMode::ProcessorSharing {
            let capacity = self.link_capacity.ok_or_else(|| {
                SimError::invalid("sim.capacity", "required in processor_sharing mode")
            })?;
            let peak = self.per_flow_peak_rate.ok_or_else(|| {
                SimError::invalid("sim.peak_rate", "required in processor_sharing mode")
            })?;
            if !(peak > 0.0 && peak <= capacity) {
                return Err(SimError::invalid(
                    "sim.peak_rate",
                    format!("must satisfy 0 < peak_rate <= capacity ({capacity}), got {peak}"),
                ));
            }
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(SimError::invalid(
                "sim.warmup",
                format!(
                    "must satisfy 0 <= warmup < horizon ({}), got {}",
                    self.horizon, self.warmup
                ),
            ));
        }
        Ok(())
    }

    /// Reads `model.*` and `sim.*` keys from a flat configuration.
    pub fn from_kv(map: &KvMap) -> Result<Self, SimError> {
        let model = TrafficModel::from_kv(&map.with_prefix("model.")).map_err(|e| match e {
            ModelError::Config(kv) => ModelError::Config(kv.prefixed("model.")),
            other => other,
        })?;
        let sim = map.with_prefix("sim.");
        sim.reject_unknown(SIM_KEYS)
            .map_err(|e| e.prefixed("sim."))?;
        let prefixed = |e: KvError| e.prefixed("sim.");
        let horizon: f64 = sim.parse_required("horizon").map_err(prefixed)?;
        let seed: u64 = sim.parse_optional("seed").map_err(prefixed)?.unwrap_or(1);
        let mode: SimulationMode = sim
            .parse_optional("mode")
            .map_err(prefixed)?
            .unwrap_or(SimulationMode::Unconstrained);
        let link_capacity: Option<f64> = sim.parse_optional("capacity").map_err(prefixed)?;
        let per_flow_peak_rate: Option<f64> = sim.parse_optional("peak_rate").map_err(prefixed)?;
        let sample_interval: f64 = sim
            .parse_optional("sample_interval")
            .map_err(prefixed)?
            .unwrap_or(1.0);
        let batches: usize = sim
            .parse_optional("batches")
            .map_err(prefixed)?
            .unwrap_or(DEFAULT_BATCHES);
        let warmup = match sim.parse_optional::<f64>("warmup").map_err(prefixed)? {
            Some(w) => w,
            None => match mode {
                SimulationMode::Unconstrained => 10.0 * model.duration_dist.mean()?,
                SimulationMode::ProcessorSharing => {
                    let peak = per_flow_peak_rate.ok_or_else(|| {
                        SimError::invalid("sim.peak_rate", "required in processor_sharing mode")
                    })?;
                    10.0 * model.size_dist.mean()? / peak
                }
            },
        };
        let config = SimulationConfig {
            model,
            horizon,
            seed,
            mode,
            link_capacity,
            per_flow_peak_rate,
            sample_interval,
            warmup,
            batches,
        };
        config.validate()?;
        Ok(config)
    }

    /// Flat `model.*` / `sim.*` representation, suitable as a metadata sidecar.
    pub fn to_kv(&self) -> KvMap {
        let mut map = KvMap::new();
        for (k, v) in self.model.to_kv().iter() {
            map.insert(format!("model.{k}"), v);
        }
        map.insert("sim.horizon", format!("{:?}", self.horizon));
        map.insert("sim.seed", self.seed.to_string());
        map.insert("sim.mode", self.mode.as_str());
        if let Some(c) = self.link_capacity {
            map.insert("sim.capacity", format!("{c:?}"));
        }
        if let Some(p) = self.per_flow_peak_rate {
            map.insert("sim.peak_rate", format!("{p:?}"));
        }
        map.insert("sim.sample_interval", format!("{:?}", self.sample_interval));
        map.insert("sim.warmup", format!("{:?}", self.warmup));
        map.insert("sim.batches", self.batches.to_string());
        map
    }

    /// Reference rate for the utilization axis, bits/s.
    ///
    /// The link capacity if set, otherwise twice the offered load `lambda * E[S]`.
    pub fn utilization_reference(&self) -> Result<f64, SimError> {
        match self.link_capacity {
            Some(c) => Ok(c),
            None => Ok(2.0 * self.model.mean_rate()?),
        }
    }

    /// Theoretical moments matching the configured mode.
    ///
    /// Unconstrained runs use the model's duration law directly. Processor
    /// sharing is compared against its underload limit, where every flow runs
    /// at `r_peak` and therefore lasts `S / r_peak`.
    pub fn reference_moments(&self) -> Result<TheoreticalMoments, SimError> {
        match self.mode {
            SimulationMode::Unconstrained => Ok(self.model.moments()?),
            SimulationMode::ProcessorSharing => {
                let peak = self.per_flow_peak_rate.ok_or_else(|| {
                    SimError::invalid("sim.peak_rate", "required in processor_sharing mode")
                })?;
                let lambda = self.model.lambda;
                if lambda == 0.0 {
                    return Ok(TheoreticalMoments {
                        mean_rate: 0.0,
                        rate_variance: 0.0,
                        mean_active_flows: 0.0,
                    });
                }
                let mean_size = self.model.size_dist.mean()?;
                Ok(TheoreticalMoments {
                    mean_rate: lambda * mean_size,
                    // E[S^2 / (S / r_peak)] = r_peak * E[S]
                    rate_variance: lambda * peak * mean_size,
                    mean_active_flows: lambda * mean_size / peak,
                })
            }
        }
    }

    fn sample_times(&self) -> Vec<f64> {
        let mut times = Vec::new();
        let mut k = 0u64;
        loop {
            let t = k as f64 * self.sample_interval;
            if t >= self.horizon {
                break;
            }
            times.push(t);
            k += 1;
        }
        times
    }
}

/// A flow that finished within the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompletedFlow {
    /// Size as sampled and duration as realized.
    pub flow: FlowRecord,
    /// Bits delivered by the link, equal to `flow.size` up to rounding.
    pub served_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub samples: Vec<LinkSample>,
    /// Aggregate rate `R(t_k)` at each sample instant, bits/s.
    pub rates: Vec<f64>,
    pub completed_flows: Vec<CompletedFlow>,
    pub empirical_mean_rate: Estimate,
    pub empirical_rate_variance: Estimate,
    pub empirical_mean_active: Estimate,
}

impl SimulationResult {
    fn from_series(
        config: &SimulationConfig,
        times: &[f64],
        rates: Vec<f64>,
        active: Vec<u64>,
        utilization_reference: f64,
        completed_flows: Vec<CompletedFlow>,
    ) -> Self {
        let samples: Vec<LinkSample> = times
            .iter()
            .zip(&rates)
            .zip(&active)
            .map(|((&t, &r), &n)| {
                let u = if utilization_reference > 0.0 {
                    100.0 * r / utilization_reference
                } else {
                    0.0
                };
                LinkSample::new(t, u, n)
            })
            .collect();
        let first = times.partition_point(|&t| t < config.warmup);
        let steady_rates = &rates[first..];
        let steady_active: Vec<f64> = active[first..].iter().map(|&n| n as f64).collect();
        SimulationResult {
            empirical_mean_rate: stats::mean_estimate(steady_rates, config.batches),
            empirical_rate_variance: stats::variance_estimate(steady_rates, config.batches),
            empirical_mean_active: stats::mean_estimate(&steady_active, config.batches),
            samples,
            rates,
            completed_flows,
        }
    }

    /// Samples at or after the warmup cut.
    pub fn steady_samples(&self, warmup: f64) -> &[LinkSample] {
        let first = self.samples.partition_point(|s| s.timestamp < warmup);
        &self.samples[first..]
    }
}

/// Sorted Poisson arrival instants on `[0, horizon)`.
pub fn generate_arrivals<R: Rng + ?Sized>(lambda: f64, horizon: f64, rng: &mut R) -> Vec<f64> {
    if lambda.is_nan() || horizon.is_nan() || lambda <= 0.0 || horizon <= 0.0 {
        return Vec::new();
    }
    let gap = Exp::new(lambda).expect("lambda > 0");
    let mut arrivals = Vec::with_capacity((lambda * horizon * 1.01) as usize + 16);
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= horizon {
            break;
        }
        arrivals.push(t);
    }
    arrivals
}

/// Runs the mode selected in `config`.
pub fn simulate(config: &SimulationConfig) -> Result<SimulationResult, SimError> {
    match config.mode {
        SimulationMode::Unconstrained => simulate_unconstrained(config),
        SimulationMode::ProcessorSharing => simulate_processor_sharing(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DistributionSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn det(v: f64) -> DistributionSpec {
        DistributionSpec::Deterministic { value: v }
    }

    #[test]
    fn zero_rate_has_no_arrivals() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_arrivals(0.0, 100.0, &mut rng).is_empty());
    }

    #[test]
    fn arrival_count_within_four_sigma() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let arrivals = generate_arrivals(100.0, 1000.0, &mut rng);
            let n = arrivals.len() as f64;
            assert!(
                (n - 100_000.0).abs() <= 4.0 * 100_000f64.sqrt(),
                "seed {seed}: {n}"
            );
            assert!(arrivals.windows(2).all(|w| w[0] <= w[1]));
            assert!(arrivals.iter().all(|&t| (0.0..1000.0).contains(&t)));
        }
    }

    #[test]
    fn inter_arrivals_pass_ks_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let arrivals = generate_arrivals(5.0, 10_000.0, &mut rng);
        let mut gaps: Vec<f64> = std::iter::once(arrivals[0])
            .chain(arrivals.windows(2).map(|w| w[1] - w[0]))
            .collect();
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len() as f64;
        let d = gaps
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-5.0 * x).exp();
                (cdf - i as f64 / n)
                    .abs()
                    .max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // asymptotic critical value at alpha = 0.01
        assert!(d < 1.628 / n.sqrt(), "D = {d}");
    }

    #[test]
    fn config_from_kv_and_back() {
        let text =
            "model.lambda = 50\nmodel.size.family = deterministic\nmodel.size.params = 20000\n\
                    model.duration.family = deterministic\nmodel.duration.params = 2\n\
                    sim.horizon = 2000\nsim.seed = 7\nsim.sample_interval = 0.5\n";
        let config = SimulationConfig::from_kv(&KvMap::parse(text).unwrap()).unwrap();
        assert_eq!(config.warmup, 20.0);
        assert_eq!(config.seed, 7);
        assert_eq!(config.mode, SimulationMode::Unconstrained);
        let back = SimulationConfig::from_kv(&config.to_kv()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn config_errors_name_keys() {
        let base = "model.lambda = 1\nmodel.size.family = deterministic\nmodel.size.params = 1\n\
                    model.duration.family = deterministic\nmodel.duration.params = 1\n";
        let cases = [
            ("sim.horizon = 0\n", "sim.horizon"),
            ("sim.horizon = 10\nsim.mode = processor_sharing\nsim.peak_rate = 1\n", "sim.capacity"),
            ("sim.horizon = 10\nsim.mode = processor_sharing\nsim.capacity = 1\nsim.peak_rate = 2\n", "sim.peak_rate"),
            ("sim.horizon = 10\nsim.warmup = 10\n", "sim.warmup"),
            ("sim.horizon = 10\nsim.sample_interval = 0\n", "sim.sample_interval"),
        ];
        for (extra, key) in cases {
            let map = KvMap::parse(&format!("{base}{extra}")).unwrap();
            match SimulationConfig::from_kv(&map) {
                Err(SimError::InvalidConfig { key: k, .. }) => assert_eq!(k, key, "{extra}"),
                other => panic!("{extra}: {other:?}"),
            }
        }
        let map = KvMap::parse(&format!("{base}sim.horizon = x\n")).unwrap();
        match SimulationConfig::from_kv(&map) {
            Err(SimError::Model(ModelError::Config(e))) => assert_eq!(e.key(), Some("sim.horizon")),
            other => panic!("{other:?}"),
        }
        let map = KvMap::parse(&format!("{base}sim.horizon = 5\nsim.colour = red\n")).unwrap();
        match SimulationConfig::from_kv(&map) {
            Err(SimError::Model(ModelError::Config(e))) => assert_eq!(e.key(), Some("sim.colour")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn processor_sharing_reference_moments() {
        let model =
            TrafficModel::new(3.0, DistributionSpec::Exponential { mean: 1e5 }, det(1.0)).unwrap();
        let config = SimulationConfig::processor_sharing(model, 100.0, 1, 1e6, 1e4).unwrap();
        let m = config.reference_moments().unwrap();
        assert_eq!(m.mean_rate, 3e5);
        assert_eq!(m.mean_active_flows, 30.0);
        assert_eq!(m.rate_variance, 3e9);
    }
}
