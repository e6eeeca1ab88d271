//! Parametric flow-level traffic model and its closed-form moments.
//!
//! Flows arrive as a homogeneous Poisson process of rate `lambda`. Each flow
//! carries a size (bits) and a duration (seconds) drawn independently from
//! their distributions, and transmits at the constant rate `size / duration`
//! while active. Under these assumptions the aggregate rate process has
//!
//! * mean rate `lambda * E[S]`,
//! * rate variance `lambda * E[S^2 / D]`,
//! * mean number of active flows `lambda * E[D]` (Little's law).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Pareto};
use serde::Serialize;
use thiserror::Error;

use crate::kv::{parse_real_list, KvError, KvMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("undefined moment {moment}: {reason}")]
    UndefinedMoment {
        moment: &'static str,
        reason: String,
    },
    #[error(transparent)]
    Config(#[from] KvError),
}

/// Shape of a flow's rate over its lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateProfile {
    /// `size / duration` while active, zero otherwise.
    #[default]
    ConstantRate,
}

impl RateProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            RateProfile::ConstantRate => "constant",
        }
    }
}

impl FromStr for RateProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" | "constant_rate" => Ok(RateProfile::ConstantRate),
            other => Err(format!(
                "unknown rate profile {other:?} (supported: constant)"
            )),
        }
    }
}

/// Joint law of a flow's size and duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeDurationCoupling {
    #[default]
    Independent,
}

/// One flow: arrival time (s), size (bits), duration (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowRecord {
    pub arrival_time: f64,
    pub size: f64,
    pub duration: f64,
    pub profile: RateProfile,
}

impl FlowRecord {
    pub fn new(arrival_time: f64, size: f64, duration: f64) -> Result<Self, ModelError> {
        if !(arrival_time >= 0.0 && arrival_time.is_finite()) {
            return Err(ModelError::InvalidParameters(format!(
                "flow arrival time must be finite and >= 0, got {arrival_time}"
            )));
        }
        if !(size > 0.0 && size.is_finite()) {
            return Err(ModelError::InvalidParameters(format!(
                "flow size must be finite and > 0, got {size}"
            )));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(ModelError::InvalidParameters(format!(
                "flow duration must be finite and > 0, got {duration}"
            )));
        }
        Ok(FlowRecord {
            arrival_time,
            size,
            duration,
            profile: RateProfile::ConstantRate,
        })
    }

    pub fn end_time(&self) -> f64 {
        self.arrival_time + self.duration
    }

    /// A flow is active on the closed interval `[arrival, arrival + duration]`.
    pub fn is_active_at(&self, t: f64) -> bool {
        self.arrival_time <= t && t <= self.end_time()
    }

    /// Rate while active, in bits/s.
    pub fn peak_rate(&self) -> f64 {
        match self.profile {
            RateProfile::ConstantRate => self.size / self.duration,
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        if self.is_active_at(t) {
            self.peak_rate()
        } else {
            0.0
        }
    }
}

/// A positive-valued distribution family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Deterministic {
        value: f64,
    },
    Exponential {
        mean: f64,
    },
    /// `exp(N(mu, sigma^2))`.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    /// Pareto type I: `P(X > x) = (scale / x)^shape` for `x >= scale`.
    Pareto {
        shape: f64,
        scale: f64,
    },
}

impl DistributionSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            DistributionSpec::Deterministic { .. } => "deterministic",
            DistributionSpec::Exponential { .. } => "exponential",
            DistributionSpec::LogNormal { .. } => "lognormal",
            DistributionSpec::Pareto { .. } => "pareto",
        }
    }

    /// Parameter list in the order used by the key/value config.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            DistributionSpec::Deterministic { value } => vec![value],
            DistributionSpec::Exponential { mean } => vec![mean],
            DistributionSpec::LogNormal { mu, sigma } => vec![mu, sigma],
            DistributionSpec::Pareto { shape, scale } => vec![shape, scale],
        }
    }

    pub fn from_family(family: &str, params: &[f64]) -> Result<Self, ModelError> {
        let want = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(ModelError::InvalidParameters(format!(
                    "{family} takes {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let spec = match family {
            "deterministic" => {
                want(1)?;
                DistributionSpec::Deterministic { value: params[0] }
            }
            "exponential" => {
                want(1)?;
                DistributionSpec::Exponential { mean: params[0] }
            }
            "lognormal" => {
                want(2)?;
                DistributionSpec::LogNormal {
                    mu: params[0],
                    sigma: params[1],
                }
            }
            "pareto" => {
                want(2)?;
                DistributionSpec::Pareto {
                    shape: params[0],
                    scale: params[1],
                }
            }
            other => {
                return Err(ModelError::InvalidParameters(format!(
                    "unknown distribution family {other:?}"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Pareto distribution with the given shape whose mean equals `mean`.
    pub fn pareto_with_mean(shape: f64, mean: f64) -> Result<Self, ModelError> {
        if shape.is_nan() || shape <= 1.0 {
            return Err(ModelError::UndefinedMoment {
                moment: "E[X]",
                reason: format!("Pareto mean requires shape > 1, got {shape}"),
            });
        }
        let spec = DistributionSpec::Pareto {
            shape,
            scale: mean * (shape - 1.0) / shape,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidParameters(format!(
                    "{} {name} must be finite and > 0, got {v}",
                    self.family_name()
                )))
            }
        };
        match *self {
            DistributionSpec::Deterministic { value } => positive("value", value),
            DistributionSpec::Exponential { mean } => positive("mean", mean),
            DistributionSpec::LogNormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(ModelError::InvalidParameters(format!(
                        "lognormal mu must be finite, got {mu}"
                    )));
                }
                positive("sigma", sigma)
            }
            DistributionSpec::Pareto { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
        }
    }

    /// `E[X]`.
    pub fn mean(&self) -> Result<f64, ModelError> {
        self.validate()?;
        Ok(match *self {
            DistributionSpec::Deterministic { value } => value,
            DistributionSpec::Exponential { mean } => mean,
            DistributionSpec::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            DistributionSpec::Pareto { shape, scale } => {
                if shape <= 1.0 {
                    return Err(ModelError::UndefinedMoment {
                        moment: "E[X]",
                        reason: format!("Pareto shape {shape} <= 1 has no finite mean"),
                    });
                }
                shape * scale / (shape - 1.0)
            }
        })
    }

    /// `E[X^2]`.
    pub fn second_moment(&self) -> Result<f64, ModelError> {
        self.validate()?;
        Ok(match *self {
            DistributionSpec::Deterministic { value } => value * value,
            DistributionSpec::Exponential { mean } => 2.0 * mean * mean,
            DistributionSpec::LogNormal { mu, sigma } => (2.0 * mu + 2.0 * sigma * sigma).exp(),
            DistributionSpec::Pareto { shape, scale } => {
                if shape <= 2.0 {
                    return Err(ModelError::UndefinedMoment {
                        moment: "E[X^2]",
                        reason: format!("Pareto shape {shape} <= 2 has no finite second moment"),
                    });
                }
                shape * scale * scale / (shape - 2.0)
            }
        })
    }

    /// `E[1/X]`.
    pub fn reciprocal_mean(&self) -> Result<f64, ModelError> {
        self.validate()?;
        Ok(match *self {
            DistributionSpec::Deterministic { value } => 1.0 / value,
            // the density is positive at zero, so the integral of f(x)/x diverges
            DistributionSpec::Exponential { .. } => {
                return Err(ModelError::UndefinedMoment {
                    moment: "E[1/X]",
                    reason: "exponential law has positive density at 0, E[1/X] diverges".into(),
                })
            }
            DistributionSpec::LogNormal { mu, sigma } => (-mu + 0.5 * sigma * sigma).exp(),
            DistributionSpec::Pareto { shape, scale } => shape / (scale * (shape + 1.0)),
        })
    }

    /// One draw. Always strictly positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, ModelError> {
        self.validate()?;
        let bad = |e: &dyn fmt::Display| ModelError::InvalidParameters(e.to_string());
        Ok(match *self {
            DistributionSpec::Deterministic { value } => value,
            DistributionSpec::Exponential { mean } => {
                let d = Exp::new(1.0 / mean).map_err(|e| bad(&e))?;
                // Exp can return exactly 0 with vanishing probability
                let x: f64 = d.sample(rng);
                if x > 0.0 {
                    x
                } else {
                    f64::MIN_POSITIVE
                }
            }
            DistributionSpec::LogNormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).map_err(|e| bad(&e))?;
                let x: f64 = d.sample(rng);
                x.max(f64::MIN_POSITIVE)
            }
            DistributionSpec::Pareto { shape, scale } => {
                let d = Pareto::new(scale, shape).map_err(|e| bad(&e))?;
                d.sample(rng)
            }
        })
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params().iter().map(|p| p.to_string()).collect();
        write!(f, "{}({})", self.family_name(), params.join(", "))
    }
}

/// Closed-form moments of the aggregate traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoreticalMoments {
    /// bits/s
    pub mean_rate: f64,
    /// (bits/s)^2
    pub rate_variance: f64,
    pub mean_active_flows: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrafficModel {
    /// Flow arrival rate, flows/s.
    pub lambda: f64,
    pub size_dist: DistributionSpec,
    pub duration_dist: DistributionSpec,
    pub profile: RateProfile,
    pub coupling: SizeDurationCoupling,
}

const FAMILIES: &[&str] = &["deterministic", "exponential", "lognormal", "pareto"];

/// Keys understood by [`TrafficModel::from_kv`].
pub const MODEL_KEYS: &[&str] = &[
    "lambda",
    "size.family",
    "size.params",
    "duration.family",
    "duration.params",
    "profile",
];

impl TrafficModel {
    pub fn new(
        lambda: f64,
        size_dist: DistributionSpec,
        duration_dist: DistributionSpec,
    ) -> Result<Self, ModelError> {
        let model = TrafficModel {
            lambda,
            size_dist,
            duration_dist,
            profile: RateProfile::ConstantRate,
            coupling: SizeDurationCoupling::Independent,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidParameters(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        self.size_dist.validate()?;
        self.duration_dist.validate()
    }

    /// Same model with a different arrival rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self, ModelError> {
        let mut model = *self;
        model.lambda = lambda;
        model.validate()?;
        Ok(model)
    }

    /// `lambda * E[S]`, bits/s.
    pub fn mean_rate(&self) -> Result<f64, ModelError> {
        self.validate()?;
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        Ok(self.lambda * self.size_dist.mean()?)
    }

    /// `lambda * E[S^2 / D]` under constant-rate shots, (bits/s)^2.
    pub fn rate_variance(&self) -> Result<f64, ModelError> {
        self.validate()?;
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        let size_sq = self.size_dist.second_moment()?;
        let joint = match self.coupling {
            SizeDurationCoupling::Independent => match self.duration_dist {
                DistributionSpec::Deterministic { value } => size_sq / value,
                other => size_sq * other.reciprocal_mean()?,
            },
        };
        Ok(self.lambda * joint)
    }

    /// `lambda * E[D]`.
    pub fn mean_active_flows(&self) -> Result<f64, ModelError> {
        self.validate()?;
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        Ok(self.lambda * self.duration_dist.mean()?)
    }

    pub fn moments(&self) -> Result<TheoreticalMoments, ModelError> {
        Ok(TheoreticalMoments {
            mean_rate: self.mean_rate()?,
            rate_variance: self.rate_variance()?,
            mean_active_flows: self.mean_active_flows()?,
        })
    }

    /// Reads the model from un-prefixed keys (`lambda`, `size.family`, ...).
    pub fn from_kv(map: &KvMap) -> Result<Self, ModelError> {
        map.reject_unknown(MODEL_KEYS)?;
        let lambda: f64 = map.parse_required("lambda")?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(KvError::invalid(
                "lambda",
                map.require("lambda")?,
                "must be finite and >= 0",
            )
            .into());
        }
        let dist = |prefix: &str| -> Result<DistributionSpec, ModelError> {
            let family_key = format!("{prefix}.family");
            let params_key = format!("{prefix}.params");
            let family = map.require(&family_key)?;
            if !FAMILIES.contains(&family) {
                return Err(
                    KvError::invalid(&family_key, family, "unknown distribution family").into(),
                );
            }
            let raw = map.require(&params_key)?;
            let params = parse_real_list(&params_key, raw)?;
            DistributionSpec::from_family(family, &params)
                .map_err(|e| KvError::invalid(&params_key, raw, e).into())
        };
        let size_dist = dist("size")?;
        let duration_dist = dist("duration")?;
        let profile = map
            .parse_optional::<RateProfile>("profile")?
            .unwrap_or_default();
        let model = TrafficModel {
            lambda,
            size_dist,
            duration_dist,
            profile,
            coupling: SizeDurationCoupling::Independent,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_kv(&self) -> KvMap {
        let join = |d: &DistributionSpec| {
            d.params()
                .iter()
                .map(|p| format!("{p:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut map = KvMap::new();
        map.insert("lambda", format!("{:?}", self.lambda));
        map.insert("size.family", self.size_dist.family_name());
        map.insert("size.params", join(&self.size_dist));
        map.insert("duration.family", self.duration_dist.family_name());
        map.insert("duration.params", join(&self.duration_dist));
        map.insert("profile", self.profile.as_str());
        map
    }
}
