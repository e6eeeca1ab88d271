//! Working-area analysis of (active flows, utilization) observations.
//!
//! In the working area utilization grows in proportion to the number of
//! active flows, `U = w * N`. The slope `w` is estimated as the mean of the
//! per-sample ratios `U / N` over lightly loaded samples. Under heavy load the
//! points flatten onto a saturation line `U = a + b * N`, fitted by least
//! squares to the high-`N` samples that have clearly left the working line.
//! The two lines cross at the knee `(N*, U*)`: `U*` is the usable length of
//! the working area and `N*` the flow count past which the link is overloaded.

mod report;
pub mod synthetic;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::kv::{KvError, KvMap};
use crate::samples::LinkSample;

pub use report::{write_fitted_lines_csv, write_labeled_samples_csv, ReportJson, StateCounts};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzerError {
    #[error("invalid analyzer configuration `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error("no samples to analyze")]
    EmptyInput,
    #[error("InsufficientWorkingData: {found} sample(s) at or below {threshold}% utilization with active flows > 0, need {required}")]
    InsufficientWorkingData {
        found: usize,
        required: usize,
        threshold: f64,
    },
    #[error("DegenerateData: {0}")]
    DegenerateData(String),
    #[error("InsufficientSaturationData: {found} sample(s) qualify for the saturation line, need {required}")]
    InsufficientSaturationData { found: usize, required: usize },
    #[error("NoSaturationObserved: no high-load sample departs from the working line")]
    NoSaturationObserved,
    #[error(
        "SaturationTooSteep: saturation slope {saturation} is not below working slope {working}"
    )]
    SaturationTooSteep { saturation: f64, working: f64 },
    #[error("ParallelLines: working and saturation slopes are equal ({0})")]
    ParallelLines(f64),
    #[error("NegativeIntersection: lines cross at N = {0}")]
    NegativeIntersection(f64),
    #[error("KneeOutOfRange: knee utilization {0}% is outside (0, 100]")]
    KneeOutOfRange(f64),
    #[error(transparent)]
    Config(#[from] KvError),
}

impl AnalyzerError {
    /// Short variant name, for command-line diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            AnalyzerError::InvalidConfig { .. } => "InvalidConfig",
            AnalyzerError::EmptyInput => "EmptyInput",
            AnalyzerError::InsufficientWorkingData { .. } => "InsufficientWorkingData",
            AnalyzerError::DegenerateData(_) => "DegenerateData",
            AnalyzerError::InsufficientSaturationData { .. } => "InsufficientSaturationData",
            AnalyzerError::NoSaturationObserved => "NoSaturationObserved",
            AnalyzerError::SaturationTooSteep { .. } => "SaturationTooSteep",
            AnalyzerError::ParallelLines(_) => "ParallelLines",
            AnalyzerError::NegativeIntersection(_) => "NegativeIntersection",
            AnalyzerError::KneeOutOfRange(_) => "KneeOutOfRange",
            AnalyzerError::Config(_) => "Config",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingEstimator {
    /// Mean of `U / N` over the working samples.
    #[default]
    RatioMean,
    /// Least squares through the origin, `sum(U N) / sum(N^2)`.
    LeastSquares,
}

impl FromStr for WorkingEstimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ratio_mean" => Ok(WorkingEstimator::RatioMean),
            "least_squares" => Ok(WorkingEstimator::LeastSquares),
            other => Err(format!(
                "unknown estimator {other:?} (ratio_mean or least_squares)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyzerConfig {
    /// Samples at or below this utilization (percent) define the working line.
    pub working_util_threshold: f64,
    /// Only samples with more active flows than this quantile of all counts
    /// are candidates for the saturation line.
    pub saturation_quantile: f64,
    /// `U / (w N)` at or above this is on the working line.
    pub working_ratio_floor: f64,
    /// `U / (w N)` below this is overloaded.
    pub moderate_ratio_floor: f64,
    pub min_working_samples: usize,
    pub min_saturation_samples: usize,
    pub working_estimator: WorkingEstimator,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            working_util_threshold: 40.0,
            saturation_quantile: 0.8,
            working_ratio_floor: 0.9,
            moderate_ratio_floor: 0.6,
            min_working_samples: 5,
            min_saturation_samples: 3,
            working_estimator: WorkingEstimator::RatioMean,
        }
    }
}

/// `analyzer.*` keys understood by [`AnalyzerConfig::from_kv`].
pub const ANALYZER_KEYS: &[&str] = &[
    "working_util_threshold",
    "saturation_quantile",
    "working_ratio_floor",
    "moderate_ratio_floor",
    "min_working_samples",
    "min_saturation_samples",
    "working_estimator",
];

impl AnalyzerConfig {
    pub fn validate(&self) -> Result<(), AnalyzerError> {
        let invalid =
            |key: &'static str, reason: String| Err(AnalyzerError::InvalidConfig { key, reason });
        if !(self.working_util_threshold > 0.0 && self.working_util_threshold <= 100.0) {
            return invalid(
                "analyzer.working_util_threshold",
                format!("must be in (0, 100], got {}", self.working_util_threshold),
            );
        }
        if !(self.saturation_quantile > 0.0 && self.saturation_quantile < 1.0) {
            return invalid(
                "analyzer.saturation_quantile",
                format!("must be in (0, 1), got {}", self.saturation_quantile),
            );
        }
        if !(self.working_ratio_floor > 0.0 && self.working_ratio_floor <= 1.0) {
            return invalid(
                "analyzer.working_ratio_floor",
                format!("must be in (0, 1], got {}", self.working_ratio_floor),
            );
        }
        if !(self.moderate_ratio_floor > 0.0
            && self.moderate_ratio_floor < self.working_ratio_floor)
        {
            return invalid(
                "analyzer.moderate_ratio_floor",
                format!(
                    "must be in (0, working_ratio_floor = {}), got {}",
                    self.working_ratio_floor, self.moderate_ratio_floor
                ),
            );
        }
        if self.min_working_samples == 0 {
            return invalid("analyzer.min_working_samples", "must be >= 1".into());
        }
        if self.min_saturation_samples < 2 {
            return invalid("analyzer.min_saturation_samples", "must be >= 2".into());
        }
        Ok(())
    }

    /// Defaults overridden by un-prefixed keys (`working_util_threshold`, ...).
    pub fn from_kv(map: &KvMap) -> Result<Self, AnalyzerError> {
        map.reject_unknown(ANALYZER_KEYS)
            .map_err(|e| e.prefixed("analyzer."))?;
        let prefixed = |e: KvError| e.prefixed("analyzer.");
        let mut config = AnalyzerConfig::default();
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = map.parse_optional(stringify!($field)).map_err(prefixed)? {
                    config.$field = v;
                }
            };
        }
        set!(working_util_threshold);
        set!(saturation_quantile);
        set!(working_ratio_floor);
        set!(moderate_ratio_floor);
        set!(min_working_samples);
        set!(min_saturation_samples);
        set!(working_estimator);
        config.validate()?;
        Ok(config)
    }
}

/// A fitted line `U = intercept + slope * N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    /// percent
    pub intercept: f64,
    /// percent per flow
    pub slope: f64,
    pub sample_count: usize,
    /// percent
    pub rms_residual: f64,
}

impl LineFit {
    pub fn at(&self, flows: f64) -> f64 {
        self.intercept + self.slope * flows
    }

    fn rms(samples: &[&LinkSample], intercept: f64, slope: f64) -> f64 {
        let sq: f64 = samples
            .iter()
            .map(|s| {
                let r = s.utilization - (intercept + slope * s.active_flows as f64);
                r * r
            })
            .sum();
        (sq / samples.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkState {
    Working,
    Moderate,
    Overloaded,
}

impl NetworkState {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkState::Working => "working",
            NetworkState::Moderate => "moderate",
            NetworkState::Overloaded => "overloaded",
        }
    }
}

impl fmt::Display for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Crossing of the working and saturation lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Knee {
    pub flows: f64,
    /// percent
    pub utilization: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    /// No saturation observed: the link never left the working area.
    WorkingAreaNotExceeded,
    /// The working line was fitted by least squares instead of the ratio mean.
    LeastSquaresWorkingLine,
}

impl ReportFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportFlag::WorkingAreaNotExceeded => "working_area_not_exceeded",
            ReportFlag::LeastSquaresWorkingLine => "least_squares_working_line",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkingAreaReport {
    /// Through the origin.
    pub working_line: LineFit,
    pub saturation_line: Option<LineFit>,
    pub knee: Option<Knee>,
    /// One label per input sample, in input order.
    pub state_labels: Vec<NetworkState>,
    pub state_counts: StateCounts,
    pub flags: Vec<ReportFlag>,
}

impl WorkingAreaReport {
    pub fn working_area_exceeded(&self) -> bool {
        !self.flags.contains(&ReportFlag::WorkingAreaNotExceeded)
    }
}

fn by_flows_then_utilization(a: &&LinkSample, b: &&LinkSample) -> Ordering {
    a.active_flows
        .cmp(&b.active_flows)
        .then_with(|| a.utilization.total_cmp(&b.utilization))
}

/// Working line through the origin, from samples at or below the utilization
/// threshold with at least one active flow.
///
/// Qualifying samples are summed in a canonical order so the result does not
/// depend on input order.
pub fn fit_working_line(
    samples: &[LinkSample],
    config: &AnalyzerConfig,
) -> Result<LineFit, AnalyzerError> {
    config.validate()?;
    let low: Vec<&LinkSample> = samples
        .iter()
        .filter(|s| s.utilization <= config.working_util_threshold)
        .collect();
    let mut qualifying: Vec<&LinkSample> =
        low.iter().copied().filter(|s| s.active_flows > 0).collect();
    if qualifying.is_empty() && !low.is_empty() {
        return Err(AnalyzerError::DegenerateData(format!(
            "all {} low-utilization samples have zero active flows",
            low.len()
        )));
    }
    if qualifying.len() < config.min_working_samples {
        return Err(AnalyzerError::InsufficientWorkingData {
            found: qualifying.len(),
            required: config.min_working_samples,
            threshold: config.working_util_threshold,
        });
    }
    qualifying.sort_by(by_flows_then_utilization);

    let slope = match config.working_estimator {
        WorkingEstimator::RatioMean => {
            qualifying
                .iter()
                .map(|s| s.utilization / s.active_flows as f64)
                .sum::<f64>()
                / qualifying.len() as f64
        }
        WorkingEstimator::LeastSquares => {
            let (un, nn) = qualifying.iter().fold((0.0, 0.0), |(un, nn), s| {
                let n = s.active_flows as f64;
                (un + s.utilization * n, nn + n * n)
            });
            un / nn
        }
    };
    Ok(LineFit {
        intercept: 0.0,
        slope,
        sample_count: qualifying.len(),
        rms_residual: LineFit::rms(&qualifying, 0.0, slope),
    })
}

/// Linear-interpolation quantile of sorted values (R type 7).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `U / (w N)`, defined as 1 for `N = 0`.
pub fn working_ratio(sample: &LinkSample, working: &LineFit) -> f64 {
    if sample.active_flows == 0 {
        1.0
    } else {
        sample.utilization / (working.slope * sample.active_flows as f64)
    }
}

/// Least-squares saturation line over the heavy-load samples.
///
/// A sample qualifies when its flow count exceeds the `saturation_quantile`
/// of all observed counts and it sits below `working_ratio_floor` times the
/// working line.
pub fn fit_saturation_line(
    samples: &[LinkSample],
    working: &LineFit,
    config: &AnalyzerConfig,
) -> Result<LineFit, AnalyzerError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(AnalyzerError::EmptyInput);
    }
    let mut counts: Vec<f64> = samples.iter().map(|s| s.active_flows as f64).collect();
    counts.sort_by(f64::total_cmp);
    let cut = quantile(&counts, config.saturation_quantile);

    let mut qualifying: Vec<&LinkSample> = samples
        .iter()
        .filter(|s| {
            s.active_flows as f64 > cut && working_ratio(s, working) < config.working_ratio_floor
        })
        .collect();
    if qualifying.is_empty() {
        return Err(AnalyzerError::NoSaturationObserved);
    }
    if qualifying.len() < config.min_saturation_samples {
        return Err(AnalyzerError::InsufficientSaturationData {
            found: qualifying.len(),
            required: config.min_saturation_samples,
        });
    }
    qualifying.sort_by(by_flows_then_utilization);

    let n = qualifying.len() as f64;
    let mean_n = qualifying
        .iter()
        .map(|s| s.active_flows as f64)
        .sum::<f64>()
        / n;
    let mean_u = qualifying.iter().map(|s| s.utilization).sum::<f64>() / n;
    let (sxy, sxx) = qualifying.iter().fold((0.0, 0.0), |(sxy, sxx), s| {
        let dx = s.active_flows as f64 - mean_n;
        (sxy + dx * (s.utilization - mean_u), sxx + dx * dx)
    });
    if sxx == 0.0 {
        return Err(AnalyzerError::DegenerateData(format!(
            "all {} saturation samples have the same flow count",
            qualifying.len()
        )));
    }
    let slope = sxy / sxx;
    let intercept = mean_u - slope * mean_n;
    if slope >= working.slope {
        return Err(AnalyzerError::SaturationTooSteep {
            saturation: slope,
            working: working.slope,
        });
    }
    Ok(LineFit {
        intercept,
        slope,
        sample_count: qualifying.len(),
        rms_residual: LineFit::rms(&qualifying, intercept, slope),
    })
}

/// Intersection of the working line with the saturation line.
pub fn find_knee(working: &LineFit, saturation: &LineFit) -> Result<Knee, AnalyzerError> {
    let gap = working.slope - saturation.slope;
    let scale = working.slope.abs().max(saturation.slope.abs());
    if gap.abs() <= 1e-12 * scale || gap == 0.0 {
        return Err(AnalyzerError::ParallelLines(working.slope));
    }
    // working line: U = w N (+ its intercept, zero when fitted here)
    let flows = (saturation.intercept - working.intercept) / gap;
    if !(flows > 0.0 && flows.is_finite()) {
        return Err(AnalyzerError::NegativeIntersection(flows));
    }
    Ok(Knee {
        flows,
        utilization: working.at(flows),
    })
}

/// Labels one sample.
///
/// With a knee: working when on the working line and at most `N*` flows;
/// overloaded past `N*` or far below the line; moderate otherwise. Without a
/// knee only the ratio to the working line is used.
pub fn classify(
    sample: &LinkSample,
    working: &LineFit,
    knee: Option<&Knee>,
    config: &AnalyzerConfig,
) -> NetworkState {
    let ratio = working_ratio(sample, working);
    let past_knee = knee.is_some_and(|k| sample.active_flows as f64 > k.flows);
    if past_knee || ratio < config.moderate_ratio_floor {
        NetworkState::Overloaded
    } else if ratio >= config.working_ratio_floor {
        NetworkState::Working
    } else {
        NetworkState::Moderate
    }
}

/// Full working-area analysis.
///
/// When no sample departs from the working line the report has no
/// saturation line and no knee, and is flagged
/// [`ReportFlag::WorkingAreaNotExceeded`].
pub fn analyze(
    samples: &[LinkSample],
    config: &AnalyzerConfig,
) -> Result<WorkingAreaReport, AnalyzerError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(AnalyzerError::EmptyInput);
    }
    let working_line = fit_working_line(samples, config)?;
    let mut flags = Vec::new();
    if config.working_estimator == WorkingEstimator::LeastSquares {
        flags.push(ReportFlag::LeastSquaresWorkingLine);
    }

    let (saturation_line, knee) = match fit_saturation_line(samples, &working_line, config) {
        Ok(line) => {
            let knee = find_knee(&working_line, &line)?;
            if !(knee.utilization > 0.0 && knee.utilization <= 100.0) {
                return Err(AnalyzerError::KneeOutOfRange(knee.utilization));
            }
            (Some(line), Some(knee))
        }
        Err(AnalyzerError::NoSaturationObserved) => {
            flags.push(ReportFlag::WorkingAreaNotExceeded);
            (None, None)
        }
        Err(e) => return Err(e),
    };

    let state_labels: Vec<NetworkState> = samples
        .iter()
        .map(|s| classify(s, &working_line, knee.as_ref(), config))
        .collect();
    let state_counts = StateCounts::tally(&state_labels);
    Ok(WorkingAreaReport {
        working_line,
        saturation_line,
        knee,
        state_labels,
        state_counts,
        flags,
    })
}
