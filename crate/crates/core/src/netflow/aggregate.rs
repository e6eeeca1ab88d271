//! Interval aggregation of flow records into link samples.

use std::collections::BTreeMap;

use serde::Serialize;

use super::v5::{to_absolute_time, ClockInconsistent, Header, Record};
use super::NetflowError;
use crate::samples::LinkSample;

/// Which interface field a record must match to count toward the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    Input,
    Output,
    #[default]
    Both,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" | "in" => Ok(Direction::Input),
            "output" | "out" => Ok(Direction::Output),
            "both" => Ok(Direction::Both),
            other => Err(format!(
                "unknown direction {other:?}, expected input, output or both"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    /// Aggregation interval, seconds. Intervals are aligned to the epoch.
    pub interval: f64,
    /// Link capacity, bits per second.
    pub link_capacity: f64,
    /// Interfaces belonging to the link; `None` keeps every record.
    pub interfaces: Option<Vec<u16>>,
    pub direction: Direction,
    /// How many intervals behind the newest record an interval stays open.
    /// `None` keeps every interval open until `finish`.
    pub lateness_intervals: Option<u64>,
    /// Scale octets by the header's sampling rate. Off by default.
    pub apply_sampling: bool,
}

impl IngestConfig {
    pub fn new(link_capacity: f64) -> Self {
        IngestConfig {
            interval: 1800.0,
            link_capacity,
            interfaces: None,
            direction: Direction::Both,
            lateness_intervals: Some(1),
            apply_sampling: false,
        }
    }

    pub fn validate(&self) -> Result<(), NetflowError> {
        if !(self.interval.is_finite() && self.interval > 0.0) {
            return Err(NetflowError::InvalidConfig {
                key: "interval",
                reason: format!("must be positive, got {}", self.interval),
            });
        }
        if !(self.link_capacity.is_finite() && self.link_capacity > 0.0) {
            return Err(NetflowError::InvalidConfig {
                key: "capacity",
                reason: format!("must be positive, got {}", self.link_capacity),
            });
        }
        Ok(())
    }

    pub fn matches(&self, record: &Record) -> bool {
        let Some(interfaces) = &self.interfaces else {
            return true;
        };
        let has = |i: u16| interfaces.contains(&i);
        match self.direction {
            Direction::Input => has(record.input_if),
            Direction::Output => has(record.output_if),
            Direction::Both => has(record.input_if) || has(record.output_if),
        }
    }
}

/// A record reduced to what aggregation needs: absolute times and byte count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSpan {
    pub first: f64,
    pub last: f64,
    pub octets: u64,
}

impl FlowSpan {
    pub fn new(first: f64, last: f64, octets: u64) -> Self {
        FlowSpan {
            first,
            last,
            octets,
        }
    }

    pub fn from_v5(
        header: &Header,
        record: &Record,
        apply_sampling: bool,
    ) -> Result<Self, ClockInconsistent> {
        let (first, last) = to_absolute_time(header, record)?;
        let scale = if apply_sampling {
            u64::from(header.sampling_rate())
        } else {
            1
        };
        Ok(FlowSpan::new(first, last, u64::from(record.octets) * scale))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Bin {
    octets: f64,
    active: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AggregatorStats {
    pub spans: u64,
    pub late_dropped: u64,
}

/// Streaming aggregator. Interval `k` covers `[k*interval, (k+1)*interval)`.
///
/// A span `[first, last]` is active in every interval it touches, and its
/// octets are split across them in proportion to the time overlap, with the
/// rounding remainder assigned to the last interval. A zero-length span puts
/// everything in its containing interval. Intervals are emitted in order and
/// without gaps once the lateness window has passed them.
#[derive(Debug)]
pub struct Aggregator {
    interval: f64,
    link_capacity: f64,
    lateness: Option<u64>,
    bins: BTreeMap<i64, Bin>,
    /// First interval not yet emitted.
    emitted_until: Option<i64>,
    newest: f64,
    stats: AggregatorStats,
}

impl Aggregator {
    pub fn new(config: &IngestConfig) -> Result<Self, NetflowError> {
        config.validate()?;
        Ok(Aggregator {
            interval: config.interval,
            link_capacity: config.link_capacity,
            lateness: config.lateness_intervals,
            bins: BTreeMap::new(),
            emitted_until: None,
            newest: f64::NEG_INFINITY,
            stats: AggregatorStats::default(),
        })
    }

    pub fn stats(&self) -> AggregatorStats {
        self.stats
    }

    fn index_of(&self, t: f64) -> i64 {
        (t / self.interval).floor() as i64
    }

    /// Adds a span and returns any intervals that became final.
    pub fn push(&mut self, span: FlowSpan) -> Vec<LinkSample> {
        debug_assert!(span.first <= span.last);
        let k_first = self.index_of(span.first);
        if self.emitted_until.is_some_and(|e| k_first < e) {
            self.stats.late_dropped += 1;
            log::debug!("dropping late span starting at {}", span.first);
            return Vec::new();
        }
        self.stats.spans += 1;
        let k_last = self.index_of(span.last).max(k_first);
        let total = span.octets as f64;
        let duration = span.last - span.first;
        let mut assigned = 0.0;
        for k in k_first..=k_last {
            let bin = self.bins.entry(k).or_default();
            bin.active += 1;
            let share = if k == k_last {
                total - assigned
            } else {
                let lo = span.first.max(k as f64 * self.interval);
                let hi = span.last.min((k + 1) as f64 * self.interval);
                total * (hi - lo) / duration
            };
            bin.octets += share;
            assigned += share;
        }
        self.newest = self.newest.max(span.last);

        match self.lateness {
            Some(lateness) => {
                let limit = self.index_of(self.newest) - lateness as i64;
                self.emit_until(limit)
            }
            None => Vec::new(),
        }
    }

    /// Emits every remaining interval.
    pub fn finish(mut self) -> (Vec<LinkSample>, AggregatorStats) {
        let limit = match self.bins.last_key_value() {
            Some((&k, _)) => k + 1,
            None => return (Vec::new(), self.stats),
        };
        let samples = self.emit_until(limit);
        (samples, self.stats)
    }

    fn emit_until(&mut self, limit: i64) -> Vec<LinkSample> {
        let start = match (self.emitted_until, self.bins.first_key_value()) {
            (Some(e), _) => e,
            (None, Some((&k, _))) => k,
            (None, None) => return Vec::new(),
        };
        if limit <= start {
            return Vec::new();
        }
        let mut out = Vec::with_capacity((limit - start) as usize);
        for k in start..limit {
            let bin = self.bins.remove(&k).unwrap_or_default();
            let utilization = 100.0 * 8.0 * bin.octets / (self.interval * self.link_capacity);
            out.push(LinkSample::new(
                k as f64 * self.interval,
                utilization,
                bin.active,
            ));
        }
        self.emitted_until = Some(limit);
        out
    }
}

/// Aggregates a batch of spans exactly, ignoring the lateness setting.
pub fn aggregate(
    spans: &[FlowSpan],
    config: &IngestConfig,
) -> Result<Vec<LinkSample>, NetflowError> {
    let mut config = config.clone();
    config.lateness_intervals = None;
    let mut aggregator = Aggregator::new(&config)?;
    for span in spans {
        aggregator.push(*span);
    }
    Ok(aggregator.finish().0)
}
