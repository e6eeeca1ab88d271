//! NetFlow v5 ingestion: datagram decoding, interval aggregation, capture I/O.

pub mod aggregate;
pub mod capture;
pub mod v5;

use serde::Serialize;
use thiserror::Error;

pub use aggregate::{aggregate, Aggregator, AggregatorStats, Direction, FlowSpan, IngestConfig};
pub use capture::{receive_udp, write_capture_file, FrameReader, ReceiveLimit};
pub use v5::{
    parse_datagram, to_absolute_time, ClockInconsistent, Datagram, Header, ParseError, Record,
};

use crate::samples::LinkSample;

#[derive(Debug, Error)]
pub enum NetflowError {
    #[error("invalid {key}: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
}

/// Counters reported at the end of an ingest run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestCounts {
    pub datagrams: u64,
    pub records: u64,
    pub parse_errors: u64,
    pub clock_errors: u64,
    pub filtered: u64,
    pub late_dropped: u64,
}

/// Datagrams in, samples out. Bad datagrams and records are counted and skipped.
#[derive(Debug)]
pub struct Ingestor {
    config: IngestConfig,
    aggregator: Aggregator,
    counts: IngestCounts,
}

impl Ingestor {
    pub fn new(config: IngestConfig) -> Result<Self, NetflowError> {
        let aggregator = Aggregator::new(&config)?;
        Ok(Ingestor {
            config,
            aggregator,
            counts: IngestCounts::default(),
        })
    }

    pub fn counts(&self) -> IngestCounts {
        IngestCounts {
            late_dropped: self.aggregator.stats().late_dropped,
            ..self.counts
        }
    }

    /// Feeds one raw datagram; returns intervals that became final.
    pub fn feed(&mut self, bytes: &[u8]) -> Vec<LinkSample> {
        self.counts.datagrams += 1;
        let datagram = match parse_datagram(bytes) {
            Ok(d) => d,
            Err(e) => {
                self.counts.parse_errors += 1;
                log::warn!("datagram {}: {e}", self.counts.datagrams);
                return Vec::new();
            }
        };
        let mut out = Vec::new();
        for record in &datagram.records {
            self.counts.records += 1;
            if !self.config.matches(record) {
                self.counts.filtered += 1;
                continue;
            }
            match FlowSpan::from_v5(&datagram.header, record, self.config.apply_sampling) {
                Ok(span) => out.extend(self.aggregator.push(span)),
                Err(e) => {
                    self.counts.clock_errors += 1;
                    log::warn!("datagram {}: {e}", self.counts.datagrams);
                }
            }
        }
        out
    }

    pub fn finish(self) -> (Vec<LinkSample>, IngestCounts) {
        let counts = self.counts();
        let (samples, _) = self.aggregator.finish();
        (samples, counts)
    }
}
