//! Flow-level link capacity analysis.
//!
//! * [`model`]: Poisson shot-noise traffic model and its closed-form moments.
//! * [`sim`]: event-driven single-link simulation (M/G/inf and processor sharing).
//! * [`analyzer`]: working-area line, saturation line, knee and state labels
//!   from (utilization, active flows) samples.
//! * [`netflow`]: NetFlow v5 decoding and interval aggregation into samples.
//! * [`samples`]: the shared samples CSV format.

pub mod analyzer;
pub mod kv;
pub mod model;
pub mod netflow;
pub mod samples;
pub mod sim;
pub mod stats;

pub use analyzer::{AnalyzerConfig, AnalyzerError, WorkingAreaReport};
pub use model::{DistributionSpec, FlowRecord, ModelError, TheoreticalMoments, TrafficModel};
pub use netflow::{IngestConfig, Ingestor};
pub use samples::LinkSample;
pub use sim::{SimError, SimulationConfig, SimulationMode, SimulationResult};
