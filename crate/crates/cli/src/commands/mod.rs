pub mod analyze;
pub mod ingest;
pub mod simulate;
pub mod sweep;
