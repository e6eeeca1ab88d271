use std::fmt;
use std::process::ExitCode;

use flowcap::analyzer::AnalyzerError;
use flowcap::kv::KvError;
use flowcap::netflow::NetflowError;
use flowcap::samples::CsvError;
use flowcap::{ModelError, SimError};

/// Failure classes with fixed exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: bad configuration, arguments or input files.
    Config(String),
    /// Exit 3: a requested moment does not exist for the configured laws.
    Divergence(String),
    /// Exit 4: the analyzer could not fit its lines.
    Fit { kind: &'static str, message: String },
    /// Exit 1: anything else, mostly output I/O.
    Other(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Fit { .. } => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Divergence(m) => write!(f, "moment divergence: {m}"),
            CliError::Fit { kind, message } => write!(f, "fit failed ({kind}): {message}"),
            CliError::Other(m) => f.write_str(m),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UndefinedMoment { .. } => CliError::Divergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<KvError> for CliError {
    fn from(e: KvError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalyzerError> for CliError {
    fn from(e: AnalyzerError) -> Self {
        match e {
            AnalyzerError::InvalidConfig { .. } | AnalyzerError::Config(_) => {
                CliError::Config(e.to_string())
            }
            other => {
                let kind = other.kind();
                let text = other.to_string();
                let message = text
                    .strip_prefix(kind)
                    .and_then(|m| m.strip_prefix(": "))
                    .unwrap_or(&text);
                CliError::Fit {
                    kind,
                    message: message.to_string(),
                }
            }
        }
    }
}

impl From<NetflowError> for CliError {
    fn from(e: NetflowError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

/// Wraps a CSV error raised while writing an output file.
pub fn write_error(path: &std::path::Path, e: CsvError) -> CliError {
    CliError::Other(format!("{}: {e}", path.display()))
}
