//! CLI error type and the machine-readable error record printed on stderr.

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("environment error: {0}")]
    Env(#[from] deepgps::env::EnvError),
    #[error("collection error: {0}")]
    Collect(#[from] deepgps::collect::CollectError),
    #[error("training error: {0}")]
    Train(#[from] deepgps::train::TrainError),
    #[error("network error: {0}")]
    Net(#[from] deepgps::net::NetError),
    #[error("baseline error: {0}")]
    Baseline(#[from] deepgps::baselines::BaselineError),
    #[error("evaluation error: {0}")]
    Eval(#[from] deepgps::eval::EvalError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::InvalidConfig(_) => "invalid_config",
            CliError::Io(_) => "io",
            CliError::Env(_) => "environment",
            CliError::Collect(_) => "collect",
            CliError::Train(_) => "train",
            CliError::Net(_) => "net",
            CliError::Baseline(_) => "baseline",
            CliError::Eval(_) => "eval",
            CliError::Json(_) => "json",
        }
    }

    /// The JSON error record emitted on stderr.
    pub fn record(&self) -> String {
        serde_json::to_string(&ErrorRecord { error: self.kind(), message: self.to_string() })
            .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
