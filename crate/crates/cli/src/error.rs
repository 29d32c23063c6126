use serde::Serialize;
use serde_json::{json, Map, Value};
use slir_core::io::IoError;

/// The JSON object written to stderr when a command fails.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub context: Map<String, Value>,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            context: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.context.insert(key.to_string(), value.into());
        self
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.code {
            "usage" => 2,
            _ => 1,
        }
    }
}

fn io_context(err: &IoError) -> Map<String, Value> {
    let value = match err {
        IoError::File { path, .. } | IoError::Format { path, .. } | IoError::Empty { path, .. } => {
            json!({ "path": path })
        }
        IoError::Parse { path, line, .. }
        | IoError::NonMonotone { path, line, .. }
        | IoError::Gap { path, line, .. }
        | IoError::NegativeCount { path, line, .. } => json!({ "path": path, "line": line }),
        IoError::Alignment { mobility, cases } => json!({ "mobility": mobility, "cases": cases }),
        IoError::Config(_) => json!({}),
    };
    match value {
        Value::Object(map) => map,
        _ => Map::new(),
    }
}

impl From<slir_core::Error> for CliError {
    fn from(err: slir_core::Error) -> Self {
        let context = match &err {
            slir_core::Error::Io(io) => io_context(io),
            _ => Map::new(),
        };
        Self {
            code: err.code(),
            message: err.to_string(),
            context,
        }
    }
}

macro_rules! via_core {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(err: $ty) -> Self {
                slir_core::Error::from(err).into()
            }
        })*
    };
}

via_core!(
    slir_core::ode::OdeError,
    slir_core::compartmental::ModelError,
    slir_core::stats::StatsError,
    slir_core::sampler::SamplerError,
    slir_core::sampler::DiagnosticsError,
    slir_core::analysis::AnalysisError,
    IoError
);

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::new("io", err.to_string())
    }
}
