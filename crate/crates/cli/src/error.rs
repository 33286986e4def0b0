use pcx_core::PcxError;
use serde_json::json;
use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] PcxError),

    #[error("{0}")]
    Input(String),

    /// Some classes could not be fitted; the rest were written.
    #[error("{}; remaining classes written to {store} with the partial flag set", describe(.failures))]
    PartialFit {
        store: String,
        failures: Vec<FitFailure>,
    },
}

#[derive(Debug)]
pub struct FitFailure {
    pub layer_index: usize,
    pub class_id: usize,
    pub error: PcxError,
}

fn describe(failures: &[FitFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("class {} at layer {}: {}", f.class_id, f.layer_index, f.error))
        .collect::<Vec<_>>()
        .join("; ")
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn is_numerical(&self) -> bool {
        match self {
            CliError::Core(e) => e.is_numerical(),
            CliError::Input(_) => false,
            CliError::PartialFit { failures, .. } => failures.iter().all(|f| f.error.is_numerical()),
        }
    }

    /// 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }

    /// Machine-readable payload printed on stderr for numerical failures.
    pub fn diagnostic(&self, command: &str) -> serde_json::Value {
        let mut value = json!({
            "error": "numerical",
            "command": command,
            "message": self.to_string(),
        });
        if let CliError::PartialFit { failures, .. } = self {
            value["classes"] = failures.iter().map(|f| f.class_id).collect();
        }
        value
    }
}
