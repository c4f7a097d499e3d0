use thiserror::Error;

/// Failure of a CLI invocation. Validation problems are caught before any
/// stage writes; stage failures leave a `PARTIAL` marker in the stage
/// directory.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("stage {stage} failed: {error:#}")]
    Stage {
        stage: &'static str,
        error: anyhow::Error,
    },
    #[error("{0} is not implemented")]
    NotImplemented(&'static str),
}

impl PipelineError {
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Validation(_) | PipelineError::NotImplemented(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::Validation(msg.into())
}
