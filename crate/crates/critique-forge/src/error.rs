//! Pipeline-level error type shared by the loops and the runners.

use thiserror::Error;

use crate::executor::ExecError;
use crate::gateway::GatewayError;
use crate::prompt::PromptError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("contract violation: {0}")]
    Contract(String),
}
