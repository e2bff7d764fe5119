use alloc::string::String;

use crate::space::HardAssignment;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Buffer lengths or node arities that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A precondition of an operation was violated.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value at graph node {node}")]
    NonFiniteNode { node: usize },
    #[error("non-finite gradient for sample {sample}")]
    NonFiniteGradient { sample: usize },
    #[error("finite-difference probe produced a non-finite value at coordinate {coordinate}")]
    NonFiniteProbe { coordinate: usize },
    #[error("ELBO became non-finite at epoch {epoch}, batch {batch}")]
    Training { epoch: usize, batch: usize },
    #[error("objective returned {value} at {x:?}")]
    NonFiniteObjective { x: HardAssignment, value: f64 },
    #[error("objective evaluation failed: {0}")]
    Evaluation(String),
    #[error("search space too large for enumeration: {0} points")]
    SpaceTooLarge(f64),
}
