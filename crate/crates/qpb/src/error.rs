//! Error type shared by the whole crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Schema document violates an invariant (orphan member, duplicate name, ...).
    /// The message carries the hierarchy/level context.
    #[error("schema error: {0}")]
    Schema(String),

    /// Log document violates an invariant; the message names the session and
    /// query index where validation failed.
    #[error("log error: {0}")]
    Log(String),

    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("alpha must be in [0, 1), got {0}")]
    AlphaOutOfRange(f64),

    /// A query part is missing from the graph universe it is checked against.
    #[error("unknown query part {0} (not in the graph universe)")]
    UnknownPart(String),

    #[error("graph is not strongly connected ({components} strongly connected components{})",
            unreached_note(.unreached_measures))]
    NotStronglyConnected {
        components: usize,
        unreached_measures: Vec<String>,
    },

    /// A vertex with no outgoing positive-weight edge; the transition matrix
    /// cannot be row-normalized.
    #[error("dangling vertex {0} (no outgoing edges)")]
    DanglingVertex(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A query part has no (or zero) belief probability, meaning the graph
    /// that produced the belief did not include it.
    #[error("no belief probability for query part {0}")]
    MissingBelief(String),

    #[error("distribution is not normalized (sum = {0})")]
    NotNormalized(f64),

    #[error("training log is empty")]
    EmptyTraining,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn unreached_note(measures: &[String]) -> String {
    if measures.is_empty() {
        String::new()
    } else {
        format!("; unreached measures: {}", measures.join(", "))
    }
}
