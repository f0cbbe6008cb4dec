use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: self-loop on vertex {vertex}")]
    SelfLoop { line: usize, vertex: usize },

    #[error("graph is empty")]
    Empty,

    #[error("graph is disconnected ({reached} of {n} vertices reachable from vertex 0)")]
    Disconnected { reached: usize, n: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A routing matrix violates row-stochasticity or the adjacency support.
    #[error("routing is inconsistent with the graph: {}", .0.join("; "))]
    Inconsistent(Vec<String>),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(
        "Neumann series for destination {destination} did not converge after {iterations} iterations (last increment {increment:e})"
    )]
    NonConvergent {
        destination: usize,
        iterations: usize,
        increment: f64,
    },

    #[error("linear system for destination {destination} is singular")]
    SingularSystem { destination: usize },

    #[error("solution check failed: {0}")]
    InvariantViolation(String),

    #[error("load {load} exceeds service capacity (R/C * max s0 >= 1)")]
    Congested { load: f64 },

    #[error("regression window holds {points} points, need at least 10")]
    DegenerateWindow { points: usize },

    #[error("bracket [{r_low}, {r_high}] does not straddle the transition (eta = {eta_low}, {eta_high})")]
    BadBracket {
        r_low: f64,
        r_high: f64,
        eta_low: f64,
        eta_high: f64,
    },
}
