use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solvers, the bound machinery, the expression
/// language and the problem-file loader.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside the kernel domain: {0}")]
    Domain(String),

    #[error("capacity exceeded: {what} (limit {limit})")]
    Capacity { what: String, limit: usize },

    #[error("non-finite value produced at node {node}")]
    NumericBlowup { node: usize },

    #[error("missing metadata: {0}")]
    MissingMetadata(String),

    #[error("tail series does not converge within order limit {order_limit}")]
    TailDivergence { order_limit: usize },

    #[error("pivot K_1(t, t) vanishes at t = {t}")]
    PivotVanishes { t: f64 },

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("arity violation at {line}:{column}: `{token}` exceeds declared arity {arity}")]
    Arity {
        token: String,
        arity: usize,
        line: usize,
        column: usize,
    },

    #[error("unbound variable `{0}`")]
    Unbound(String),

    #[error("domain fault in `{op}` with operand {operand}")]
    EvalFault { op: &'static str, operand: f64 },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
