//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside its documented domain.
    #[error("invalid parameter `{name}`: {reason} (got {value})")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
        value: f64,
    },

    /// A trace file references an agent id that never arrived or is inactive.
    #[error("malformed trace at round {round}: {reason} (agent {agent})")]
    MalformedTrace {
        round: u64,
        agent: u64,
        reason: &'static str,
    },

    /// An agent profile is missing a field the reward model requires.
    #[error("model mismatch for agent {agent}: missing {missing}")]
    ModelMismatch { agent: u64, missing: &'static str },

    /// A reward model induces a mean outside [0, 1].
    #[error("invalid model: mean {value} for agent {agent}, arm {arm} is outside [0, 1]")]
    InvalidModel { agent: u64, arm: usize, value: f64 },

    /// The active set is empty where at least one agent is required.
    #[error("empty population at round {round}")]
    EmptyPopulation { round: u64 },

    /// Transfer weights are negative or do not sum to one.
    #[error("invalid transfer weights: {reason} (sum {sum})")]
    InvalidWeights { reason: &'static str, sum: f64 },

    /// Internal bookkeeping broke an invariant; always a bug.
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    /// Commit-after-burn-in reached its commit round with an unsampled arm.
    #[error("undefined estimate: arm {arm} was never sampled during burn-in (tau {tau})")]
    UndefinedEstimate { arm: usize, tau: u64 },

    /// A calculator was called outside its stated preconditions.
    #[error("misuse: {0}")]
    Misuse(&'static str),

    /// A runtime lemma assertion fired during a simulation run.
    #[error("runtime assertion `{check}` failed at round {round}: {details}")]
    AssertionFailed {
        check: &'static str,
        round: u64,
        details: String,
    },

    /// Configuration file problems, with the offending key named.
    #[error("config error for key `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// Line-oriented input file could not be parsed.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 validation/assertion, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::InvalidParameter { .. }
            | Error::Misuse(_)
            | Error::Parse { .. }
            | Error::Config { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
