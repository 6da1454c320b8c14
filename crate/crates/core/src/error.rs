//! Error types shared across the simulator.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between parsing a program and emitting a report.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A kernel or measurement was asked to act on a bit position outside the
    /// local address range `[0, m)`.
    #[error("locality violation: bit position {position} is not local (m = {m})")]
    Locality { position: usize, m: usize },

    /// A multi-qubit kernel was given repeated bit positions.
    #[error("duplicate bit position in a multi-qubit operation: {0}")]
    DuplicateBits(usize),

    /// A basis-state index, register value or parameter fell outside its
    /// documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parse failure, with 1-based source coordinates.
    #[error("{line}:{col}: parse error: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },

    /// A structural or locality diagnostic produced while checking a program
    /// against a given local-qubit count.
    #[error("{line}:{col}: {message}")]
    Diagnostic {
        line: usize,
        col: usize,
        message: String,
    },

    /// The compiler could not make all operands of one instruction local at
    /// the same time.
    #[error("compilation error at line {line}: {message}")]
    Compile { line: usize, message: String },

    /// A swap plan asked for more pairs than there are local or nonlocal
    /// qubit positions.
    #[error("capacity error: requested {requested} pairs, at most {available} possible")]
    Capacity { requested: usize, available: usize },

    /// Both sides of a pairwise exchange must agree on buffer length.
    #[error("protocol error: rank {rank} and rank {partner} disagree on buffer length ({len_out} vs {len_in})")]
    Protocol {
        rank: usize,
        partner: usize,
        len_out: usize,
        len_in: usize,
    },

    /// A rendezvous partner never arrived; almost always a plan-mismatch bug.
    #[error("rendezvous timeout: rank {rank} waiting on rank {partner}")]
    Timeout { rank: usize, partner: usize },

    /// Shard allocation failed.
    #[error("resource error: cannot allocate 2^{m} amplitudes per rank")]
    Resource { m: usize },

    /// The global norm drifted away from one.
    #[error("state error: global norm^2 = {norm} deviates from 1 beyond {tolerance}")]
    StateNorm { norm: f64, tolerance: f64 },

    /// Invalid run configuration (rank counts, chunking, flags).
    #[error("config error: {0}")]
    Config(String),

    /// File system trouble reading programs or writing reports.
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(line: usize, col: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            col,
            message: message.into(),
        }
    }

    pub(crate) fn diagnostic(line: usize, col: usize, message: impl Into<String>) -> Self {
        Error::Diagnostic {
            line,
            col,
            message: message.into(),
        }
    }

    /// Process exit code category for the CLI: parse 2, locality/compile 3,
    /// config 4, anything at run time 5.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::Diagnostic { .. } | Error::Compile { .. } | Error::Locality { .. } => 3,
            Error::Config(_) | Error::Capacity { .. } | Error::Domain(_) | Error::Io(_) => 4,
            _ => 5,
        }
    }
}
