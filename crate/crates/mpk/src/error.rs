//! One error type shared by every part of the crate.
//!
//! Rank programs mix point-to-point calls, collectives and workload helpers
//! freely, so a single enum keeps `?` usable across all of them.

use crate::runtime::PayloadKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// A destination or root rank outside `[0, world_size)`.
    #[error("rank {rank} is not valid in a world of size {world_size}")]
    InvalidRank { rank: usize, world_size: usize },

    /// Buffering one more eager message would exceed the receiver's mailbox
    /// capacity. The runtime handles this internally by degrading the send
    /// to a rendezvous handshake; it never aborts a program.
    #[error("eager buffering of {needed} bytes exceeds mailbox capacity {capacity}")]
    BufferLimitExceeded { needed: u64, capacity: u64 },

    /// `wait` or `test` on a request whose value was already taken.
    #[error("request handle was already waited on or tested to completion")]
    HandleAlreadyConsumed,

    /// Every live rank is blocked on communication and no message can ever
    /// arrive. `sites` lists each rank's blocked call.
    #[error("deadlock: every rank is blocked ({})", sites.join("; "))]
    DeadlockDetected { sites: Vec<String> },

    /// A rank's program panicked.
    #[error("rank {rank} panicked: {message}")]
    RankPanicked { rank: usize, message: String },

    /// A rank's program returned an error.
    #[error("rank {rank} failed: {source}")]
    RankFailed {
        rank: usize,
        #[source]
        source: Box<Error>,
    },

    /// A collective was handed buffers whose element counts disagree.
    #[error("{op}: expected {expected} elements, got {actual}")]
    LengthMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A collective was handed payloads of different element kinds.
    #[error("{op}: payload kinds disagree (expected {expected}, got {actual})")]
    KindMismatch {
        op: &'static str,
        expected: PayloadKind,
        actual: PayloadKind,
    },

    /// A combining operation was handed a payload kind it has no arithmetic
    /// for.
    #[error("{op} cannot combine {kind} payloads")]
    UncombinableKind {
        op: &'static str,
        kind: PayloadKind,
    },

    /// The root rank of a collective did not supply its input payload.
    #[error("{op} requires a payload at the root rank")]
    MissingRootPayload { op: &'static str },

    /// A scalar parameter fell outside its documented range.
    #[error("{param} = {value} is outside [{min}, {max}]")]
    DomainError {
        param: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// Measured times must be strictly positive to form a ratio.
    #[error("time measurements must be strictly positive (got {0})")]
    NonPositiveTime(f64),

    #[error("processor count must be at least 1")]
    InvalidProcessorCount,

    /// Classification needs at least two measured points.
    #[error("need at least 2 curve points to classify, got {got}")]
    TooFewPoints { got: usize },

    /// A curve violated its structural rules (processor counts strictly
    /// increasing, every time strictly positive).
    #[error("invalid speedup curve: {0}")]
    InvalidCurve(String),

    /// A curve file could not be parsed.
    #[error("curve file line {line}: {message}")]
    CurveFormat { line: usize, message: String },

    /// A measurement run failed, so no curve point could be recorded.
    #[error("workload run failed: {source}")]
    WorkloadFailed {
        #[source]
        source: Box<Error>,
    },

    /// A workload was configured with unusable parameters.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An element sequence cannot be split evenly over the ranks.
    #[error("{count} elements cannot be split evenly across {world_size} ranks")]
    IndivisibleDecomposition { count: u64, world_size: usize },

    /// The primes search space is empty below 11.
    #[error("limit {limit} is too small; the search starts at 11")]
    LimitTooSmall { limit: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error is a deadlock report, possibly wrapped by a
    /// failing rank.
    pub fn is_deadlock(&self) -> bool {
        match self {
            Error::DeadlockDetected { .. } => true,
            Error::RankFailed { source, .. } => source.is_deadlock(),
            _ => false,
        }
    }
}
