//! Message-level simulator of a congested clique (`p` fully connected nodes
//! exchanging bounded-size words in synchronous rounds), together with
//! deterministic selection and multiple-selection algorithms built on
//! regular sampling, and a benchmark CLI that measures rounds, per-link
//! bandwidth, and per-node work.
//!
//! The crate is organised as:
//!
//! * [`runtime`]: the round-based clique simulator with exact accounting
//!   of rounds, per-link words, and per-node operations.
//! * [`sampling`]: sequential building blocks: multi-rank selection with
//!   counted comparisons, regular-sample extraction and merging, interval
//!   counting, and the tower-recurrence iteration count (`log*`).
//! * [`select`]: the distributed algorithms: parallel median of medians,
//!   selection by regular sampling (with an inefficiency exponent `phi`),
//!   the composed round-optimal selection, and multiple selection.
//! * [`oracle`]: a sort-based ground-truth oracle and deterministic
//!   instance generators.
//! * [`cli`]: the benchmark harness behind the `clique-select` binary.
//!
//! Everything is deterministic: identical configuration and instance yield
//! identical answers, metrics, traces, and CSV rows.

use std::fmt;

pub mod cli;
pub mod element;
pub mod oracle;
pub mod rng;
pub mod runtime;
pub mod sampling;
pub mod select;

pub use element::TaggedElement;
pub use runtime::{CliqueConfig, CliqueMetrics, CliqueState, NodeState, SortMode, Word};
pub use sampling::{ActiveInterval, IntervalCounts, LogStarMode, RankSet, RegularSample};
pub use select::{PhaseAudit, PhaseKind, PhaseSchedule, SelectionResult};

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Instance rejected at load time (empty input, duplicate tags).
    Instance(String),
    /// Invalid runtime or algorithm configuration.
    Config(String),
    /// A directed link exceeded its per-round word budget in strict mode.
    BandwidthViolation {
        round: u64,
        from: usize,
        to: usize,
        words: u64,
        limit: u64,
    },
    /// A requested rank lies outside the target set.
    Rank { rank: u64, size: u64 },
    /// A sample larger than its source was requested.
    Sample { requested: u64, available: u64 },
    /// An internal invariant failed mid-run; names the invariant and the
    /// phase it failed in.
    Invariant { invariant: String, phase: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Instance(msg) => write!(f, "invalid instance: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::BandwidthViolation {
                round,
                from,
                to,
                words,
                limit,
            } => write!(
                f,
                "bandwidth violation in round {round}: link {from}->{to} carries {words} words (limit {limit})"
            ),
            Error::Rank { rank, size } => {
                write!(f, "rank {rank} out of range for set of size {size}")
            }
            Error::Sample {
                requested,
                available,
            } => write!(
                f,
                "sample of size {requested} requested from set of size {available}"
            ),
            Error::Invariant { invariant, phase } => {
                write!(f, "invariant `{invariant}` violated during phase `{phase}`")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
