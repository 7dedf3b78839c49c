//! A message-passing world inside one process.
//!
//! [`spawn_world`] starts `world_size` virtual ranks, one OS thread each,
//! and runs the same program on every rank. Ranks exchange typed payloads
//! through mailboxes with two delivery protocols:
//!
//! * **eager** for messages up to the configured threshold: the payload is
//!   copied into the destination mailbox and the send completes at once;
//! * **rendezvous** above the threshold: the send announces itself and
//!   completes only when a matching receive takes the payload.
//!
//! Each destination buffers at most [`DEFAULT_MAILBOX_CAPACITY`] eager
//! bytes; a send that would overflow that budget silently degrades to a
//! rendezvous handshake instead of failing.
//!
//! Matching is by `(source, tag)` with optional wildcards, first-in
//! first-out per stream, so two messages with the same source and tag are
//! received in the order they were sent. When every live rank is blocked in
//! a communication call and no delivery can ever happen again, the world
//! shuts down with [`Error::DeadlockDetected`] naming each blocked call.
//!
//! Worlds are self-contained; run them one at a time from a single
//! controlling thread when wall-clock measurements matter.

mod payload;
mod rank;
mod shared;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

pub use payload::{Payload, PayloadKind};
pub use rank::{HandleState, Rank, RequestHandle, TestOutcome};
pub(crate) use shared::Space;
use shared::WorldShared;

use crate::error::{Error, Result};
use crate::metrics::TimingBreakdown;

/// Eager/rendezvous cutoff in bytes when none is configured.
pub const DEFAULT_EAGER_THRESHOLD: u64 = 64 * 1024;

/// Per-rank eager buffer budget in bytes.
pub const DEFAULT_MAILBOX_CAPACITY: u64 = 16 * 1024 * 1024;

/// Environment variable consulted by [`eager_threshold_from_env`]: the
/// eager/rendezvous cutoff in decimal bytes.
pub const EAGER_THRESHOLD_ENV: &str = "MPK_EAGER_THRESHOLD";

/// Reads the eager threshold override from the environment, if present and
/// parseable as decimal bytes.
pub fn eager_threshold_from_env() -> Option<u64> {
    std::env::var(EAGER_THRESHOLD_ENV).ok()?.trim().parse().ok()
}

/// Identity of one rank: an integer in `[0, world_size)`. Rank 0 is the
/// designated master wherever a workload needs a single coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankId(usize);

impl RankId {
    pub const MASTER: RankId = RankId(0);

    pub fn new(value: usize) -> Self {
        RankId(value)
    }

    pub fn value(self) -> usize {
        self.0
    }
}

impl fmt::Display for RankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for RankId {
    fn from(value: usize) -> Self {
        RankId(value)
    }
}

/// Message label chosen by the application. Receives can filter on it.
pub type Tag = i32;

/// Delivery protocol, selected purely by payload size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Eager,
    Rendezvous,
}

impl Protocol {
    /// Size rule: eager exactly when the payload fits the threshold.
    pub fn select(len_bytes: u64, eager_threshold: u64) -> Protocol {
        if len_bytes <= eager_threshold {
            Protocol::Eager
        } else {
            Protocol::Rendezvous
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Eager => "eager",
            Protocol::Rendezvous => "rendezvous",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Routing metadata of one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Envelope {
    pub source: RankId,
    pub dest: RankId,
    pub tag: Tag,
    /// Payload length in bytes.
    pub length: u64,
    /// Chosen by the size rule; delivery may still degrade to rendezvous
    /// when the destination mailbox is out of eager buffer room.
    pub protocol: Protocol,
}

impl Envelope {
    pub fn new(source: RankId, dest: RankId, tag: Tag, length: u64, eager_threshold: u64) -> Self {
        Envelope {
            source,
            dest,
            tag,
            length,
            protocol: Protocol::select(length, eager_threshold),
        }
    }
}

/// Names the group of ranks an operation spans. Every world has exactly one
/// communicator covering all its ranks; it is handed to each point-to-point
/// call and each collective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Communicator {
    pub(crate) id: u64,
    pub(crate) world_size: usize,
    pub(crate) eager_threshold: u64,
}

impl Communicator {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn world_size(&self) -> usize {
        self.world_size
    }

    pub fn eager_threshold(&self) -> u64 {
        self.eager_threshold
    }
}

/// Parameters for one world run.
#[derive(Debug, Clone, Copy)]
pub struct WorldConfig {
    pub world_size: usize,
    /// Eager/rendezvous cutoff in bytes.
    pub eager_threshold: u64,
    /// Per-rank eager buffer budget in bytes.
    pub mailbox_capacity: u64,
    /// Record a line per message event, retrievable from the report.
    pub trace: bool,
}

impl WorldConfig {
    pub fn new(world_size: usize) -> Self {
        WorldConfig {
            world_size,
            eager_threshold: DEFAULT_EAGER_THRESHOLD,
            mailbox_capacity: DEFAULT_MAILBOX_CAPACITY,
            trace: false,
        }
    }

    pub fn eager_threshold(mut self, bytes: u64) -> Self {
        self.eager_threshold = bytes;
        self
    }

    pub fn mailbox_capacity(mut self, bytes: u64) -> Self {
        self.mailbox_capacity = bytes;
        self
    }

    pub fn trace(mut self, enabled: bool) -> Self {
        self.trace = enabled;
        self
    }
}

/// Message accounting over a whole world run. Every sent message is either
/// received or still sitting in a mailbox when the world ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct WorldStats {
    pub sent: u64,
    pub received: u64,
    /// Messages left undelivered in mailboxes at shutdown.
    pub drained: u64,
}

impl WorldStats {
    /// `sent == received + drained`: no message is lost or double-counted.
    pub fn conserved(&self) -> bool {
        self.sent == self.received + self.drained
    }
}

/// Everything a finished world hands back.
#[derive(Debug)]
pub struct WorldReport<R> {
    /// Per-rank program return values, indexed by rank.
    pub exits: Vec<R>,
    /// Per-rank wall-clock decomposition, indexed by rank.
    pub timings: Vec<TimingBreakdown>,
    pub stats: WorldStats,
    /// `ts_ns event src dst tag bytes protocol` lines, when tracing is on.
    pub trace: Vec<String>,
    /// Controlling-thread wall time from spawn to last join.
    pub elapsed_seconds: f64,
}

/// Runs `program` on `world_size` concurrent ranks and waits for all of
/// them. The program returns one value per rank; the report collects them
/// in rank order together with timing breakdowns and message accounting.
///
/// If any rank panics or returns an error, the world still shuts down
/// cleanly (blocked peers unwind through deadlock detection) and the first
/// root cause is reported: a panic before a program error, and either
/// before a secondary deadlock.
pub fn spawn_world<R, F>(config: WorldConfig, program: F) -> Result<WorldReport<R>>
where
    R: Send,
    F: Fn(&mut Rank) -> Result<R> + Send + Sync,
{
    if config.world_size == 0 {
        return Err(Error::InvalidConfig(
            "world_size must be at least 1".to_string(),
        ));
    }
    let shared = Arc::new(WorldShared::new(&config));
    let started = Instant::now();
    let mut outcomes: Vec<(Result<R>, TimingBreakdown)> = Vec::with_capacity(config.world_size);

    thread::scope(|scope| {
        let mut joins = Vec::with_capacity(config.world_size);
        for id in 0..config.world_size {
            let shared = Arc::clone(&shared);
            let program = &program;
            joins.push(scope.spawn(move || {
                let mut rank = Rank::new(id, Arc::clone(&shared));
                let caught = catch_unwind(AssertUnwindSafe(|| program(&mut rank)));
                shared.finish_rank(id);
                let breakdown = rank.breakdown();
                let outcome = match caught {
                    Ok(result) => result,
                    Err(panic) => Err(Error::RankPanicked {
                        rank: id,
                        message: panic_message(panic.as_ref()),
                    }),
                };
                (outcome, breakdown)
            }));
        }
        for join in joins {
            // Panics are caught inside the thread, so join cannot fail.
            outcomes.push(join.join().expect("rank thread cannot panic"));
        }
    });

    let elapsed_seconds = started.elapsed().as_secs_f64();
    let stats = shared.stats();
    debug_assert!(stats.conserved(), "message accounting out of balance");
    let trace = shared.take_trace();

    // Report the root cause, not the fallout: a panic or program error
    // outranks the deadlock it may have caused in the other ranks.
    let mut exits = Vec::with_capacity(outcomes.len());
    let mut timings = Vec::with_capacity(outcomes.len());
    let mut first_panic: Option<Error> = None;
    let mut first_failure: Option<Error> = None;
    let mut first_deadlock: Option<Error> = None;
    for (id, (outcome, breakdown)) in outcomes.into_iter().enumerate() {
        timings.push(breakdown);
        match outcome {
            Ok(value) => exits.push(value),
            Err(e @ Error::RankPanicked { .. }) => {
                first_panic.get_or_insert(e);
            }
            Err(e @ Error::DeadlockDetected { .. }) => {
                first_deadlock.get_or_insert(e);
            }
            Err(e) => {
                first_failure.get_or_insert(Error::RankFailed {
                    rank: id,
                    source: Box::new(e),
                });
            }
        }
    }
    if let Some(e) = first_panic {
        return Err(e);
    }
    if let Some(e) = first_failure {
        return Err(e);
    }
    if let Some(e) = first_deadlock {
        return Err(e);
    }
    Ok(WorldReport {
        exits,
        timings,
        stats,
        trace,
        elapsed_seconds,
    })
}

fn panic_message(panic: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic payload".to_string()
    }
}
