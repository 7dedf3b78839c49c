//! Desk-scale message passing and speedup prediction in one process.
//!
//! The crate answers a practical question: given a workload, is spreading
//! it over more processes worth it on the machine in front of you? It
//! provides the pieces to find out end to end:
//!
//! * [`runtime`]: virtual ranks in one process, exchanging typed messages
//!   through eager or rendezvous delivery, with deadlock detection and
//!   per-rank timing breakdowns;
//! * [`collectives`]: barrier, broadcast, scatter/gather, all-to-all and
//!   reduce, all composed from deterministic point-to-point sends;
//! * [`metrics`]: execution-time decomposition, speedup, efficiency and
//!   the analytic bounds of Amdahl and Gustafson;
//! * [`workloads`]: two contrasting benchmark programs: a 1-D wave
//!   equation (communication-heavy) and a primes counter (compute-bound);
//! * [`predictor`]: measures a workload's time-versus-processes curve on
//!   a single CPU and classifies whether real speedup is plausible.
//!
//! The prediction method rests on one observation: running all ranks
//! time-shared on one processor makes parallel overheads visible without a
//! cluster. A workload whose single-CPU curve stays flat as processes are
//! added is dominated by computation and will scale; one whose curve
//! climbs steeply is dominated by coordination and will not.

// The single unsafe exception is the processor-affinity syscall wrapper in
// `predictor`; everything else stays safe.
#![deny(unsafe_code)]
#![warn(missing_debug_implementations, rust_2018_idioms)]

pub mod collectives;
pub mod error;
pub mod metrics;
pub mod predictor;
pub mod runtime;
pub mod workloads;

pub use error::{Error, Result};
pub use runtime::{spawn_world, Communicator, Payload, Rank, RankId, Tag, WorldConfig};
