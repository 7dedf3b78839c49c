//! Collective operations over a whole communicator.
//!
//! Every collective here is a fixed, linear composition of point-to-point
//! messages in ascending rank order, with rank 0 (or the named root) as the
//! hub. That costs a factor over tree schedules but buys two properties
//! this crate cares about more than raw throughput: the message pattern is
//! deterministic, and floating-point reductions fold in a single, stable
//! order, so results are bitwise reproducible run to run.
//!
//! All ranks of the communicator must call the same collective in the same
//! order. Collective traffic runs in an internal message space, so user
//! receives with wildcard filters can never intercept it.

use crate::error::{Error, Result};
use crate::runtime::{Communicator, Payload, PayloadKind, Rank, RankId, Space};

const TAG_BARRIER_ENTER: i32 = 1;
const TAG_BARRIER_RELEASE: i32 = 2;
const TAG_BCAST: i32 = 3;
const TAG_SCATTER: i32 = 4;
const TAG_GATHER: i32 = 5;
const TAG_ALLTOALL: i32 = 6;
const TAG_REDUCE: i32 = 7;

/// Elementwise combining rule for [`reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Max,
    Min,
}

impl ReduceOp {
    fn apply_f64(self, a: f64, b: f64) -> f64 {
        match self {
            ReduceOp::Sum => a + b,
            ReduceOp::Max => a.max(b),
            ReduceOp::Min => a.min(b),
        }
    }

    fn apply_i64(self, a: i64, b: i64) -> i64 {
        match self {
            ReduceOp::Sum => a + b,
            ReduceOp::Max => a.max(b),
            ReduceOp::Min => a.min(b),
        }
    }

    /// Folds `next` into `acc` element by element. Kinds are pre-checked by
    /// the caller, so a mismatch here is a bug, not user input.
    fn combine(self, mut acc: Payload, next: &Payload) -> Payload {
        match (&mut acc, next) {
            (Payload::F64(a), Payload::F64(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = self.apply_f64(*x, *y);
                }
            }
            (Payload::I64(a), Payload::I64(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = self.apply_i64(*x, *y);
                }
            }
            _ => unreachable!("reduce kinds are validated before combining"),
        }
        acc
    }
}

/// Per-rank element counts and displacements for the variable-size
/// collectives. Segment `r` is `[displs[r], displs[r] + counts[r])` in the
/// assembled buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsDispls {
    counts: Vec<usize>,
    displs: Vec<usize>,
}

impl CountsDispls {
    /// Builds and checks a layout: one count and displacement per rank,
    /// segments pairwise disjoint.
    pub fn new(counts: Vec<usize>, displs: Vec<usize>) -> Result<Self> {
        if counts.len() != displs.len() {
            return Err(Error::LengthMismatch {
                op: "counts/displs",
                expected: counts.len(),
                actual: displs.len(),
            });
        }
        let cd = CountsDispls { counts, displs };
        cd.check_disjoint()?;
        Ok(cd)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn displs(&self) -> &[usize] {
        &self.displs
    }

    /// Length of the assembled buffer: one past the last occupied slot.
    pub fn extent(&self) -> usize {
        self.counts
            .iter()
            .zip(&self.displs)
            .map(|(c, d)| d + c)
            .max()
            .unwrap_or(0)
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut segments: Vec<(usize, usize)> = self
            .counts
            .iter()
            .zip(&self.displs)
            .filter(|(c, _)| **c > 0)
            .map(|(c, d)| (*d, d + c))
            .collect();
        segments.sort_unstable();
        for pair in segments.windows(2) {
            if pair[0].1 > pair[1].0 {
                return Err(Error::InvalidConfig(format!(
                    "segments [{}, {}) and [{}, {}) overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(())
    }

    fn expect_world(&self, world_size: usize, op: &'static str) -> Result<()> {
        if self.counts.len() != world_size {
            return Err(Error::LengthMismatch {
                op,
                expected: world_size,
                actual: self.counts.len(),
            });
        }
        Ok(())
    }
}

fn check_root(root: RankId, comm: &Communicator) -> Result<usize> {
    if root.value() >= comm.world_size() {
        return Err(Error::InvalidRank {
            rank: root.value(),
            world_size: comm.world_size(),
        });
    }
    Ok(root.value())
}

fn check_part(
    op: &'static str,
    part: &Payload,
    kind: PayloadKind,
    expected_len: usize,
) -> Result<()> {
    if part.kind() != kind {
        return Err(Error::KindMismatch {
            op,
            expected: kind,
            actual: part.kind(),
        });
    }
    if part.len() != expected_len {
        return Err(Error::LengthMismatch {
            op,
            expected: expected_len,
            actual: part.len(),
        });
    }
    Ok(())
}

/// No rank returns before every rank has entered. Workers report to rank 0
/// and wait for its release.
pub fn barrier(rank: &mut Rank, comm: &Communicator) -> Result<()> {
    let p = comm.world_size();
    if p == 1 {
        return Ok(());
    }
    let empty = || Payload::Bytes(Vec::new());
    if rank.is_master() {
        for r in 1..p {
            rank.recv_in(comm, Some(r), Some(TAG_BARRIER_ENTER), Space::Internal)?;
        }
        for r in 1..p {
            rank.send_in(comm, r, TAG_BARRIER_RELEASE, empty(), Space::Internal)?;
        }
    } else {
        rank.send_in(comm, 0, TAG_BARRIER_ENTER, empty(), Space::Internal)?;
        rank.recv_in(comm, Some(0), Some(TAG_BARRIER_RELEASE), Space::Internal)?;
    }
    Ok(())
}

/// Root's payload, delivered to every rank. Only the root passes `Some`.
pub fn bcast(
    rank: &mut Rank,
    comm: &Communicator,
    root: RankId,
    payload: Option<Payload>,
) -> Result<Payload> {
    let root = check_root(root, comm)?;
    if rank.id().value() == root {
        let payload = payload.ok_or(Error::MissingRootPayload { op: "bcast" })?;
        for r in 0..comm.world_size() {
            if r != root {
                rank.send_in(comm, r, TAG_BCAST, payload.clone(), Space::Internal)?;
            }
        }
        Ok(payload)
    } else {
        rank.recv_in(comm, Some(root), Some(TAG_BCAST), Space::Internal)
    }
}

/// Splits the root's payload into `world_size` equal consecutive slices and
/// delivers slice `r` to rank `r`. The root keeps its own slice.
pub fn scatter(
    rank: &mut Rank,
    comm: &Communicator,
    root: RankId,
    payload: Option<Payload>,
) -> Result<Payload> {
    let root = check_root(root, comm)?;
    let p = comm.world_size();
    if rank.id().value() == root {
        let payload = payload.ok_or(Error::MissingRootPayload { op: "scatter" })?;
        if payload.len() % p != 0 {
            return Err(Error::IndivisibleDecomposition {
                count: payload.len() as u64,
                world_size: p,
            });
        }
        let k = payload.len() / p;
        for r in 0..p {
            if r != root {
                rank.send_in(comm, r, TAG_SCATTER, payload.slice(r * k, k), Space::Internal)?;
            }
        }
        Ok(payload.slice(root * k, k))
    } else {
        rank.recv_in(comm, Some(root), Some(TAG_SCATTER), Space::Internal)
    }
}

/// Collects equal-size contributions at the root, ordered by rank. Returns
/// `Some(assembled)` at the root, `None` elsewhere.
pub fn gather(
    rank: &mut Rank,
    comm: &Communicator,
    root: RankId,
    contribution: Payload,
) -> Result<Option<Payload>> {
    let root = check_root(root, comm)?;
    let p = comm.world_size();
    if rank.id().value() != root {
        rank.send_in(comm, root, TAG_GATHER, contribution, Space::Internal)?;
        return Ok(None);
    }
    let kind = contribution.kind();
    let k = contribution.len();
    let mut buf = Payload::zeros_of(kind, k * p);
    buf.write_at(root * k, &contribution);
    for r in 0..p {
        if r == root {
            continue;
        }
        let part = rank.recv_in(comm, Some(r), Some(TAG_GATHER), Space::Internal)?;
        check_part("gather", &part, kind, k)?;
        buf.write_at(r * k, &part);
    }
    Ok(Some(buf))
}

/// [`gather`] with per-rank counts and displacements. Slots no segment
/// covers are left zero-filled.
pub fn gatherv(
    rank: &mut Rank,
    comm: &Communicator,
    root: RankId,
    contribution: Payload,
    layout: &CountsDispls,
) -> Result<Option<Payload>> {
    let root = check_root(root, comm)?;
    let p = comm.world_size();
    layout.expect_world(p, "gatherv")?;
    let me = rank.id().value();
    if contribution.len() != layout.counts[me] {
        return Err(Error::LengthMismatch {
            op: "gatherv",
            expected: layout.counts[me],
            actual: contribution.len(),
        });
    }
    if me != root {
        rank.send_in(comm, root, TAG_GATHER, contribution, Space::Internal)?;
        return Ok(None);
    }
    let kind = contribution.kind();
    let mut buf = Payload::zeros_of(kind, layout.extent());
    buf.write_at(layout.displs[root], &contribution);
    for r in 0..p {
        if r == root {
            continue;
        }
        let part = rank.recv_in(comm, Some(r), Some(TAG_GATHER), Space::Internal)?;
        check_part("gatherv", &part, kind, layout.counts[r])?;
        buf.write_at(layout.displs[r], &part);
    }
    Ok(Some(buf))
}

/// Every rank ends up with all contributions in rank order: a gather at
/// rank 0 followed by a broadcast of the assembled buffer.
pub fn allgather(rank: &mut Rank, comm: &Communicator, contribution: Payload) -> Result<Payload> {
    let gathered = gather(rank, comm, RankId::MASTER, contribution)?;
    bcast(rank, comm, RankId::MASTER, gathered)
}

/// [`allgather`] with per-rank counts and displacements.
pub fn allgatherv(
    rank: &mut Rank,
    comm: &Communicator,
    contribution: Payload,
    layout: &CountsDispls,
) -> Result<Payload> {
    let gathered = gatherv(rank, comm, RankId::MASTER, contribution, layout)?;
    bcast(rank, comm, RankId::MASTER, gathered)
}

/// Personalized exchange: segment `j` of rank `i`'s payload becomes segment
/// `i` of rank `j`'s result. Sends are posted nonblocking up front, then
/// peers are drained in ascending rank order, so the schedule cannot
/// deadlock under either delivery protocol.
pub fn alltoall(rank: &mut Rank, comm: &Communicator, payload: Payload) -> Result<Payload> {
    let p = comm.world_size();
    if payload.len() % p != 0 {
        return Err(Error::IndivisibleDecomposition {
            count: payload.len() as u64,
            world_size: p,
        });
    }
    let k = payload.len() / p;
    let kind = payload.kind();
    let me = rank.id().value();
    let mut out = Payload::zeros_of(kind, payload.len());
    out.write_at(me * k, &payload.slice(me * k, k));
    let mut pending = Vec::with_capacity(p.saturating_sub(1));
    for r in 0..p {
        if r != me {
            pending.push(rank.isend_in(
                comm,
                r,
                TAG_ALLTOALL,
                payload.slice(r * k, k),
                Space::Internal,
            )?);
        }
    }
    for r in 0..p {
        if r == me {
            continue;
        }
        let part = rank.recv_in(comm, Some(r), Some(TAG_ALLTOALL), Space::Internal)?;
        check_part("alltoall", &part, kind, k)?;
        out.write_at(r * k, &part);
    }
    for handle in &mut pending {
        rank.wait(handle)?;
    }
    Ok(out)
}

/// [`alltoall`] with independent send and receive layouts. The send count
/// from rank `i` to rank `j` must equal rank `j`'s receive count from `i`;
/// a disagreement surfaces as a length error at the receiver.
pub fn alltoallv(
    rank: &mut Rank,
    comm: &Communicator,
    payload: Payload,
    send: &CountsDispls,
    recv: &CountsDispls,
) -> Result<Payload> {
    let p = comm.world_size();
    send.expect_world(p, "alltoallv")?;
    recv.expect_world(p, "alltoallv")?;
    if payload.len() < send.extent() {
        return Err(Error::LengthMismatch {
            op: "alltoallv",
            expected: send.extent(),
            actual: payload.len(),
        });
    }
    let kind = payload.kind();
    let me = rank.id().value();
    if send.counts[me] != recv.counts[me] {
        return Err(Error::LengthMismatch {
            op: "alltoallv",
            expected: send.counts[me],
            actual: recv.counts[me],
        });
    }
    let mut out = Payload::zeros_of(kind, recv.extent());
    out.write_at(
        recv.displs[me],
        &payload.slice(send.displs[me], send.counts[me]),
    );
    let mut pending = Vec::with_capacity(p.saturating_sub(1));
    for r in 0..p {
        if r != me {
            pending.push(rank.isend_in(
                comm,
                r,
                TAG_ALLTOALL,
                payload.slice(send.displs[r], send.counts[r]),
                Space::Internal,
            )?);
        }
    }
    for r in 0..p {
        if r == me {
            continue;
        }
        let part = rank.recv_in(comm, Some(r), Some(TAG_ALLTOALL), Space::Internal)?;
        check_part("alltoallv", &part, kind, recv.counts[r])?;
        out.write_at(recv.displs[r], &part);
    }
    for handle in &mut pending {
        rank.wait(handle)?;
    }
    Ok(out)
}

/// Combines equal-length numeric contributions at the root. The fold runs
/// in ascending rank order: rank 0's contribution first, then rank 1's,
/// and so on. That makes floating-point sums bitwise deterministic.
/// Returns `Some(result)` at the root, `None` elsewhere.
pub fn reduce(
    rank: &mut Rank,
    comm: &Communicator,
    root: RankId,
    contribution: Payload,
    op: ReduceOp,
) -> Result<Option<Payload>> {
    let root = check_root(root, comm)?;
    let kind = contribution.kind();
    if kind == PayloadKind::Bytes {
        return Err(Error::UncombinableKind { op: "reduce", kind });
    }
    let len = contribution.len();
    let me = rank.id().value();
    if me != root {
        rank.send_in(comm, root, TAG_REDUCE, contribution, Space::Internal)?;
        return Ok(None);
    }
    let mut own = Some(contribution);
    let mut acc: Option<Payload> = None;
    for r in 0..comm.world_size() {
        let part = if r == root {
            own.take().expect("own contribution folded once")
        } else {
            let part = rank.recv_in(comm, Some(r), Some(TAG_REDUCE), Space::Internal)?;
            check_part("reduce", &part, kind, len)?;
            part
        };
        acc = Some(match acc {
            None => part,
            Some(folded) => op.combine(folded, &part),
        });
    }
    Ok(Some(acc.expect("world has at least one rank")))
}
