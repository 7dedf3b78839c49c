use std::sync::Arc;
use std::time::Instant;

use super::shared::{Space, WorldShared};
use super::{Communicator, Payload, RankId, Tag};
use crate::error::{Error, Result};
use crate::metrics::TimingBreakdown;

/// Lifecycle of a nonblocking request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandleState {
    /// Not yet observed complete by `wait` or `test`.
    Pending,
    /// Transfer finished; the value is about to be taken. This state is
    /// transient: the same call that observes it also consumes the handle.
    Complete,
    /// The value was taken; further `wait`/`test` calls are errors.
    Consumed,
}

/// Token for an in-flight `isend`/`irecv`. Owned by the rank that created
/// it and redeemed exactly once through `wait` or a successful `test`.
#[derive(Debug)]
pub struct RequestHandle {
    req: u64,
    origin: usize,
    state: HandleState,
    desc: String,
}

impl RequestHandle {
    pub fn state(&self) -> HandleState {
        self.state
    }
}

/// Outcome of a nonblocking completion check.
#[derive(Debug)]
pub enum TestOutcome {
    StillPending,
    /// The request finished. Receives carry their payload; sends carry
    /// `None`.
    Complete(Option<Payload>),
}

/// One virtual rank's view of the world: its identity, its clock and the
/// point-to-point operations. A program receives `&mut Rank` and drives
/// everything through it.
pub struct Rank {
    id: usize,
    shared: Arc<WorldShared>,
    started: Instant,
    comm_ns: u64,
    idle_ns: u64,
}

impl std::fmt::Debug for Rank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rank")
            .field("id", &self.id)
            .field("world_size", &self.world_size())
            .finish_non_exhaustive()
    }
}

impl Rank {
    pub(crate) fn new(id: usize, shared: Arc<WorldShared>) -> Self {
        Rank {
            id,
            shared,
            started: Instant::now(),
            comm_ns: 0,
            idle_ns: 0,
        }
    }

    pub fn id(&self) -> RankId {
        RankId::new(self.id)
    }

    pub fn is_master(&self) -> bool {
        self.id == 0
    }

    pub fn world_size(&self) -> usize {
        self.shared.world_size()
    }

    /// The communicator spanning every rank in this world.
    pub fn world(&self) -> Communicator {
        Communicator {
            id: self.shared.comm_id(),
            world_size: self.shared.world_size(),
            eager_threshold: self.shared.eager_threshold(),
        }
    }

    /// Seconds since this world started, from the host's monotonic clock.
    /// All ranks of a world share the same epoch, so timestamps compare
    /// across ranks.
    pub fn wtime(&self) -> f64 {
        self.shared.epoch().elapsed().as_secs_f64()
    }

    /// Blocking send. Returns once the payload is buffered at the receiver
    /// (eager) or handed over to a matching receive (rendezvous).
    pub fn send(
        &mut self,
        comm: &Communicator,
        dest: RankId,
        tag: Tag,
        payload: impl Into<Payload>,
    ) -> Result<()> {
        self.send_in(comm, dest.value(), tag, payload.into(), Space::User)
    }

    /// Blocking receive. `None` filters accept any source or any tag; among
    /// matching messages the earliest sent one is returned.
    pub fn recv(
        &mut self,
        comm: &Communicator,
        src: Option<RankId>,
        tag: Option<Tag>,
    ) -> Result<Payload> {
        self.recv_in(comm, src.map(RankId::value), tag, Space::User)
    }

    /// Nonblocking send: posts the message and returns a handle. Eager
    /// sends are complete as soon as this returns; rendezvous sends
    /// complete when a matching receive takes the payload.
    pub fn isend(
        &mut self,
        comm: &Communicator,
        dest: RankId,
        tag: Tag,
        payload: impl Into<Payload>,
    ) -> Result<RequestHandle> {
        self.isend_in(comm, dest.value(), tag, payload.into(), Space::User)
    }

    /// Nonblocking receive: posts the filters and returns a handle to
    /// redeem with `wait` or `test`.
    pub fn irecv(
        &mut self,
        comm: &Communicator,
        src: Option<RankId>,
        tag: Option<Tag>,
    ) -> Result<RequestHandle> {
        self.check_comm(comm);
        let op = self.op_start();
        let src = src.map(RankId::value);
        let desc = describe_recv(src, tag);
        let req = self.shared.post_recv(self.id, src, tag, Space::User)?;
        self.op_end(op);
        Ok(RequestHandle {
            req,
            origin: self.id,
            state: HandleState::Pending,
            desc,
        })
    }

    /// Blocks until the request completes. Returns the payload for
    /// receives, `None` for sends. A handle can be redeemed once; waiting
    /// again reports `HandleAlreadyConsumed`.
    pub fn wait(&mut self, handle: &mut RequestHandle) -> Result<Option<Payload>> {
        debug_assert_eq!(handle.origin, self.id, "handles stay with their rank");
        if handle.state == HandleState::Consumed {
            return Err(Error::HandleAlreadyConsumed);
        }
        let op = self.op_start();
        let site = format!("wait({})", handle.desc);
        let out = self
            .shared
            .await_request(self.id, handle.req, &site, &mut self.idle_ns);
        self.op_end(op);
        let payload = out?;
        handle.state = HandleState::Consumed;
        Ok(payload)
    }

    /// Never blocks. Reports `StillPending` or consumes the handle and
    /// returns its value.
    pub fn test(&mut self, handle: &mut RequestHandle) -> Result<TestOutcome> {
        debug_assert_eq!(handle.origin, self.id, "handles stay with their rank");
        if handle.state == HandleState::Consumed {
            return Err(Error::HandleAlreadyConsumed);
        }
        let op = self.op_start();
        let out = self.shared.poll_request(handle.req);
        self.op_end(op);
        match out? {
            None => Ok(TestOutcome::StillPending),
            Some(payload) => {
                handle.state = HandleState::Consumed;
                Ok(TestOutcome::Complete(payload))
            }
        }
    }

    /// Wall-clock decomposition of this rank's run so far: communication
    /// is time inside point-to-point calls net of blocking, idle is the
    /// blocked share, computation is the rest.
    pub(crate) fn breakdown(&self) -> TimingBreakdown {
        let wall = self.started.elapsed().as_secs_f64();
        TimingBreakdown::from_wall(wall, ns_to_s(self.comm_ns), ns_to_s(self.idle_ns))
    }

    fn check_comm(&self, comm: &Communicator) {
        debug_assert_eq!(
            comm.id(),
            self.shared.comm_id(),
            "communicator belongs to another world"
        );
    }

    fn op_start(&self) -> (Instant, u64) {
        (Instant::now(), self.idle_ns)
    }

    fn op_end(&mut self, (started, idle_before): (Instant, u64)) {
        let spent = started.elapsed().as_nanos() as u64;
        let blocked = self.idle_ns - idle_before;
        self.comm_ns += spent.saturating_sub(blocked);
    }

    pub(crate) fn send_in(
        &mut self,
        comm: &Communicator,
        dest: usize,
        tag: Tag,
        payload: Payload,
        space: Space,
    ) -> Result<()> {
        self.check_comm(comm);
        let op = self.op_start();
        let site = format!("send(dst={dest}, tag={tag}, {} bytes)", payload.len_bytes());
        let result = match self.shared.post_send(self.id, dest, tag, payload, space) {
            Ok(req) => self
                .shared
                .await_request(self.id, req, &site, &mut self.idle_ns),
            Err(e) => Err(e),
        };
        self.op_end(op);
        result.map(|_| ())
    }

    pub(crate) fn recv_in(
        &mut self,
        comm: &Communicator,
        src: Option<usize>,
        tag: Option<Tag>,
        space: Space,
    ) -> Result<Payload> {
        self.check_comm(comm);
        let op = self.op_start();
        let site = describe_recv(src, tag);
        let result = match self.shared.post_recv(self.id, src, tag, space) {
            Ok(req) => self
                .shared
                .await_request(self.id, req, &site, &mut self.idle_ns),
            Err(e) => Err(e),
        };
        self.op_end(op);
        Ok(result?.expect("receive always carries a payload"))
    }

    pub(crate) fn isend_in(
        &mut self,
        comm: &Communicator,
        dest: usize,
        tag: Tag,
        payload: Payload,
        space: Space,
    ) -> Result<RequestHandle> {
        self.check_comm(comm);
        let op = self.op_start();
        let desc = format!("isend(dst={dest}, tag={tag}, {} bytes)", payload.len_bytes());
        let req = self.shared.post_send(self.id, dest, tag, payload, space)?;
        self.op_end(op);
        Ok(RequestHandle {
            req,
            origin: self.id,
            state: HandleState::Pending,
            desc,
        })
    }
}

fn describe_recv(src: Option<usize>, tag: Option<Tag>) -> String {
    let src = src.map_or_else(|| "Any".to_string(), |s| s.to_string());
    let tag = tag.map_or_else(|| "Any".to_string(), |t| t.to_string());
    format!("recv(src={src}, tag={tag})")
}

fn ns_to_s(ns: u64) -> f64 {
    ns as f64 / 1e9
}
