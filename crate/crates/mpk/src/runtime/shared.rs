//! World-global state shared by every rank thread.
//!
//! All coordination runs under one mutex: mailboxes, posted receives,
//! request completion and the quiescence check that turns "everyone is
//! blocked and nothing can arrive" into a deadlock report. Desk-scale
//! worlds exchange at most a few thousand messages per step, so a single
//! lock is both simple and fast enough.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use super::payload::Payload;
use super::{Protocol, WorldConfig, WorldStats};
use crate::error::{Error, Result};

static NEXT_COMM_ID: AtomicU64 = AtomicU64::new(1);

/// Message namespace. Collectives run their point-to-point traffic in the
/// internal space so a user receive with wildcard filters can never steal a
/// collective's message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Space {
    User,
    Internal,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EnvMeta {
    pub src: usize,
    pub dst: usize,
    pub tag: i32,
    pub bytes: u64,
    pub protocol: Protocol,
    pub space: Space,
}

enum EntryBody {
    /// Payload copied into the mailbox; the send completed at post time.
    Eager(Payload),
    /// Announcement only; the payload stays parked in the sender's request
    /// until a matching receive completes the handshake.
    Rendezvous { send_req: u64 },
}

struct Entry {
    seq: u64,
    meta: EnvMeta,
    body: EntryBody,
}

struct PostedRecv {
    req: u64,
    src: Option<usize>,
    tag: Option<i32>,
    space: Space,
}

impl PostedRecv {
    fn matches(&self, meta: &EnvMeta) -> bool {
        self.space == meta.space
            && self.src.map_or(true, |s| s == meta.src)
            && self.tag.map_or(true, |t| t == meta.tag)
    }
}

#[derive(Default)]
struct Mailbox {
    queue: VecDeque<Entry>,
    posted: Vec<PostedRecv>,
    eager_bytes: u64,
}

impl Mailbox {
    fn admit_eager(&self, bytes: u64, capacity: u64) -> Result<()> {
        if self.eager_bytes + bytes > capacity {
            return Err(Error::BufferLimitExceeded {
                needed: self.eager_bytes + bytes,
                capacity,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ReqKind {
    Send,
    Recv,
}

struct ReqState {
    kind: ReqKind,
    done: bool,
    payload: Option<Payload>,
}

struct WorldState {
    mailboxes: Vec<Mailbox>,
    requests: HashMap<u64, ReqState>,
    next_req: u64,
    next_seq: u64,
    /// For each rank blocked on the condition variable: the request it
    /// awaits and a description of the call it is blocked in.
    blocked: Vec<Option<(u64, String)>>,
    blocked_count: usize,
    /// Ranks whose program has not yet returned.
    alive: usize,
    deadlocked: bool,
    deadlock_sites: Vec<String>,
    sent: u64,
    received: u64,
    trace: Vec<String>,
}

pub(crate) struct WorldShared {
    state: Mutex<WorldState>,
    cv: Condvar,
    epoch: Instant,
    world_size: usize,
    eager_threshold: u64,
    mailbox_capacity: u64,
    trace_enabled: bool,
    comm_id: u64,
}

impl WorldShared {
    pub(crate) fn new(config: &WorldConfig) -> Self {
        let state = WorldState {
            mailboxes: (0..config.world_size).map(|_| Mailbox::default()).collect(),
            requests: HashMap::new(),
            next_req: 1,
            next_seq: 1,
            blocked: vec![None; config.world_size],
            blocked_count: 0,
            alive: config.world_size,
            deadlocked: false,
            deadlock_sites: Vec::new(),
            sent: 0,
            received: 0,
            trace: Vec::new(),
        };
        WorldShared {
            state: Mutex::new(state),
            cv: Condvar::new(),
            epoch: Instant::now(),
            world_size: config.world_size,
            eager_threshold: config.eager_threshold,
            mailbox_capacity: config.mailbox_capacity,
            trace_enabled: config.trace,
            comm_id: NEXT_COMM_ID.fetch_add(1, Ordering::Relaxed),
        }
    }

    pub(crate) fn world_size(&self) -> usize {
        self.world_size
    }

    pub(crate) fn eager_threshold(&self) -> u64 {
        self.eager_threshold
    }

    pub(crate) fn comm_id(&self) -> u64 {
        self.comm_id
    }

    pub(crate) fn epoch(&self) -> Instant {
        self.epoch
    }

    fn deadlock_error(sites: &[String]) -> Error {
        Error::DeadlockDetected {
            sites: sites.to_vec(),
        }
    }

    fn trace_line(
        &self,
        st: &mut WorldState,
        event: &str,
        src: i64,
        dst: i64,
        tag: i64,
        bytes: u64,
        protocol: Option<Protocol>,
    ) {
        if !self.trace_enabled {
            return;
        }
        let ts = self.epoch.elapsed().as_nanos();
        let proto = protocol.map_or("-", |p| p.as_str());
        st.trace
            .push(format!("{ts} {event} {src} {dst} {tag} {bytes} {proto}"));
    }

    /// Posts a message toward `to`. Small messages are copied into the
    /// destination mailbox and complete immediately (eager). Large messages,
    /// and any message the destination has no buffer room for, only announce
    /// themselves; their request completes when a matching receive takes the
    /// payload (rendezvous).
    pub(crate) fn post_send(
        &self,
        from: usize,
        to: usize,
        tag: i32,
        payload: Payload,
        space: Space,
    ) -> Result<u64> {
        if to >= self.world_size {
            return Err(Error::InvalidRank {
                rank: to,
                world_size: self.world_size,
            });
        }
        let mut st = self.state.lock().unwrap();
        if st.deadlocked {
            return Err(Self::deadlock_error(&st.deadlock_sites));
        }
        let bytes = payload.len_bytes();
        let selected = Protocol::select(bytes, self.eager_threshold);
        let effective = match selected {
            Protocol::Eager => match st.mailboxes[to].admit_eager(bytes, self.mailbox_capacity) {
                Ok(()) => Protocol::Eager,
                Err(Error::BufferLimitExceeded { .. }) => Protocol::Rendezvous,
                Err(other) => return Err(other),
            },
            Protocol::Rendezvous => Protocol::Rendezvous,
        };
        let req = st.next_req;
        st.next_req += 1;
        let seq = st.next_seq;
        st.next_seq += 1;
        st.sent += 1;
        let meta = EnvMeta {
            src: from,
            dst: to,
            tag,
            bytes,
            protocol: effective,
            space,
        };
        self.trace_line(
            &mut st,
            "post_send",
            from as i64,
            to as i64,
            tag.into(),
            bytes,
            Some(effective),
        );
        let body = match effective {
            Protocol::Eager => {
                st.mailboxes[to].eager_bytes += bytes;
                st.requests.insert(
                    req,
                    ReqState {
                        kind: ReqKind::Send,
                        done: true,
                        payload: None,
                    },
                );
                self.trace_line(
                    &mut st,
                    "send_done",
                    from as i64,
                    to as i64,
                    tag.into(),
                    bytes,
                    Some(effective),
                );
                EntryBody::Eager(payload)
            }
            Protocol::Rendezvous => {
                st.requests.insert(
                    req,
                    ReqState {
                        kind: ReqKind::Send,
                        done: false,
                        payload: Some(payload),
                    },
                );
                EntryBody::Rendezvous { send_req: req }
            }
        };
        st.mailboxes[to].queue.push_back(Entry { seq, meta, body });
        self.match_mailbox(&mut st, to);
        self.cv.notify_all();
        Ok(req)
    }

    /// Posts a receive for `owner`. `None` filters match any source or tag.
    pub(crate) fn post_recv(
        &self,
        owner: usize,
        src: Option<usize>,
        tag: Option<i32>,
        space: Space,
    ) -> Result<u64> {
        if let Some(s) = src {
            if s >= self.world_size {
                return Err(Error::InvalidRank {
                    rank: s,
                    world_size: self.world_size,
                });
            }
        }
        let mut st = self.state.lock().unwrap();
        if st.deadlocked {
            return Err(Self::deadlock_error(&st.deadlock_sites));
        }
        let req = st.next_req;
        st.next_req += 1;
        self.trace_line(
            &mut st,
            "post_recv",
            src.map_or(-1, |s| s as i64),
            owner as i64,
            tag.map_or(-1, i64::from),
            0,
            None,
        );
        st.requests.insert(
            req,
            ReqState {
                kind: ReqKind::Recv,
                done: false,
                payload: None,
            },
        );
        st.mailboxes[owner].posted.push(PostedRecv {
            req,
            src,
            tag,
            space,
        });
        self.match_mailbox(&mut st, owner);
        self.cv.notify_all();
        Ok(req)
    }

    /// Pairs posted receives with queued messages until nothing matches.
    /// Receives are served in posting order; each takes the oldest matching
    /// message, so per-source, per-tag streams arrive in send order.
    fn match_mailbox(&self, st: &mut WorldState, owner: usize) {
        loop {
            let mb = &st.mailboxes[owner];
            let mut hit: Option<(usize, usize)> = None;
            for (pi, posted) in mb.posted.iter().enumerate() {
                let mut best: Option<(usize, u64)> = None;
                for (qi, entry) in mb.queue.iter().enumerate() {
                    if posted.matches(&entry.meta)
                        && best.map_or(true, |(_, seq)| entry.seq < seq)
                    {
                        best = Some((qi, entry.seq));
                    }
                }
                if let Some((qi, _)) = best {
                    hit = Some((pi, qi));
                    break;
                }
            }
            let Some((pi, qi)) = hit else { break };
            let posted = st.mailboxes[owner].posted.remove(pi);
            let entry = st.mailboxes[owner].queue.remove(qi).expect("entry index");
            let payload = match entry.body {
                EntryBody::Eager(p) => {
                    st.mailboxes[owner].eager_bytes -= entry.meta.bytes;
                    p
                }
                EntryBody::Rendezvous { send_req } => {
                    let sender = st
                        .requests
                        .get_mut(&send_req)
                        .expect("rendezvous sender request");
                    let p = sender.payload.take().expect("parked payload");
                    sender.done = true;
                    self.trace_line(
                        st,
                        "send_done",
                        entry.meta.src as i64,
                        entry.meta.dst as i64,
                        entry.meta.tag.into(),
                        entry.meta.bytes,
                        Some(entry.meta.protocol),
                    );
                    p
                }
            };
            st.received += 1;
            self.trace_line(
                st,
                "recv_done",
                entry.meta.src as i64,
                entry.meta.dst as i64,
                entry.meta.tag.into(),
                entry.meta.bytes,
                Some(entry.meta.protocol),
            );
            let recv = st
                .requests
                .get_mut(&posted.req)
                .expect("posted receive request");
            recv.payload = Some(payload);
            recv.done = true;
        }
    }

    /// Blocks until `req` completes, tracking time spent parked on the
    /// condition variable in `idle_ns`. Declares a deadlock when this rank
    /// becoming blocked means every live rank is blocked on a request that
    /// has not completed. Both halves of that condition matter: a rank can
    /// sit on the condition variable with its request already done and the
    /// wakeup still in flight, and that state is progress, not deadlock.
    /// When it truly holds, nothing is in flight (delivery happens
    /// synchronously under the lock), so no rank can ever be woken.
    pub(crate) fn await_request(
        &self,
        rank: usize,
        req: u64,
        site: &str,
        idle_ns: &mut u64,
    ) -> Result<Option<Payload>> {
        let mut st = self.state.lock().unwrap();
        loop {
            if st.deadlocked {
                return Err(Self::deadlock_error(&st.deadlock_sites));
            }
            match st.requests.get(&req) {
                None => return Err(Error::HandleAlreadyConsumed),
                Some(r) if r.done => {
                    let r = st.requests.remove(&req).expect("request present");
                    return Ok(match r.kind {
                        ReqKind::Send => None,
                        ReqKind::Recv => r.payload,
                    });
                }
                Some(_) => {}
            }
            st.blocked[rank] = Some((req, site.to_string()));
            st.blocked_count += 1;
            let stuck = st.blocked_count == st.alive
                && st.blocked.iter().flatten().all(|(awaited, _)| {
                    st.requests.get(awaited).is_some_and(|r| !r.done)
                });
            if stuck {
                st.deadlock_sites = st
                    .blocked
                    .iter()
                    .enumerate()
                    .filter_map(|(r, b)| b.as_ref().map(|(_, s)| format!("rank {r}: {s}")))
                    .collect();
                st.deadlocked = true;
                st.blocked[rank] = None;
                st.blocked_count -= 1;
                self.cv.notify_all();
                return Err(Self::deadlock_error(&st.deadlock_sites));
            }
            let parked = Instant::now();
            st = self.cv.wait(st).unwrap();
            *idle_ns += parked.elapsed().as_nanos() as u64;
            st.blocked[rank] = None;
            st.blocked_count -= 1;
        }
    }

    /// Non-blocking completion check. `Ok(None)` means still pending;
    /// `Ok(Some(_))` consumes the request.
    pub(crate) fn poll_request(&self, req: u64) -> Result<Option<Option<Payload>>> {
        let mut st = self.state.lock().unwrap();
        if st.deadlocked {
            return Err(Self::deadlock_error(&st.deadlock_sites));
        }
        match st.requests.get(&req) {
            None => Err(Error::HandleAlreadyConsumed),
            Some(r) if r.done => {
                let r = st.requests.remove(&req).expect("request present");
                Ok(Some(match r.kind {
                    ReqKind::Send => None,
                    ReqKind::Recv => r.payload,
                }))
            }
            Some(_) => Ok(None),
        }
    }

    /// Marks a rank's program as returned. Blocked peers re-evaluate: if
    /// everyone left alive is blocked, the world is deadlocked.
    pub(crate) fn finish_rank(&self, _rank: usize) {
        let mut st = self.state.lock().unwrap();
        st.alive -= 1;
        self.cv.notify_all();
    }

    /// Final message accounting, taken after every rank has returned.
    /// Whatever still sits in a mailbox was sent but never received.
    pub(crate) fn stats(&self) -> WorldStats {
        let st = self.state.lock().unwrap();
        let drained: u64 = st.mailboxes.iter().map(|m| m.queue.len() as u64).sum();
        WorldStats {
            sent: st.sent,
            received: st.received,
            drained,
        }
    }

    pub(crate) fn take_trace(&self) -> Vec<String> {
        let mut st = self.state.lock().unwrap();
        std::mem::take(&mut st.trace)
    }
}
