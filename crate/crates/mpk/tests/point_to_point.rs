//! End-to-end behavior of the point-to-point layer: blocking and
//! nonblocking transfers, protocol selection, matching order, failure
//! reporting, and the trace and accounting a world leaves behind.

use std::time::Duration;

use mpk::runtime::{HandleState, TestOutcome, WorldConfig};
use mpk::{spawn_world, Error, Payload, RankId, Tag};

const TAG: Tag = 7;

/// One parsed trace line.
#[derive(Debug, Clone)]
struct TraceRecord {
    ts: u128,
    event: String,
    src: i64,
    dst: i64,
    tag: i64,
    bytes: u64,
    protocol: String,
}

fn parse_trace(lines: &[String]) -> Vec<TraceRecord> {
    lines
        .iter()
        .map(|line| {
            let f: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(f.len(), 7, "trace line {line:?}");
            TraceRecord {
                ts: f[0].parse().unwrap(),
                event: f[1].to_string(),
                src: f[2].parse().unwrap(),
                dst: f[3].parse().unwrap(),
                tag: f[4].parse().unwrap(),
                bytes: f[5].parse().unwrap(),
                protocol: f[6].to_string(),
            }
        })
        .collect()
}

fn firs<'a>(
    records: &'a [TraceRecord],
    event: &str,
    pred: impl Fn(&TraceRecord) -> bool + 'a,
) -> &'a TraceRecord {
    records
        .iter()
        .find(|r| r.event == event && pred(r))
        .unwrap_or_else(|| panic!("no {event} record matching predicate"))
}

#[test]
fn ping_pong_roundtrip() {
    let report = spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            rank.send(&comm, RankId::new(1), TAG, vec![1.0, 2.0, 3.0])?;
            let back = rank.recv(&comm, Some(RankId::new(1)), Some(TAG))?;
            Ok(Some(back.into_f64("pong")?))
        } else {
            let ping = rank.recv(&comm, Some(RankId::new(0)), Some(TAG))?.into_f64("ping")?;
            let doubled: Vec<f64> = ping.iter().map(|x| x * 2.0).collect();
            rank.send(&comm, RankId::new(0), TAG, doubled)?;
            Ok(None)
        }
    })
    .unwrap();
    assert_eq!(report.exits[0], Some(vec![2.0, 4.0, 6.0]));
    assert_eq!(report.stats.sent, 2);
    assert_eq!(report.stats.received, 2);
    assert_eq!(report.stats.drained, 0);
}

#[test]
fn messages_from_one_sender_arrive_in_send_order() {
    let report = spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            for v in 0..10i64 {
                rank.send(&comm, RankId::new(1), TAG, vec![v])?;
            }
            Ok(vec![])
        } else {
            let mut got = Vec::new();
            for _ in 0..10 {
                let m = rank.recv(&comm, Some(RankId::new(0)), Some(TAG))?;
                got.push(m.into_i64("ordered")?[0]);
            }
            Ok(got)
        }
    })
    .unwrap();
    assert_eq!(report.exits[1], (0..10).collect::<Vec<i64>>());
}

/// Rank 2 sends to rank 0 first, then releases rank 1 to send. The
/// wildcard receives at rank 0 must surface the messages in the order
/// they were sent, whichever protocol carried them.
fn wildcard_order_world(eager_threshold: u64) {
    let config = WorldConfig::new(3).eager_threshold(eager_threshold);
    let report = spawn_world(config, |rank| {
        let comm = rank.world();
        match rank.id().value() {
            0 => {
                let first = rank.recv(&comm, None, Some(TAG))?.into_i64("first")?[0];
                let second = rank.recv(&comm, None, Some(TAG))?.into_i64("second")?[0];
                Ok(vec![first, second])
            }
            1 => {
                // Wait for the go signal before sending.
                rank.recv(&comm, Some(RankId::new(2)), Some(99))?;
                rank.send(&comm, RankId::new(0), TAG, vec![111i64])?;
                Ok(vec![])
            }
            _ => {
                rank.send(&comm, RankId::new(0), TAG, vec![222i64])?;
                rank.send(&comm, RankId::new(1), 99, vec![0i64])?;
                Ok(vec![])
            }
        }
    })
    .unwrap();
    assert_eq!(report.exits[0], vec![222, 111]);
}

#[test]
fn wildcard_receive_takes_the_earliest_sent_message() {
    wildcard_order_world(64 * 1024);
}

#[test]
fn wildcard_order_is_identical_under_pure_rendezvous() {
    wildcard_order_world(0);
}

#[test]
fn tag_filter_picks_across_older_messages() {
    // A tag-7 receive must skip a tag-3 message that arrived earlier;
    // order holds per matching stream, not per mailbox.
    let report = spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            let seventy = rank.recv(&comm, None, Some(7))?.into_i64("tag 7")?[0];
            let thirty = rank.recv(&comm, None, Some(3))?.into_i64("tag 3")?[0];
            Ok(vec![seventy, thirty])
        } else {
            rank.send(&comm, RankId::new(0), 3, vec![30i64])?;
            rank.send(&comm, RankId::new(0), 7, vec![70i64])?;
            Ok(vec![])
        }
    })
    .unwrap();
    assert_eq!(report.exits[0], vec![70, 30]);
}

#[test]
fn a_rank_can_send_to_itself() {
    let report = spawn_world(WorldConfig::new(1), |rank| {
        let comm = rank.world();
        let mut pending = rank.irecv(&comm, Some(RankId::new(0)), Some(TAG))?;
        rank.send(&comm, RankId::new(0), TAG, vec![42i64])?;
        let got = rank.wait(&mut pending)?.expect("receive carries payload");
        Ok(got.into_i64("self message")?[0])
    })
    .unwrap();
    assert_eq!(report.exits, vec![42]);
}

#[test]
fn rendezvous_send_completes_only_after_the_receive_is_posted() {
    let config = WorldConfig::new(2).eager_threshold(0).trace(true);
    let report = spawn_world(config, |rank| {
        let comm = rank.world();
        if rank.is_master() {
            rank.send(&comm, RankId::new(1), TAG, vec![5.0])?;
        } else {
            std::thread::sleep(Duration::from_millis(50));
            rank.recv(&comm, Some(RankId::new(0)), Some(TAG))?;
        }
        Ok(())
    })
    .unwrap();
    let records = parse_trace(&report.trace);
    let posted = firs(&records, "post_send", |r| r.src == 0 && r.dst == 1);
    let recv_posted = firs(&records, "post_recv", |r| r.dst == 1);
    let send_done = firs(&records, "send_done", |r| r.src == 0 && r.dst == 1);
    assert_eq!(posted.protocol, "rendezvous");
    assert!(
        posted.ts < recv_posted.ts,
        "send was posted while the receiver still slept"
    );
    assert!(
        send_done.ts >= recv_posted.ts,
        "rendezvous send finished before any receive existed"
    );
}

#[test]
fn eager_send_completes_before_any_receive_exists() {
    let config = WorldConfig::new(2).trace(true);
    let report = spawn_world(config, |rank| {
        let comm = rank.world();
        if rank.is_master() {
            rank.send(&comm, RankId::new(1), TAG, vec![5.0])?;
        } else {
            std::thread::sleep(Duration::from_millis(50));
            rank.recv(&comm, Some(RankId::new(0)), Some(TAG))?;
        }
        Ok(())
    })
    .unwrap();
    let records = parse_trace(&report.trace);
    let send_done = firs(&records, "send_done", |r| r.src == 0);
    let recv_posted = firs(&records, "post_recv", |r| r.dst == 1);
    assert_eq!(send_done.protocol, "eager");
    assert!(
        send_done.ts < recv_posted.ts,
        "eager send should finish while the receiver sleeps"
    );
}

#[test]
fn trace_timestamps_never_run_backwards() {
    let config = WorldConfig::new(3).trace(true);
    let report = spawn_world(config, |rank| {
        let comm = rank.world();
        let next = RankId::new((rank.id().value() + 1) % rank.world_size());
        let mut pending = rank.irecv(&comm, None, Some(TAG))?;
        rank.send(&comm, next, TAG, vec![rank.id().value() as i64])?;
        rank.wait(&mut pending)?;
        Ok(())
    })
    .unwrap();
    let records = parse_trace(&report.trace);
    assert!(!records.is_empty());
    for pair in records.windows(2) {
        assert!(pair[0].ts <= pair[1].ts, "trace out of order");
    }
}

#[test]
fn tracing_off_leaves_no_trace() {
    let report = spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            rank.send(&comm, RankId::new(1), TAG, vec![1i64])?;
        } else {
            rank.recv(&comm, None, None)?;
        }
        Ok(())
    })
    .unwrap();
    assert!(report.trace.is_empty());
}

#[test]
fn wildcard_filters_trace_as_minus_one() {
    let config = WorldConfig::new(2).trace(true);
    let report = spawn_world(config, |rank| {
        let comm = rank.world();
        if rank.is_master() {
            rank.recv(&comm, None, None)?;
        } else {
            rank.send(&comm, RankId::new(0), TAG, vec![1i64])?;
        }
        Ok(())
    })
    .unwrap();
    let records = parse_trace(&report.trace);
    let posted = firs(&records, "post_recv", |r| r.dst == 0);
    assert_eq!((posted.src, posted.tag), (-1, -1));
}

#[test]
fn isend_hands_back_a_pending_handle() {
    let config = WorldConfig::new(2).eager_threshold(0);
    spawn_world(config, |rank| {
        let comm = rank.world();
        if rank.is_master() {
            let mut h = rank.isend(&comm, RankId::new(1), TAG, vec![9.0])?;
            assert_eq!(h.state(), HandleState::Pending);
            // The receiver sleeps, so the rendezvous cannot have finished.
            assert!(matches!(rank.test(&mut h)?, TestOutcome::StillPending));
            assert_eq!(rank.wait(&mut h)?, None);
            assert_eq!(h.state(), HandleState::Consumed);
        } else {
            std::thread::sleep(Duration::from_millis(40));
            rank.recv(&comm, Some(RankId::new(0)), Some(TAG))?;
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn wait_consumes_the_handle_exactly_once() {
    spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            let mut h = rank.irecv(&comm, Some(RankId::new(1)), Some(TAG))?;
            let payload = rank.wait(&mut h)?.expect("receive payload");
            assert_eq!(payload.into_i64("value")?, vec![3]);
            assert!(matches!(
                rank.wait(&mut h),
                Err(Error::HandleAlreadyConsumed)
            ));
            assert!(matches!(
                rank.test(&mut h),
                Err(Error::HandleAlreadyConsumed)
            ));
        } else {
            rank.send(&comm, RankId::new(0), TAG, vec![3i64])?;
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn test_polls_through_pending_to_complete() {
    spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            let mut h = rank.irecv(&comm, Some(RankId::new(1)), Some(TAG))?;
            let payload = loop {
                match rank.test(&mut h)? {
                    TestOutcome::StillPending => std::thread::sleep(Duration::from_millis(1)),
                    TestOutcome::Complete(p) => break p,
                }
            };
            assert_eq!(h.state(), HandleState::Consumed);
            assert_eq!(payload.expect("receive payload").into_i64("value")?, vec![8]);
        } else {
            std::thread::sleep(Duration::from_millis(20));
            rank.send(&comm, RankId::new(0), TAG, vec![8i64])?;
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn blocking_send_matches_isend_plus_wait() {
    let run = |nonblocking: bool| {
        spawn_world(WorldConfig::new(2), move |rank| {
            let comm = rank.world();
            if rank.is_master() {
                if nonblocking {
                    let mut h = rank.isend(&comm, RankId::new(1), TAG, vec![1.5, 2.5])?;
                    assert_eq!(rank.wait(&mut h)?, None);
                } else {
                    rank.send(&comm, RankId::new(1), TAG, vec![1.5, 2.5])?;
                }
                Ok(None)
            } else {
                Ok(Some(rank.recv(&comm, None, None)?.into_f64("either way")?))
            }
        })
        .unwrap()
    };
    let blocking = run(false);
    let nonblocking = run(true);
    assert_eq!(blocking.exits[1], nonblocking.exits[1]);
    assert_eq!(blocking.exits[1], Some(vec![1.5, 2.5]));
    assert_eq!(blocking.stats, nonblocking.stats);
}

/// The same exchange must produce the same values at every threshold;
/// protocol choice is invisible to the program.
#[test]
fn payloads_are_identical_across_protocol_regimes() {
    let exchange = |threshold: u64| {
        let config = WorldConfig::new(2).eager_threshold(threshold);
        let report = spawn_world(config, |rank| {
            let comm = rank.world();
            if rank.is_master() {
                rank.send(&comm, RankId::new(1), 1, vec![0.25f64])?;
                rank.send(&comm, RankId::new(1), 2, vec![7i64; 1000])?;
                rank.send(&comm, RankId::new(1), 3, Payload::Bytes(vec![]))?;
                Ok(None)
            } else {
                let small = rank.recv(&comm, None, Some(1))?.into_f64("small")?;
                let large = rank.recv(&comm, None, Some(2))?.into_i64("large")?;
                let empty = rank.recv(&comm, None, Some(3))?;
                assert_eq!(empty.len(), 0);
                Ok(Some((small, large)))
            }
        })
        .unwrap();
        (report.exits[1].clone(), report.stats)
    };
    let everything_rendezvous = exchange(0);
    let mixed = exchange(4 * 1024);
    let everything_eager = exchange(u64::MAX);
    assert_eq!(everything_rendezvous, mixed);
    assert_eq!(mixed, everything_eager);
    assert_eq!(mixed.1.sent, 3);
    assert_eq!(mixed.1.received, 3);
}

#[test]
fn eager_overflow_degrades_to_rendezvous_and_keeps_order() {
    let config = WorldConfig::new(2)
        .eager_threshold(512)
        .mailbox_capacity(1024)
        .trace(true);
    let report = spawn_world(config, |rank| {
        let comm = rank.world();
        if rank.is_master() {
            // 64 f64s = 512 bytes each: two fit the mailbox budget, the
            // third is forced to rendezvous even though its size allows
            // eager.
            let mut h1 = rank.isend(&comm, RankId::new(1), TAG, vec![1.0f64; 64])?;
            let mut h2 = rank.isend(&comm, RankId::new(1), TAG, vec![2.0f64; 64])?;
            let mut h3 = rank.isend(&comm, RankId::new(1), TAG, vec![3.0f64; 64])?;
            assert!(matches!(rank.test(&mut h1)?, TestOutcome::Complete(None)));
            assert!(matches!(rank.test(&mut h2)?, TestOutcome::Complete(None)));
            assert!(matches!(rank.test(&mut h3)?, TestOutcome::StillPending));
            rank.wait(&mut h3)?;
            Ok(vec![])
        } else {
            std::thread::sleep(Duration::from_millis(30));
            let mut leads = Vec::new();
            for _ in 0..3 {
                let m = rank.recv(&comm, Some(RankId::new(0)), Some(TAG))?;
                leads.push(m.into_f64("block")?[0]);
            }
            Ok(leads)
        }
    })
    .unwrap();
    assert_eq!(report.exits[1], vec![1.0, 2.0, 3.0]);
    let records = parse_trace(&report.trace);
    let sends: Vec<(&str, u64)> = records
        .iter()
        .filter(|r| r.event == "post_send")
        .map(|r| (r.protocol.as_str(), r.bytes))
        .collect();
    assert_eq!(
        sends,
        vec![("eager", 512), ("eager", 512), ("rendezvous", 512)]
    );
}

#[test]
fn all_ranks_receiving_is_reported_as_deadlock_with_sites() {
    let err = spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        let from = RankId::new(1 - rank.id().value());
        rank.recv(&comm, Some(from), Some(TAG))?;
        Ok(())
    })
    .unwrap_err();
    assert!(err.is_deadlock(), "got {err}");
    match err {
        Error::DeadlockDetected { sites } => {
            assert_eq!(sites.len(), 2, "sites: {sites:?}");
            assert!(sites.iter().all(|s| s.contains("recv")), "sites: {sites:?}");
            assert!(sites.iter().any(|s| s.starts_with("rank 0:")));
            assert!(sites.iter().any(|s| s.starts_with("rank 1:")));
        }
        other => panic!("expected deadlock, got {other}"),
    }
}

#[test]
fn self_rendezvous_send_with_no_receiver_deadlocks() {
    let config = WorldConfig::new(1).eager_threshold(0);
    let err = spawn_world(config, |rank| {
        let comm = rank.world();
        rank.send(&comm, RankId::new(0), TAG, vec![1i64])?;
        Ok(())
    })
    .unwrap_err();
    assert!(err.is_deadlock(), "got {err}");
}

#[test]
fn waiting_on_a_message_from_a_finished_rank_deadlocks() {
    let err = spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            let mut h = rank.irecv(&comm, Some(RankId::new(1)), Some(TAG))?;
            rank.wait(&mut h)?;
        }
        // Rank 1 exits immediately; the master's wait can never finish.
        Ok(())
    })
    .unwrap_err();
    assert!(err.is_deadlock(), "got {err}");
}

/// Regression test for a false deadlock: rank 0's receive is matched and
/// its wakeup is still in flight while rank 2 exits and rank 1 parks on a
/// rendezvous. The world must recognize the completed-but-unconsumed
/// request as progress and not report a deadlock.
#[test]
fn a_completed_request_awaiting_wakeup_is_not_a_deadlock() {
    for _ in 0..50 {
        let config = WorldConfig::new(3).eager_threshold(0);
        let report = spawn_world(config, |rank| {
            let comm = rank.world();
            match rank.id().value() {
                0 => {
                    let a = rank.recv(&comm, Some(RankId::new(2)), Some(TAG))?;
                    let b = rank.recv(&comm, Some(RankId::new(1)), Some(TAG))?;
                    Ok(vec![a.into_i64("a")?[0], b.into_i64("b")?[0]])
                }
                1 => {
                    rank.send(&comm, RankId::new(0), TAG, vec![111i64])?;
                    Ok(vec![])
                }
                _ => {
                    rank.send(&comm, RankId::new(0), TAG, vec![222i64])?;
                    Ok(vec![])
                }
            }
        })
        .unwrap();
        assert_eq!(report.exits[0], vec![222, 111]);
    }
}

#[test]
fn one_failing_rank_is_reported_with_its_rank_number() {
    let err = spawn_world(WorldConfig::new(3), |rank| {
        if rank.id().value() == 1 {
            Err(Error::InvalidConfig("injected failure".to_string()))
        } else {
            Ok(())
        }
    })
    .unwrap_err();
    match err {
        Error::RankFailed { rank, source } => {
            assert_eq!(rank, 1);
            assert!(matches!(*source, Error::InvalidConfig(_)));
        }
        other => panic!("expected RankFailed, got {other}"),
    }
}

#[test]
fn a_panicking_rank_outranks_a_failing_one() {
    let err = spawn_world(WorldConfig::new(2), |rank| {
        if rank.is_master() {
            panic!("blown fuse");
        }
        Err::<(), _>(Error::InvalidConfig("also broken".to_string()))
    })
    .unwrap_err();
    match err {
        Error::RankPanicked { rank, message } => {
            assert_eq!(rank, 0);
            assert!(message.contains("blown fuse"), "message: {message}");
        }
        other => panic!("expected RankPanicked, got {other}"),
    }
}

#[test]
fn sending_to_a_rank_outside_the_world_fails_fast() {
    spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        let err = rank
            .send(&comm, RankId::new(5), TAG, vec![1i64])
            .unwrap_err();
        assert!(
            matches!(err, Error::InvalidRank { rank: 5, world_size: 2 }),
            "got {err}"
        );
        let err = rank
            .recv(&comm, Some(RankId::new(9)), None)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidRank { rank: 9, .. }), "got {err}");
        Ok(())
    })
    .unwrap();
}

#[test]
fn world_must_have_at_least_one_rank() {
    let err = spawn_world(WorldConfig::new(0), |_rank| Ok(())).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)), "got {err}");
}

#[test]
fn exit_values_come_back_in_rank_order() {
    let report = spawn_world(WorldConfig::new(4), |rank| {
        Ok(rank.id().value() * rank.id().value())
    })
    .unwrap();
    assert_eq!(report.exits, vec![0, 1, 4, 9]);
    assert_eq!(report.timings.len(), 4);
    assert!(report.elapsed_seconds > 0.0);
}

#[test]
fn unreceived_messages_are_counted_as_drained() {
    let report = spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            for v in 0..3i64 {
                rank.send(&comm, RankId::new(1), TAG, vec![v])?;
            }
        } else {
            rank.recv(&comm, Some(RankId::new(0)), Some(TAG))?;
        }
        Ok(())
    })
    .unwrap();
    assert_eq!(report.stats.sent, 3);
    assert_eq!(report.stats.received, 1);
    assert_eq!(report.stats.drained, 2);
    assert!(report.stats.conserved());
}

#[test]
fn world_clock_is_shared_and_advances() {
    let report = spawn_world(WorldConfig::new(2), |rank| {
        let t1 = rank.wtime();
        assert!(t1 >= 0.0);
        std::thread::sleep(Duration::from_millis(10));
        let t2 = rank.wtime();
        assert!(t2 - t1 >= 0.009, "clock moved only {} s", t2 - t1);
        Ok(t2)
    })
    .unwrap();
    // Both ranks read the same epoch-based clock, so their readings land
    // within the world's overall elapsed window.
    for t in report.exits {
        assert!(t <= report.elapsed_seconds + 0.05);
    }
}

#[test]
fn blocked_time_is_attributed_to_idle_not_compute() {
    let report = spawn_world(WorldConfig::new(2), |rank| {
        let comm = rank.world();
        if rank.is_master() {
            // Blocks ~40 ms waiting for the worker to wake up and send.
            rank.recv(&comm, Some(RankId::new(1)), Some(TAG))?;
        } else {
            std::thread::sleep(Duration::from_millis(40));
            rank.send(&comm, RankId::new(1 - rank.id().value()), TAG, vec![1i64])?;
        }
        Ok(())
    })
    .unwrap();
    let master = &report.timings[0];
    let worker = &report.timings[1];
    assert!(
        master.t_idle >= 0.030,
        "master idle {} s, expected most of the wait",
        master.t_idle
    );
    // The worker slept outside any communication call: that is compute
    // time from the runtime's point of view, not idling.
    assert!(worker.t_comp >= 0.030, "worker compute {} s", worker.t_comp);
    assert!(worker.t_idle < 0.030, "worker idle {} s", worker.t_idle);
    for t in &report.timings {
        let sum = t.t_comp + t.t_comm + t.t_idle;
        assert!(sum <= report.elapsed_seconds + 0.05);
    }
}
