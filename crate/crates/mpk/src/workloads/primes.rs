//! Prime-counting benchmark: trial division over all odd candidates up to
//! a limit.
//!
//! This is the communication-light half of the benchmark pair. Ranks share
//! the candidates in a cyclic pattern, grind through them independently,
//! and meet exactly twice at the end to combine a count and a maximum. The
//! deliberately naive primality test is the point: its cost grows with the
//! candidate, which gives the workload enough weight to measure while
//! keeping every rank's slice statistically similar.

use crate::collectives::{reduce, ReduceOp};
use crate::error::{Error, Result};
use crate::runtime::{Communicator, Payload, Rank, RankId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimesConfig {
    /// Largest candidate to test, inclusive.
    pub limit: u64,
}

impl Default for PrimesConfig {
    fn default() -> Self {
        // Small enough to finish a full process sweep in seconds, large
        // enough that the work dwarfs the two closing reductions.
        PrimesConfig { limit: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimesResult {
    pub prime_count: u64,
    pub largest_prime: u64,
}

/// Trial-division primality check shared by the serial and parallel
/// counters. Everything at or below 10 is rejected outright: the counters
/// credit 2, 3, 5, and 7 up front and only feed in odd candidates from 11
/// on. Candidates are probed by the odd numbers from 3 through their
/// integer square root, so a composite with no odd divisor in that range
/// (an even number such as 16, say) would slip through; the counters never
/// produce one.
pub fn naive_is_prime(n: u64) -> bool {
    if n <= 10 {
        return false;
    }
    let root = isqrt(n);
    let mut d = 3;
    while d <= root {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Largest r with r * r <= n. Starts from the float estimate and nudges
/// it, which fixes the off-by-one the f64 rounding can introduce near
/// perfect squares.
fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r > 0 && r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn check_limit(limit: u64) -> Result<()> {
    // The counters assume the four single-digit primes and a scan that
    // starts at 11; a smaller limit would need a different bookkeeping
    // scheme, so it is rejected instead.
    if limit < 11 {
        return Err(Error::LimitTooSmall { limit });
    }
    Ok(())
}

/// Reference counter on a single rank.
pub fn primes_serial(config: &PrimesConfig) -> Result<PrimesResult> {
    check_limit(config.limit)?;
    let mut count: u64 = 4; // 2, 3, 5, 7
    let mut largest: u64 = 7;
    let mut n = 11;
    while n <= config.limit {
        if naive_is_prime(n) {
            count += 1;
            largest = n;
        }
        n += 2;
    }
    Ok(PrimesResult {
        prime_count: count,
        largest_prime: largest,
    })
}

/// Cyclically partitioned counter. Rank r tests the odd candidates
/// starting at 2r + 1 with stride 2 * world_size, so consecutive odds land
/// on consecutive ranks and every rank's share of the expensive large
/// candidates is about equal. Two reductions at the master combine the
/// counts (sum) and the largest primes seen (max).
///
/// Returns `Some(result)` at the master, `None` elsewhere.
pub fn primes_parallel(
    rank: &mut Rank,
    comm: &Communicator,
    config: &PrimesConfig,
) -> Result<Option<PrimesResult>> {
    check_limit(config.limit)?;
    let stride = comm.world_size() as u64 * 2;
    let mut n = rank.id().value() as u64 * 2 + 1;
    let mut local_count: i64 = 0;
    let mut local_max: i64 = 0;
    while n <= config.limit {
        if naive_is_prime(n) {
            local_count += 1;
            local_max = n as i64;
        }
        n += stride;
    }

    let count_sum = reduce(
        rank,
        comm,
        RankId::MASTER,
        Payload::I64(vec![local_count]),
        ReduceOp::Sum,
    )?;
    let max_seen = reduce(
        rank,
        comm,
        RankId::MASTER,
        Payload::I64(vec![local_max]),
        ReduceOp::Max,
    )?;

    match (count_sum, max_seen) {
        (Some(counts), Some(maxes)) => {
            let scanned = counts.into_i64("prime count")?[0];
            let largest = maxes.into_i64("largest prime")?[0];
            Ok(Some(PrimesResult {
                // The scan starts at 11; put back the four primes below it.
                prime_count: (scanned + 4) as u64,
                largest_prime: largest as u64,
            }))
        }
        _ => Ok(None),
    }
}
