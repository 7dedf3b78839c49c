//! Vibrating-string benchmark: a 1-D wave equation advanced by finite
//! differences.
//!
//! The string is discretized into amplitude points with both ends pinned
//! to zero. Each time step rewrites every interior point from its two
//! neighbors, itself, and its own previous value, so the parallel version
//! must exchange one boundary amplitude with each neighbor per step. That
//! makes this the communication-heavy half of the benchmark pair: the
//! per-point arithmetic is only a handful of operations.

use std::f64::consts::PI;

use crate::collectives::{bcast, gather};
use crate::error::{Error, Result};
use crate::runtime::{Communicator, Payload, Rank, RankId, Tag};

const TAG_HALO: Tag = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveConfig {
    pub total_points: u64,
    pub time_steps: u64,
    /// Dimensionless coefficient of the spatial term in the update rule.
    pub c: f64,
}

impl WaveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_points < 2 {
            return Err(Error::InvalidConfig(format!(
                "a string needs at least 2 amplitude points, got {}",
                self.total_points
            )));
        }
        if self.time_steps < 1 {
            return Err(Error::InvalidConfig(
                "time_steps must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

impl Default for WaveConfig {
    /// Desk-scale run: long enough for the communication pattern to show
    /// up in measurements, short enough to sweep many process counts.
    fn default() -> Self {
        WaveConfig {
            total_points: 800,
            time_steps: 2000,
            c: 0.1,
        }
    }
}

/// Next amplitude of one interior point: `2u - u_prev + c (u_left - 2u +
/// u_right)`. Both the serial and the decomposed solver call this exact
/// function, so their per-point arithmetic is identical to the last bit.
#[inline]
pub fn wave_step_point(u_left: f64, u_here: f64, u_right: f64, u_prev: f64, c: f64) -> f64 {
    2.0 * u_here - u_prev + c * (u_left - 2.0 * u_here + u_right)
}

/// Starting amplitude of global point `i`: one sine arch across the
/// string, with the pinned endpoints exactly zero.
#[inline]
fn initial_amplitude(i: usize, total_points: usize) -> f64 {
    if i == 0 || i == total_points - 1 {
        0.0
    } else {
        (2.0 * PI * i as f64 / (total_points as f64 - 1.0)).sin()
    }
}

/// Reference solver on a single rank. Returns the final amplitudes.
pub fn wave_serial(config: &WaveConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = config.total_points as usize;
    let mut prev: Vec<f64> = (0..n).map(|i| initial_amplitude(i, n)).collect();
    let mut curr = prev.clone();
    let mut next = vec![0.0; n];
    for _ in 0..config.time_steps {
        next[0] = 0.0;
        next[n - 1] = 0.0;
        for i in 1..n - 1 {
            next[i] = wave_step_point(curr[i - 1], curr[i], curr[i + 1], prev[i], config.c);
        }
        std::mem::swap(&mut prev, &mut curr);
        std::mem::swap(&mut curr, &mut next);
    }
    Ok(curr)
}

/// Block-decomposed solver. Every rank owns `total_points / world_size`
/// consecutive points; the master broadcasts the run parameters, each step
/// exchanges boundary amplitudes with the neighbors, and the final blocks
/// are gathered at the master in rank order.
///
/// Returns `Some(final amplitudes)` at the master, `None` elsewhere. The
/// result is bitwise identical to [`wave_serial`] for any world size that
/// divides `total_points`.
pub fn wave_parallel(
    rank: &mut Rank,
    comm: &Communicator,
    config: &WaveConfig,
) -> Result<Option<Vec<f64>>> {
    config.validate()?;
    let p = comm.world_size();
    if config.total_points % p as u64 != 0 {
        return Err(Error::IndivisibleDecomposition {
            count: config.total_points,
            world_size: p,
        });
    }

    // The master owns the inputs and shares them; workers run off the
    // broadcast values.
    let params = if rank.is_master() {
        Some(Payload::F64(vec![
            config.c,
            config.total_points as f64,
            config.time_steps as f64,
        ]))
    } else {
        None
    };
    let params = bcast(rank, comm, RankId::MASTER, params)?.into_f64("wave parameters")?;
    let (c, n, steps) = (params[0], params[1] as usize, params[2] as u64);

    let me = rank.id().value();
    let k = n / p;
    let lo = me * k;
    // Local block in slots 1..=k, halo cells at 0 and k+1.
    let mut prev = vec![0.0; k + 2];
    let mut curr = vec![0.0; k + 2];
    let mut next = vec![0.0; k + 2];
    for li in 1..=k {
        curr[li] = initial_amplitude(lo + li - 1, n);
    }
    prev.copy_from_slice(&curr);

    let left = if me > 0 { Some(me - 1) } else { None };
    let right = if me + 1 < p { Some(me + 1) } else { None };
    for _ in 0..steps {
        exchange_halos(rank, comm, left, right, &mut curr, k)?;
        for li in 1..=k {
            let gi = lo + li - 1;
            next[li] = if gi == 0 || gi == n - 1 {
                0.0
            } else {
                wave_step_point(curr[li - 1], curr[li], curr[li + 1], prev[li], c)
            };
        }
        std::mem::swap(&mut prev, &mut curr);
        std::mem::swap(&mut curr, &mut next);
    }

    match gather(rank, comm, RankId::MASTER, Payload::F64(curr[1..=k].to_vec()))? {
        Some(all) => Ok(Some(all.into_f64("wave amplitudes")?)),
        None => Ok(None),
    }
}

/// Sends this rank's boundary amplitudes and fills the halo cells with the
/// neighbors' values. Even ranks send first and odd ranks receive first,
/// so the pairing is deadlock-free even when every message needs a
/// rendezvous handshake.
fn exchange_halos(
    rank: &mut Rank,
    comm: &Communicator,
    left: Option<usize>,
    right: Option<usize>,
    curr: &mut [f64],
    k: usize,
) -> Result<()> {
    let send = |rank: &mut Rank, to: usize, value: f64| {
        rank.send(comm, RankId::new(to), TAG_HALO, vec![value])
    };
    let recv = |rank: &mut Rank, from: usize| -> Result<f64> {
        let halo = rank
            .recv(comm, Some(RankId::new(from)), Some(TAG_HALO))?
            .into_f64("halo amplitude")?;
        Ok(halo[0])
    };
    if rank.id().value() % 2 == 0 {
        if let Some(r) = right {
            send(rank, r, curr[k])?;
            curr[k + 1] = recv(rank, r)?;
        }
        if let Some(l) = left {
            send(rank, l, curr[1])?;
            curr[0] = recv(rank, l)?;
        }
    } else {
        if let Some(l) = left {
            curr[0] = recv(rank, l)?;
            send(rank, l, curr[1])?;
        }
        if let Some(r) = right {
            curr[k + 1] = recv(rank, r)?;
            send(rank, r, curr[k])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_point_known_value() {
        // A unit spike with flat history relaxes by 2c.
        assert_eq!(wave_step_point(0.0, 1.0, 0.0, 1.0, 0.1), 0.8);
    }

    #[test]
    fn step_point_with_zero_coefficient_extrapolates_linearly() {
        // c = 0 leaves pure second-order extrapolation: 2u - u_prev.
        assert_eq!(wave_step_point(5.0, 3.0, -2.0, 1.0, 0.0), 5.0);
    }

    #[test]
    fn initial_shape_is_a_sine_arch_with_pinned_ends() {
        let n = 9;
        assert_eq!(initial_amplitude(0, n), 0.0);
        assert_eq!(initial_amplitude(n - 1, n), 0.0);
        // Quarter of the way along the string the arch peaks.
        assert!((initial_amplitude(2, n) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serial_matches_a_straight_loop_oracle() {
        // Independent re-derivation: advance two full copies of the state
        // with explicit indexing and no buffer rotation.
        fn oracle(n: usize, steps: u64, c: f64) -> Vec<f64> {
            let mut prev: Vec<f64> = (0..n).map(|i| initial_amplitude(i, n)).collect();
            let mut curr = prev.clone();
            for _ in 0..steps {
                let mut next = vec![0.0; n];
                for i in 1..n - 1 {
                    next[i] = 2.0 * curr[i] - prev[i] + c * (curr[i - 1] - 2.0 * curr[i] + curr[i + 1]);
                }
                prev = curr;
                curr = next;
            }
            curr
        }
        let cfg = WaveConfig {
            total_points: 8,
            time_steps: 3,
            c: 0.1,
        };
        let got = wave_serial(&cfg).unwrap();
        let want = oracle(8, 3, 0.1);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.to_bits(), w.to_bits());
        }
    }

    #[test]
    fn zero_coefficient_preserves_the_initial_shape() {
        // With c = 0 and u(i, -1) = u(i, 0), each step computes
        // 2u - u = u: the string never moves.
        let cfg = WaveConfig {
            total_points: 16,
            time_steps: 10,
            c: 0.0,
        };
        let out = wave_serial(&cfg).unwrap();
        for (i, v) in out.iter().enumerate() {
            assert_eq!(v.to_bits(), initial_amplitude(i, 16).to_bits());
        }
    }

    #[test]
    fn endpoints_stay_pinned_after_any_number_of_steps() {
        for steps in 1..=5 {
            let cfg = WaveConfig {
                total_points: 16,
                time_steps: steps,
                c: 0.3,
            };
            let out = wave_serial(&cfg).unwrap();
            assert_eq!(out[0], 0.0);
            assert_eq!(out[15], 0.0);
        }
    }

    #[test]
    fn degenerate_two_point_string_is_all_boundary() {
        let cfg = WaveConfig {
            total_points: 2,
            time_steps: 1,
            c: 0.1,
        };
        assert_eq!(wave_serial(&cfg).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation_rejects_degenerate_runs() {
        let too_short = WaveConfig {
            total_points: 1,
            time_steps: 1,
            c: 0.1,
        };
        assert!(matches!(
            wave_serial(&too_short),
            Err(Error::InvalidConfig(_))
        ));
        let no_steps = WaveConfig {
            total_points: 8,
            time_steps: 0,
            c: 0.1,
        };
        assert!(matches!(wave_serial(&no_steps), Err(Error::InvalidConfig(_))));
    }
}
