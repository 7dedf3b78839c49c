//! Benchmark workloads with paired serial and parallel implementations.
//!
//! Both workloads exist in two forms that produce identical answers: a
//! plain single-threaded routine, and a rank program for [`spawn_world`].
//! The pair is what the measurement tooling needs; the serial form gives
//! the baseline and the parallel form gives the per-process-count curve.

pub mod primes;
pub mod wave;

pub use primes::{naive_is_prime, primes_parallel, primes_serial, PrimesConfig, PrimesResult};
pub use wave::{wave_parallel, wave_serial, wave_step_point, WaveConfig};

use std::fmt;

use crate::error::{Error, Result};
use crate::runtime::{spawn_world, WorldConfig, WorldReport};

/// A workload selection with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkloadSpec {
    Wave(WaveConfig),
    Primes(PrimesConfig),
}

/// What a workload computes.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadOutput {
    /// Final amplitudes of every point on the string.
    Wave(Vec<f64>),
    Primes(PrimesResult),
}

impl WorkloadSpec {
    pub fn name(&self) -> &'static str {
        match self {
            WorkloadSpec::Wave(_) => "wave",
            WorkloadSpec::Primes(_) => "primes",
        }
    }

    /// Whether the workload can run at this world size at all. The wave
    /// solver needs an even block split; primes run at any size.
    pub fn feasible_at(&self, procs: u32) -> bool {
        match self {
            WorkloadSpec::Wave(cfg) => procs >= 1 && cfg.total_points % procs as u64 == 0,
            WorkloadSpec::Primes(_) => procs >= 1,
        }
    }

    pub fn run_serial(&self) -> Result<WorkloadOutput> {
        match self {
            WorkloadSpec::Wave(cfg) => wave_serial(cfg).map(WorkloadOutput::Wave),
            WorkloadSpec::Primes(cfg) => primes_serial(cfg).map(WorkloadOutput::Primes),
        }
    }

    /// Runs the parallel form in a fresh world of `config.world_size`
    /// ranks and returns the master's output together with the world's
    /// report. Decompositions that cannot work are rejected before any
    /// thread spawns.
    pub fn run_parallel(&self, config: WorldConfig) -> Result<(WorkloadOutput, WorldReport<()>)> {
        match self {
            WorkloadSpec::Wave(cfg) => {
                cfg.validate()?;
                if cfg.total_points % config.world_size as u64 != 0 {
                    return Err(Error::IndivisibleDecomposition {
                        count: cfg.total_points,
                        world_size: config.world_size,
                    });
                }
            }
            WorkloadSpec::Primes(cfg) => {
                if cfg.limit < 11 {
                    return Err(Error::LimitTooSmall { limit: cfg.limit });
                }
            }
        }

        let spec = *self;
        let mut report = spawn_world(config, move |rank| {
            let comm = rank.world();
            match &spec {
                WorkloadSpec::Wave(cfg) => {
                    Ok(wave_parallel(rank, &comm, cfg)?.map(WorkloadOutput::Wave))
                }
                WorkloadSpec::Primes(cfg) => {
                    Ok(primes_parallel(rank, &comm, cfg)?.map(WorkloadOutput::Primes))
                }
            }
        })?;

        let output = report
            .exits
            .first_mut()
            .and_then(Option::take)
            .expect("master rank returns the workload output");
        let report = WorldReport {
            exits: vec![(); config.world_size],
            timings: report.timings,
            stats: report.stats,
            trace: report.trace,
            elapsed_seconds: report.elapsed_seconds,
        };
        Ok((output, report))
    }
}

impl fmt::Display for WorkloadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadSpec::Wave(cfg) => write!(
                f,
                "wave(points={}, steps={}, c={})",
                cfg.total_points, cfg.time_steps, cfg.c
            ),
            WorkloadSpec::Primes(cfg) => write!(f, "primes(limit={})", cfg.limit),
        }
    }
}
