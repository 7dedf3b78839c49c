//! Execution-time decomposition and the classic analytic speedup laws.
//!
//! Everything here is plain arithmetic over measured seconds. The runtime
//! produces a [`TimingBreakdown`] per rank; the functions below turn wall
//! times into speedups, efficiencies and analytic upper bounds.

use serde::Serialize;

use crate::error::{Error, Result};

/// Wall-clock decomposition of one rank's run.
///
/// Total time splits into computation, time spent actively moving data, and
/// time blocked waiting for a peer. Computation is the residual: whatever is
/// left of the wall clock after communication and idling are subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingBreakdown {
    /// Seconds spent computing.
    pub t_comp: f64,
    /// Seconds spent inside communication calls while actively transferring.
    pub t_comm: f64,
    /// Seconds spent blocked inside communication calls waiting for a peer.
    pub t_idle: f64,
}

impl TimingBreakdown {
    /// Total execution time: `t_comp + t_comm + t_idle`.
    pub fn total(&self) -> f64 {
        self.t_comp + self.t_comm + self.t_idle
    }

    /// Splits a measured wall time into a breakdown, treating computation
    /// as the residual after communication and idle time. The residual is
    /// clamped at zero so clock jitter cannot produce a negative share.
    pub fn from_wall(wall: f64, t_comm: f64, t_idle: f64) -> Self {
        TimingBreakdown {
            t_comp: (wall - t_comm - t_idle).max(0.0),
            t_comm,
            t_idle,
        }
    }
}

/// Decomposition of parallel execution time into a serial part `sigma(n)`,
/// a perfectly parallelizable part `phi(n)` spread over `p` processors, and
/// a communication/synchronization overhead `kappa(n, p)`.
pub struct ParallelTimeModel {
    sigma: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    phi: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    kappa: Box<dyn Fn(f64, u32) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ParallelTimeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParallelTimeModel").finish_non_exhaustive()
    }
}

impl ParallelTimeModel {
    /// Builds a model from the three component functions. Each must return
    /// non-negative seconds for the inputs it will be evaluated on.
    pub fn new(
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kappa: impl Fn(f64, u32) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ParallelTimeModel {
            sigma: Box::new(sigma),
            phi: Box::new(phi),
            kappa: Box::new(kappa),
        }
    }

    /// Predicted parallel time `sigma(n) + phi(n)/p + kappa(n, p)`.
    pub fn parallel_time(&self, n: f64, procs: u32) -> Result<f64> {
        if procs < 1 {
            return Err(Error::InvalidProcessorCount);
        }
        Ok((self.sigma)(n) + (self.phi)(n) / f64::from(procs) + (self.kappa)(n, procs))
    }
}

/// Validated inputs for the analytic bounds: `f` is the serial fraction of
/// the computation (Amdahl), `s` the serial fraction of total execution
/// time on the parallel system (Gustafson). Both live in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    f: f64,
    s: f64,
}

impl ModelParams {
    pub fn new(f: f64, s: f64) -> Result<Self> {
        check_fraction("f", f)?;
        check_fraction("s", s)?;
        Ok(ModelParams { f, s })
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

fn check_fraction(param: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::DomainError {
            param,
            value,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(())
}

/// Observed speedup `t_serial / t_parallel`. Both times must be strictly
/// positive; the ratio is reported as-is, so values below 1 (a slowdown)
/// pass through unchanged.
pub fn speedup(t_serial: f64, t_parallel: f64) -> Result<f64> {
    if !(t_serial > 0.0) {
        return Err(Error::NonPositiveTime(t_serial));
    }
    if !(t_parallel > 0.0) {
        return Err(Error::NonPositiveTime(t_parallel));
    }
    Ok(t_serial / t_parallel)
}

/// Upper bound on speedup with serial fraction `f`: `1 / (f + (1 - f)/p)`.
pub fn amdahl_bound(f: f64, procs: u32) -> Result<f64> {
    check_fraction("f", f)?;
    if procs < 1 {
        return Err(Error::InvalidProcessorCount);
    }
    let p = f64::from(procs);
    Ok(1.0 / (f + (1.0 - f) / p))
}

/// Scaled speedup with serial time fraction `s`: `p + (1 - p) * s`.
pub fn gustafson_bound(s: f64, procs: u32) -> Result<f64> {
    check_fraction("s", s)?;
    if procs < 1 {
        return Err(Error::InvalidProcessorCount);
    }
    let p = f64::from(procs);
    Ok(p + (1.0 - p) * s)
}

/// Efficiency `psi / p` for an observed speedup `psi` on `p` processors.
/// Deliberately not clamped: a slowdown on many processors yields a value
/// near zero, and superlinear measurements may exceed 1.
pub fn efficiency(psi: f64, procs: u32) -> Result<f64> {
    if psi < 0.0 {
        return Err(Error::DomainError {
            param: "psi",
            value: psi,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if procs < 1 {
        return Err(Error::InvalidProcessorCount);
    }
    Ok(psi / f64::from(procs))
}
