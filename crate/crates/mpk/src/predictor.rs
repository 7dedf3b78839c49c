//! Scaling prediction from single-machine measurements.
//!
//! The idea: run a workload on one machine at 1, 2, ..., n processes,
//! pinned to a single CPU so the processes genuinely compete for it, and
//! look at how wall time grows with the process count. A workload that is
//! mostly computation stays flat (the same total work is just sliced
//! thinner), while a workload that is mostly coordination gets steadily
//! slower as every added process pays for more message traffic. The
//! least-squares slope of seconds against processes, normalized by the
//! time at the smallest count, separates the two regimes; real clusters
//! reward the flat curves and punish the rising ones.
//!
//! [`record_curve`] does the measuring, [`classify`] turns a curve into a
//! verdict, and [`predict`] glues both behind a single call. Curves can
//! also be saved to and replayed from a small CSV format, which keeps the
//! classifier testable without timing anything.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics;
use crate::runtime::WorldConfig;
use crate::workloads::WorkloadSpec;

/// One measured point: wall seconds at a process count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub procs: u32,
    pub seconds: f64,
}

/// Wall time as a function of process count, optionally with the serial
/// baseline alongside. Structurally valid by construction: process counts
/// strictly increase and every time is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupCurve {
    points: Vec<CurvePoint>,
    serial_seconds: Option<f64>,
}

impl SpeedupCurve {
    pub fn new(points: Vec<CurvePoint>, serial_seconds: Option<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCurve("no points".to_string()));
        }
        for pair in points.windows(2) {
            if pair[1].procs <= pair[0].procs {
                return Err(Error::InvalidCurve(format!(
                    "process counts must strictly increase ({} then {})",
                    pair[0].procs, pair[1].procs
                )));
            }
        }
        for p in &points {
            if p.procs == 0 {
                return Err(Error::InvalidCurve("process count 0".to_string()));
            }
            if !(p.seconds > 0.0) {
                return Err(Error::InvalidCurve(format!(
                    "non-positive time {} at {} processes",
                    p.seconds, p.procs
                )));
            }
        }
        if let Some(s) = serial_seconds {
            if !(s > 0.0) {
                return Err(Error::InvalidCurve(format!(
                    "non-positive serial time {s}"
                )));
            }
        }
        Ok(SpeedupCurve {
            points,
            serial_seconds,
        })
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn serial_seconds(&self) -> Option<f64> {
        self.serial_seconds
    }

    /// Least-squares slope of seconds against process count, divided by
    /// the seconds at the smallest count. The division makes the figure a
    /// relative growth rate per added process, comparable across
    /// workloads of very different absolute cost.
    pub fn normalized_slope(&self) -> Result<f64> {
        if self.points.len() < 2 {
            return Err(Error::TooFewPoints {
                got: self.points.len(),
            });
        }
        let n = self.points.len() as f64;
        let mean_x = self.points.iter().map(|p| p.procs as f64).sum::<f64>() / n;
        let mean_y = self.points.iter().map(|p| p.seconds).sum::<f64>() / n;
        let mut cov = 0.0;
        let mut var = 0.0;
        for p in &self.points {
            let dx = p.procs as f64 - mean_x;
            cov += dx * (p.seconds - mean_y);
            var += dx * dx;
        }
        // var > 0 because the counts strictly increase.
        Ok(cov / var / self.points[0].seconds)
    }
}

/// Thresholds and repetition count for [`classify`] and [`predict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifierConfig {
    /// Normalized slopes strictly above this read as poor scaling.
    pub poor_threshold: f64,
    /// Normalized slopes strictly below this read as linear scaling.
    pub linear_threshold: f64,
    /// Timed runs per configuration; the median is kept.
    pub repetitions: u32,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            poor_threshold: 0.25,
            linear_threshold: 0.05,
            repetitions: 3,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.linear_threshold >= 0.0 && self.linear_threshold < self.poor_threshold) {
            return Err(Error::InvalidConfig(format!(
                "thresholds must satisfy 0 <= linear < poor, got linear={} poor={}",
                self.linear_threshold, self.poor_threshold
            )));
        }
        if self.repetitions < 1 {
            return Err(Error::InvalidConfig(
                "repetitions must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    /// Time grows quickly with the process count; the workload is
    /// dominated by coordination and will not reward more processors.
    #[serde(rename = "POOR")]
    PoorSpeedup,
    /// Time stays nearly flat; the workload divides cleanly and should
    /// scale close to linearly on real hardware.
    #[serde(rename = "LINEAR")]
    LinearSpeedup,
    /// Between the thresholds; the measurement does not commit either way.
    #[serde(rename = "INDETERMINATE")]
    Indeterminate,
}

impl VerdictKind {
    pub fn token(self) -> &'static str {
        match self {
            VerdictKind::PoorSpeedup => "POOR",
            VerdictKind::LinearSpeedup => "LINEAR",
            VerdictKind::Indeterminate => "INDETERMINATE",
        }
    }
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// A classification together with the slope it was made from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub normalized_slope: f64,
}

/// Classifies a measured curve. Slopes exactly on a threshold stay
/// indeterminate; both comparisons are strict.
pub fn classify(curve: &SpeedupCurve, config: &ClassifierConfig) -> Result<Verdict> {
    config.validate()?;
    let slope = curve.normalized_slope()?;
    let kind = if slope > config.poor_threshold {
        VerdictKind::PoorSpeedup
    } else if slope < config.linear_threshold {
        VerdictKind::LinearSpeedup
    } else {
        VerdictKind::Indeterminate
    };
    Ok(Verdict {
        kind,
        normalized_slope: slope,
    })
}

/// A live measurement: the curve plus whether the single-CPU pin could be
/// applied while it was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredCurve {
    pub curve: SpeedupCurve,
    pub pinned_single_cpu: bool,
}

/// Times the workload serially and at each process count, pinned to one
/// CPU for the duration. Each configuration runs `repetitions` times and
/// the median is kept, which discards scheduler hiccups without averaging
/// them in. Worlds spawned here inherit the pin, so all ranks compete for
/// the same core no matter how many CPUs the machine has.
pub fn record_curve(
    workload: &WorkloadSpec,
    proc_counts: &[u32],
    repetitions: u32,
    eager_threshold: u64,
) -> Result<MeasuredCurve> {
    if repetitions < 1 {
        return Err(Error::InvalidConfig(
            "repetitions must be at least 1".to_string(),
        ));
    }
    if proc_counts.is_empty() || proc_counts.contains(&0) {
        return Err(Error::InvalidProcessorCount);
    }

    let pin = affinity::pin_to_one_cpu();
    let pinned_single_cpu = pin.is_some();

    let run_failed = |e: Error| Error::WorkloadFailed { source: Box::new(e) };

    let mut serial_times = Vec::with_capacity(repetitions as usize);
    for _ in 0..repetitions {
        let start = Instant::now();
        workload.run_serial().map_err(run_failed)?;
        serial_times.push(start.elapsed().as_secs_f64());
    }
    let serial_seconds = median(serial_times).max(1e-9);

    let mut points = Vec::with_capacity(proc_counts.len());
    for &procs in proc_counts {
        let config = WorldConfig::new(procs as usize).eager_threshold(eager_threshold);
        let mut times = Vec::with_capacity(repetitions as usize);
        for _ in 0..repetitions {
            let start = Instant::now();
            workload.run_parallel(config).map_err(run_failed)?;
            times.push(start.elapsed().as_secs_f64());
        }
        points.push(CurvePoint {
            procs,
            seconds: median(times).max(1e-9),
        });
    }
    drop(pin);

    Ok(MeasuredCurve {
        curve: SpeedupCurve::new(points, Some(serial_seconds))?,
        pinned_single_cpu,
    })
}

/// Measures the workload at every feasible process count from 1 through
/// `max_procs` and classifies the result. Counts the workload cannot run
/// at (a block decomposition that does not divide, say) are skipped, so a
/// sweep over a range always measures every count that can work.
pub fn predict(
    workload: &WorkloadSpec,
    max_procs: u32,
    config: &ClassifierConfig,
    eager_threshold: u64,
) -> Result<PredictionReport> {
    config.validate()?;
    if max_procs == 0 {
        return Err(Error::InvalidProcessorCount);
    }
    let counts: Vec<u32> = (1..=max_procs)
        .filter(|&p| workload.feasible_at(p))
        .collect();
    if counts.is_empty() {
        return Err(Error::InvalidProcessorCount);
    }
    let measured = record_curve(workload, &counts, config.repetitions, eager_threshold)?;
    let verdict = classify(&measured.curve, config)?;
    Ok(PredictionReport::new(
        workload.to_string(),
        &measured.curve,
        verdict,
        *config,
        measured.pinned_single_cpu,
    ))
}

/// One row of a [`PredictionReport`]: the measurement, plus the implied
/// speedup when a serial baseline is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportPoint {
    pub procs: u32,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
}

/// Everything a prediction produced, in one serializable record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionReport {
    pub workload: String,
    pub config: ClassifierConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub serial_seconds: Option<f64>,
    pub points: Vec<ReportPoint>,
    pub normalized_slope: f64,
    pub verdict: VerdictKind,
    pub pinned_single_cpu: bool,
}

impl PredictionReport {
    pub fn new(
        workload: String,
        curve: &SpeedupCurve,
        verdict: Verdict,
        config: ClassifierConfig,
        pinned_single_cpu: bool,
    ) -> Self {
        let serial = curve.serial_seconds();
        let points = curve
            .points()
            .iter()
            .map(|p| ReportPoint {
                procs: p.procs,
                seconds: p.seconds,
                speedup: serial.and_then(|s| metrics::speedup(s, p.seconds).ok()),
            })
            .collect();
        PredictionReport {
            workload,
            config,
            serial_seconds: serial,
            points,
            normalized_slope: verdict.normalized_slope,
            verdict: verdict.kind,
            pinned_single_cpu,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Classifies an already-recorded curve and wraps the result as a report.
/// Used when replaying a saved CSV; `pinned_single_cpu` is false because
/// nothing was measured here.
pub fn report_from_curve(
    workload: String,
    curve: &SpeedupCurve,
    config: &ClassifierConfig,
) -> Result<PredictionReport> {
    let verdict = classify(curve, config)?;
    Ok(PredictionReport::new(workload, curve, verdict, *config, false))
}

const CURVE_HEADER: &str = "procs,seconds";

/// Writes a curve in the format [`read_curve`] accepts: an optional
/// `# serial_seconds=` comment, a `procs,seconds` header, one row per
/// point.
pub fn write_curve(curve: &SpeedupCurve, out: &mut dyn Write) -> Result<()> {
    if let Some(s) = curve.serial_seconds() {
        writeln!(out, "# serial_seconds={s}")?;
    }
    writeln!(out, "{CURVE_HEADER}")?;
    for p in curve.points() {
        writeln!(out, "{},{}", p.procs, p.seconds)?;
    }
    Ok(())
}

pub fn write_curve_file(curve: &SpeedupCurve, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_curve(curve, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Parses a curve. Blank lines are skipped; `#` lines are comments except
/// that `# serial_seconds=<value>` carries the baseline; the first real
/// line must be the `procs,seconds` header.
pub fn read_curve(input: &mut dyn BufRead) -> Result<SpeedupCurve> {
    let mut serial_seconds = None;
    let mut header_seen = false;
    let mut points = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("serial_seconds=") {
                let parsed: f64 = value.trim().parse().map_err(|_| Error::CurveFormat {
                    line: lineno,
                    message: format!("bad serial_seconds value {value:?}"),
                })?;
                serial_seconds = Some(parsed);
            }
            continue;
        }
        if !header_seen {
            if line != CURVE_HEADER {
                return Err(Error::CurveFormat {
                    line: lineno,
                    message: format!("expected header {CURVE_HEADER:?}, got {line:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        let (procs_str, seconds_str) = line.split_once(',').ok_or_else(|| Error::CurveFormat {
            line: lineno,
            message: "expected procs,seconds".to_string(),
        })?;
        let procs: u32 = procs_str.trim().parse().map_err(|_| Error::CurveFormat {
            line: lineno,
            message: format!("bad process count {procs_str:?}"),
        })?;
        let seconds: f64 = seconds_str.trim().parse().map_err(|_| Error::CurveFormat {
            line: lineno,
            message: format!("bad seconds value {seconds_str:?}"),
        })?;
        points.push(CurvePoint { procs, seconds });
    }
    if !header_seen {
        return Err(Error::CurveFormat {
            line: 0,
            message: format!("missing {CURVE_HEADER:?} header"),
        });
    }
    SpeedupCurve::new(points, serial_seconds)
}

pub fn read_curve_file(path: &Path) -> Result<SpeedupCurve> {
    let mut input = BufReader::new(File::open(path)?);
    read_curve(&mut input)
}

fn median(mut xs: Vec<f64>) -> f64 {
    debug_assert!(!xs.is_empty());
    xs.sort_by(|a, b| a.partial_cmp(b).expect("times are never NaN"));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

#[cfg(target_os = "linux")]
mod affinity {
    //! Thread-level CPU pinning. The mask set here is inherited by every
    //! thread spawned afterwards, which is exactly what the measurement
    //! needs: rank threads of a world started under the pin all land on
    //! the same core.
    #![allow(unsafe_code)]

    use std::mem;

    pub struct PinGuard {
        previous: libc::cpu_set_t,
    }

    /// Restricts the calling thread to the lowest CPU it may currently
    /// run on. Returns a guard that restores the previous mask on drop,
    /// or None when the kernel refuses (in which case the caller measures
    /// unpinned and says so).
    pub fn pin_to_one_cpu() -> Option<PinGuard> {
        unsafe {
            let mut previous: libc::cpu_set_t = mem::zeroed();
            if libc::sched_getaffinity(0, mem::size_of::<libc::cpu_set_t>(), &mut previous) != 0 {
                return None;
            }
            let lowest = (0..libc::CPU_SETSIZE as usize).find(|&c| libc::CPU_ISSET(c, &previous))?;
            let mut single: libc::cpu_set_t = mem::zeroed();
            libc::CPU_SET(lowest, &mut single);
            if libc::sched_setaffinity(0, mem::size_of::<libc::cpu_set_t>(), &single) != 0 {
                return None;
            }
            Some(PinGuard { previous })
        }
    }

    impl Drop for PinGuard {
        fn drop(&mut self) {
            unsafe {
                libc::sched_setaffinity(0, mem::size_of::<libc::cpu_set_t>(), &self.previous);
            }
        }
    }
}

#[cfg(not(target_os = "linux"))]
mod affinity {
    //! No pinning support off Linux; measurements run unpinned and the
    //! report records that.

    pub struct PinGuard;

    pub fn pin_to_one_cpu() -> Option<PinGuard> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(rows: &[(u32, f64)], serial: Option<f64>) -> SpeedupCurve {
        let points = rows
            .iter()
            .map(|&(procs, seconds)| CurvePoint { procs, seconds })
            .collect();
        SpeedupCurve::new(points, serial).unwrap()
    }

    // Median run times from a single-CPU sweep of the wave workload
    // (800 points, 2000 steps), procs 1 through 10, serial baseline
    // 0.80216 s. Frozen here as classifier regression data.
    const WAVE_SINGLE_CPU: [(u32, f64); 10] = [
        (1, 1.3561),
        (2, 3.6942),
        (3, 6.3833),
        (4, 9.4002),
        (5, 12.5629),
        (6, 15.301),
        (7, 18.1778),
        (8, 21.5001),
        (9, 24.1733),
        (10, 27.3349),
    ];

    // Same sweep for the primes workload (limit 2_000_000) at its
    // measured counts, serial baseline 55.625 s.
    const PRIMES_SINGLE_CPU: [(u32, f64); 6] = [
        (2, 55.5887),
        (4, 55.464),
        (8, 54.9653),
        (10, 55.5158),
        (16, 55.1428),
        (20, 55.9213),
    ];

    #[test]
    fn slope_of_an_exact_line_is_exact() {
        // y = 3 + 2x: slope 2, first point y(1) = 5.
        let c = curve(&[(1, 5.0), (2, 7.0), (3, 9.0), (4, 11.0)], None);
        let slope = c.normalized_slope().unwrap();
        assert!((slope - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn wave_reference_sweep_reads_as_poor() {
        let c = curve(&WAVE_SINGLE_CPU, Some(0.80216));
        let slope = c.normalized_slope().unwrap();
        let expected = 2.153313088111407;
        assert!(
            (slope - expected).abs() <= 1e-12 * expected,
            "slope {slope}"
        );
        let verdict = classify(&c, &ClassifierConfig::default()).unwrap();
        assert_eq!(verdict.kind, VerdictKind::PoorSpeedup);
    }

    #[test]
    fn primes_reference_sweep_reads_as_linear() {
        let c = curve(&PRIMES_SINGLE_CPU, Some(55.625));
        let slope = c.normalized_slope().unwrap();
        let expected = 0.0001983016932098322;
        assert!(
            (slope - expected).abs() <= 1e-12 * expected.abs(),
            "slope {slope}"
        );
        let verdict = classify(&c, &ClassifierConfig::default()).unwrap();
        assert_eq!(verdict.kind, VerdictKind::LinearSpeedup);
    }

    #[test]
    fn normalized_slope_is_invariant_under_time_rescaling() {
        // Scaling every time by a constant scales the raw slope and the
        // base by the same factor, so the ratio must not move. Clock
        // units (s vs ms vs ns) cannot change a verdict.
        let base = curve(&WAVE_SINGLE_CPU, None);
        let reference = base.normalized_slope().unwrap();
        for scale in [0.5, 2.0, 100.0] {
            let scaled_rows: Vec<(u32, f64)> = WAVE_SINGLE_CPU
                .iter()
                .map(|&(p, s)| (p, s * scale))
                .collect();
            let scaled = curve(&scaled_rows, None).normalized_slope().unwrap();
            if scale == 0.5 || scale == 2.0 {
                // Power-of-two scales are exact in binary floating point.
                assert_eq!(scaled.to_bits(), reference.to_bits(), "scale {scale}");
            } else {
                assert!(
                    (scaled - reference).abs() <= 1e-12 * reference.abs(),
                    "scale {scale}: {scaled} vs {reference}"
                );
            }
        }
    }

    #[test]
    fn threshold_comparisons_are_strict() {
        let c = curve(&[(1, 1.0), (2, 1.25)], None);
        let slope = c.normalized_slope().unwrap();
        // A slope exactly on a threshold stays indeterminate.
        let on_poor = ClassifierConfig {
            poor_threshold: slope,
            ..ClassifierConfig::default()
        };
        assert_eq!(
            classify(&c, &on_poor).unwrap().kind,
            VerdictKind::Indeterminate
        );
        let below_poor = ClassifierConfig {
            poor_threshold: slope * (1.0 - 1e-9),
            ..ClassifierConfig::default()
        };
        assert_eq!(
            classify(&c, &below_poor).unwrap().kind,
            VerdictKind::PoorSpeedup
        );
        let on_linear = ClassifierConfig {
            linear_threshold: slope,
            poor_threshold: 10.0,
            ..ClassifierConfig::default()
        };
        assert_eq!(
            classify(&c, &on_linear).unwrap().kind,
            VerdictKind::Indeterminate
        );
        let above_linear = ClassifierConfig {
            linear_threshold: slope * (1.0 + 1e-9),
            poor_threshold: 10.0,
            ..ClassifierConfig::default()
        };
        assert_eq!(
            classify(&c, &above_linear).unwrap().kind,
            VerdictKind::LinearSpeedup
        );
    }

    #[test]
    fn single_point_curves_cannot_be_classified() {
        let c = curve(&[(1, 2.5)], None);
        assert!(matches!(
            classify(&c, &ClassifierConfig::default()),
            Err(Error::TooFewPoints { got: 1 })
        ));
    }

    #[test]
    fn curve_construction_rejects_malformed_input() {
        let dup = vec![
            CurvePoint {
                procs: 2,
                seconds: 1.0,
            },
            CurvePoint {
                procs: 2,
                seconds: 2.0,
            },
        ];
        assert!(matches!(
            SpeedupCurve::new(dup, None),
            Err(Error::InvalidCurve(_))
        ));
        let zero_time = vec![CurvePoint {
            procs: 1,
            seconds: 0.0,
        }];
        assert!(matches!(
            SpeedupCurve::new(zero_time, None),
            Err(Error::InvalidCurve(_))
        ));
        let zero_procs = vec![CurvePoint {
            procs: 0,
            seconds: 1.0,
        }];
        assert!(matches!(
            SpeedupCurve::new(zero_procs, None),
            Err(Error::InvalidCurve(_))
        ));
        assert!(matches!(
            SpeedupCurve::new(vec![], None),
            Err(Error::InvalidCurve(_))
        ));
        let ok = vec![CurvePoint {
            procs: 1,
            seconds: 1.0,
        }];
        assert!(matches!(
            SpeedupCurve::new(ok, Some(-1.0)),
            Err(Error::InvalidCurve(_))
        ));
    }

    #[test]
    fn config_validation_catches_inverted_thresholds() {
        let inverted = ClassifierConfig {
            poor_threshold: 0.05,
            linear_threshold: 0.25,
            repetitions: 3,
        };
        assert!(matches!(
            inverted.validate(),
            Err(Error::InvalidConfig(_))
        ));
        let no_reps = ClassifierConfig {
            repetitions: 0,
            ..ClassifierConfig::default()
        };
        assert!(matches!(no_reps.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn curve_csv_roundtrips() {
        let original = curve(&WAVE_SINGLE_CPU, Some(0.80216));
        let mut buf = Vec::new();
        write_curve(&original, &mut buf).unwrap();
        let parsed = read_curve(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed, original);

        let bare = curve(&[(1, 1.5), (2, 2.5)], None);
        let mut buf = Vec::new();
        write_curve(&bare, &mut buf).unwrap();
        let parsed = read_curve(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed, bare);
        assert_eq!(parsed.serial_seconds(), None);
    }

    #[test]
    fn curve_parser_tolerates_blanks_and_comments() {
        let text = "\n# a note\n# serial_seconds=2.5\nprocs,seconds\n\n1,1.0\n2, 1.5\n# trailing\n";
        let parsed = read_curve(&mut text.as_bytes()).unwrap();
        assert_eq!(parsed.serial_seconds(), Some(2.5));
        assert_eq!(parsed.points().len(), 2);
        assert_eq!(parsed.points()[1].seconds, 1.5);
    }

    #[test]
    fn curve_parser_reports_the_offending_line() {
        let missing_header = "1,1.0\n2,2.0\n";
        assert!(matches!(
            read_curve(&mut missing_header.as_bytes()),
            Err(Error::CurveFormat { line: 1, .. })
        ));
        let bad_row = "procs,seconds\n1,1.0\ntwo,2.0\n";
        assert!(matches!(
            read_curve(&mut bad_row.as_bytes()),
            Err(Error::CurveFormat { line: 3, .. })
        ));
        let bad_serial = "# serial_seconds=fast\nprocs,seconds\n1,1.0\n";
        assert!(matches!(
            read_curve(&mut bad_serial.as_bytes()),
            Err(Error::CurveFormat { line: 1, .. })
        ));
        let empty = "";
        assert!(matches!(
            read_curve(&mut empty.as_bytes()),
            Err(Error::CurveFormat { .. })
        ));
    }

    #[test]
    fn median_handles_odd_even_and_unsorted_inputs() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(vec![7.5]), 7.5);
    }

    #[test]
    fn report_carries_speedups_and_verdict_token() {
        let c = curve(&[(1, 1.0), (2, 2.0)], Some(2.0));
        let report = report_from_curve("demo".to_string(), &c, &ClassifierConfig::default())
            .unwrap();
        assert_eq!(report.points[0].speedup, Some(2.0));
        assert_eq!(report.points[1].speedup, Some(1.0));
        assert_eq!(report.verdict, VerdictKind::PoorSpeedup);
        let json = report.to_json();
        assert!(json.contains("\"verdict\": \"POOR\""), "json: {json}");
        assert!(!report.pinned_single_cpu);
    }
}
