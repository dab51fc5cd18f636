//! Oscillation, synchrony and trajectory-divergence diagnostics.

use crate::error::{Error, Result};
use crate::model::TimeGrid;
use crate::moments::RegimeKind;
use crate::ode::{Rk4, VectorField};

/// Peak-to-peak amplitude below which a signal counts as stationary.
pub const DEFAULT_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_TRANSIENT: f64 = 100.0;
pub const DEFAULT_WINDOW: f64 = 200.0;
/// Largest coefficient of variation of cycle lengths for a periodic verdict.
pub const PERIOD_CV_LIMIT: f64 = 0.05;
/// Hysteresis of the crossing detector, as a fraction of peak-to-peak.
const CROSSING_HYSTERESIS: f64 = 0.1;
/// Second-half over first-half amplitude below which an oscillation is
/// considered damped.
const DECAY_RATIO_LIMIT: f64 = 0.9;
const MIN_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    pub periodic: bool,
    /// Peak-to-peak after the transient.
    pub amplitude: f64,
    /// Mean interval between upward mean-crossings.
    pub period: Option<f64>,
    pub period_cv: Option<f64>,
    pub mean: f64,
    /// Peak-to-peak of the second half of the window over that of the first.
    pub decay_ratio: f64,
    pub crossings: usize,
}

impl OscillationReport {
    /// Below threshold, or a damped oscillation settling onto a fixed point.
    pub fn is_settling(&self, threshold: f64) -> bool {
        self.amplitude <= threshold || (!self.periodic && self.decay_ratio < DECAY_RATIO_LIMIT)
    }
}

/// Classifies the post-transient part of a uniformly or non-uniformly sampled
/// signal. Crossings of the window mean are counted upward only, with a
/// hysteresis band so that small jitter does not register as extra cycles.
pub fn detect_oscillation(
    times: &[f64],
    values: &[f64],
    transient: f64,
    threshold: f64,
) -> Result<OscillationReport> {
    if times.len() != values.len() {
        return Err(Error::Parameter("times and values differ in length".into()));
    }
    if times.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let start = times.partition_point(|&t| t < times[0] + transient);
    let (ts, xs) = (&times[start..], &values[start..]);
    if xs.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples after a transient of {transient}",
            xs.len()
        )));
    }
    let (lo, hi) = min_max(xs);
    let amplitude = hi - lo;
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let half = xs.len() / 2;
    let (lo1, hi1) = min_max(&xs[..half]);
    let (lo2, hi2) = min_max(&xs[half..]);
    let decay_ratio = if hi1 - lo1 > 0.0 {
        (hi2 - lo2) / (hi1 - lo1)
    } else {
        1.0
    };

    let mut report = OscillationReport {
        periodic: false,
        amplitude,
        period: None,
        period_cv: None,
        mean,
        decay_ratio,
        crossings: 0,
    };
    if amplitude <= threshold {
        return Ok(report);
    }

    let band = CROSSING_HYSTERESIS * amplitude;
    let mut armed = xs[0] < mean - band;
    let mut crossings = Vec::new();
    for k in 1..xs.len() {
        if xs[k] < mean - band {
            armed = true;
        }
        if armed && xs[k - 1] < mean && xs[k] >= mean {
            let frac = (mean - xs[k - 1]) / (xs[k] - xs[k - 1]);
            crossings.push(ts[k - 1] + frac * (ts[k] - ts[k - 1]));
            armed = false;
        }
    }
    report.crossings = crossings.len();
    if crossings.len() >= 2 {
        let intervals: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
        let n = intervals.len() as f64;
        let period = intervals.iter().sum::<f64>() / n;
        let var = intervals.iter().map(|d| (d - period).powi(2)).sum::<f64>() / n;
        let cv = var.sqrt() / period;
        report.period = Some(period);
        report.period_cv = Some(cv);
        // a cycle keeps its amplitude; slowly damped or growing spirals do not
        report.periodic =
            cv < PERIOD_CV_LIMIT && decay_ratio >= DECAY_RATIO_LIMIT && decay_ratio <= 1.0 / DECAY_RATIO_LIMIT;
    }
    Ok(report)
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynchronyReport {
    /// Temporal variance of the across-trace mean over the average temporal
    /// variance of individual traces.
    pub index: f64,
    /// Set when every trace is constant and the ratio is undefined.
    pub degenerate: bool,
}

/// Synchrony of `traces` (each sampled at `times`) after `transient`.
pub fn synchrony_index<T: AsRef<[f64]>>(
    times: &[f64],
    traces: &[T],
    transient: f64,
) -> Result<SynchronyReport> {
    if traces.len() < 2 {
        return Err(Error::Parameter("synchrony needs at least two traces".into()));
    }
    if times.is_empty() || traces.iter().any(|tr| tr.as_ref().len() != times.len()) {
        return Err(Error::Parameter("every trace must match the time axis".into()));
    }
    let start = times.partition_point(|&t| t < times[0] + transient);
    let len = times.len() - start;
    if len < 2 {
        return Err(Error::InsufficientData("fewer than two samples after transient".into()));
    }
    let k = traces.len() as f64;
    let mut population = vec![0.0; len];
    let mut individual = 0.0;
    for tr in traces {
        let xs = &tr.as_ref()[start..];
        individual += variance(xs);
        for (p, x) in population.iter_mut().zip(xs) {
            *p += x / k;
        }
    }
    individual /= k;
    if individual <= 0.0 {
        return Ok(SynchronyReport {
            index: 0.0,
            degenerate: true,
        });
    }
    Ok(SynchronyReport {
        index: variance(&population) / individual,
        degenerate: false,
    })
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let x0 = xs[0];
    let m = xs.iter().map(|x| x - x0).sum::<f64>() / n;
    xs.iter().map(|x| (x - x0 - m).powi(2)).sum::<f64>() / n
}

/// Regime of a simulated network from its population mean and a sample of
/// individual traces.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRegime {
    pub kind: RegimeKind,
    pub mean: OscillationReport,
    pub synchrony: SynchronyReport,
    /// Largest post-transient peak-to-peak among the traces.
    pub trace_amplitude: f64,
}

/// Oscillatory when the population mean is periodic; stationary when the
/// mean and every trace settle; irregular otherwise.
pub fn classify_network<T: AsRef<[f64]>>(
    times: &[f64],
    mean: &[f64],
    traces: &[T],
    transient: f64,
    threshold: f64,
) -> Result<NetworkRegime> {
    let report = detect_oscillation(times, mean, transient, threshold)?;
    let synchrony = synchrony_index(times, traces, transient)?;
    let mut traces_settle = true;
    let mut trace_amplitude: f64 = 0.0;
    for tr in traces {
        let r = detect_oscillation(times, tr.as_ref(), transient, threshold)?;
        trace_amplitude = trace_amplitude.max(r.amplitude);
        traces_settle &= r.is_settling(threshold);
    }
    let kind = if report.periodic {
        RegimeKind::Oscillatory
    } else if report.is_settling(threshold) && traces_settle {
        RegimeKind::Stationary
    } else {
        RegimeKind::Irregular
    };
    Ok(NetworkRegime {
        kind,
        mean: report,
        synchrony,
        trace_amplitude,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceOptions {
    pub delta0: f64,
    /// Separation at which the fit window closes.
    pub saturation: f64,
    /// Initial stretch excluded from the fit (alignment with the leading
    /// direction).
    pub skip: f64,
}

impl Default for DivergenceOptions {
    fn default() -> Self {
        DivergenceOptions {
            delta0: 1e-8,
            saturation: 1e-2,
            skip: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosReport {
    /// Slope of `ln ‖Δ(t)‖` (1/time).
    pub divergence_rate: f64,
    pub delta0: f64,
    pub fit_start: f64,
    pub fit_end: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Twin-trajectory separation rate: integrates `initial` and a copy with
/// coordinate `perturb_index` shifted by `delta0`, and fits the log distance
/// against time until it exceeds `saturation` or the grid ends.
pub fn divergence_rate<F: VectorField + ?Sized>(
    field: &F,
    initial: &[f64],
    perturb_index: usize,
    grid: &TimeGrid,
    opts: &DivergenceOptions,
) -> Result<ChaosReport> {
    let n = field.dim();
    if initial.len() != n || perturb_index >= n {
        return Err(Error::Parameter("initial state does not match the system".into()));
    }
    if !(opts.delta0 > 0.0 && opts.saturation > opts.delta0) {
        return Err(Error::Parameter("need 0 < delta0 < saturation".into()));
    }
    let mut base = initial.to_vec();
    let mut twin = initial.to_vec();
    twin[perturb_index] += opts.delta0;
    let mut rk_a = Rk4::new(n);
    let mut rk_b = Rk4::new(n);
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let fit_from = grid.t0() + opts.skip;
    let mut saturated_at = None;
    for k in 0..grid.steps() {
        let t = grid.time(k);
        rk_a.step(field, t, grid.dt(), &mut base);
        rk_b.step(field, t, grid.dt(), &mut twin);
        let t1 = grid.time(k + 1);
        crate::ode::check_finite(&base, t1)?;
        crate::ode::check_finite(&twin, t1)?;
        let d = base
            .iter()
            .zip(&twin)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d > opts.saturation {
            saturated_at = Some(t1);
            break;
        }
        // Separation lost to round-off; nothing left to fit.
        if d < 1e-300 || d < 1e-15 * opts.delta0 {
            break;
        }
        if t1 >= fit_from {
            ts.push(t1);
            logs.push(d.ln());
        }
    }
    if ts.len() < 3 {
        return Err(Error::WindowTooShort(match saturated_at {
            Some(t) => format!("separation saturated at t = {t} before three fit samples"),
            None => "fewer than three samples in the fit window".into(),
        }));
    }
    let (slope, r2) = linear_fit(&ts, &logs);
    Ok(ChaosReport {
        divergence_rate: slope,
        delta0: opts.delta0,
        fit_start: ts[0],
        fit_end: ts[ts.len() - 1],
        r_squared: r2,
        samples: ts.len(),
    })
}

/// Least-squares slope and coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}
