//! Parameter types shared by every solver.

use crate::error::{Error, Result};
use crate::special::erf;

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error-function sigmoid `S(x) = erf(g x + γ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidSpec {
    gain: f64,
    offset: f64,
}

impl SigmoidSpec {
    /// `S(x) = erf(x)`.
    pub const ERF: SigmoidSpec = SigmoidSpec {
        gain: 1.0,
        offset: 0.0,
    };

    pub fn new(gain: f64, offset: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::Parameter(format!("sigmoid gain must be > 0, got {gain}")));
        }
        if !offset.is_finite() {
            return Err(Error::Parameter(format!("sigmoid offset must be finite, got {offset}")));
        }
        Ok(SigmoidSpec { gain, offset })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        erf(self.gain * x + self.offset)
    }

    /// `S'(x)`.
    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        let z = self.gain * x + self.offset;
        self.gain * TWO_OVER_SQRT_PI * (-z * z).exp()
    }
}

impl Default for SigmoidSpec {
    fn default() -> Self {
        SigmoidSpec::ERF
    }
}

/// Evaluates the sigmoid; total on finite inputs, values in (−1, 1).
pub fn sigmoid_eval(spec: &SigmoidSpec, x: f64) -> f64 {
    spec.eval(x)
}

/// External input of one population: a constant or a piecewise-linear table
/// of `(time, value)` knots, held constant outside the knot range.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSchedule {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

impl InputSchedule {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            InputSchedule::Constant(c) => *c,
            InputSchedule::Table(knots) => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = knots.partition_point(|&(tk, _)| tk <= t);
                let (t0, v0) = knots[k - 1];
                let (t1, v1) = knots[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, InputSchedule::Constant(_))
    }

    fn validate(&self) -> Result<()> {
        match self {
            InputSchedule::Constant(c) if c.is_finite() => Ok(()),
            InputSchedule::Constant(c) => Err(Error::Parameter(format!("input must be finite, got {c}"))),
            InputSchedule::Table(knots) => {
                if knots.is_empty() {
                    return Err(Error::Parameter("input table has no knots".into()));
                }
                if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(Error::Parameter("input table has non-finite entries".into()));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Parameter("input table times must be strictly increasing".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub tau: f64,
    pub input: InputSchedule,
    /// Neuron count; only used by microscopic simulations.
    pub size: usize,
}

impl PopulationSpec {
    pub fn new(tau: f64, input: f64, size: usize) -> Self {
        PopulationSpec {
            tau,
            input: InputSchedule::Constant(input),
            size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DisorderKind {
    Quenched,
    StochasticNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    /// `mean_weights[α][β]`: effective mean weight from population β onto α.
    pub mean_weights: Vec<Vec<f64>>,
    pub sigma: f64,
    pub kind: DisorderKind,
}

/// Gaussian law of the initial membrane potentials, per population.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialLaw {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl InitialLaw {
    pub fn zero(p: usize) -> Self {
        InitialLaw {
            mean: vec![0.0; p],
            var: vec![0.0; p],
        }
    }

    pub fn with_var(p: usize, var: f64) -> Self {
        InitialLaw {
            mean: vec![0.0; p],
            var: vec![var; p],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub populations: Vec<PopulationSpec>,
    pub coupling: CouplingSpec,
    pub sigmoid: SigmoidSpec,
    pub initial: InitialLaw,
}

impl ModelSpec {
    /// Two-population excitatory/inhibitory reference network: J̄ = [[15, −12],
    /// [16, −5]], I₂ = −3, τ = 1, S = erf, initial law Normal(0, 0.01).
    pub fn ei_reference(sigma: f64, input1: f64, size: usize, kind: DisorderKind) -> Self {
        ModelSpec {
            populations: vec![
                PopulationSpec::new(1.0, input1, size),
                PopulationSpec::new(1.0, -3.0, size),
            ],
            coupling: CouplingSpec {
                mean_weights: vec![vec![15.0, -12.0], vec![16.0, -5.0]],
                sigma,
                kind,
            },
            sigmoid: SigmoidSpec::ERF,
            initial: InitialLaw::with_var(2, 0.01),
        }
    }

    /// Number of populations.
    pub fn p(&self) -> usize {
        self.populations.len()
    }

    pub fn total_size(&self) -> usize {
        self.populations.iter().map(|p| p.size).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.populations.iter().map(|p| p.size).collect()
    }

    pub fn input(&self, alpha: usize, t: f64) -> f64 {
        self.populations[alpha].input.at(t)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.coupling.sigma = sigma;
        self
    }

    pub fn with_input(mut self, alpha: usize, value: f64) -> Self {
        self.populations[alpha].input = InputSchedule::Constant(value);
        self
    }

    pub fn with_sizes(mut self, size: usize) -> Self {
        for pop in &mut self.populations {
            pop.size = size;
        }
        self
    }

    pub fn with_kind(mut self, kind: DisorderKind) -> Self {
        self.coupling.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Err(Error::Parameter("model has no populations".into()));
        }
        for (alpha, pop) in self.populations.iter().enumerate() {
            if !(pop.tau > 0.0 && pop.tau.is_finite()) {
                return Err(Error::Parameter(format!("population {alpha}: tau must be > 0")));
            }
            if pop.size == 0 {
                return Err(Error::Parameter(format!("population {alpha}: size must be >= 1")));
            }
            pop.input.validate()?;
        }
        let j = &self.coupling.mean_weights;
        if j.len() != p || j.iter().any(|row| row.len() != p) {
            return Err(Error::Parameter(format!("mean weights must be {p}x{p}")));
        }
        if j.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::Parameter("mean weights must be finite".into()));
        }
        let sigma = self.coupling.sigma;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be >= 0, got {sigma}")));
        }
        if self.initial.mean.len() != p || self.initial.var.len() != p {
            return Err(Error::Parameter(format!("initial law must have {p} entries")));
        }
        if self.initial.var.iter().any(|v| !(*v >= 0.0)) || self.initial.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Parameter("initial law must have finite mean and var >= 0".into()));
        }
        Ok(())
    }
}

/// Uniform time grid `t0, t0 + dt, …, t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return Err(Error::Parameter(format!("time grid needs t_end > t0, got [{t0}, {t_end}]")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be > 0, got {dt}")));
        }
        let span = t_end - t0;
        let ratio = span / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Parameter(format!(
                "time span {span} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(TimeGrid {
            t0,
            t_end,
            dt,
            steps: steps as usize,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// All `steps + 1` grid times.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        TimeGrid::new(self.t0, self.t_end, dt)
    }
}
