//! Closed mean/variance dynamics of the stochastic-noise mean-field limit.
//!
//! For `X ~ Normal(μ, v)` and `S(x) = erf(g x + γ)`,
//!
//! ```text
//! f(μ, v) = E[S(X)] = erf((g μ + γ) / √(1 + 2 g² v))
//! μ̇_α = −μ_α/τ_α + Σ_β J̄_αβ f(μ_β, v_β) + I_α(t)
//! v̇_α = −2 v_α/τ_α + σ² Σ_β f(μ_β, v_β)²
//! ```
//!
//! The factor 2 under the root is what makes `f` the exact Gaussian
//! expectation of the erf sigmoid (erf(x) = 2Φ(√2 x) − 1).

use nalgebra::{DMatrix, DVector};

use crate::analysis::{self, OscillationReport};
use crate::error::{Error, Result};
use crate::model::{InitialLaw, ModelSpec, SigmoidSpec, TimeGrid};
use crate::ode::{self, VectorField};
use crate::par;
use crate::special::erf;

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Gaussian means and variances of the P populations.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

impl MomentState {
    pub fn zeros(p: usize) -> Self {
        MomentState {
            mu: vec![0.0; p],
            var: vec![0.0; p],
        }
    }

    pub fn from_law(law: &InitialLaw) -> Self {
        MomentState {
            mu: law.mean.clone(),
            var: law.var.clone(),
        }
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    /// `[μ_1 … μ_P, v_1 … v_P]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.mu.iter().chain(&self.var).copied().collect()
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let p = y.len() / 2;
        MomentState {
            mu: y[..p].to_vec(),
            var: y[p..].to_vec(),
        }
    }

    pub fn sup_distance(&self, other: &MomentState) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `E[S(X)]` for `X ~ Normal(mu, v)`.
pub fn f_moment(spec: &SigmoidSpec, mu: f64, v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::Domain(format!("variance must be >= 0, got {v}")));
    }
    Ok(f_moment_unchecked(spec, mu, v))
}

#[inline]
pub(crate) fn f_moment_unchecked(spec: &SigmoidSpec, mu: f64, v: f64) -> f64 {
    let g = spec.gain();
    erf((g * mu + spec.offset()) / (1.0 + 2.0 * g * g * v).sqrt())
}

/// `(f, ∂f/∂μ, ∂f/∂v)` at `(mu, v)`.
pub fn f_moment_partials(spec: &SigmoidSpec, mu: f64, v: f64) -> (f64, f64, f64) {
    let g = spec.gain();
    let a = g * mu + spec.offset();
    let s = (1.0 + 2.0 * g * g * v).sqrt();
    let z = a / s;
    let kernel = TWO_OVER_SQRT_PI * (-z * z).exp();
    (erf(z), kernel * g / s, -kernel * a * g * g / (s * s * s))
}

/// Mean part of the right-hand side, given equal-time variances.
pub fn mean_rhs(model: &ModelSpec, mu: &[f64], var: &[f64], t: f64, out: &mut [f64]) {
    let p = model.p();
    let rates: Vec<f64> = (0..p)
        .map(|b| f_moment_unchecked(&model.sigmoid, mu[b], var[b].max(0.0)))
        .collect();
    for a in 0..p {
        let drive: f64 = model.coupling.mean_weights[a]
            .iter()
            .zip(&rates)
            .map(|(j, f)| j * f)
            .sum();
        out[a] = -mu[a] / model.populations[a].tau + drive + model.input(a, t);
    }
}

fn rhs_into(model: &ModelSpec, y: &[f64], t: f64, dy: &mut [f64]) {
    let p = model.p();
    let (mu, var) = y.split_at(p);
    let (dmu, dvar) = dy.split_at_mut(p);
    mean_rhs(model, mu, var, t, dmu);
    let sigma2 = model.coupling.sigma * model.coupling.sigma;
    let sq: f64 = (0..p)
        .map(|b| f_moment_unchecked(&model.sigmoid, mu[b], var[b].max(0.0)).powi(2))
        .sum();
    for a in 0..p {
        dvar[a] = -2.0 * var[a] / model.populations[a].tau + sigma2 * sq;
    }
}

/// Time derivative of the moments.
pub fn moment_rhs(model: &ModelSpec, state: &MomentState, t: f64) -> MomentState {
    let y = state.to_vec();
    let mut dy = vec![0.0; y.len()];
    rhs_into(model, &y, t, &mut dy);
    MomentState::from_slice(&dy)
}

/// The moment system as a [`VectorField`] on `[μ, v]`.
pub struct MomentField<'a> {
    pub model: &'a ModelSpec,
}

impl VectorField for MomentField<'_> {
    fn dim(&self) -> usize {
        2 * self.model.p()
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        rhs_into(self.model, y, t, dy);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MomentState>,
}

impl MomentTrajectory {
    pub fn mu(&self, alpha: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.mu[alpha]).collect()
    }

    pub fn var(&self, alpha: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.var[alpha]).collect()
    }

    pub fn last(&self) -> &MomentState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Fixed-step RK4 on `grid`. Round-off excursions of a variance below zero
/// are clamped back to zero after every step.
pub fn integrate_moments(
    model: &ModelSpec,
    initial: &MomentState,
    grid: &TimeGrid,
) -> Result<MomentTrajectory> {
    let mut times = Vec::with_capacity(grid.steps() + 1);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    integrate_with(model, initial, grid, |_, t, y| {
        times.push(t);
        states.push(MomentState::from_slice(y));
    })?;
    Ok(MomentTrajectory { times, states })
}

fn integrate_with<O: FnMut(usize, f64, &[f64])>(
    model: &ModelSpec,
    initial: &MomentState,
    grid: &TimeGrid,
    mut observe: O,
) -> Result<()> {
    model.validate()?;
    if initial.p() != model.p() || initial.var.len() != model.p() {
        return Err(Error::Parameter("initial state does not match the model".into()));
    }
    if initial.var.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain("initial variances must be >= 0".into()));
    }
    let p = model.p();
    let field = MomentField { model };
    let mut y = initial.to_vec();
    let mut rk = ode::Rk4::new(y.len());
    ode::check_finite(&y, grid.t0())?;
    observe(0, grid.t0(), &y);
    for k in 0..grid.steps() {
        rk.step(&field, grid.time(k), grid.dt(), &mut y);
        for v in &mut y[p..] {
            if *v < 0.0 {
                debug_assert!(*v >= -1e-12, "variance fell to {v}");
                *v = 0.0;
            }
        }
        let t = grid.time(k + 1);
        ode::check_finite(&y, t)?;
        observe(k + 1, t, &y);
    }
    Ok(())
}

/// Analytic Jacobian of the moment system, ordered `[μ, v] × [μ, v]`.
pub fn jacobian(model: &ModelSpec, state: &MomentState) -> DMatrix<f64> {
    let p = model.p();
    let sigma2 = model.coupling.sigma * model.coupling.sigma;
    let partials: Vec<(f64, f64, f64)> = (0..p)
        .map(|b| f_moment_partials(&model.sigmoid, state.mu[b], state.var[b].max(0.0)))
        .collect();
    let mut jac = DMatrix::zeros(2 * p, 2 * p);
    for a in 0..p {
        let tau = model.populations[a].tau;
        jac[(a, a)] -= 1.0 / tau;
        jac[(p + a, p + a)] -= 2.0 / tau;
        for (b, &(f, df_dmu, df_dv)) in partials.iter().enumerate() {
            let jbar = model.coupling.mean_weights[a][b];
            jac[(a, b)] += jbar * df_dmu;
            jac[(a, p + b)] += jbar * df_dv;
            jac[(p + a, b)] += sigma2 * 2.0 * f * df_dmu;
            jac[(p + a, p + b)] += sigma2 * 2.0 * f * df_dv;
        }
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumRecord {
    pub state: MomentState,
    pub eigenvalues: Vec<Eigenvalue>,
    pub stable: bool,
    pub residual: f64,
}

pub fn eigenvalues(jac: &DMatrix<f64>) -> Vec<Eigenvalue> {
    let mut ev: Vec<Eigenvalue> = jac
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| Eigenvalue { re: c.re, im: c.im })
        .collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

/// Axis-aligned box of Newton starting points.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub mu: Vec<(f64, f64)>,
    pub var: Vec<(f64, f64)>,
}

impl SearchBox {
    /// Box that provably contains every equilibrium: since |f| < 1,
    /// |μ_α| ≤ τ_α (Σ_β |J̄_αβ| + sup|I_α|) and v_α ≤ τ_α σ² P / 2.
    pub fn for_model(model: &ModelSpec) -> Self {
        let p = model.p();
        let sigma2 = model.coupling.sigma.powi(2);
        let mut mu = Vec::with_capacity(p);
        let mut var = Vec::with_capacity(p);
        for (a, pop) in model.populations.iter().enumerate() {
            let input = match &pop.input {
                crate::model::InputSchedule::Constant(c) => c.abs(),
                crate::model::InputSchedule::Table(knots) => {
                    knots.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max)
                }
            };
            let coupling: f64 = model.coupling.mean_weights[a].iter().map(|j| j.abs()).sum();
            let bound = pop.tau * (coupling + input);
            mu.push((-bound, bound));
            var.push((0.0, pop.tau * sigma2 * p as f64 / 2.0));
        }
        SearchBox { mu, var }
    }
}

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-12;
const RESIDUAL_LIMIT: f64 = 1e-10;
const MERGE_DISTANCE: f64 = 1e-6;

/// Multi-start Newton over a quasi-uniform grid of `n_starts` points per
/// dimension. Failed starts are dropped; duplicates within `1e-6` are merged.
/// Equilibria are returned sorted by `μ_1`. The input is evaluated at t = 0.
pub fn find_equilibria(
    model: &ModelSpec,
    search_box: &SearchBox,
    n_starts: usize,
) -> Result<Vec<EquilibriumRecord>> {
    model.validate()?;
    let p = model.p();
    if search_box.mu.len() != p || search_box.var.len() != p {
        return Err(Error::Parameter("search box does not match the model".into()));
    }
    if n_starts == 0 {
        return Ok(Vec::new());
    }
    let dim = 2 * p;
    let axes: Vec<Vec<f64>> = search_box
        .mu
        .iter()
        .chain(&search_box.var)
        .map(|&(lo, hi)| axis_points(lo, hi, n_starts))
        .collect();
    let total = n_starts.pow(dim as u32);
    let solutions = par::map_indexed(total, |idx| {
        let mut rem = idx;
        let start: Vec<f64> = axes
            .iter()
            .map(|axis| {
                let x = axis[rem % n_starts];
                rem /= n_starts;
                x
            })
            .collect();
        newton(model, start)
    });

    let mut found: Vec<Vec<f64>> = Vec::new();
    for y in solutions.into_iter().flatten() {
        let dup = found.iter().any(|z| {
            z.iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < MERGE_DISTANCE
        });
        if !dup {
            found.push(y);
        }
    }
    found.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(found
        .into_iter()
        .map(|y| {
            let state = MomentState::from_slice(&y);
            let residual = residual_norm(model, &y);
            let eigenvalues = eigenvalues(&jacobian(model, &state));
            let stable = eigenvalues.iter().all(|e| e.re < 0.0);
            EquilibriumRecord {
                state,
                eigenvalues,
                stable,
                residual,
            }
        })
        .collect())
}

fn axis_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi <= lo {
        return vec![0.5 * (lo + hi); n];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

fn residual_norm(model: &ModelSpec, y: &[f64]) -> f64 {
    let mut dy = vec![0.0; y.len()];
    rhs_into(model, y, 0.0, &mut dy);
    dy.iter().map(|d| d.abs()).fold(0.0, f64::max)
}

/// Damped Newton with backtracking, keeping variances non-negative.
fn newton(model: &ModelSpec, mut y: Vec<f64>) -> Option<Vec<f64>> {
    let p = model.p();
    let mut dy = vec![0.0; y.len()];
    rhs_into(model, &y, 0.0, &mut dy);
    let mut norm = dy.iter().map(|d| d.abs()).fold(0.0, f64::max);
    for _ in 0..NEWTON_MAX_ITER {
        if norm < NEWTON_TOL {
            break;
        }
        let jac = jacobian(model, &MomentState::from_slice(&y));
        let step = jac.lu().solve(&DVector::from_column_slice(&dy))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
            for v in &mut trial[p..] {
                *v = v.max(0.0);
            }
            let mut dtrial = vec![0.0; y.len()];
            rhs_into(model, &trial, 0.0, &mut dtrial);
            let tnorm = dtrial.iter().map(|d| d.abs()).fold(0.0, f64::max);
            if tnorm.is_finite() && tnorm < norm * (1.0 - 1e-4 * lambda) {
                y = trial;
                dy = dtrial;
                norm = tnorm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (norm < RESIDUAL_LIMIT).then_some(y)
}

/// Qualitative regime of a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeKind {
    /// A single equilibrium attracts every probed initial condition.
    Stationary,
    /// Every probed initial condition ends on a regular cycle.
    Oscillatory,
    /// Distinct probed initial conditions settle on distinct attractors, at
    /// least one of them a cycle.
    Bistable,
    /// Every probed initial condition settles on a fixed point and the
    /// system has this many equilibria.
    MultiEquilibria(usize),
    /// Sustained but irregular fluctuations.
    Irregular,
    Divergent,
}

impl RegimeKind {
    pub fn name(&self) -> String {
        match self {
            RegimeKind::Stationary => "stationary".into(),
            RegimeKind::Oscillatory => "oscillatory".into(),
            RegimeKind::Bistable => "bistable".into(),
            RegimeKind::MultiEquilibria(n) => format!("multi-{n}"),
            RegimeKind::Irregular => "irregular".into(),
            RegimeKind::Divergent => "divergent".into(),
        }
    }

    /// Every attractor is a fixed point.
    pub fn is_stationary(&self) -> bool {
        matches!(self, RegimeKind::Stationary | RegimeKind::MultiEquilibria(_))
    }
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeLabel {
    pub kind: RegimeKind,
    /// Peak-to-peak of μ₁ on the (largest) attractor.
    pub amplitude: f64,
    pub period: Option<f64>,
    pub equilibria: usize,
    pub stable_equilibria: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    pub dt: f64,
    pub transient: f64,
    pub window: f64,
    pub threshold: f64,
    pub n_ic: usize,
    pub n_starts: usize,
    /// Offset applied to equilibria used as initial conditions.
    pub perturbation: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            dt: 1e-2,
            transient: analysis::DEFAULT_TRANSIENT,
            window: analysis::DEFAULT_WINDOW,
            threshold: analysis::DEFAULT_THRESHOLD,
            n_ic: 5,
            n_starts: 9,
            perturbation: 1e-2,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Attractor {
    Fixed(Vec<f64>),
    Cycle(OscillationReport),
    Irregular(OscillationReport),
}

/// Regime at `(sigma, input1)`: equilibria by multi-start Newton, attractors
/// by direct integration from `n_ic` initial conditions (stable equilibria,
/// the origin, unstable equilibria, each nudged by `perturbation`).
pub fn classify_regime(
    model: &ModelSpec,
    sigma: f64,
    input1: f64,
    opts: &ClassifyOptions,
) -> Result<RegimeLabel> {
    let model = model.clone().with_sigma(sigma).with_input(0, input1);
    model.validate()?;
    let p = model.p();
    let equilibria = find_equilibria(&model, &SearchBox::for_model(&model), opts.n_starts)?;
    let stable_count = equilibria.iter().filter(|e| e.stable).count();

    let delta = opts.perturbation;
    let nudge = |s: &MomentState, sign: f64| {
        let mut s = s.clone();
        s.mu[0] += sign * delta;
        s
    };
    let mut ics: Vec<MomentState> = Vec::new();
    for e in equilibria.iter().filter(|e| e.stable) {
        ics.push(nudge(&e.state, 1.0));
    }
    ics.push(nudge(&MomentState::zeros(p), 1.0));
    for e in equilibria.iter().filter(|e| !e.stable) {
        ics.push(nudge(&e.state, 1.0));
        ics.push(nudge(&e.state, -1.0));
    }
    ics.push(nudge(&MomentState::zeros(p), -1.0));
    ics.truncate(opts.n_ic.max(1));

    let grid = TimeGrid::new(0.0, opts.transient + opts.window, opts.dt)?;
    let mut attractors = Vec::with_capacity(ics.len());
    for ic in &ics {
        match settle(&model, ic, &grid, opts) {
            Ok(a) => attractors.push(a),
            Err(Error::BlowUp { .. }) => {
                return Ok(RegimeLabel {
                    kind: RegimeKind::Divergent,
                    amplitude: f64::NAN,
                    period: None,
                    equilibria: equilibria.len(),
                    stable_equilibria: stable_count,
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(summarize(&attractors, equilibria.len(), stable_count))
}

fn settle(
    model: &ModelSpec,
    ic: &MomentState,
    grid: &TimeGrid,
    opts: &ClassifyOptions,
) -> Result<Attractor> {
    let mut times = Vec::with_capacity(grid.steps() + 1);
    let mut mu1 = Vec::with_capacity(grid.steps() + 1);
    let mut last = ic.to_vec();
    integrate_with(model, ic, grid, |_, t, y| {
        times.push(t);
        mu1.push(y[0]);
        last.copy_from_slice(y);
    })?;
    let report = analysis::detect_oscillation(&times, &mu1, opts.transient, opts.threshold)?;
    Ok(attractor_of(report, &last, opts.threshold))
}

pub(crate) fn attractor_of(report: OscillationReport, last: &[f64], threshold: f64) -> Attractor {
    if report.periodic {
        Attractor::Cycle(report)
    } else if report.is_settling(threshold) {
        Attractor::Fixed(last.to_vec())
    } else {
        Attractor::Irregular(report)
    }
}

pub(crate) fn summarize(attractors: &[Attractor], equilibria: usize, stable: usize) -> RegimeLabel {
    let cycles: Vec<&OscillationReport> = attractors
        .iter()
        .filter_map(|a| match a {
            Attractor::Cycle(r) => Some(r),
            _ => None,
        })
        .collect();
    let fixed: Vec<&Vec<f64>> = attractors
        .iter()
        .filter_map(|a| match a {
            Attractor::Fixed(s) => Some(s),
            _ => None,
        })
        .collect();
    let irregular: Vec<&OscillationReport> = attractors
        .iter()
        .filter_map(|a| match a {
            Attractor::Irregular(r) => Some(r),
            _ => None,
        })
        .collect();

    let label = |kind, amplitude, period| RegimeLabel {
        kind,
        amplitude,
        period,
        equilibria,
        stable_equilibria: stable,
    };
    if let Some(big) = cycles
        .iter()
        .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    {
        let distinct_cycles = cycles.iter().any(|c| {
            (c.amplitude - big.amplitude).abs() > 0.05 * big.amplitude
                || (c.mean - big.mean).abs() > 0.05 * big.amplitude
        });
        let kind = if !fixed.is_empty() || distinct_cycles {
            RegimeKind::Bistable
        } else {
            RegimeKind::Oscillatory
        };
        return label(kind, big.amplitude, big.period);
    }
    if let Some(big) = irregular
        .iter()
        .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    {
        return label(RegimeKind::Irregular, big.amplitude, big.period);
    }
    let amplitude = attractors
        .iter()
        .map(|a| match a {
            Attractor::Fixed(_) => 0.0,
            Attractor::Cycle(r) | Attractor::Irregular(r) => r.amplitude,
        })
        .fold(0.0, f64::max);
    let kind = if equilibria > 1 {
        RegimeKind::MultiEquilibria(equilibria)
    } else {
        RegimeKind::Stationary
    };
    label(kind, amplitude, None)
}

/// Regime labels on a `(σ, I₁)` grid; `labels[i][j]` belongs to
/// `(sigma_grid[i], input_grid[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeDiagram {
    pub sigma_grid: Vec<f64>,
    pub input_grid: Vec<f64>,
    pub labels: Vec<Vec<RegimeLabel>>,
}

impl RegimeDiagram {
    pub fn get(&self, i: usize, j: usize) -> &RegimeLabel {
        &self.labels[i][j]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, &RegimeLabel)> {
        self.sigma_grid.iter().enumerate().flat_map(move |(i, &s)| {
            self.input_grid
                .iter()
                .enumerate()
                .map(move |(j, &inp)| (s, inp, &self.labels[i][j]))
        })
    }
}

/// Classifies every grid point; points are independent and may be evaluated
/// concurrently.
pub fn scan_diagram(
    model: &ModelSpec,
    sigma_grid: &[f64],
    input_grid: &[f64],
    opts: &ClassifyOptions,
) -> Result<RegimeDiagram> {
    let sorted = |g: &[f64]| !g.is_empty() && g.windows(2).all(|w| w[0] <= w[1]);
    if !sorted(sigma_grid) || !sorted(input_grid) {
        return Err(Error::Parameter("scan grids must be non-empty and sorted".into()));
    }
    let ni = input_grid.len();
    let flat = par::map_indexed(sigma_grid.len() * ni, |k| {
        classify_regime(model, sigma_grid[k / ni], input_grid[k % ni], opts)
    });
    let mut labels = Vec::with_capacity(sigma_grid.len());
    let mut it = flat.into_iter();
    for _ in 0..sigma_grid.len() {
        labels.push(it.by_ref().take(ni).collect::<Result<Vec<_>>>()?);
    }
    Ok(RegimeDiagram {
        sigma_grid: sigma_grid.to_vec(),
        input_grid: input_grid.to_vec(),
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CouplingSpec, DisorderKind, PopulationSpec};
    use crate::special::GaussHermite;
    use crate::testing::simpson_expectation;

    fn reference(sigma: f64) -> ModelSpec {
        ModelSpec::ei_reference(sigma, 0.0, 1, DisorderKind::StochasticNoise)
    }

    fn single(jbar: f64, input: f64, sigma: f64) -> ModelSpec {
        ModelSpec {
            populations: vec![PopulationSpec::new(1.0, input, 1)],
            coupling: CouplingSpec {
                mean_weights: vec![vec![jbar]],
                sigma,
                kind: DisorderKind::StochasticNoise,
            },
            sigmoid: SigmoidSpec::ERF,
            initial: InitialLaw::zero(1),
        }
    }

    #[test]
    fn f_moment_examples() {
        let s = SigmoidSpec::ERF;
        assert_eq!(f_moment(&s, 0.0, 7.3).unwrap(), 0.0);
        assert!((f_moment(&s, 1.0, 0.0).unwrap() - 0.842_700_792_949_714_9).abs() < 1e-15);
        // E[erf(X)], X ~ N(1, 3): erf(1/√7).
        let oracle = simpson_expectation(1.0, 3.0, erf);
        let value = f_moment(&s, 1.0, 3.0).unwrap();
        assert!((value - oracle).abs() < 1e-12, "{value} vs {oracle}");
        assert!((value - 0.407_019_901_982_573).abs() < 1e-13);
        let gh = GaussHermite::new(64).unwrap();
        assert!((gh.expectation(1.0, 0.1, erf) - f_moment(&s, 1.0, 0.1).unwrap()).abs() < 1e-12);
        assert!(matches!(f_moment(&s, 0.0, -1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn closure_matches_quadrature_on_grid() {
        for &(g, gamma) in &[(1.0, 0.0), (2.0, 1.0), (0.5, -0.3)] {
            let s = SigmoidSpec::new(g, gamma).unwrap();
            for i in 0..=10 {
                for j in 0..=5 {
                    let (mu, v) = (-5.0 + i as f64, 2.0 * j as f64);
                    let q = simpson_expectation(mu, v, |x| s.eval(x));
                    assert!((f_moment(&s, mu, v).unwrap() - q).abs() < 1e-10, "g={g} mu={mu} v={v}");
                }
            }
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let s = SigmoidSpec::new(1.3, 0.2).unwrap();
        let h = 1e-6;
        for &(mu, v) in &[(0.3, 0.5), (-1.2, 2.0), (2.0, 0.1)] {
            let (_, dmu, dv) = f_moment_partials(&s, mu, v);
            let fd_mu = (f_moment_unchecked(&s, mu + h, v) - f_moment_unchecked(&s, mu - h, v)) / (2.0 * h);
            let fd_v = (f_moment_unchecked(&s, mu, v + h) - f_moment_unchecked(&s, mu, v - h)) / (2.0 * h);
            assert!((dmu - fd_mu).abs() < 1e-8);
            assert!((dv - fd_v).abs() < 1e-8);
        }
    }

    #[test]
    fn rhs_at_origin() {
        let d = moment_rhs(&reference(1.5), &MomentState::zeros(2), 0.0);
        assert_eq!(d.mu, vec![0.0, -3.0]);
        assert_eq!(d.var, vec![0.0, 0.0]);
    }

    #[test]
    fn rhs_matches_hand_evaluation() {
        let m = reference(1.5);
        let st = MomentState {
            mu: vec![0.5, -0.5],
            var: vec![0.2, 0.1],
        };
        let d = moment_rhs(&m, &st, 0.0);
        let f1 = libm::erf(0.5 / (1.0f64 + 0.4).sqrt());
        let f2 = libm::erf(-0.5 / (1.0f64 + 0.2).sqrt());
        let dmu1 = -0.5 + 15.0 * f1 - 12.0 * f2;
        let dmu2 = 0.5 + 16.0 * f1 - 5.0 * f2 - 3.0;
        let s = 2.25 * (f1 * f1 + f2 * f2);
        assert!((d.mu[0] - dmu1).abs() < 1e-14);
        assert!((d.mu[1] - dmu2).abs() < 1e-14);
        assert!((d.var[0] - (-0.4 + s)).abs() < 1e-14);
        assert!((d.var[1] - (-0.2 + s)).abs() < 1e-14);
    }

    #[test]
    fn zero_sigma_keeps_variance_zero() {
        let m = reference(0.0);
        let traj = integrate_moments(&m, &MomentState::zeros(2), &TimeGrid::new(0.0, 20.0, 0.01).unwrap()).unwrap();
        assert!(traj.states.iter().all(|s| s.var == vec![0.0, 0.0]));
    }

    #[test]
    fn equilibrium_is_preserved() {
        let m = single(0.0, 0.7, 0.0);
        let eq = MomentState {
            mu: vec![0.7],
            var: vec![0.0],
        };
        let traj = integrate_moments(&m, &eq, &TimeGrid::new(0.0, 10.0, 0.01).unwrap()).unwrap();
        assert!(traj.states.iter().all(|s| s.sup_distance(&eq) < 1e-9));
    }

    #[test]
    fn richardson_ratio() {
        let m = reference(1.5);
        let init = MomentState {
            mu: vec![0.1, 0.0],
            var: vec![0.01, 0.01],
        };
        let end = |dt: f64| integrate_moments(&m, &init, &TimeGrid::new(0.0, 2.0, dt).unwrap()).unwrap().last().clone();
        let fine = end(0.0025);
        let e1 = end(0.02).sup_distance(&fine);
        let e2 = end(0.01).sup_distance(&fine);
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let m = single(0.0, 1e8, 0.0);
        let r = integrate_moments(&m, &MomentState::zeros(1), &TimeGrid::new(0.0, 1.0, 0.01).unwrap());
        assert!(matches!(r, Err(Error::BlowUp { .. })));
    }

    #[test]
    fn jacobian_structure_and_fd() {
        let m = reference(0.0);
        let j = jacobian(&m, &MomentState { mu: vec![0.4, -0.2], var: vec![0.0, 0.0] });
        assert_eq!(j[(2, 2)], -2.0);
        assert_eq!(j[(3, 3)], -2.0);
        assert_eq!(j[(2, 3)], 0.0);

        let m = reference(1.7);
        let st = MomentState { mu: vec![0.4, -1.1], var: vec![0.6, 1.3] };
        let jac = jacobian(&m, &st);
        let y = st.to_vec();
        let h = 1e-5;
        for c in 0..4 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[c] += h;
            ym[c] -= h;
            let fp = moment_rhs(&m, &MomentState::from_slice(&yp), 0.0).to_vec();
            let fm = moment_rhs(&m, &MomentState::from_slice(&ym), 0.0).to_vec();
            for r in 0..4 {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let scale = jac[(r, c)].abs().max(1.0);
                assert!((fd - jac[(r, c)]).abs() / scale < 1e-6, "({r},{c}) {fd} vs {}", jac[(r, c)]);
            }
        }
    }

    #[test]
    fn decoupled_eigenvalues() {
        let m = single(0.0, 0.4, 0.0);
        let ev = eigenvalues(&jacobian(&m, &MomentState { mu: vec![0.4], var: vec![0.0] }));
        assert_eq!(ev[0].re, -1.0);
        assert_eq!(ev[1].re, -2.0);
        assert!(ev.iter().all(|e| e.im == 0.0));
    }

    #[test]
    fn decoupled_unique_equilibrium() {
        let m = single(0.0, 1.3, 0.0);
        let eqs = find_equilibria(&m, &SearchBox::for_model(&m), 9).unwrap();
        assert_eq!(eqs.len(), 1);
        assert!((eqs[0].state.mu[0] - 1.3).abs() < 1e-12);
        assert_eq!(eqs[0].state.var[0], 0.0);
        assert!(eqs[0].stable);
    }

    #[test]
    fn reference_equilibria_are_valid() {
        let m = reference(0.5);
        let eqs = find_equilibria(&m, &SearchBox::for_model(&m), 9).unwrap();
        assert!(eqs.iter().any(|e| e.stable));
        for e in &eqs {
            assert!(e.residual < 1e-10);
            let sq: f64 = (0..2).map(|b| f_moment_unchecked(&m.sigmoid, e.state.mu[b], e.state.var[b]).powi(2)).sum();
            for a in 0..2 {
                assert!((e.state.var[a] - 0.5 * 0.25 * sq).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn three_equilibria_window_at_low_sigma() {
        let counts: Vec<usize> = (0..=40)
            .map(|k| {
                let m = reference(0.1).with_input(0, -10.0 + 0.5 * k as f64);
                find_equilibria(&m, &SearchBox::for_model(&m), 9).unwrap().len()
            })
            .collect();
        assert!(counts.contains(&3), "{counts:?}");
    }

    #[test]
    fn no_starts_no_equilibria() {
        let m = reference(0.5);
        assert!(find_equilibria(&m, &SearchBox::for_model(&m), 0).unwrap().is_empty());
    }

    #[test]
    fn single_stable_node_is_stationary() {
        let m = single(0.5, 0.3, 0.0);
        let label = classify_regime(&m, 0.0, 0.3, &ClassifyOptions::default()).unwrap();
        assert_eq!(label.kind, RegimeKind::Stationary);
    }

    #[test]
    fn scan_single_point_matches_classify() {
        let m = reference(0.0);
        let opts = ClassifyOptions::default();
        let d = scan_diagram(&m, &[1.5], &[0.0], &opts).unwrap();
        assert_eq!(d.get(0, 0), &classify_regime(&m, 1.5, 0.0, &opts).unwrap());
        assert!(scan_diagram(&m, &[], &[0.0], &opts).is_err());
        assert!(scan_diagram(&m, &[2.0, 1.0], &[0.0], &opts).is_err());
    }
}
