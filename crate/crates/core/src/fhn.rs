//! FitzHugh–Nagumo network with random electrical couplings
//!
//! ```text
//! v̇ⁱ = f(vⁱ) − wⁱ + Σ_j J_ij (vʲ − vⁱ) + I,   ẇⁱ = a (b vⁱ − wⁱ),
//! f(v) = v (1 − v)(v − κ)
//! ```
//!
//! and its two-dimensional Gaussian moment approximation at fixed voltage
//! spread λ.

use nalgebra::Matrix3;

use crate::analysis;
use crate::dense;
use crate::error::{Error, Result};
use crate::model::TimeGrid;
use crate::moments::{attractor_of, summarize, Attractor, ClassifyOptions, RegimeKind, RegimeLabel};
use crate::network::{sample_gaussian_weights, PopulationLayout, PopulationStats, RecordSpec, WeightMatrix};
use crate::ode::{self, Rk4, VectorField};
use crate::par;
use crate::rng::{SeededStream, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnParams {
    /// Recovery rate.
    pub a: f64,
    /// Recovery gain.
    pub b: f64,
    pub input: f64,
    pub kappa: f64,
    /// Mean coupling; entries have mean `jbar/N`.
    pub jbar: f64,
    /// Coupling disorder; entries have variance `sigma²/N`.
    pub sigma: f64,
    pub size: usize,
}

impl FnParams {
    pub fn reference(sigma: f64, size: usize) -> Self {
        FnParams {
            a: 0.4,
            b: 2.0,
            input: 0.5,
            kappa: 2.0,
            jbar: 1.5,
            sigma,
            size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.input, self.kappa, self.jbar, self.sigma]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Parameter("FitzHugh-Nagumo parameters must be finite".into()));
        }
        if self.a <= 0.0 {
            return Err(Error::Parameter(format!("a must be positive, got {}", self.a)));
        }
        if self.sigma < 0.0 {
            return Err(Error::Parameter(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if self.size == 0 {
            return Err(Error::Parameter("network size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> PopulationLayout {
        PopulationLayout::new(&[self.size])
    }
}

#[inline]
pub fn cubic(v: f64, kappa: f64) -> f64 {
    v * (1.0 - v) * (v - kappa)
}

#[inline]
fn cubic_slope(v: f64, kappa: f64) -> f64 {
    -3.0 * v * v + 2.0 * (1.0 + kappa) * v - kappa
}

// g(v) = f(v) − b v + I = −v³ + (1+κ)v² − (κ+b)v + I
fn nullcline_gap(p: &FnParams, v: f64) -> f64 {
    cubic(v, p.kappa) - p.b * v + p.input
}

/// The equilibrium `(v*, w*)` of an isolated neuron.
pub fn fn_single_equilibrium(params: &FnParams) -> Result<(f64, f64)> {
    params.validate()?;
    let (a3, a2, a1, a0) = (-1.0, 1.0 + params.kappa, -(params.kappa + params.b), params.input);
    let disc = 18.0 * a3 * a2 * a1 * a0 - 4.0 * a2.powi(3) * a0 + a2 * a2 * a1 * a1
        - 4.0 * a3 * a1.powi(3)
        - 27.0 * a3 * a3 * a0 * a0;
    if disc >= 0.0 {
        return Err(Error::Ambiguous(format!(
            "the isolated neuron has several equilibria (discriminant {disc:.3e})"
        )));
    }
    let g = |v: f64| nullcline_gap(params, v);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) <= 0.0 {
        lo *= 2.0;
    }
    while g(hi) >= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..5 {
        let d = cubic_slope(v, params.kappa) - params.b;
        if d == 0.0 {
            break;
        }
        v -= g(v) / d;
    }
    if g(v).abs() > 1e-12 {
        return Err(Error::NonConvergence {
            iterations: 205,
            residual: g(v).abs(),
        });
    }
    Ok((v, params.b * v))
}

/// Weights `J_ij ~ Normal(J̄/N, σ²/N)`.
pub fn fn_weights(params: &FnParams, seed: &SeededStream) -> Result<WeightMatrix> {
    params.validate()?;
    sample_gaussian_weights(&params.layout(), &[vec![params.jbar]], params.sigma, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnState {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl FnState {
    pub fn uniform(n: usize, v: f64, w: f64) -> Self {
        FnState {
            v: vec![v; n],
            w: vec![w; n],
        }
    }

    /// `vⁱ = v* + spread·ξⁱ`, `wⁱ = w*`.
    pub fn perturbed_equilibrium(params: &FnParams, spread: f64, master_seed: u64) -> Result<Self> {
        let (v0, w0) = fn_single_equilibrium(params)?;
        let z = SeededStream::of(master_seed, StreamKind::Initial, 0, 0).gaussians(params.size);
        Ok(FnState {
            v: z.iter().map(|x| v0 + spread * x).collect(),
            w: vec![w0; params.size],
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = self.v.clone();
        y.extend_from_slice(&self.w);
        y
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let n = y.len() / 2;
        FnState {
            v: y[..n].to_vec(),
            w: y[n..].to_vec(),
        }
    }
}

/// Network vector field on `y = (v₁…v_N, w₁…w_N)`.
pub struct FnNetwork<'a> {
    params: FnParams,
    weights: &'a WeightMatrix,
}

impl<'a> FnNetwork<'a> {
    pub fn new(params: &FnParams, weights: &'a WeightMatrix) -> Result<Self> {
        params.validate()?;
        if weights.n() != params.size {
            return Err(Error::Parameter("weight matrix does not match the network size".into()));
        }
        Ok(FnNetwork {
            params: *params,
            weights,
        })
    }
}

impl VectorField for FnNetwork<'_> {
    fn dim(&self) -> usize {
        2 * self.params.size
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.params.size;
        let (v, w) = y.split_at(n);
        let (dv, dw) = dy.split_at_mut(n);
        dense::diffusive_gemv(self.weights.entries(), v, dv);
        let p = &self.params;
        par::for_each_mut(dv, |i, d| *d += cubic(v[i], p.kappa) - w[i] + p.input);
        for i in 0..n {
            dw[i] = p.a * (p.b * v[i] - w[i]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnStats {
    pub v: PopulationStats,
    pub w: PopulationStats,
}

/// RK4 integration advancing `state` in place.
pub fn integrate_fn_network(
    params: &FnParams,
    weights: &WeightMatrix,
    state: &mut FnState,
    grid: &TimeGrid,
    record: &RecordSpec,
) -> Result<FnStats> {
    let field = FnNetwork::new(params, weights)?;
    if state.v.len() != params.size || state.w.len() != params.size {
        return Err(Error::Parameter("initial state size does not match the network".into()));
    }
    let layout = params.layout();
    let every = record.every.max(1);
    let mut stats = FnStats {
        v: PopulationStats::new(&layout, record.tracked),
        w: PopulationStats::new(&layout, record.tracked),
    };
    let mut y = state.to_vec();
    let n = params.size;
    let push = |stats: &mut FnStats, t: f64, y: &[f64]| {
        stats.v.push(&layout, t, &y[..n]);
        stats.w.push(&layout, t, &y[n..]);
    };
    ode::check_finite(&y, grid.t0())?;
    push(&mut stats, grid.t0(), &y);
    let mut rk = Rk4::new(field.dim());
    for k in 0..grid.steps() {
        rk.step(&field, grid.time(k), grid.dt(), &mut y);
        let t = grid.time(k + 1);
        ode::check_finite(&y, t)?;
        if (k + 1) % every == 0 || k + 1 == grid.steps() {
            push(&mut stats, t, &y);
        }
    }
    *state = FnState::from_slice(&y);
    Ok(stats)
}

pub fn simulate_fn_network(
    params: &FnParams,
    weights: &WeightMatrix,
    initial: &FnState,
    grid: &TimeGrid,
    record: &RecordSpec,
) -> Result<FnStats> {
    let mut state = initial.clone();
    integrate_fn_network(params, weights, &mut state, grid, record)
}

/// Time-averaged cross-neuron standard deviation of `v` after `transient`.
pub fn empirical_lambda(stats: &PopulationStats, transient: f64) -> Result<f64> {
    let vals: Vec<f64> = stats
        .times
        .iter()
        .zip(&stats.var[0])
        .filter(|(t, _)| **t >= transient)
        .map(|(_, v)| v.max(0.0).sqrt())
        .collect();
    if vals.is_empty() {
        return Err(Error::InsufficientData("no samples after the transient".into()));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// How the voltage spread enters the mean equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FnMomentVariant {
    /// `λ²(1 + κ + 3μ_v)`: opposite sign of the linear term.
    PlusSign,
    /// `E[f(V)] − f(μ_v) = λ²(1 + κ − 3μ_v)` for `V ~ Normal(μ_v, λ²)`.
    #[default]
    GaussianDerived,
}

impl FnMomentVariant {
    pub fn name(&self) -> &'static str {
        match self {
            FnMomentVariant::PlusSign => "plus-sign",
            FnMomentVariant::GaussianDerived => "gaussian-derived",
        }
    }

    fn sign(&self) -> f64 {
        match self {
            FnMomentVariant::PlusSign => 3.0,
            FnMomentVariant::GaussianDerived => -3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnMomentState {
    pub mu_v: f64,
    pub mu_w: f64,
    pub lambda: f64,
}

/// `(μ̇_v, μ̇_w)`.
pub fn fn_moment_rhs(params: &FnParams, state: &FnMomentState, variant: FnMomentVariant) -> (f64, f64) {
    let l2 = state.lambda * state.lambda;
    let mu = state.mu_v;
    let dv = cubic(mu, params.kappa) + l2 * (1.0 + params.kappa + variant.sign() * mu) - state.mu_w + params.input;
    let dw = params.a * (params.b * mu - state.mu_w);
    (dv, dw)
}

struct MomentFnField {
    params: FnParams,
    lambda: f64,
    variant: FnMomentVariant,
}

impl VectorField for MomentFnField {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let s = FnMomentState {
            mu_v: y[0],
            mu_w: y[1],
            lambda: self.lambda,
        };
        let (a, b) = fn_moment_rhs(&self.params, &s, self.variant);
        dy[0] = a;
        dy[1] = b;
    }
}

/// Equilibria of the moment system with their stability, sorted by `μ_v`.
pub fn fn_moment_equilibria(params: &FnParams, lambda: f64, variant: FnMomentVariant) -> Vec<(f64, f64, bool)> {
    let l2 = lambda * lambda;
    // −μ³ + (1+κ)μ² + (−κ − b + s λ²)μ + λ²(1+κ) + I = 0, monic form.
    let c2 = -(1.0 + params.kappa);
    let c1 = params.kappa + params.b - variant.sign() * l2;
    let c0 = -(l2 * (1.0 + params.kappa) + params.input);
    let companion = Matrix3::new(0.0, 0.0, -c0, 1.0, 0.0, -c1, 0.0, 1.0, -c2);
    let g = |m: f64| m * m * m + c2 * m * m + c1 * m + c0;
    let dg = |m: f64| 3.0 * m * m + 2.0 * c2 * m + c1;
    let mut roots: Vec<f64> = companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() < 1e-7)
        .map(|z| {
            let mut m = z.re;
            for _ in 0..4 {
                let d = dg(m);
                if d != 0.0 {
                    m -= g(m) / d;
                }
            }
            m
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    roots
        .into_iter()
        .map(|m| {
            let fv = cubic_slope(m, params.kappa) + variant.sign() * l2;
            let trace = fv - params.a;
            let det = -params.a * fv + params.a * params.b;
            (m, params.b * m, trace < 0.0 && det > 0.0)
        })
        .collect()
}

/// Regime of the moment system at every `λ` of `lambda_grid`, probed from
/// the single-neuron equilibrium and from a point displaced by +1 in `μ_v`.
pub fn fn_moment_sweep(
    params: &FnParams,
    lambda_grid: &[f64],
    variant: FnMomentVariant,
    opts: &ClassifyOptions,
) -> Result<Vec<RegimeLabel>> {
    params.validate()?;
    if lambda_grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::Parameter("lambda values must be finite and non-negative".into()));
    }
    if lambda_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Parameter("lambda grid must be sorted".into()));
    }
    let (v0, w0) = fn_single_equilibrium(params)?;
    let grid = TimeGrid::new(0.0, opts.transient + opts.window, opts.dt)?;
    let labels = par::map_indexed(lambda_grid.len(), |k| {
        let lambda = lambda_grid[k];
        let field = MomentFnField {
            params: *params,
            lambda,
            variant,
        };
        let equilibria = fn_moment_equilibria(params, lambda, variant);
        let stable = equilibria.iter().filter(|e| e.2).count();
        let mut attractors: Vec<Attractor> = Vec::new();
        for start in [[v0, w0], [v0 + 1.0, w0]] {
            let mut y = start.to_vec();
            let mut times = Vec::with_capacity(grid.steps() + 1);
            let mut mu_v = Vec::with_capacity(grid.steps() + 1);
            match ode::integrate(&field, &mut y, &grid, |_, t, y| {
                times.push(t);
                mu_v.push(y[0]);
            }) {
                Ok(()) => {}
                Err(Error::BlowUp { .. }) => {
                    return Ok(RegimeLabel {
                        kind: RegimeKind::Divergent,
                        amplitude: f64::NAN,
                        period: None,
                        equilibria: equilibria.len(),
                        stable_equilibria: stable,
                    })
                }
                Err(e) => return Err(e),
            }
            let report = analysis::detect_oscillation(&times, &mu_v, opts.transient, opts.threshold)?;
            attractors.push(attractor_of(report, &y, opts.threshold));
        }
        Ok(summarize(&attractors, equilibria.len(), stable))
    });
    labels.into_iter().collect()
}
