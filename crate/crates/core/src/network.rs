//! Microscopic firing-rate networks.
//!
//! Quenched disorder: `V̇ⁱ = −Vⁱ/τ + Σ_j J_ij S(Vʲ) + I` with frozen
//! `J_ij ~ Normal(J̄_{p_i p_j}/N_{p_j}, σ²/N_{p_j})`, integrated by RK4.
//!
//! Stochastic synaptic noise: each neuron sees, per presynaptic population β,
//! the weight `J̄_{p_i β} + σ Ẇ^{iβ}` applied to the population-averaged rate
//! `S̄_β`. Euler–Maruyama with the noise coefficient taken at the step start
//! (Itô): `ΔVⁱ = (…) dt + σ Σ_β S̄_β √dt ξ^{iβ}`.

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dense;
use crate::error::{Error, Result};
use crate::model::{DisorderKind, ModelSpec, TimeGrid};
use crate::ode::{self, Rk4, VectorField};
use crate::par;
use crate::rng::{SeededStream, StreamKind};

/// Largest network stored as a dense matrix.
pub const MAX_DENSE_NEURONS: usize = 8000;

/// Contiguous blocks of neurons, one per population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    owner: Vec<usize>,
}

impl PopulationLayout {
    pub fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut owner = Vec::with_capacity(sizes.iter().sum());
        let mut acc = 0;
        for (alpha, &n) in sizes.iter().enumerate() {
            offsets.push(acc);
            owner.extend(std::iter::repeat(alpha).take(n));
            acc += n;
        }
        offsets.push(acc);
        PopulationLayout {
            sizes: sizes.to_vec(),
            offsets,
            owner,
        }
    }

    pub fn of_model(model: &ModelSpec) -> Self {
        PopulationLayout::new(&model.sizes())
    }

    pub fn total(&self) -> usize {
        self.owner.len()
    }

    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, alpha: usize) -> usize {
        self.sizes[alpha]
    }

    pub fn range(&self, alpha: usize) -> Range<usize> {
        self.offsets[alpha]..self.offsets[alpha + 1]
    }

    #[inline]
    pub fn population_of(&self, i: usize) -> usize {
        self.owner[i]
    }
}

/// One realization of the quenched weights, row-major and single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    layout: PopulationLayout,
    entries: Vec<f32>,
}

impl WeightMatrix {
    /// Builds a matrix from explicit row-major entries.
    pub fn from_entries(layout: PopulationLayout, entries: Vec<f32>) -> Result<Self> {
        let n = layout.total();
        if entries.len() != n * n {
            return Err(Error::Parameter(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        if entries.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("weights must be finite".into()));
        }
        Ok(WeightMatrix { layout, entries })
    }

    pub fn n(&self) -> usize {
        self.layout.total()
    }

    pub fn layout(&self) -> &PopulationLayout {
        &self.layout
    }

    pub fn entries(&self) -> &[f32] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n() + j] as f64
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let n = self.n();
        &self.entries[i * n..(i + 1) * n]
    }

    /// Sample mean and unbiased sample variance of block `(alpha, beta)`.
    pub fn block_stats(&self, alpha: usize, beta: usize) -> (f64, f64) {
        let cols = self.layout.range(beta);
        let mut count = 0.0;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in self.layout.range(alpha) {
            for &w in &self.row(i)[cols.clone()] {
                let w = w as f64;
                count += 1.0;
                sum += w;
                sum2 += w * w;
            }
        }
        let mean = sum / count;
        let var = if count > 1.0 {
            (sum2 - count * mean * mean) / (count - 1.0)
        } else {
            0.0
        };
        (mean, var)
    }

    /// Copy with neurons relabelled: new neuron `k` is old neuron `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> WeightMatrix {
        let n = self.n();
        let mut entries = vec![0.0f32; n * n];
        for (k, &i) in perm.iter().enumerate() {
            for (l, &j) in perm.iter().enumerate() {
                entries[k * n + l] = self.entries[i * n + j];
            }
        }
        WeightMatrix {
            layout: self.layout.clone(),
            entries,
        }
    }
}

/// Draws `J_ij ~ Normal(J̄_{p_i p_j}/N_{p_j}, σ²/N_{p_j})`; row `i` uses the
/// stream `(kind of seed, population 0, index i)`.
pub fn sample_gaussian_weights(
    layout: &PopulationLayout,
    mean_weights: &[Vec<f64>],
    sigma: f64,
    seed: &SeededStream,
) -> Result<WeightMatrix> {
    let n = layout.total();
    if n > MAX_DENSE_NEURONS {
        return Err(Error::Capacity {
            requested: n,
            suggested: MAX_DENSE_NEURONS,
        });
    }
    if n == 0 {
        return Err(Error::Parameter("network has no neurons".into()));
    }
    let p = layout.p();
    let means: Vec<Vec<f64>> = (0..p)
        .map(|a| (0..p).map(|b| mean_weights[a][b] / layout.size(b) as f64).collect())
        .collect();
    let scales: Vec<f64> = (0..p).map(|b| sigma / (layout.size(b) as f64).sqrt()).collect();
    let mut entries = vec![0.0f32; n * n];
    par::for_each_chunk_mut(&mut entries, n, |i, row| {
        let alpha = layout.population_of(i);
        let mut rng = seed.with_entity(0, i as u64).rng();
        for (j, w) in row.iter_mut().enumerate() {
            let beta = layout.population_of(j);
            let z: f64 = if sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            *w = (means[alpha][beta] + scales[beta] * z) as f32;
        }
    });
    Ok(WeightMatrix {
        layout: layout.clone(),
        entries,
    })
}

/// Quenched weights for `model`.
pub fn sample_weights(model: &ModelSpec, seed: &SeededStream) -> Result<WeightMatrix> {
    model.validate()?;
    if model.coupling.kind != DisorderKind::Quenched {
        return Err(Error::Parameter("weights are only sampled for quenched disorder".into()));
    }
    sample_gaussian_weights(
        &PopulationLayout::of_model(model),
        &model.coupling.mean_weights,
        model.coupling.sigma,
        seed,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub v: Vec<f64>,
}

impl NetworkState {
    /// Every neuron of population α at `values[α]`.
    pub fn uniform(layout: &PopulationLayout, values: &[f64]) -> Self {
        NetworkState {
            v: (0..layout.total()).map(|i| values[layout.population_of(i)]).collect(),
        }
    }
}

/// I.i.d. `Normal(m₀_α, v₀_α)` potentials from the model's initial law.
pub fn initial_state(model: &ModelSpec, master_seed: u64) -> NetworkState {
    let layout = PopulationLayout::of_model(model);
    let mut v = Vec::with_capacity(layout.total());
    for alpha in 0..layout.p() {
        let sd = model.initial.var[alpha].sqrt();
        let stream = SeededStream::of(master_seed, StreamKind::Initial, alpha as u16, 0);
        let z = stream.gaussians(layout.size(alpha));
        v.extend(z.iter().map(|z| model.initial.mean[alpha] + sd * z));
    }
    NetworkState { v }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordSpec {
    /// Record every `every`-th grid point (the first and last are always kept).
    pub every: usize,
    /// Number of neurons traced per population (the first of each block).
    pub tracked: usize,
}

impl Default for RecordSpec {
    fn default() -> Self {
        RecordSpec { every: 1, tracked: 10 }
    }
}

/// Per-population empirical mean and unbiased variance over time, plus raw
/// traces of a few tracked neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationStats {
    pub times: Vec<f64>,
    /// `mean[α][k]`.
    pub mean: Vec<Vec<f64>>,
    /// `var[α][k]`.
    pub var: Vec<Vec<f64>>,
    pub tracked: Vec<usize>,
    pub tracked_population: Vec<usize>,
    /// `traces[m][k]` for neuron `tracked[m]`.
    pub traces: Vec<Vec<f64>>,
}

impl PopulationStats {
    pub fn new(layout: &PopulationLayout, tracked_per_population: usize) -> Self {
        let mut tracked = Vec::new();
        let mut tracked_population = Vec::new();
        for alpha in 0..layout.p() {
            for i in layout.range(alpha).take(tracked_per_population) {
                tracked.push(i);
                tracked_population.push(alpha);
            }
        }
        PopulationStats {
            times: Vec::new(),
            mean: vec![Vec::new(); layout.p()],
            var: vec![Vec::new(); layout.p()],
            traces: vec![Vec::new(); tracked.len()],
            tracked,
            tracked_population,
        }
    }

    pub fn push(&mut self, layout: &PopulationLayout, t: f64, v: &[f64]) {
        self.times.push(t);
        for alpha in 0..layout.p() {
            let xs = &v[layout.range(alpha)];
            let n = xs.len() as f64;
            // shifted by the first sample so identical values give exactly zero
            let x0 = xs[0];
            let d = xs.iter().map(|x| x - x0).sum::<f64>() / n;
            let var = if xs.len() > 1 {
                xs.iter().map(|x| (x - x0 - d) * (x - x0 - d)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            self.mean[alpha].push(x0 + d);
            self.var[alpha].push(var);
        }
        for (trace, &i) in self.traces.iter_mut().zip(&self.tracked) {
            trace.push(v[i]);
        }
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Traces belonging to population `alpha`.
    pub fn traces_of(&self, alpha: usize) -> Vec<&[f64]> {
        self.traces
            .iter()
            .zip(&self.tracked_population)
            .filter(|(_, &p)| p == alpha)
            .map(|(t, _)| t.as_slice())
            .collect()
    }
}

/// Statistics of an explicit sequence of states.
pub fn empirical_stats(
    times: &[f64],
    states: &[NetworkState],
    layout: &PopulationLayout,
    tracked_per_population: usize,
) -> Result<PopulationStats> {
    if times.len() != states.len() {
        return Err(Error::Parameter("one time per state required".into()));
    }
    let mut stats = PopulationStats::new(layout, tracked_per_population);
    for (t, s) in times.iter().zip(states) {
        if s.v.len() != layout.total() {
            return Err(Error::Parameter("state size does not match the layout".into()));
        }
        stats.push(layout, *t, &s.v);
    }
    Ok(stats)
}

/// Right-hand side of the quenched rate network.
pub struct QuenchedNetwork<'a> {
    model: &'a ModelSpec,
    weights: &'a WeightMatrix,
    inv_tau: Vec<f64>,
}

impl<'a> QuenchedNetwork<'a> {
    pub fn new(model: &'a ModelSpec, weights: &'a WeightMatrix) -> Result<Self> {
        model.validate()?;
        if weights.layout() != &PopulationLayout::of_model(model) {
            return Err(Error::Parameter("weight matrix does not match the model sizes".into()));
        }
        let inv_tau = model.populations.iter().map(|p| 1.0 / p.tau).collect();
        Ok(QuenchedNetwork {
            model,
            weights,
            inv_tau,
        })
    }
}

impl VectorField for QuenchedNetwork<'_> {
    fn dim(&self) -> usize {
        self.weights.n()
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let sigmoid = self.model.sigmoid;
        let mut rates = vec![0.0; y.len()];
        par::for_each_mut(&mut rates, |i, r| *r = sigmoid.eval(y[i]));
        dense::gemv(self.weights.entries(), &rates, dy);
        let layout = self.weights.layout();
        let inputs: Vec<f64> = (0..self.model.p()).map(|a| self.model.input(a, t)).collect();
        for (i, d) in dy.iter_mut().enumerate() {
            let a = layout.population_of(i);
            *d += inputs[a] - y[i] * self.inv_tau[a];
        }
    }
}

/// Advances `state` over `grid` with RK4 and records statistics.
pub fn integrate_quenched(
    model: &ModelSpec,
    weights: &WeightMatrix,
    state: &mut NetworkState,
    grid: &TimeGrid,
    record: &RecordSpec,
) -> Result<PopulationStats> {
    let field = QuenchedNetwork::new(model, weights)?;
    if state.v.len() != field.dim() {
        return Err(Error::Parameter("initial state size does not match the network".into()));
    }
    let layout = weights.layout();
    let every = record.every.max(1);
    let mut stats = PopulationStats::new(layout, record.tracked);
    let mut rk = Rk4::new(field.dim());
    ode::check_finite(&state.v, grid.t0())?;
    stats.push(layout, grid.t0(), &state.v);
    for k in 0..grid.steps() {
        rk.step(&field, grid.time(k), grid.dt(), &mut state.v);
        let t = grid.time(k + 1);
        ode::check_finite(&state.v, t)?;
        if (k + 1) % every == 0 || k + 1 == grid.steps() {
            stats.push(layout, t, &state.v);
        }
    }
    Ok(stats)
}

pub fn simulate_quenched(
    model: &ModelSpec,
    weights: &WeightMatrix,
    initial: &NetworkState,
    grid: &TimeGrid,
    record: &RecordSpec,
) -> Result<PopulationStats> {
    let mut state = initial.clone();
    integrate_quenched(model, weights, &mut state, grid, record)
}

struct NoisyNeuron {
    v: f64,
    rng: ChaCha8Rng,
}

/// Euler–Maruyama simulation of the stochastic-synaptic-noise network. Neuron
/// `i` of population `α` draws its `P` deviates per step from its own stream
/// `(Noise, α, i)`, so results do not depend on the thread schedule.
pub fn simulate_stochastic(
    model: &ModelSpec,
    initial: &NetworkState,
    grid: &TimeGrid,
    seed: &SeededStream,
    record: &RecordSpec,
) -> Result<PopulationStats> {
    model.validate()?;
    if model.coupling.kind != DisorderKind::StochasticNoise {
        return Err(Error::Parameter("stochastic simulation needs stochastic-noise disorder".into()));
    }
    let layout = PopulationLayout::of_model(model);
    if initial.v.len() != layout.total() {
        return Err(Error::Parameter("initial state size does not match the model".into()));
    }
    let p = layout.p();
    let sigma = model.coupling.sigma;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let inv_tau: Vec<f64> = model.populations.iter().map(|q| 1.0 / q.tau).collect();
    let sigmoid = model.sigmoid;
    let mut neurons: Vec<NoisyNeuron> = initial
        .v
        .iter()
        .enumerate()
        .map(|(i, &v)| NoisyNeuron {
            v,
            rng: SeededStream::of(seed.master_seed, StreamKind::Noise, layout.population_of(i) as u16, i as u64).rng(),
        })
        .collect();

    let every = record.every.max(1);
    let mut stats = PopulationStats::new(&layout, record.tracked);
    let mut v: Vec<f64> = initial.v.clone();
    let mut rates = vec![0.0; layout.total()];
    ode::check_finite(&v, grid.t0())?;
    stats.push(&layout, grid.t0(), &v);
    for k in 0..grid.steps() {
        let t = grid.time(k);
        par::for_each_mut(&mut rates, |i, r| *r = sigmoid.eval(v[i]));
        let mean_rate: Vec<f64> = (0..p)
            .map(|b| rates[layout.range(b)].iter().sum::<f64>() / layout.size(b) as f64)
            .collect();
        let drift: Vec<f64> = (0..p)
            .map(|a| {
                model.input(a, t)
                    + model.coupling.mean_weights[a]
                        .iter()
                        .zip(&mean_rate)
                        .map(|(j, s)| j * s)
                        .sum::<f64>()
            })
            .collect();
        let layout_ref = &layout;
        let (drift_ref, rate_ref, tau_ref) = (&drift, &mean_rate, &inv_tau);
        par::for_each_mut(&mut neurons, |i, cell| {
            let a = layout_ref.population_of(i);
            let mut noise = 0.0;
            for s in rate_ref.iter() {
                let xi: f64 = cell.rng.sample(StandardNormal);
                noise += s * xi;
            }
            cell.v += dt * (drift_ref[a] - cell.v * tau_ref[a]) + sigma * sqrt_dt * noise;
        });
        for (x, cell) in v.iter_mut().zip(&neurons) {
            *x = cell.v;
        }
        let t_next = grid.time(k + 1);
        ode::check_finite(&v, t_next)?;
        if (k + 1) % every == 0 || k + 1 == grid.steps() {
            stats.push(&layout, t_next, &v);
        }
    }
    Ok(stats)
}
