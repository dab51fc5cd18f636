//! Self-consistent Gaussian description of the quenched network.
//!
//! The effective neuron of population α is a Gaussian process with mean
//! `μ_α(t)` and two-time covariance `C_α(t, s)`:
//!
//! ```text
//! μ̇_α = −μ_α/τ_α + Σ_β J̄_{αβ} E[S(Ṽ^β_t)] + I_α
//! C_α(t, s) = e^{−(t+s−2t₀)/τ_α} C_α(t₀, t₀)
//!           + σ² Σ_β ∫∫ e^{−(t−u)/τ_α − (s−v)/τ_α} E[S(Ṽ^β_u) S(Ṽ^β_v)] du dv
//! ```
//!
//! solved on a uniform grid by damped fixed-point iteration on `C`.

use crate::error::{Error, Result};
use crate::model::{InitialLaw, ModelSpec, SigmoidSpec, TimeGrid};
use crate::moments::mean_rhs;
use crate::ode::{self, Rk4, VectorField};
use crate::par;
use crate::special::{bivariate_normal_cdf, normal_cdf};

const PSD_TOLERANCE: f64 = 1e-9;
const RHO_LIMIT: f64 = 1.0 - 1e-9;
const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// `C_α(t_i, t_j)` for every population on a shared grid of `m` times.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGrid {
    t0: f64,
    h: f64,
    m: usize,
    data: Vec<Vec<f64>>,
}

impl CovarianceGrid {
    pub fn zeros(grid: &TimeGrid, p: usize) -> Self {
        let m = grid.steps() + 1;
        CovarianceGrid {
            t0: grid.t0(),
            h: grid.dt(),
            m,
            data: vec![vec![0.0; m * m]; p],
        }
    }

    /// `C⁰(t, s) = e^{−|t−s|/τ_α} v₀_α`.
    pub fn exponential(model: &ModelSpec, grid: &TimeGrid, initial_var: &[f64]) -> Self {
        let mut c = CovarianceGrid::zeros(grid, model.p());
        for (alpha, pop) in model.populations.iter().enumerate() {
            for i in 0..c.m {
                for j in 0..c.m {
                    let lag = (i as f64 - j as f64).abs() * c.h;
                    c.data[alpha][i * c.m + j] = (-lag / pop.tau).exp() * initial_var[alpha];
                }
            }
        }
        c
    }

    pub fn p(&self) -> usize {
        self.data.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.h * i as f64
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn get(&self, alpha: usize, i: usize, j: usize) -> f64 {
        self.data[alpha][i * self.m + j]
    }

    /// Sets `(i, j)` and `(j, i)` together.
    pub fn set(&mut self, alpha: usize, i: usize, j: usize, value: f64) {
        self.data[alpha][i * self.m + j] = value;
        self.data[alpha][j * self.m + i] = value;
    }

    /// Row-major `m × m` matrix of population `alpha`.
    pub fn matrix(&self, alpha: usize) -> &[f64] {
        &self.data[alpha]
    }

    /// Equal-time variance `C_α(t_i, t_i)`.
    pub fn diagonal(&self, alpha: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.get(alpha, i, i)).collect()
    }

    pub fn sup_distance(&self, other: &CovarianceGrid) -> f64 {
        self.data
            .iter()
            .flatten()
            .zip(other.data.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Symmetry, non-negative diagonal and Cauchy–Schwarz (slack 1e−9).
    pub fn check_invariants(&self) -> Result<()> {
        for (alpha, c) in self.data.iter().enumerate() {
            for i in 0..self.m {
                let cii = c[i * self.m + i];
                if cii.is_nan() || cii < 0.0 {
                    return Err(Error::Domain(format!("negative variance {cii} at ({alpha}, {i})")));
                }
                for j in 0..i {
                    let cij = c[i * self.m + j];
                    if cij != c[j * self.m + i] {
                        return Err(Error::Domain(format!("asymmetric entry at ({alpha}, {i}, {j})")));
                    }
                    let bound = (cii * c[j * self.m + j]).sqrt() + PSD_TOLERANCE;
                    if cij.abs() > bound {
                        return Err(Error::Domain(format!(
                            "Cauchy-Schwarz violated at ({alpha}, {i}, {j}): {cij} > {bound}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn mix(&mut self, other: &CovarianceGrid, eta: f64) {
        for (a, b) in self.data.iter_mut().flatten().zip(other.data.iter().flatten()) {
            *a = (1.0 - eta) * *a + eta * b;
        }
    }
}

/// `E[S(X) S(Y)]` for jointly Gaussian `(X, Y)`.
///
/// With `S(x) = erf(gx + γ) = 2Φ(√2(gx + γ)) − 1` the expectation reduces to
/// a bivariate normal orthant probability, evaluated to near machine precision.
pub fn bivariate_sigmoid_moment(
    spec: &SigmoidSpec,
    mu_u: f64,
    mu_v: f64,
    c_uu: f64,
    c_vv: f64,
    c_uv: f64,
) -> Result<f64> {
    if !(mu_u.is_finite() && mu_v.is_finite() && c_uu.is_finite() && c_vv.is_finite() && c_uv.is_finite()) {
        return Err(Error::Domain("non-finite Gaussian moments".into()));
    }
    if c_uu < -PSD_TOLERANCE || c_vv < -PSD_TOLERANCE || c_uv * c_uv > c_uu.max(0.0) * c_vv.max(0.0) + PSD_TOLERANCE {
        return Err(Error::Domain(format!(
            "covariance [[{c_uu}, {c_uv}], [{c_uv}, {c_vv}]] is not positive semidefinite"
        )));
    }
    Ok(bivariate_moment_unchecked(spec, mu_u, mu_v, c_uu.max(0.0), c_vv.max(0.0), c_uv))
}

fn bivariate_moment_unchecked(spec: &SigmoidSpec, mu_u: f64, mu_v: f64, c_uu: f64, c_vv: f64, c_uv: f64) -> f64 {
    let limit = RHO_LIMIT * (c_uu * c_vv).sqrt();
    let c_uv = c_uv.clamp(-limit, limit);
    let g = spec.gain();
    let two_g2 = 2.0 * g * g;
    let su = (1.0 + two_g2 * c_uu).sqrt();
    let sv = (1.0 + two_g2 * c_vv).sqrt();
    let hu = std::f64::consts::SQRT_2 * (g * mu_u + spec.offset()) / su;
    let hv = std::f64::consts::SQRT_2 * (g * mu_v + spec.offset()) / sv;
    let rho = two_g2 * c_uv / (su * sv);
    4.0 * bivariate_normal_cdf(hu, hv, rho) - 2.0 * normal_cdf(hu) - 2.0 * normal_cdf(hv) + 1.0
}

/// One application of the covariance equation, double integral by the
/// tensor trapezoid rule. `mu[β][i]` is the mean at grid time `i`.
pub fn dmft_covariance_map(
    model: &ModelSpec,
    mu: &[Vec<f64>],
    c: &CovarianceGrid,
    initial_var: &[f64],
) -> Result<CovarianceGrid> {
    let p = model.p();
    let m = c.m();
    if c.p() != p || mu.len() != p || mu.iter().any(|x| x.len() != m) || initial_var.len() != p {
        return Err(Error::Parameter("mean and covariance grids are inconsistent".into()));
    }
    if initial_var.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("initial variance must be finite and non-negative".into()));
    }
    for (beta, series) in mu.iter().enumerate() {
        if let Some(bad) = series.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite mean for population {beta} at index {bad}")));
        }
    }
    let sigma2 = model.coupling.sigma * model.coupling.sigma;
    let spec = model.sigmoid;

    // kernel[i][j] = σ² Σ_β E[S(Ṽ^β_{t_i}) S(Ṽ^β_{t_j})], lower triangle.
    let mut kernel = vec![0.0; m * m];
    if sigma2 > 0.0 {
        let rows: Vec<Result<Vec<f64>>> = par::map_indexed(m, |i| {
            let mut row = vec![0.0; i + 1];
            for (j, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for beta in 0..p {
                    acc += bivariate_sigmoid_moment(
                        &spec,
                        mu[beta][i],
                        mu[beta][j],
                        c.get(beta, i, i),
                        c.get(beta, j, j),
                        c.get(beta, i, j),
                    )?;
                }
                *out = sigma2 * acc;
            }
            Ok(row)
        });
        for (i, row) in rows.into_iter().enumerate() {
            for (j, k) in row?.into_iter().enumerate() {
                kernel[i * m + j] = k;
                kernel[j * m + i] = k;
            }
        }
    }

    let h = c.step();
    let mut out = CovarianceGrid {
        t0: c.t0,
        h,
        m,
        data: vec![vec![0.0; m * m]; p],
    };
    for (alpha, pop) in model.populations.iter().enumerate() {
        let q = (-h / pop.tau).exp();
        let q2 = q * q;
        let w = 0.25 * h * h;
        // d[i][j] = e^{−(t_i+t_j−2t₀)/τ} ∫∫ e^{(u+v−2t₀)/τ} K(u, v), built cell by cell.
        let mut d = vec![0.0; m * m];
        for i in 1..m {
            for j in 1..=i {
                let cell = kernel[i * m + j]
                    + q * (kernel[(i - 1) * m + j] + kernel[i * m + j - 1])
                    + q2 * kernel[(i - 1) * m + j - 1];
                let v = q * d[(i - 1) * m + j] + q * d[i * m + j - 1] - q2 * d[(i - 1) * m + j - 1] + w * cell;
                d[i * m + j] = v;
                d[j * m + i] = v;
            }
        }
        let decay: Vec<f64> = (0..m).map(|i| (-(h * i as f64) / pop.tau).exp()).collect();
        let target = &mut out.data[alpha];
        for i in 0..m {
            for j in 0..=i {
                let v = decay[i] * decay[j] * initial_var[alpha] + d[i * m + j];
                target[i * m + j] = v;
                target[j * m + i] = v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmftOptions {
    /// Mixing weight η of the new covariance.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DmftOptions {
    fn default() -> Self {
        DmftOptions {
            damping: 0.5,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmftSolution {
    pub times: Vec<f64>,
    /// `mean[α][i]`.
    pub mean: Vec<Vec<f64>>,
    pub covariance: CovarianceGrid,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm change of `C` at every iteration.
    pub history: Vec<f64>,
    pub final_damping: f64,
}

impl DmftSolution {
    pub fn equal_time_variance(&self, alpha: usize) -> Vec<f64> {
        self.covariance.diagonal(alpha)
    }
}

struct MeanField<'a> {
    model: &'a ModelSpec,
    var: &'a [Vec<f64>],
    t0: f64,
    h: f64,
}

impl MeanField<'_> {
    fn var_at(&self, t: f64) -> Vec<f64> {
        let x = ((t - self.t0) / self.h).max(0.0);
        let m = self.var[0].len();
        let i = (x.floor() as usize).min(m - 1);
        let frac = x - i as f64;
        self.var
            .iter()
            .map(|v| if i + 1 < m { v[i] + frac * (v[i + 1] - v[i]) } else { v[m - 1] })
            .collect()
    }
}

impl VectorField for MeanField<'_> {
    fn dim(&self) -> usize {
        self.model.p()
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        mean_rhs(self.model, y, &self.var_at(t), t, dy);
    }
}

/// Mean trajectories driven by the equal-time variance of `c`
/// (linear interpolation between grid points for the RK4 stages).
pub fn dmft_mean(model: &ModelSpec, grid: &TimeGrid, initial_mean: &[f64], c: &CovarianceGrid) -> Result<Vec<Vec<f64>>> {
    let p = model.p();
    let var: Vec<Vec<f64>> = (0..p).map(|a| c.diagonal(a)).collect();
    let field = MeanField {
        model,
        var: &var,
        t0: grid.t0(),
        h: grid.dt(),
    };
    let mut y = initial_mean.to_vec();
    let mut out: Vec<Vec<f64>> = (0..p).map(|a| vec![y[a]]).collect();
    let mut rk = Rk4::new(p);
    for k in 0..grid.steps() {
        rk.step(&field, grid.time(k), grid.dt(), &mut y);
        ode::check_finite(&y, grid.time(k + 1))?;
        for a in 0..p {
            out[a].push(y[a]);
        }
    }
    Ok(out)
}

/// Damped fixed-point iteration. The first update replaces the initial
/// guess outright; later ones mix with weight η, halved whenever the
/// residual grows between two damped steps.
pub fn solve_dmft(model: &ModelSpec, grid: &TimeGrid, initial: &InitialLaw, opts: &DmftOptions) -> Result<DmftSolution> {
    model.validate()?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Parameter(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Parameter("tolerance must be positive and max_iter at least 1".into()));
    }
    let p = model.p();
    if initial.mean.len() != p || initial.var.len() != p {
        return Err(Error::Parameter("initial law has the wrong number of populations".into()));
    }
    let mut c = CovarianceGrid::exponential(model, grid, &initial.var);
    let mut eta = opts.damping;
    let mut history = Vec::new();
    let mut previous = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let mu = dmft_mean(model, grid, &initial.mean, &c)?;
        let next = dmft_covariance_map(model, &mu, &c, &initial.var)?;
        let residual = next.sup_distance(&c);
        history.push(residual);
        if !residual.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual,
            });
        }
        if residual < opts.tol {
            let mean = dmft_mean(model, grid, &initial.mean, &next)?;
            return Ok(DmftSolution {
                times: grid.times(),
                mean,
                covariance: next,
                iterations: iter,
                residual,
                history,
                final_damping: eta,
            });
        }
        if iter == 1 {
            c = next;
        } else {
            // iteration 2 is the first damped step; its residual is not comparable
            if iter > 2 && residual > previous {
                eta = (0.5 * eta).max(MIN_DAMPING);
            }
            c.mix(&next, eta);
        }
        previous = residual;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: previous,
    })
}
