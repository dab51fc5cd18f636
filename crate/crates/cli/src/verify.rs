//! Per-preset assertions.

use std::fmt;

use heterosync_core::analysis::{classify_network, divergence_rate, NetworkRegime};
use heterosync_core::fhn::{fn_moment_sweep, fn_weights, integrate_fn_network, FnMomentVariant, FnNetwork, FnState};
use heterosync_core::moments::{classify_regime, RegimeKind};
use heterosync_core::network::{initial_state, integrate_quenched, sample_weights, QuenchedNetwork};
use heterosync_core::{par, SeededStream, StreamKind, TimeGrid};

use crate::config::{num, ExperimentConfig};
use crate::error::CliError;
use crate::experiments::{describe_label, execute, oscillatory_window};
use crate::presets::preset;
use crate::table::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported, not asserted.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Assertion {
    fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }

    fn info(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            status: Status::Info,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, err: &CliError) -> Self {
        Assertion::check(name, false, format!("error: {err}"))
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        write!(f, "{tag}  {:<34} {}", self.name, self.detail)
    }
}

pub struct Report {
    pub preset: String,
    pub assertions: Vec<Assertion>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.status != Status::Fail)
    }
}

/// Runs the assertions attached to `name`; `None` for an unknown preset.
pub fn verify(name: &str) -> Option<Report> {
    let cfg = preset(name)?;
    let mut assertions = match name {
        "fig1-scan" => fig1(&cfg),
        "fig2-left" => fig2_left(&cfg),
        "fig2-right" => fig2_right(&cfg),
        "fig3-network" => fig3_network(&cfg),
        "fig3d-sweep" => fig3d(&cfg),
        _ => unreachable!("preset without assertions"),
    };
    assertions.push(determinism(&cfg));
    Some(Report {
        preset: name.into(),
        assertions,
    })
}

fn guard<F: FnOnce() -> Result<Assertion, CliError>>(name: &str, f: F) -> Assertion {
    f().unwrap_or_else(|e| Assertion::failed(name, &e))
}

fn fig1(cfg: &ExperimentConfig) -> Vec<Assertion> {
    let artifacts = match execute(cfg) {
        Ok(a) => a,
        Err(e) => return vec![Assertion::failed("scan", &e)],
    };
    let rows = &artifacts[0].table.rows;
    let regime = |r: &[Cell]| match &r[2] {
        Cell::Text(s) => s.clone(),
        _ => String::new(),
    };
    let regime_at = |sigma: f64, input: f64| {
        rows.iter()
            .find(|r| r[0] == sigma.into() && r[1] == input.into())
            .map(|r| regime(r))
    };
    let osc = rows.iter().filter(|r| regime(r) == "oscillatory").count();
    let multi = rows.iter().filter(|r| regime(r) == "multi-3").count();
    vec![
        Assertion::check(
            "sigma=1.5 I1=0 oscillatory",
            regime_at(1.5, 0.0).as_deref() == Some("oscillatory"),
            format!("{:?}", regime_at(1.5, 0.0)),
        ),
        Assertion::check("cycle region non-empty", osc > 0, format!("{osc} of {} points", rows.len())),
        Assertion::check("three-equilibrium region non-empty", multi > 0, format!("{multi} points")),
    ]
}

fn fig2_left(cfg: &ExperimentConfig) -> Vec<Assertion> {
    let expected = [(0.5, false), (1.5, true), (6.0, false)];
    expected
        .iter()
        .map(|&(sigma, oscillatory)| {
            let name = format!("sigma={} {}", num(sigma), if oscillatory { "oscillatory" } else { "stationary" });
            guard(&name.clone(), || {
                let label = classify_regime(&cfg.model, sigma, cfg.input1(), &cfg.classify)?;
                let ok = if oscillatory {
                    label.kind == RegimeKind::Oscillatory
                } else {
                    label.kind.is_stationary()
                };
                Ok(Assertion::check(name, ok, describe_label(&label)))
            })
        })
        .collect()
}

struct NetworkOutcome {
    regime: NetworkRegime,
    divergence: Option<f64>,
}

fn describe(o: &NetworkOutcome) -> String {
    format!(
        "{} periodic={} synchrony={:.3} divergence_rate={}",
        o.regime.kind,
        o.regime.mean.periodic,
        o.regime.synchrony.index,
        o.divergence.map_or("n/a".into(), |d| format!("{d:.4}"))
    )
}

fn quenched_outcome(cfg: &ExperimentConfig, sigma: f64) -> Result<NetworkOutcome, CliError> {
    let model = cfg.model.clone().with_sigma(sigma);
    let grid = cfg.grid.time_grid()?;
    let weights = sample_weights(&model, &SeededStream::of(cfg.seed, StreamKind::Weights, 0, 0))?;
    let mut state = initial_state(&model, cfg.seed);
    let stats = integrate_quenched(&model, &weights, &mut state, &grid, &cfg.record)?;
    let regime = classify_network(&stats.times, &stats.mean[0], &stats.traces_of(0), cfg.analysis.transient, cfg.analysis.threshold)?;
    let field = QuenchedNetwork::new(&model, &weights)?;
    let dgrid = TimeGrid::new(0.0, cfg.divergence.horizon, cfg.grid.dt)?;
    let divergence = divergence_rate(&field, &state.v, 0, &dgrid, &cfg.divergence.options)
        .ok()
        .map(|r| r.divergence_rate);
    Ok(NetworkOutcome { regime, divergence })
}

fn fhn_outcome(cfg: &ExperimentConfig, sigma: f64) -> Result<NetworkOutcome, CliError> {
    let mut params = cfg.fhn.params;
    params.sigma = sigma;
    let grid = cfg.grid.time_grid()?;
    let weights = fn_weights(&params, &SeededStream::of(cfg.seed, StreamKind::Weights, 0, 0))?;
    let mut state = FnState::perturbed_equilibrium(&params, cfg.fhn.initial_spread, cfg.seed)?;
    let stats = integrate_fn_network(&params, &weights, &mut state, &grid, &cfg.record)?;
    let regime = classify_network(&stats.v.times, &stats.v.mean[0], &stats.v.traces_of(0), cfg.analysis.transient, cfg.analysis.threshold)?;
    let field = FnNetwork::new(&params, &weights)?;
    let dgrid = TimeGrid::new(0.0, cfg.divergence.horizon, cfg.grid.dt)?;
    let divergence = divergence_rate(&field, &state.to_vec(), 0, &dgrid, &cfg.divergence.options)
        .ok()
        .map(|r| r.divergence_rate);
    Ok(NetworkOutcome { regime, divergence })
}

/// Stationary / synchronized oscillation / chaos checks shared by the two
/// network presets.
fn network_triplet(
    cfg: &ExperimentConfig,
    outcome: fn(&ExperimentConfig, f64) -> Result<NetworkOutcome, CliError>,
) -> Vec<Assertion> {
    let s = &cfg.sweep_sigma;
    let checks: [(&str, fn(&NetworkOutcome) -> bool); 3] = [
        ("stationary", |o| o.regime.kind == RegimeKind::Stationary),
        ("synchronized oscillation", |o| {
            o.regime.kind == RegimeKind::Oscillatory && o.regime.synchrony.index > 0.5
        }),
        ("chaotic", |o| !o.regime.mean.periodic && o.divergence.is_some_and(|d| d > 0.0)),
    ];
    s.iter()
        .zip(checks)
        .map(|(&sigma, (what, ok))| {
            let name = format!("sigma={} {what}", num(sigma));
            guard(&name.clone(), || {
                let o = outcome(cfg, sigma)?;
                Ok(Assertion::check(name, ok(&o), describe(&o)))
            })
        })
        .collect()
}

fn fig2_right(cfg: &ExperimentConfig) -> Vec<Assertion> {
    network_triplet(cfg, quenched_outcome)
}

fn fig3_network(cfg: &ExperimentConfig) -> Vec<Assertion> {
    network_triplet(cfg, fhn_outcome)
}

fn fig3d(cfg: &ExperimentConfig) -> Vec<Assertion> {
    let lambda = &cfg.fhn.lambda;
    let mut out = Vec::new();
    for variant in [FnMomentVariant::GaussianDerived, FnMomentVariant::PlusSign] {
        let labels = match fn_moment_sweep(&cfg.fhn.params, lambda, variant, &cfg.classify) {
            Ok(l) => l,
            Err(e) => {
                out.push(Assertion::failed(variant.name(), &e.into()));
                continue;
            }
        };
        let window = oscillatory_window(lambda, &labels);
        let text = window.map_or("none".to_string(), |(a, b)| format!("lambda {}..{}", num(a), num(b)));
        if variant == cfg.fhn.variant {
            out.push(Assertion::check(
                format!("{} lambda=0 stationary", variant.name()),
                labels[0].kind.is_stationary() && lambda[0] == 0.0,
                describe_label(&labels[0]),
            ));
            out.push(Assertion::check(format!("{} oscillatory window", variant.name()), window.is_some(), text));
        } else {
            out.push(Assertion::info(format!("{} oscillatory window", variant.name()), text));
        }
    }
    out
}

/// Shortened copy of `cfg` used for the reproducibility check.
fn reduced(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.grid.t_end = c.grid.t0 + (c.grid.t_end - c.grid.t0).min(10.0);
    c.analysis.transient = 0.0;
    c.classify.transient = 10.0;
    c.classify.window = 20.0;
    c.scan_sigma.truncate(3);
    c.scan_input.truncate(2);
    c.fhn.lambda.truncate(4);
    c.sweep_sigma.truncate(1);
    let size = c.model.populations[0].size.min(200);
    c.model = c.model.with_sizes(size);
    c.fhn.params.size = c.fhn.params.size.min(200);
    c
}

/// Byte-identical output on one thread and on every available thread.
fn determinism(cfg: &ExperimentConfig) -> Assertion {
    let name = "bit-reproducible across threads";
    let c = reduced(cfg);
    let render = || -> Result<Vec<String>, CliError> {
        Ok(execute(&c)?.iter().map(|a| a.table.render(&c)).collect())
    };
    let max = std::thread::available_parallelism().map_or(1, |n| n.get());
    let one = par::with_threads(1, render);
    let many = par::with_threads(max, render);
    match (one, many) {
        (Ok(a), Ok(b)) => Assertion::check(name, a == b, format!("1 vs {max} threads, {} files", a.len())),
        (Err(e), _) | (_, Err(e)) => Assertion::failed(name, &e),
    }
}
