//! Runs a configuration and turns the results into tables.

use std::path::{Path, PathBuf};

use heterosync_core::analysis::{classify_network, divergence_rate, NetworkRegime};
use heterosync_core::dmft::solve_dmft;
use heterosync_core::fhn::{
    empirical_lambda, fn_moment_sweep, fn_weights, integrate_fn_network, FnNetwork, FnState,
};
use heterosync_core::moments::{
    classify_regime, integrate_moments, scan_diagram, MomentState, RegimeKind, RegimeLabel,
};
use heterosync_core::network::{
    initial_state, integrate_quenched, sample_weights, simulate_stochastic, PopulationStats,
    QuenchedNetwork,
};
use heterosync_core::ode::VectorField;
use heterosync_core::{Error, ModelSpec, SeededStream, StreamKind, TimeGrid};

use crate::config::{num, ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::table::{Cell, ResultTable};

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: PathBuf,
    pub table: ResultTable,
}

/// Runs `cfg` without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    cfg.validate()?;
    let mut out = Vec::new();
    if cfg.experiment.sweepable() && !cfg.sweep_sigma.is_empty() {
        for &sigma in &cfg.sweep_sigma {
            let mut one = cfg.clone();
            one.model.coupling.sigma = sigma;
            one.fhn.params.sigma = sigma;
            one.sweep_sigma.clear();
            let tag = format!("sigma{}", num(sigma));
            for (suffix, mut table) in run_single(&one)? {
                table.meta("sigma", num(sigma));
                let suffix = if suffix.is_empty() { tag.clone() } else { format!("{tag}-{suffix}") };
                out.push(Artifact {
                    path: with_suffix(&cfg.output, &suffix),
                    table,
                });
            }
        }
    } else {
        for (suffix, table) in run_single(cfg)? {
            out.push(Artifact {
                path: with_suffix(&cfg.output, &suffix),
                table,
            });
        }
    }
    Ok(out)
}

/// Runs `cfg` and writes every artifact; nothing is written if the run fails.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let artifacts = execute(cfg)?;
    for a in &artifacts {
        a.table.write(cfg, &a.path)?;
    }
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}

/// `out.csv` + `sigma0.5` → `out-sigma0.5.csv`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    path.with_file_name(name)
}

type Tables = Vec<(String, ResultTable)>;

fn run_single(cfg: &ExperimentConfig) -> Result<Tables, CliError> {
    match cfg.experiment {
        ExperimentKind::Moments => moments(cfg),
        ExperimentKind::NetworkQuenched => network_quenched(cfg),
        ExperimentKind::NetworkStochastic => network_stochastic(cfg),
        ExperimentKind::Dmft => dmft(cfg),
        ExperimentKind::FhnNetwork => fhn_network(cfg),
        ExperimentKind::FhnMoments => fhn_moments(cfg),
        ExperimentKind::Scan => scan(cfg),
    }
}

pub fn describe_label(label: &RegimeLabel) -> String {
    let period = label.period.map_or("none".to_string(), num);
    format!(
        "{} amplitude={} period={} equilibria={} stable={}",
        label.kind,
        num(label.amplitude),
        period,
        label.equilibria,
        label.stable_equilibria
    )
}

fn describe_network(r: &NetworkRegime) -> String {
    format!(
        "{} mean_amplitude={} period={} synchrony={} trace_amplitude={}",
        r.kind,
        num(r.mean.amplitude),
        r.mean.period.map_or("none".to_string(), num),
        num(r.synchrony.index),
        num(r.trace_amplitude)
    )
}

fn indexed(prefix: &str, p: usize) -> Vec<String> {
    (1..=p).map(|a| format!("{prefix}{a}")).collect()
}

/// Keeps every `every`-th sample plus the last.
fn kept(len: usize, every: usize) -> impl Iterator<Item = usize> {
    let every = every.max(1);
    (0..len).filter(move |k| k % every == 0 || k + 1 == len)
}

fn moments(cfg: &ExperimentConfig) -> Result<Tables, CliError> {
    let model = &cfg.model;
    let grid = cfg.grid.time_grid()?;
    let traj = integrate_moments(model, &MomentState::from_law(&model.initial), &grid)?;
    let p = model.p();
    let mut names = vec!["t".to_string()];
    names.extend(indexed("mu", p));
    names.extend(indexed("v", p));
    let mut table = ResultTable::new(names);
    for k in kept(traj.times.len(), cfg.record.every) {
        let s = &traj.states[k];
        let mut row = vec![Cell::Num(traj.times[k])];
        row.extend(s.mu.iter().chain(&s.var).map(|x| Cell::Num(*x)));
        table.push(row);
    }
    let label = classify_regime(model, model.coupling.sigma, cfg.input1(), &cfg.classify)?;
    table.meta("regime", describe_label(&label));
    Ok(vec![(String::new(), table)])
}

fn stats_table(stats: &PopulationStats, mean: &str, var: &str) -> ResultTable {
    let p = stats.p();
    let mut names = vec!["t".to_string()];
    names.extend(indexed(mean, p));
    names.extend(indexed(var, p));
    let mut cols: Vec<&[f64]> = vec![&stats.times];
    cols.extend(stats.mean.iter().map(Vec::as_slice));
    cols.extend(stats.var.iter().map(Vec::as_slice));
    ResultTable::from_columns(&names, &cols)
}

fn traces_table(stats: &PopulationStats) -> ResultTable {
    let mut names = vec!["t".to_string()];
    names.extend(
        stats
            .tracked
            .iter()
            .zip(&stats.tracked_population)
            .map(|(i, a)| format!("p{}n{}", a + 1, i)),
    );
    let mut cols: Vec<&[f64]> = vec![&stats.times];
    cols.extend(stats.traces.iter().map(Vec::as_slice));
    ResultTable::from_columns(&names, &cols)
}

/// Regime line for a network run. A run too short for the analysis window is
/// reported as unclassified rather than failing.
fn network_regime(cfg: &ExperimentConfig, stats: &PopulationStats, table: &mut ResultTable) -> Result<(), CliError> {
    let traces = stats.traces_of(0);
    match classify_network(&stats.times, &stats.mean[0], &traces, cfg.analysis.transient, cfg.analysis.threshold) {
        Ok(r) => table.meta("regime", describe_network(&r)),
        Err(e @ (Error::InsufficientData(_) | Error::Parameter(_))) => {
            table.meta("regime", format!("unclassified ({e})"))
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn divergence<F: VectorField + ?Sized>(
    cfg: &ExperimentConfig,
    field: &F,
    state: &[f64],
    table: &mut ResultTable,
) -> Result<(), CliError> {
    if !cfg.divergence.enabled {
        return Ok(());
    }
    let grid = TimeGrid::new(0.0, cfg.divergence.horizon, cfg.grid.dt)?;
    match divergence_rate(field, state, 0, &grid, &cfg.divergence.options) {
        Ok(r) => table.meta(
            "divergence_rate",
            format!(
                "{} r_squared={} window={}..{}",
                num(r.divergence_rate),
                num(r.r_squared),
                num(r.fit_start),
                num(r.fit_end)
            ),
        ),
        Err(e @ Error::WindowTooShort(_)) => table.meta("divergence_rate", format!("unavailable ({e})")),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn weight_stream(cfg: &ExperimentConfig) -> SeededStream {
    SeededStream::of(cfg.seed, StreamKind::Weights, 0, 0)
}

fn network_quenched(cfg: &ExperimentConfig) -> Result<Tables, CliError> {
    let model = &cfg.model;
    let grid = cfg.grid.time_grid()?;
    let weights = sample_weights(model, &weight_stream(cfg))?;
    let mut state = initial_state(model, cfg.seed);
    let stats = integrate_quenched(model, &weights, &mut state, &grid, &cfg.record)?;
    let mut table = stats_table(&stats, "mean", "var");
    network_regime(cfg, &stats, &mut table)?;
    let field = QuenchedNetwork::new(model, &weights)?;
    divergence(cfg, &field, &state.v, &mut table)?;
    Ok(vec![(String::new(), table), ("traces".into(), traces_table(&stats))])
}

fn network_stochastic(cfg: &ExperimentConfig) -> Result<Tables, CliError> {
    let model = &cfg.model;
    let grid = cfg.grid.time_grid()?;
    let initial = initial_state(model, cfg.seed);
    let noise = SeededStream::of(cfg.seed, StreamKind::Noise, 0, 0);
    let stats = simulate_stochastic(model, &initial, &grid, &noise, &cfg.record)?;
    let traj = integrate_moments(model, &MomentState::from_law(&model.initial), &grid)?;

    let p = model.p();
    let mut names = vec!["t".to_string()];
    names.extend(indexed("mean", p));
    names.extend(indexed("var", p));
    names.extend(indexed("ode_mu", p));
    names.extend(indexed("ode_v", p));
    let mut table = ResultTable::new(names);
    let mut sq = 0.0;
    for (k, &t) in stats.times.iter().enumerate() {
        let idx = ((t - grid.t0()) / grid.dt()).round() as usize;
        let s = &traj.states[idx.min(traj.states.len() - 1)];
        let mut row = vec![Cell::Num(t)];
        row.extend((0..p).map(|a| Cell::Num(stats.mean[a][k])));
        row.extend((0..p).map(|a| Cell::Num(stats.var[a][k])));
        row.extend(s.mu.iter().chain(&s.var).map(|x| Cell::Num(*x)));
        sq += (0..p).map(|a| (stats.mean[a][k] - s.mu[a]).powi(2)).sum::<f64>();
        table.push(row);
    }
    let rms = (sq / (stats.times.len() * p) as f64).sqrt();
    table.meta("rms_mean_vs_moments", num(rms));
    network_regime(cfg, &stats, &mut table)?;
    Ok(vec![(String::new(), table), ("traces".into(), traces_table(&stats))])
}

fn dmft(cfg: &ExperimentConfig) -> Result<Tables, CliError> {
    let model: &ModelSpec = &cfg.model;
    let grid = cfg.grid.time_grid()?;
    let sol = solve_dmft(model, &grid, &model.initial, &cfg.dmft)?;
    let p = model.p();
    let mut names = vec!["t".to_string()];
    names.extend(indexed("mu", p));
    names.extend(indexed("v", p));
    let vars: Vec<Vec<f64>> = (0..p).map(|a| sol.equal_time_variance(a)).collect();
    let mut table = ResultTable::new(names);
    for k in kept(sol.times.len(), cfg.record.every) {
        let mut row = vec![Cell::Num(sol.times[k])];
        row.extend((0..p).map(|a| Cell::Num(sol.mean[a][k])));
        row.extend((0..p).map(|a| Cell::Num(vars[a][k])));
        table.push(row);
    }
    table.meta("iterations", sol.iterations);
    table.meta("residual", num(sol.residual));
    table.meta("final_damping", num(sol.final_damping));
    let mut out = vec![(String::new(), table)];
    if cfg.dump_covariance {
        let c = &sol.covariance;
        let mut cov = ResultTable::new(["population", "t", "s", "c"]);
        for a in 0..p {
            for i in 0..c.m() {
                for j in 0..=i {
                    cov.push(vec![Cell::Int(a + 1), c.time(i).into(), c.time(j).into(), c.get(a, i, j).into()]);
                }
            }
        }
        out.push(("covariance".into(), cov));
    }
    Ok(out)
}

fn fhn_network(cfg: &ExperimentConfig) -> Result<Tables, CliError> {
    let params = &cfg.fhn.params;
    let grid = cfg.grid.time_grid()?;
    let weights = fn_weights(params, &weight_stream(cfg))?;
    let mut state = FnState::perturbed_equilibrium(params, cfg.fhn.initial_spread, cfg.seed)?;
    let stats = integrate_fn_network(params, &weights, &mut state, &grid, &cfg.record)?;
    let s = (&stats.v, &stats.w);
    let names: Vec<String> = ["t", "mean_v", "var_v", "mean_w", "var_w"].map(String::from).to_vec();
    let mut table = ResultTable::from_columns(&names, &[&s.0.times, &s.0.mean[0], &s.0.var[0], &s.1.mean[0], &s.1.var[0]]);
    network_regime(cfg, &stats.v, &mut table)?;
    match empirical_lambda(&stats.v, grid.t0() + cfg.analysis.transient) {
        Ok(l) => table.meta("lambda", num(l)),
        Err(e) => table.meta("lambda", format!("unavailable ({e})")),
    }
    let field = FnNetwork::new(params, &weights)?;
    divergence(cfg, &field, &state.to_vec(), &mut table)?;
    Ok(vec![(String::new(), table), ("traces".into(), traces_table(&stats.v))])
}

/// First and last λ of the oscillatory labels, if any.
pub fn oscillatory_window(lambda: &[f64], labels: &[RegimeLabel]) -> Option<(f64, f64)> {
    let hits: Vec<f64> = lambda
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.kind == RegimeKind::Oscillatory)
        .map(|(x, _)| *x)
        .collect();
    Some((*hits.first()?, *hits.last()?))
}

fn fhn_moments(cfg: &ExperimentConfig) -> Result<Tables, CliError> {
    let labels = fn_moment_sweep(&cfg.fhn.params, &cfg.fhn.lambda, cfg.fhn.variant, &cfg.classify)?;
    let mut table = ResultTable::new(["lambda", "regime", "amplitude", "period", "equilibria", "stable_equilibria"]);
    for (&lambda, l) in cfg.fhn.lambda.iter().zip(&labels) {
        table.push(vec![
            lambda.into(),
            l.kind.name().into(),
            l.amplitude.into(),
            l.period.into(),
            l.equilibria.into(),
            l.stable_equilibria.into(),
        ]);
    }
    table.meta("variant", cfg.fhn.variant.name());
    table.meta(
        "oscillatory_window",
        match oscillatory_window(&cfg.fhn.lambda, &labels) {
            Some((a, b)) => format!("{}..{}", num(a), num(b)),
            None => "none".into(),
        },
    );
    Ok(vec![(String::new(), table)])
}

fn scan(cfg: &ExperimentConfig) -> Result<Tables, CliError> {
    let diagram = scan_diagram(&cfg.model, &cfg.scan_sigma, &cfg.scan_input, &cfg.classify)?;
    let mut table = ResultTable::new(["sigma", "I1", "regime", "amplitude", "period"]);
    for (sigma, input, l) in diagram.iter() {
        table.push(vec![sigma.into(), input.into(), l.kind.name().into(), l.amplitude.into(), l.period.into()]);
    }
    Ok(vec![(String::new(), table)])
}
