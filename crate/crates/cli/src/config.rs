//! Flat `key=value` experiment configuration.
//!
//! Keys are dotted (`coupling.sigma=1.5`), one per line; `#` starts a comment.
//! Every key has a default except `experiment`. Unknown and repeated keys are
//! errors. [`ExperimentConfig::echo`] writes every key in a fixed order and
//! re-parses to an identical configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use heterosync_core::analysis::{DivergenceOptions, DEFAULT_THRESHOLD, DEFAULT_TRANSIENT};
use heterosync_core::dmft::DmftOptions;
use heterosync_core::fhn::{FnMomentVariant, FnParams};
use heterosync_core::moments::ClassifyOptions;
use heterosync_core::network::RecordSpec;
use heterosync_core::{
    DisorderKind, InitialLaw, InputSchedule, ModelSpec, PopulationSpec, SigmoidSpec,
    TimeGrid,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Moments,
    NetworkQuenched,
    NetworkStochastic,
    Dmft,
    FhnNetwork,
    FhnMoments,
    Scan,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Moments,
        ExperimentKind::NetworkQuenched,
        ExperimentKind::NetworkStochastic,
        ExperimentKind::Dmft,
        ExperimentKind::FhnNetwork,
        ExperimentKind::FhnMoments,
        ExperimentKind::Scan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Moments => "moments",
            ExperimentKind::NetworkQuenched => "network-quenched",
            ExperimentKind::NetworkStochastic => "network-stochastic",
            ExperimentKind::Dmft => "dmft",
            ExperimentKind::FhnNetwork => "fhn-network",
            ExperimentKind::FhnMoments => "fhn-moments",
            ExperimentKind::Scan => "scan",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Disorder kind of the rate model under this experiment.
    pub fn disorder(&self) -> DisorderKind {
        match self {
            ExperimentKind::NetworkQuenched | ExperimentKind::Dmft => DisorderKind::Quenched,
            _ => DisorderKind::StochasticNoise,
        }
    }

    /// Experiments that repeat once per entry of `sweep.sigma`.
    pub fn sweepable(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Moments
                | ExperimentKind::NetworkQuenched
                | ExperimentKind::NetworkStochastic
                | ExperimentKind::Dmft
                | ExperimentKind::FhnNetwork
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl GridConfig {
    pub fn time_grid(&self) -> heterosync_core::Result<TimeGrid> {
        TimeGrid::new(self.t0, self.t_end, self.dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub transient: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceConfig {
    pub enabled: bool,
    /// Length of the twin-trajectory run started from the final state.
    pub horizon: f64,
    pub options: DivergenceOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FhnConfig {
    pub params: FnParams,
    pub initial_spread: f64,
    pub variant: FnMomentVariant,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output: PathBuf,
    pub seed: u64,
    pub model: ModelSpec,
    pub grid: GridConfig,
    pub record: RecordSpec,
    /// When non-empty, sweepable experiments run once per value.
    pub sweep_sigma: Vec<f64>,
    pub scan_sigma: Vec<f64>,
    pub scan_input: Vec<f64>,
    pub classify: ClassifyOptions,
    pub analysis: AnalysisConfig,
    pub divergence: DivergenceConfig,
    pub dmft: DmftOptions,
    pub dump_covariance: bool,
    pub fhn: FhnConfig,
}

impl ExperimentConfig {
    /// Defaults for every key; the rate model is the two-population
    /// excitatory/inhibitory reference network at σ = 1.5, I₁ = 0.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            output: PathBuf::from("out.csv"),
            seed: 1,
            model: ModelSpec::ei_reference(1.5, 0.0, 1000, experiment.disorder()),
            grid: GridConfig {
                t0: 0.0,
                t_end: 100.0,
                dt: 0.01,
            },
            record: RecordSpec::default(),
            sweep_sigma: Vec::new(),
            scan_sigma: vec![0.5, 1.5, 6.0],
            scan_input: vec![0.0],
            classify: ClassifyOptions::default(),
            analysis: AnalysisConfig {
                transient: DEFAULT_TRANSIENT,
                threshold: DEFAULT_THRESHOLD,
            },
            divergence: DivergenceConfig {
                enabled: false,
                horizon: 50.0,
                options: DivergenceOptions::default(),
            },
            dmft: DmftOptions::default(),
            dump_covariance: false,
            fhn: FhnConfig {
                params: FnParams::reference(1.0, 1000),
                initial_spread: 0.1,
                variant: FnMomentVariant::GaussianDerived,
                lambda: range(0.0, 1.5, 0.05),
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::ConfigLine {
                line: line_no,
                message: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::ConfigLine {
                    line: line_no,
                    message: format!("unknown key {key:?}"),
                });
            }
            if entries.insert(key, (line_no, value.trim())).is_some() {
                return Err(CliError::ConfigLine {
                    line: line_no,
                    message: format!("key {key:?} given twice"),
                });
            }
        }
        let (_, kind) = entries
            .get("experiment")
            .ok_or_else(|| CliError::Config("missing required key \"experiment\"".into()))?;
        let kind = ExperimentKind::parse(kind).ok_or_else(|| {
            CliError::Config(format!(
                "unknown experiment {kind:?}; expected one of {}",
                ExperimentKind::ALL.map(|k| k.name()).join(", ")
            ))
        })?;
        let mut cfg = ExperimentConfig::new(kind);
        let mut populations = PopulationLists::default();
        for (key, (line, value)) in &entries {
            cfg.set(key, value, &mut populations)
                .map_err(|message| CliError::ConfigLine {
                    line: *line,
                    message: format!("{key}: {message}"),
                })?;
        }
        populations.apply(&mut cfg.model).map_err(CliError::Config)?;
        cfg.model.coupling.kind = kind.disorder();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form: every key, fixed order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key));
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.model.validate()?;
        self.grid.time_grid()?;
        if self.record.every == 0 {
            return bad("record.every must be >= 1".into());
        }
        if self.sweep_sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("sweep.sigma values must be finite and >= 0".into());
        }
        for (name, g) in [("scan.sigma", &self.scan_sigma), ("scan.input", &self.scan_input), ("fhn.lambda", &self.fhn.lambda)] {
            if g.is_empty() || g.windows(2).any(|w| w[0] > w[1]) || g.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} must be a non-empty sorted list of finite values"));
            }
        }
        if self.scan_sigma.iter().any(|s| *s < 0.0) || self.fhn.lambda.iter().any(|l| *l < 0.0) {
            return bad("scan.sigma and fhn.lambda must be >= 0".into());
        }
        let c = &self.classify;
        if !(c.dt > 0.0 && c.transient >= 0.0 && c.window > 0.0 && c.threshold > 0.0) {
            return bad("classify.dt, classify.window and classify.threshold must be > 0, classify.transient >= 0".into());
        }
        if c.n_ic == 0 || c.n_starts == 0 {
            return bad("classify.n_ic and classify.n_starts must be >= 1".into());
        }
        if !(self.analysis.transient >= 0.0 && self.analysis.threshold > 0.0) {
            return bad("analysis.transient must be >= 0 and analysis.threshold > 0".into());
        }
        let d = &self.divergence;
        if !(d.horizon > 0.0 && d.options.delta0 > 0.0 && d.options.saturation > d.options.delta0 && d.options.skip >= 0.0) {
            return bad("divergence: need horizon > 0, 0 < delta0 < saturation, skip >= 0".into());
        }
        let o = &self.dmft;
        if !(o.damping > 0.0 && o.damping <= 1.0 && o.tol > 0.0 && o.max_iter >= 1) {
            return bad("dmft: need 0 < damping <= 1, tol > 0, max_iter >= 1".into());
        }
        self.fhn.params.validate()?;
        if !(self.fhn.initial_spread >= 0.0 && self.fhn.initial_spread.is_finite()) {
            return bad("fhn.initial_spread must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Value of the first population's input at `t0`.
    pub fn input1(&self) -> f64 {
        self.model.input(0, self.grid.t0)
    }

    fn get(&self, key: &str) -> String {
        let m = &self.model;
        let pops = |f: &dyn Fn(&PopulationSpec) -> String| {
            m.populations.iter().map(f).collect::<Vec<_>>().join(",")
        };
        match key {
            "experiment" => self.experiment.name().into(),
            "output" => self.output.display().to_string(),
            "seed" => self.seed.to_string(),
            "populations.tau" => pops(&|p| num(p.tau)),
            "populations.input" => pops(&|p| input_text(&p.input)),
            "populations.size" => pops(&|p| p.size.to_string()),
            "coupling.mean_weights" => m
                .coupling
                .mean_weights
                .iter()
                .map(|row| list(row))
                .collect::<Vec<_>>()
                .join(";"),
            "coupling.sigma" => num(m.coupling.sigma),
            "sigmoid.gain" => num(m.sigmoid.gain()),
            "sigmoid.offset" => num(m.sigmoid.offset()),
            "initial.mean" => list(&m.initial.mean),
            "initial.var" => list(&m.initial.var),
            "grid.t0" => num(self.grid.t0),
            "grid.t_end" => num(self.grid.t_end),
            "grid.dt" => num(self.grid.dt),
            "record.every" => self.record.every.to_string(),
            "record.tracked" => self.record.tracked.to_string(),
            "sweep.sigma" => list(&self.sweep_sigma),
            "scan.sigma" => list(&self.scan_sigma),
            "scan.input" => list(&self.scan_input),
            "classify.dt" => num(self.classify.dt),
            "classify.transient" => num(self.classify.transient),
            "classify.window" => num(self.classify.window),
            "classify.threshold" => num(self.classify.threshold),
            "classify.n_ic" => self.classify.n_ic.to_string(),
            "classify.n_starts" => self.classify.n_starts.to_string(),
            "classify.perturbation" => num(self.classify.perturbation),
            "analysis.transient" => num(self.analysis.transient),
            "analysis.threshold" => num(self.analysis.threshold),
            "divergence.enabled" => self.divergence.enabled.to_string(),
            "divergence.horizon" => num(self.divergence.horizon),
            "divergence.delta0" => num(self.divergence.options.delta0),
            "divergence.saturation" => num(self.divergence.options.saturation),
            "divergence.skip" => num(self.divergence.options.skip),
            "dmft.damping" => num(self.dmft.damping),
            "dmft.tol" => num(self.dmft.tol),
            "dmft.max_iter" => self.dmft.max_iter.to_string(),
            "dmft.dump_covariance" => self.dump_covariance.to_string(),
            "fhn.a" => num(self.fhn.params.a),
            "fhn.b" => num(self.fhn.params.b),
            "fhn.input" => num(self.fhn.params.input),
            "fhn.kappa" => num(self.fhn.params.kappa),
            "fhn.jbar" => num(self.fhn.params.jbar),
            "fhn.sigma" => num(self.fhn.params.sigma),
            "fhn.size" => self.fhn.params.size.to_string(),
            "fhn.initial_spread" => num(self.fhn.initial_spread),
            "fhn.variant" => self.fhn.variant.name().into(),
            "fhn.lambda" => list(&self.fhn.lambda),
            _ => unreachable!("unregistered key {key}"),
        }
    }

    fn set(&mut self, key: &str, value: &str, pops: &mut PopulationLists) -> Result<(), String> {
        match key {
            "experiment" => {}
            "output" => {
                if value.is_empty() {
                    return Err("empty path".into());
                }
                self.output = PathBuf::from(value);
            }
            "seed" => self.seed = parse_int(value)?,
            "populations.tau" => pops.tau = Some(parse_list(value)?),
            "populations.input" => {
                pops.input = Some(value.split(',').map(|s| parse_input(s.trim())).collect::<Result<_, _>>()?)
            }
            "populations.size" => {
                pops.size = Some(value.split(',').map(|s| parse_int(s.trim())).collect::<Result<_, _>>()?)
            }
            "coupling.mean_weights" => {
                self.model.coupling.mean_weights =
                    value.split(';').map(|row| parse_list(row.trim())).collect::<Result<_, _>>()?
            }
            "coupling.sigma" => self.model.coupling.sigma = parse_num(value)?,
            "sigmoid.gain" | "sigmoid.offset" => {
                let x = parse_num(value)?;
                let s = self.model.sigmoid;
                let (g, o) = if key == "sigmoid.gain" { (x, s.offset()) } else { (s.gain(), x) };
                self.model.sigmoid = SigmoidSpec::new(g, o).map_err(|e| e.to_string())?;
            }
            "initial.mean" => pops.initial_mean = Some(parse_list(value)?),
            "initial.var" => pops.initial_var = Some(parse_list(value)?),
            "grid.t0" => self.grid.t0 = parse_num(value)?,
            "grid.t_end" => self.grid.t_end = parse_num(value)?,
            "grid.dt" => self.grid.dt = parse_num(value)?,
            "record.every" => self.record.every = parse_int(value)?,
            "record.tracked" => self.record.tracked = parse_int(value)?,
            "sweep.sigma" => self.sweep_sigma = parse_grid(value, true)?,
            "scan.sigma" => self.scan_sigma = parse_grid(value, false)?,
            "scan.input" => self.scan_input = parse_grid(value, false)?,
            "classify.dt" => self.classify.dt = parse_num(value)?,
            "classify.transient" => self.classify.transient = parse_num(value)?,
            "classify.window" => self.classify.window = parse_num(value)?,
            "classify.threshold" => self.classify.threshold = parse_num(value)?,
            "classify.n_ic" => self.classify.n_ic = parse_int(value)?,
            "classify.n_starts" => self.classify.n_starts = parse_int(value)?,
            "classify.perturbation" => self.classify.perturbation = parse_num(value)?,
            "analysis.transient" => self.analysis.transient = parse_num(value)?,
            "analysis.threshold" => self.analysis.threshold = parse_num(value)?,
            "divergence.enabled" => self.divergence.enabled = parse_bool(value)?,
            "divergence.horizon" => self.divergence.horizon = parse_num(value)?,
            "divergence.delta0" => self.divergence.options.delta0 = parse_num(value)?,
            "divergence.saturation" => self.divergence.options.saturation = parse_num(value)?,
            "divergence.skip" => self.divergence.options.skip = parse_num(value)?,
            "dmft.damping" => self.dmft.damping = parse_num(value)?,
            "dmft.tol" => self.dmft.tol = parse_num(value)?,
            "dmft.max_iter" => self.dmft.max_iter = parse_int(value)?,
            "dmft.dump_covariance" => self.dump_covariance = parse_bool(value)?,
            "fhn.a" => self.fhn.params.a = parse_num(value)?,
            "fhn.b" => self.fhn.params.b = parse_num(value)?,
            "fhn.input" => self.fhn.params.input = parse_num(value)?,
            "fhn.kappa" => self.fhn.params.kappa = parse_num(value)?,
            "fhn.jbar" => self.fhn.params.jbar = parse_num(value)?,
            "fhn.sigma" => self.fhn.params.sigma = parse_num(value)?,
            "fhn.size" => self.fhn.params.size = parse_int(value)?,
            "fhn.initial_spread" => self.fhn.initial_spread = parse_num(value)?,
            "fhn.variant" => {
                self.fhn.variant = match value {
                    "plus-sign" => FnMomentVariant::PlusSign,
                    "gaussian-derived" => FnMomentVariant::GaussianDerived,
                    _ => return Err(format!("expected plus-sign or gaussian-derived, got {value:?}")),
                }
            }
            "fhn.lambda" => self.fhn.lambda = parse_grid(value, false)?,
            _ => unreachable!("unregistered key {key}"),
        }
        Ok(())
    }
}

/// Accepted keys, in echo order.
pub const KEYS: &[&str] = &[
    "experiment",
    "output",
    "seed",
    "populations.tau",
    "populations.input",
    "populations.size",
    "coupling.mean_weights",
    "coupling.sigma",
    "sigmoid.gain",
    "sigmoid.offset",
    "initial.mean",
    "initial.var",
    "grid.t0",
    "grid.t_end",
    "grid.dt",
    "record.every",
    "record.tracked",
    "sweep.sigma",
    "scan.sigma",
    "scan.input",
    "classify.dt",
    "classify.transient",
    "classify.window",
    "classify.threshold",
    "classify.n_ic",
    "classify.n_starts",
    "classify.perturbation",
    "analysis.transient",
    "analysis.threshold",
    "divergence.enabled",
    "divergence.horizon",
    "divergence.delta0",
    "divergence.saturation",
    "divergence.skip",
    "dmft.damping",
    "dmft.tol",
    "dmft.max_iter",
    "dmft.dump_covariance",
    "fhn.a",
    "fhn.b",
    "fhn.input",
    "fhn.kappa",
    "fhn.jbar",
    "fhn.sigma",
    "fhn.size",
    "fhn.initial_spread",
    "fhn.variant",
    "fhn.lambda",
];

/// Per-population lists, collected first so that the population count can
/// change from the default.
#[derive(Default)]
struct PopulationLists {
    tau: Option<Vec<f64>>,
    input: Option<Vec<InputSchedule>>,
    size: Option<Vec<usize>>,
    initial_mean: Option<Vec<f64>>,
    initial_var: Option<Vec<f64>>,
}

impl PopulationLists {
    fn apply(self, model: &mut ModelSpec) -> Result<(), String> {
        let p_of = |n: Option<usize>| n.unwrap_or(model.p());
        let p = p_of(self.tau.as_ref().map(Vec::len));
        let lens = [
            ("populations.tau", self.tau.as_ref().map(Vec::len)),
            ("populations.input", self.input.as_ref().map(Vec::len)),
            ("populations.size", self.size.as_ref().map(Vec::len)),
            ("initial.mean", self.initial_mean.as_ref().map(Vec::len)),
            ("initial.var", self.initial_var.as_ref().map(Vec::len)),
        ];
        for (name, len) in lens {
            if p_of(len) != p {
                return Err(format!("{name} has {} entries but there are {p} populations", p_of(len)));
            }
        }
        let old = std::mem::take(&mut model.populations);
        let tau = self.tau.unwrap_or_else(|| old.iter().map(|q| q.tau).collect());
        let input = self.input.unwrap_or_else(|| old.iter().map(|q| q.input.clone()).collect());
        let size = self.size.unwrap_or_else(|| old.iter().map(|q| q.size).collect());
        model.populations = (0..p)
            .map(|a| PopulationSpec {
                tau: tau[a],
                input: input[a].clone(),
                size: size[a],
            })
            .collect();
        let initial = InitialLaw {
            mean: self.initial_mean.unwrap_or_else(|| model.initial.mean.clone()),
            var: self.initial_var.unwrap_or_else(|| model.initial.var.clone()),
        };
        model.initial = initial;
        Ok(())
    }
}

/// Shortest round-tripping decimal form.
pub(crate) fn num(x: f64) -> String {
    let plain = format!("{x}");
    let sci = format!("{x:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

fn input_text(s: &InputSchedule) -> String {
    match s {
        InputSchedule::Constant(c) => num(*c),
        InputSchedule::Table(knots) => knots
            .iter()
            .map(|(t, v)| format!("{}@{}", num(*t), num(*v)))
            .collect::<Vec<_>>()
            .join("|"),
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("not a non-negative integer: {s:?}"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| parse_num(x.trim())).collect()
}

/// A constant, or knots `t@v|t@v|…` of a piecewise-linear schedule.
fn parse_input(s: &str) -> Result<InputSchedule, String> {
    if !s.contains('@') {
        return parse_num(s).map(InputSchedule::Constant);
    }
    let knots = s
        .split('|')
        .map(|knot| {
            let (t, v) = knot.split_once('@').ok_or_else(|| format!("bad knot {knot:?}"))?;
            Ok((parse_num(t.trim())?, parse_num(v.trim())?))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(InputSchedule::Table(knots))
}

/// Comma list, or an inclusive range `start:end:step`.
fn parse_grid(s: &str, allow_empty: bool) -> Result<Vec<f64>, String> {
    if s.is_empty() {
        return if allow_empty { Ok(Vec::new()) } else { Err("empty list".into()) };
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [_] => parse_list(s),
        [a, b, step] => {
            let (a, b, step) = (parse_num(a.trim())?, parse_num(b.trim())?, parse_num(step.trim())?);
            if !(step > 0.0) || b < a {
                return Err("range needs start <= end and step > 0".into());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            if n > 1_000_000 {
                return Err(format!("range has {n} points"));
            }
            Ok(range(a, b, step))
        }
        _ => Err(format!("expected a comma list or start:end:step, got {s:?}")),
    }
}

/// Inclusive grid rounded to 12 decimals so that `0:1:0.1` lands on
/// 0.3 rather than 0.30000000000000004.
pub(crate) fn range(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}
