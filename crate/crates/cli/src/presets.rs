//! Built-in configurations at desk scale (smaller N, coarser dt).

use std::path::PathBuf;

use heterosync_core::fhn::{FnMomentVariant, FnParams};

use crate::config::{range, ExperimentConfig, ExperimentKind};

pub const PRESET_NAMES: [&str; 5] = ["fig1-scan", "fig2-left", "fig2-right", "fig3-network", "fig3d-sweep"];

pub fn builtin_presets() -> Vec<(&'static str, ExperimentConfig)> {
    PRESET_NAMES.iter().map(|&n| (n, preset(n).expect("listed preset exists"))).collect()
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let mut cfg = match name {
        "fig1-scan" => {
            let mut c = ExperimentConfig::new(ExperimentKind::Scan);
            c.scan_sigma = range(0.0, 6.0, 0.25);
            c.scan_input = range(-4.0, 4.0, 0.5);
            c
        }
        "fig2-left" => {
            let mut c = ExperimentConfig::new(ExperimentKind::Moments);
            c.sweep_sigma = vec![0.5, 1.5, 6.0];
            c.grid.t_end = 100.0;
            c
        }
        "fig2-right" => {
            let mut c = ExperimentConfig::new(ExperimentKind::NetworkQuenched);
            c.model = c.model.with_sizes(1000);
            c.sweep_sigma = vec![0.9, 1.6, 3.0];
            c.grid.t_end = 100.0;
            c.grid.dt = 0.05;
            c.record.every = 2;
            c.analysis.transient = 50.0;
            c.divergence.enabled = true;
            c
        }
        "fig3-network" => {
            let mut c = ExperimentConfig::new(ExperimentKind::FhnNetwork);
            c.fhn.params = FnParams::reference(1.0, 2000);
            c.sweep_sigma = vec![0.5, 1.0, 3.0];
            c.grid.t_end = 200.0;
            c.grid.dt = 0.05;
            c.record.every = 2;
            c.record.tracked = 20;
            c.divergence.enabled = true;
            c
        }
        "fig3d-sweep" => {
            let mut c = ExperimentConfig::new(ExperimentKind::FhnMoments);
            c.fhn.lambda = range(0.0, 1.5, 0.05);
            c.fhn.variant = FnMomentVariant::GaussianDerived;
            c
        }
        _ => return None,
    };
    cfg.output = PathBuf::from(format!("{name}.csv"));
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for (name, cfg) in builtin_presets() {
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(ExperimentConfig::parse(&cfg.echo()).unwrap(), cfg, "{name}");
        }
        assert!(preset("fig9").is_none());
    }

    #[test]
    fn figure_parameters() {
        assert_eq!(preset("fig2-left").unwrap().sweep_sigma, vec![0.5, 1.5, 6.0]);
        assert_eq!(preset("fig2-right").unwrap().sweep_sigma, vec![0.9, 1.6, 3.0]);
        let fhn = preset("fig3-network").unwrap().fhn.params;
        assert_eq!((fhn.a, fhn.b, fhn.input, fhn.jbar, fhn.kappa), (0.4, 2.0, 0.5, 1.5, 2.0));
        let m = preset("fig1-scan").unwrap().model;
        assert_eq!(m.coupling.mean_weights, vec![vec![15.0, -12.0], vec![16.0, -5.0]]);
        assert_eq!(m.input(1, 0.0), -3.0);
        assert!(m.populations.iter().all(|p| p.tau == 1.0));
    }
}
