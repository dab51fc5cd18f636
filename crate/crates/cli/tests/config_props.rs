use heterosync_cli::config::KEYS;
use heterosync_cli::{ExperimentConfig, ExperimentKind};
use heterosync_core::InputSchedule;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1.0..1.0f64, Just(0.0), Just(1e-9)]
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop::sample::select(ExperimentKind::ALL.to_vec()),
        any::<u64>(),
        0.0..10.0f64,
        prop::collection::vec(finite(), 4),
        prop::collection::vec(0.0..5.0f64, 0..4),
        (1usize..50, 0usize..20),
        prop::collection::vec((0.0..100.0f64, finite()), 1..4),
        (prop::sample::select(vec![1e-3, 0.01, 0.05, 0.1, 0.25]), 0.01..1.0f64),
    )
        .prop_map(|(kind, seed, sigma, w, sweep, (every, tracked), knots, (dt, damping))| {
            let mut c = ExperimentConfig::new(kind);
            c.seed = seed;
            c.model.coupling.sigma = sigma;
            c.model.coupling.mean_weights = vec![vec![w[0], w[1]], vec![w[2], w[3]]];
            c.sweep_sigma = sweep;
            c.record.every = every;
            c.record.tracked = tracked;
            let mut t = 0.0;
            let knots = knots
                .into_iter()
                .map(|(step, v)| {
                    t += step + 1e-3;
                    (t, v)
                })
                .collect();
            c.model.populations[0].input = InputSchedule::Table(knots);
            c.grid.dt = dt;
            c.dmft.damping = damping;
            c.fhn.params.sigma = sigma;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn echo_re_parses_identically(cfg in config()) {
        let text = cfg.echo();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.echo(), text);
    }

    #[test]
    fn echo_lists_every_key_once(cfg in config()) {
        let text = cfg.echo();
        let keys: Vec<&str> = text.lines().map(|l| l.split_once('=').unwrap().0).collect();
        prop_assert_eq!(keys, KEYS.to_vec());
    }
}
