use loopsoup_cli::config::{parse_kv, ExperimentConfig};
use proptest::prelude::*;

fn cover_kv(seed: u64, kappa: f64, replicas: usize, side: u32) -> String {
    format!("command = covertime\nseed = {seed}\nkappa = {kappa}\nreplicas = {replicas}\nset = box:{side}\n")
}

proptest! {
    #[test]
    fn serialized_config_parses_back(seed in any::<u64>(), kappa in 1e-6f64..10.0, replicas in 1usize..1_000_000, side in 1u32..64) {
        let cfg = ExperimentConfig::parse(&cover_kv(seed, kappa, replicas, side)).unwrap();
        let back = ExperimentConfig::parse(&cfg.serialize()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), cfg.serialize());
    }

    #[test]
    fn recorded_config_omits_execution_keys(workers in 0usize..16) {
        let text = format!("{}workers = {workers}\nout-dir = somewhere\n", cover_kv(1, 0.5, 10, 3));
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let recorded = parse_kv(&cfg.serialize_recorded(), "recorded").unwrap();
        prop_assert!(!recorded.contains_key("workers") && !recorded.contains_key("out-dir"));
        prop_assert!(recorded.contains_key("seed"));
    }
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(ExperimentConfig::parse("command = greens\ncolour = blue\n").is_err());
}
