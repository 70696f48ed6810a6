use super::*;
use crate::models::MuConfig;
use crate::tasks::{Property, RandomGraph};

fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::new(
        TaskSpec::Barbell { n: 12, k_path: 2, feature_std: None },
        ModelConfig { layers: 1, k: 3, hidden: 4, mu: Some(MuConfig { hidden: 4, ..MuConfig::default() }), ..ModelConfig::default() },
    );
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.data = DataConfig { train: 8, val: 4, test: 4, seed: 3, dir: None };
    cfg.optimizer.lr = 0.01;
    cfg
}

fn strip_time(mut r: RunRecord) -> RunRecord {
    r.wall_seconds = 0.0;
    r
}

#[test]
fn zero_epochs_is_untrained_evaluation() {
    let mut cfg = tiny_config();
    cfg.epochs = 0;
    let data = Dataset::for_config(&cfg).unwrap();
    let run = train_seed(&cfg, &data, 0, None).unwrap();
    assert!(run.record.history.is_empty());
    assert_eq!(run.record.best_epoch, 0);
    assert_eq!(run.record.test, run.record.untrained_test);
}

#[test]
fn training_is_bit_reproducible() {
    let cfg = tiny_config();
    let data = Dataset::for_config(&cfg).unwrap();
    let a = train_seed(&cfg, &data, 5, None).unwrap();
    let b = train_seed(&cfg, &data, 5, None).unwrap();
    assert_eq!(strip_time(a.record), strip_time(b.record));
    assert_eq!(a.model.params(), b.model.params());
    let c = train_seed(&cfg, &data, 6, None).unwrap();
    assert_ne!(c.model.params(), b.model.params());
}

#[test]
fn training_reduces_loss() {
    let mut cfg = tiny_config();
    cfg.epochs = 30;
    let data = Dataset::for_config(&cfg).unwrap();
    let run = train_seed(&cfg, &data, 1, None).unwrap();
    let first = run.record.history.first().unwrap().train_loss;
    let last = run.record.history.last().unwrap().train_loss;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn early_stopping_respects_patience() {
    let mut cfg = tiny_config();
    cfg.epochs = 200;
    cfg.patience = 3;
    cfg.optimizer.lr = 0.5;
    let data = Dataset::for_config(&cfg).unwrap();
    let r = train_seed(&cfg, &data, 0, None).unwrap().record;
    assert!(r.epochs_run < 200);
    assert_eq!(r.epochs_run, r.best_epoch + 3);
}

#[test]
fn nan_features_abort_training() {
    let cfg = tiny_config();
    let mut data = Dataset::for_config(&cfg).unwrap();
    data.train[2].x.as_mut_slice()[0] = f64::NAN;
    let err = train_seed(&cfg, &data, 0, None).unwrap_err();
    assert!(matches!(err, Error::NaNLoss { epoch: 1, .. }), "{err}");
}

#[test]
fn run_writes_artifacts_with_matching_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config();
    cfg.seeds = vec![1, 2];
    cfg.dump_mu = true;
    let data = Dataset::for_config(&cfg).unwrap();
    let runs = run(&cfg, &data, Some(dir.path()), 2).unwrap();
    let persisted: RunConfig = io::read_json(&dir.path().join("config.json")).unwrap();
    assert_eq!(persisted, cfg);
    for r in &runs {
        let seed_dir = dir.path().join(format!("seed-{}", r.record.seed));
        let rec: RunRecord = io::read_json(&seed_dir.join("record.json")).unwrap();
        assert_eq!(rec.config_hash, persisted.hash());
        assert_eq!(rec.mu.len(), 4);
        let lines = std::fs::read_to_string(seed_dir.join("metrics.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), rec.history.len());
        let model = io::read_checkpoint(&seed_dir.join("checkpoint")).unwrap();
        assert_eq!(model.params(), r.model.params());
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("barbell,mean,mse"));
    // Sequential and threaded execution agree.
    let serial = run(&cfg, &data, None, 1).unwrap();
    for (a, b) in serial.iter().zip(&runs) {
        assert_eq!(a.model.params(), b.model.params());
    }
}

#[test]
fn dataset_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let task = TaskSpec::GraphProperty { property: Property::Sssp, n_min: 6, n_max: 9, generator: RandomGraph::ErdosRenyi { p: 0.5 } };
    let data = Dataset::generate(&task, &DataConfig { train: 2, val: 1, test: 2, seed: 4, dir: None }).unwrap();
    io::write_dataset(dir.path(), &data).unwrap();
    let back = io::read_dataset(dir.path()).unwrap();
    assert_eq!(back, data);
    assert!(matches!(io::read_dataset(&dir.path().join("nope")), Err(Error::DatasetMissing(_))));
}

#[test]
fn config_json_defaults_and_errors() {
    let cfg = RunConfig::from_json(r#"{"task": {"task": "ring-routing", "n": 16}}"#).unwrap();
    assert_eq!(cfg.patience, 50);
    assert_eq!(cfg.data.train, 512);
    assert!(matches!(RunConfig::from_json(r#"{"task": {"task": "ring-routing", "n": 16}, "bogus": 1}"#), Err(Error::ConfigInvalid(_))));
    assert!(matches!(RunConfig::from_json(r#"{"task": {"task": "barbell", "n": 50}, "seeds": []}"#), Err(Error::ConfigInvalid(_))));
    assert_ne!(cfg.hash(), RunConfig { epochs: 3, ..cfg.clone() }.hash());
}

#[test]
fn instance_seeds_differ_across_splits() {
    let mut seen = std::collections::HashSet::new();
    for split in 0..3 {
        for i in 0..100 {
            assert!(seen.insert(instance_seed(7, split, i)));
        }
    }
}
