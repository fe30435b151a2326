use gradual_dae::data::{Dataset, IdxImages};
use gradual_dae::harness::{
    grid_search, read_csv, sweep_f, sweep_train_size, to_csv_string, ExperimentConfig, GridTarget, ModelFile,
};
use gradual_dae::model::{DecoderHead, EncoderStack};
use gradual_dae::numerics::SeededRng;
use gradual_dae::Error;

/// Ten classes of 4×4 images: class c lights up pixel c and c + 6.
fn blobs(per_class: usize, seed: u64) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for i in 0..per_class * 10 {
        let class = i % 10;
        for p in 0..16 {
            let on = p == class || p == class + 6;
            let v = if on { 200.0 + 55.0 * rng.uniform() } else { 40.0 * rng.uniform() };
            pixels.push(v as u8);
        }
        labels.push(class as u8);
    }
    let images = IdxImages {
        count: labels.len(),
        rows: 4,
        cols: 4,
        pixels,
    };
    Dataset::from_idx(&images, &labels).unwrap()
}

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.hidden_sizes = vec![12, 8];
    cfg.stage1_epochs = 3;
    cfg.stage_budget = 4;
    cfg.f_values = vec![0.0, 0.5, 1.0];
    cfg.n_splits = 3;
    cfg.train_sizes = vec![100, 200];
    cfg.pretrain.learning_rate = 0.05;
    cfg.pretrain.batch_size = 10;
    cfg.finetune.learning_rate = 0.1;
    cfg.finetune.batch_size = 10;
    cfg.patience = 5;
    cfg.max_finetune_epochs = 60;
    cfg.seed = 3;
    cfg
}

#[test]
fn sweep_f_counts_and_summaries() {
    let (train, test) = (blobs(20, 1), blobs(10, 2));
    let cfg = small_config();
    let out = sweep_f(&cfg, &train, &test, &mut |_| {}).unwrap();
    let evals: Vec<_> = out.records.iter().filter(|r| r.metric == "test_relative_ce").collect();
    assert_eq!(evals.len(), cfg.f_values.len() * cfg.n_splits);
    assert!(evals.iter().all(|r| r.value >= 0.0));
    assert_eq!(out.summaries.len(), 3);
    for s in &out.summaries {
        let expected: Vec<f64> = evals.iter().filter(|r| r.f == Some(s.f)).map(|r| r.value).collect();
        assert_eq!(s.values, expected);
        assert!(s.se >= 0.0);
    }
    let units: Vec<f64> = out
        .records
        .iter()
        .filter(|r| r.phase == "pretrain_stage2" && r.metric == "units_consumed")
        .map(|r| r.value)
        .collect();
    assert!(units.iter().all(|&u| u == 4.0));
    assert_eq!(out.records.last().unwrap().metric, "test_relative_ce_se");
}

#[test]
fn sweep_f_at_depth_one_is_flat_in_f() {
    let (train, test) = (blobs(10, 1), blobs(5, 2));
    let mut cfg = small_config();
    cfg.hidden_sizes = vec![8];
    let out = sweep_f(&cfg, &train, &test, &mut |_| {}).unwrap();
    let means: Vec<f64> = out.summaries.iter().map(|s| s.mean).collect();
    assert!(means.windows(2).all(|w| w[0] == w[1]), "{means:?}");
}

#[test]
fn sweep_f_csv_is_reproducible() {
    let (train, test) = (blobs(10, 1), blobs(5, 2));
    let cfg = small_config();
    let a = to_csv_string(&sweep_f(&cfg, &train, &test, &mut |_| {}).unwrap().records).unwrap();
    let b = to_csv_string(&sweep_f(&cfg, &train, &test, &mut |_| {}).unwrap().records).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed += 1;
    let c = to_csv_string(&sweep_f(&other, &train, &test, &mut |_| {}).unwrap().records).unwrap();
    assert_ne!(a, c);
    assert_eq!(read_csv(a.as_bytes()).unwrap().len(), a.lines().count() - 1);
}

#[test]
fn size_sweep_runs_every_cell() {
    let (train, test) = (blobs(30, 1), blobs(10, 2));
    let mut cfg = small_config();
    cfg.train_sizes = vec![100];
    let out = sweep_train_size(&cfg, &train, &test, &mut |_| {}).unwrap();
    let errors: Vec<_> = out.records.iter().filter(|r| r.metric == "test_error").collect();
    assert_eq!(errors.len(), 2 * cfg.n_splits);
    assert!(errors.iter().all(|r| r.value.is_finite() && r.value <= 0.9));
    assert_eq!(out.summaries.len(), 2);
    if let Some(&(size, pct)) = out.improvements.first() {
        assert_eq!(size, 100);
        let expected = (out.summaries[1].mean - out.summaries[0].mean) / out.summaries[1].mean * 100.0;
        assert_eq!(pct, expected);
    }
}

#[test]
fn size_sweep_rejects_oversized_subsets() {
    let (train, test) = (blobs(5, 1), blobs(5, 2));
    let mut cfg = small_config();
    cfg.train_sizes = vec![1000];
    assert!(sweep_train_size(&cfg, &train, &test, &mut |_| {}).is_err());
}

#[test]
fn grid_search_scores_every_point() {
    let train = blobs(15, 4);
    let mut cfg = small_config();
    cfg.train_size = Some(100);
    cfg.grid_learning_rate = vec![0.0001, 0.1];
    cfg.grid_momentum = vec![0.0, 0.5];
    let report = grid_search(&cfg, &train, &mut |_| {}).unwrap();
    assert_eq!(report.scores.len(), 4);
    let min = report.scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    assert_eq!(report.best().1, min);
    assert_eq!(report.records(cfg.seed).len(), 4 * 5);

    cfg.grid_target = GridTarget::Finetune;
    let report = grid_search(&cfg, &train, &mut |_| {}).unwrap();
    assert!(report.scores.iter().all(|s| (0.0..=1.0).contains(&s.1)));
}

#[test]
fn model_file_round_trip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let mut rng = SeededRng::new(1);
    let model = ModelFile {
        encoder: EncoderStack::init(16, &[6, 4], &mut rng).unwrap(),
        decoder: DecoderHead::init(4, 16, &mut rng).unwrap(),
    };
    model.save(&path).unwrap();
    assert_eq!(ModelFile::load(&path).unwrap(), model);

    let mismatched = ModelFile {
        encoder: model.encoder.clone(),
        decoder: DecoderHead::init(6, 16, &mut rng).unwrap(),
    };
    mismatched.save(&path).unwrap();
    assert!(matches!(ModelFile::load(&path), Err(Error::ShapeMismatch { .. })));

    std::fs::write(&path, r#"{"encoder":{"layers":[{"weights":{"rows":2,"cols":2,"data":[1.0]},"biases":[0,0]}]},"decoder":{"layer":{"weights":{"rows":2,"cols":2,"data":[1,2,3,4]},"biases":[0,0]}}}"#).unwrap();
    assert!(ModelFile::load(&path).is_err());
}
