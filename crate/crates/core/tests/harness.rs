use std::path::Path;

use superconv::data::synth_blobs;
use superconv::harness::{compare, run_limited_data_sweep, train, ExperimentConfig, LOG_COLUMNS};
use superconv::nn::{LayerSpec, Mode, Model, ModelSpec};
use superconv::optim::Optimizer;
use superconv::Error;

const BLOBS: &str = r#"
version = 1
name = "blobs"
seed = 11
batch_size = 16
epochs = 4
thresholds = [0.5, 0.999999]

[data]
source = "blobs"
n_classes = 3
per_class = 50
test_per_class = 30
spread = 0.3

[model]
layers = [
  { type = "dense", inputs = 3, outputs = 10 },
  { type = "batchnorm", dim = 10, maf = 0.9 },
  { type = "relu" },
  { type = "dropout", ratio = 0.1 },
  { type = "dense", inputs = 10, outputs = 3 },
]

[optimizer]
method = "sgd-momentum"
weight_decay = 5e-4

[schedule]
kind = "one-cycle"
min_lr = 0.02
max_lr = 0.2
stepsize = 1
unit = "epochs"

[momentum]
kind = "cyclical"
max = 0.95
min = 0.85
stepsize = 1
unit = "epochs"

[sweep]
sizes = [50, 20]

[sweep.baseline.schedule]
kind = "piecewise-constant"
base_lr = 0.02
boundaries = [3]
unit = "epochs"

[sweep.baseline.momentum]
kind = "constant"
value = 0.9
"#;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text, Path::new(".")).unwrap()
}

fn csv_of(cfg: &ExperimentConfig) -> String {
    let log = train(cfg).unwrap();
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn logs_replay_the_schedules() {
    let c = cfg(BLOBS);
    let log = train(&c).unwrap();
    // 150 examples in batches of 16
    assert_eq!(log.records.len(), 4 * 10);
    let lr = c.schedule.build(40, 10).unwrap();
    let m = c.momentum.build(10, true).unwrap();
    for (i, r) in log.records.iter().enumerate() {
        assert_eq!(r.iteration, i as u64);
        assert_eq!(r.epoch, i as u64 / 10);
        assert_eq!(r.lr.to_bits(), lr.lr_at(r.iteration).unwrap().to_bits());
        assert_eq!(r.momentum.to_bits(), m.momentum_at(r.iteration).to_bits());
        assert_eq!(r.test.is_some(), (i + 1) % 10 == 0);
    }
    let s = &log.summary;
    assert!(!s.diverged);
    assert!(s.best_test_accuracy > 0.9, "{s:?}");
    assert!(s.best_test_accuracy >= s.final_test_accuracy);
    assert_eq!(s.thresholds[0].iteration, log.evaluations().find(|e| e.1.accuracy >= 0.5).map(|e| e.0));
    let gap = s.final_train_accuracy.unwrap() - s.final_test_accuracy;
    assert_eq!(s.generalization_gap, Some(gap));
}

#[test]
fn identical_config_gives_identical_csv() {
    let c = cfg(BLOBS);
    let a = csv_of(&c);
    assert_eq!(a, csv_of(&c));
    assert_eq!(a.lines().next().unwrap(), LOG_COLUMNS.join(","));
    let mut other = c.clone();
    other.seed += 1;
    assert_ne!(a, csv_of(&other));
}

#[test]
fn output_path_does_not_touch_the_log() {
    let c = cfg(BLOBS);
    let mut moved = c.clone();
    moved.output = Some("elsewhere/run.csv".into());
    assert_eq!(train(&c).unwrap().records, train(&moved).unwrap().records);
}

#[test]
fn estimator_is_observational() {
    let off = cfg(BLOBS);
    let mut on = off.clone();
    on.estimator.enabled = true;
    on.estimator.cadence = 3;
    let a = train(&off).unwrap();
    let b = train(&on).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
        assert_eq!(x.train_accuracy.to_bits(), y.train_accuracy.to_bits());
        assert_eq!(x.test, y.test);
        assert!(x.estimate.is_none());
    }
    assert!(b.records.iter().any(|r| r.estimate.is_some()));
    // estimates only at snapshot iterations, and never before three are held
    for r in &b.records {
        if r.estimate.is_some() {
            assert_eq!((r.iteration + 1) % 3, 0);
            assert!(r.iteration >= 5);
        }
    }
    assert!(b.summary.final_estimate.is_some());
}

#[test]
fn zero_iterations_leave_only_the_initial_evaluation() {
    let c = cfg(&BLOBS.replace("epochs = 4", "iterations = 0"));
    let log = train(&c).unwrap();
    assert!(log.records.is_empty());
    assert_eq!(log.summary.final_test_accuracy, log.initial.accuracy);
    assert_eq!(log.summary.iterations_run, 0);
}

#[test]
fn explosive_learning_rate_is_flagged() {
    let text = BLOBS
        .replace("min_lr = 0.02\nmax_lr = 0.2", "min_lr = 1e4\nmax_lr = 1e6")
        .replace("{ type = \"batchnorm\", dim = 10, maf = 0.9 },", "");
    let log = train(&cfg(&text)).unwrap();
    assert!(log.summary.diverged);
    assert!(log.records.len() < 40);
    assert_eq!(log.summary.final_train_accuracy, None);
}

#[test]
fn inconsistent_configs_fail_before_training() {
    let big_batch = cfg(&BLOBS.replace("batch_size = 16", "batch_size = 151"));
    assert!(matches!(train(&big_batch), Err(Error::Validation(_))));
    // the cycle does not fit in one epoch
    let long_cycle = cfg(&BLOBS.replace("epochs = 4", "epochs = 1"));
    assert!(matches!(train(&long_cycle), Err(Error::Validation(_))));
}

#[test]
fn self_comparison_and_trial_statistics() {
    let c = cfg(BLOBS);
    let r = compare(&c, &c, 2).unwrap();
    assert_eq!(r.gap, Some(0.0));
    assert_eq!(r.a.trials.len(), 2);
    assert_eq!(r.a.trials[1].seed, c.seed + 1);
    assert!(r.a.std_accuracy.is_some());
    let single = compare(&c, &c, 1).unwrap();
    assert_eq!(single.a.std_accuracy, None);
    assert!(compare(&c, &c, 0).is_err());
}

#[test]
fn compare_needs_matching_data_and_shape() {
    let c = cfg(BLOBS);
    let other_data = cfg(&BLOBS.replace("spread = 0.3", "spread = 0.4"));
    assert!(compare(&c, &other_data, 1).is_err());
    let other_maf = cfg(&BLOBS.replace("maf = 0.9", "maf = 0.99"));
    assert!(compare(&c, &other_maf, 1).is_ok());
}

#[test]
fn sweep_reports_one_gap_per_size() {
    let c = cfg(BLOBS);
    let r = run_limited_data_sweep(&c, &[50, 20], 1).unwrap();
    assert_eq!(r.points.iter().map(|p| p.per_class).collect::<Vec<_>>(), vec![50, 20]);
    assert_eq!(r.gaps().len(), 2);
    assert_eq!(r.points[1].comparison.b.name, "blobs-baseline");
    let single = run_limited_data_sweep(&c, &[30], 1).unwrap();
    assert_eq!(single.gaps().len(), 1);
    assert!(run_limited_data_sweep(&c, &[20, 50], 1).is_err());
}

#[test]
fn blobs_are_linearly_separable() {
    // a single dense layer trained by plain gradient descent separates them
    let ds = synth_blobs(2, 100, 0.1, 7).unwrap();
    let mut model = Model::new(ModelSpec {
        layers: vec![LayerSpec::Dense { inputs: 2, outputs: 2 }],
        seed: 1,
    })
    .unwrap();
    let mut opt = Optimizer::new(Default::default(), model.n_params()).unwrap();
    let x = ds.inputs().view();
    for _ in 0..200 {
        let trace = model.forward(x, ds.labels(), Mode::Train).unwrap();
        let g = model.backward(&trace).unwrap();
        opt.step(model.params_mut(), &g, 0.5, 0.0).unwrap();
    }
    let (_, acc) = model.evaluate(&ds, 1000).unwrap();
    assert_eq!(acc, 1.0);
}
