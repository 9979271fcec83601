//! Config-driven experiments: training runs, comparisons, limited-data
//! sweeps and range tests, with CSV/JSON output.

mod compare;
mod config;
mod train;

pub use compare::{
    baseline_of, compare, run_limited_data_sweep, run_trials, ArmReport, Comparison, SweepPoint, SweepReport, Trial,
    DEFAULT_TRIALS,
};
pub use config::{
    default_mnist_dir, mnist, BaselineConfig, BoundsConfig, DataConfig, EstimatorConfig, ExperimentConfig, ModelConfig,
    SweepConfig, CONFIG_VERSION, MNIST_DIR_ENV, MNIST_FILES,
};
pub use train::{train, Evaluation, Record, Summary, ThresholdHit, TrainingLog, DIVERGENCE_LOSS, LOG_COLUMNS};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::Model;
use crate::range_test::{run_range_test, suggest_bounds, Bounds, ModelSubject, RangeTestReport};
use config::{derive_seed, SeedStream};

#[derive(Debug, Clone, PartialEq)]
pub struct RangeTestOutcome {
    pub report: RangeTestReport,
    /// Absent when too few accuracy samples were taken.
    pub bounds: Option<Bounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeTestSummary<'a> {
    pub name: &'a str,
    pub samples: usize,
    pub stopped_at: Option<f64>,
    pub bounds: Option<Bounds>,
}

impl RangeTestOutcome {
    pub fn summary<'a>(&self, cfg: &'a ExperimentConfig) -> RangeTestSummary<'a> {
        RangeTestSummary {
            name: &cfg.name,
            samples: self.report.samples.len(),
            stopped_at: self.report.stopped_at,
            bounds: self.bounds,
        }
    }
}

/// Range test using the config's data, model, optimizer and `[range_test]`
/// section. Momentum is held at the configured schedule's starting value.
pub fn range_test(cfg: &ExperimentConfig) -> Result<RangeTestOutcome> {
    cfg.validate()?;
    let rt = cfg
        .range_test
        .ok_or_else(|| Error::Validation("config has no [range_test] section".into()))?;
    let (train_set, test_set) = cfg.load_data()?;
    let per_epoch = cfg.iters_per_epoch(train_set.len());
    let momentum = cfg.momentum.build(per_epoch, false)?.momentum_at(0);
    let model = Model::new(cfg.model.spec(cfg.seed))?;
    let mut subject = ModelSubject::new(
        model,
        cfg.optimizer,
        momentum,
        &train_set,
        Some(&test_set),
        cfg.batch_size,
        derive_seed(cfg.seed, SeedStream::Shuffle),
    )?;
    let report = run_range_test(&mut subject, &rt)?;
    let bounds = match suggest_bounds(&report, cfg.bounds.divisor, cfg.bounds.peak) {
        Ok(b) => Some(b),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RangeTestOutcome { report, bounds })
}
