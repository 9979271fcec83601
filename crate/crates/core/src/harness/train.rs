use std::collections::VecDeque;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use super::config::{derive_seed, ExperimentConfig, SeedStream};
use crate::data::BatchSampler;
use crate::error::{Error, Result};
use crate::estimator::{Estimate, EstimatorState};
use crate::nn::{Mode, Model};
use crate::optim::Optimizer;
use crate::schedules::{MomentumSpec, ScheduleSpec};

/// Training losses above this count as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e6;

/// Rows per forward pass when evaluating whole datasets.
const EVAL_CHUNK: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// One training iteration. `train_*` are measured on the iteration's
/// mini-batch before the update; `test` is taken after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub iteration: u64,
    pub epoch: u64,
    pub lr: f64,
    pub momentum: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test: Option<Evaluation>,
    pub estimate: Option<Estimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdHit {
    pub threshold: f64,
    /// First evaluated iteration whose test accuracy reached the threshold.
    pub iteration: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub total_iterations: u64,
    pub iterations_run: u64,
    pub initial_test_accuracy: f64,
    pub final_test_accuracy: f64,
    pub best_test_accuracy: f64,
    /// Whole training set in eval mode after the run.
    pub final_train_accuracy: Option<f64>,
    /// `final_train_accuracy - final_test_accuracy`.
    pub generalization_gap: Option<f64>,
    pub thresholds: Vec<ThresholdHit>,
    pub final_estimate: Option<f64>,
    pub diverged: bool,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub initial: Evaluation,
    pub records: Vec<Record>,
    pub summary: Summary,
}

pub const LOG_COLUMNS: [&str; 10] = [
    "iteration",
    "epoch",
    "lr",
    "momentum",
    "train_loss",
    "train_accuracy",
    "test_loss",
    "test_accuracy",
    "est_raw",
    "est_smoothed",
];

/// Shortest text that parses back to the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl TrainingLog {
    /// One row per iteration in [`LOG_COLUMNS`] order; cells not measured
    /// at an iteration are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOG_COLUMNS)?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.epoch.to_string(),
                fmt_f64(r.lr),
                fmt_f64(r.momentum),
                fmt_f64(r.train_loss),
                fmt_f64(r.train_accuracy),
                opt(r.test.map(|t| t.loss)),
                opt(r.test.map(|t| t.accuracy)),
                opt(r.estimate.map(|e| e.raw)),
                opt(r.estimate.map(|e| e.smoothed)),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn evaluations(&self) -> impl Iterator<Item = (u64, Evaluation)> + '_ {
        self.records.iter().filter_map(|r| r.test.map(|t| (r.iteration, t)))
    }
}

/// Divergence shows up either as a large loss or as a numeric error from
/// the model or optimizer.
fn diverging(e: &Error) -> bool {
    matches!(e, Error::Numeric { .. })
}

pub fn train(cfg: &ExperimentConfig) -> Result<TrainingLog> {
    cfg.validate()?;
    let (train_set, test_set) = cfg.load_data()?;
    let started = Instant::now();
    let n = train_set.len();
    let per_epoch = cfg.iters_per_epoch(n);
    let total = cfg.total_iters(n);
    // a zero-length run only gets the initial evaluation
    let schedule: Option<ScheduleSpec> = if total > 0 {
        Some(cfg.schedule.build(total, per_epoch)?)
    } else {
        None
    };
    let momentum: MomentumSpec = cfg.momentum.build(per_epoch, cfg.schedule.is_one_cycle())?;
    let eval_every = cfg.eval_every.unwrap_or(per_epoch).max(1);

    let mut model = Model::new(cfg.model.spec(cfg.seed))?;
    let mut optimizer = Optimizer::new(cfg.optimizer, model.n_params())?;
    let mut sampler = BatchSampler::new(n, cfg.batch_size, derive_seed(cfg.seed, SeedStream::Shuffle));
    let mut estimator = if cfg.estimator.enabled {
        let mut st = EstimatorState::new(cfg.estimator.alpha, cfg.estimator.aggregation)?;
        st.record_snapshot(model.params())?;
        Some(st)
    } else {
        None
    };
    // learning-rate sums of the intervals between the held snapshots
    let mut intervals: VecDeque<f64> = VecDeque::with_capacity(3);
    let mut interval_lr = 0.0;

    let (loss0, acc0) = model.evaluate(&test_set, EVAL_CHUNK)?;
    let initial = Evaluation {
        loss: loss0,
        accuracy: acc0,
    };
    let mut records = Vec::with_capacity(total as usize);
    let mut diverged = false;

    for t in 0..total {
        let epoch = sampler.epoch();
        let lr = schedule.as_ref().expect("built when total > 0").lr_at(t)?;
        let m = momentum.momentum_at(t);
        let rows = sampler.next_batch().to_vec();
        let (x, y) = train_set.gather(&rows);
        let trace = match model.forward(x.view(), &y, Mode::Train) {
            Ok(tr) => tr,
            Err(e) if diverging(&e) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut record = Record {
            iteration: t,
            epoch,
            lr,
            momentum: m,
            train_loss: trace.loss(),
            train_accuracy: trace.accuracy(),
            test: None,
            estimate: None,
        };
        if trace.loss().is_nan() || trace.loss() > DIVERGENCE_LOSS {
            records.push(record);
            diverged = true;
            break;
        }
        let grads = model.backward(&trace)?;
        match optimizer.step(model.params_mut(), &grads, lr, m) {
            Ok(()) => {}
            Err(e) if diverging(&e) => {
                records.push(record);
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }

        if let Some(est) = estimator.as_mut() {
            interval_lr += lr;
            if (t + 1) % cfg.estimator.cadence == 0 {
                intervals.push_back(interval_lr);
                interval_lr = 0.0;
                if intervals.len() > 2 {
                    intervals.pop_front();
                }
                let eps = intervals[0];
                record.estimate = match est.observe(model.params(), eps) {
                    Ok(e) => e,
                    Err(e) if diverging(&e) => None,
                    Err(e) => return Err(e),
                };
            }
        }

        if (t + 1) % eval_every == 0 || t + 1 == total {
            let (loss, accuracy) = match model.evaluate(&test_set, EVAL_CHUNK) {
                Ok(v) => v,
                Err(e) if diverging(&e) => {
                    records.push(record);
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            record.test = Some(Evaluation { loss, accuracy });
        }
        records.push(record);
    }

    let final_train_accuracy = if diverged {
        None
    } else {
        model.evaluate(&train_set, EVAL_CHUNK).ok().map(|(_, a)| a)
    };
    let evals: Vec<(u64, Evaluation)> = records.iter().filter_map(|r| r.test.map(|t| (r.iteration, t))).collect();
    let final_test_accuracy = evals.last().map_or(initial.accuracy, |e| e.1.accuracy);
    let best_test_accuracy = evals.iter().map(|e| e.1.accuracy).fold(initial.accuracy, f64::max);
    let thresholds = cfg
        .thresholds
        .iter()
        .map(|&threshold| ThresholdHit {
            threshold,
            iteration: evals.iter().find(|e| e.1.accuracy >= threshold).map(|e| e.0),
        })
        .collect();
    let summary = Summary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        total_iterations: total,
        iterations_run: records.len() as u64,
        initial_test_accuracy: initial.accuracy,
        final_test_accuracy,
        best_test_accuracy,
        final_train_accuracy,
        generalization_gap: final_train_accuracy.map(|a| a - final_test_accuracy),
        thresholds,
        final_estimate: estimator.as_ref().and_then(EstimatorState::smoothed_lr),
        diverged,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainingLog {
        initial,
        records,
        summary,
    })
}
