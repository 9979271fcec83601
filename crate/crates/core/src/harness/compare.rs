use serde::Serialize;

use super::config::{DataConfig, ExperimentConfig};
use super::train::{train, ThresholdHit};
use crate::error::{ensure, Error, Result};

/// Trials per arm when a config does not say.
pub const DEFAULT_TRIALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub seed: u64,
    pub final_test_accuracy: f64,
    pub best_test_accuracy: f64,
    pub generalization_gap: Option<f64>,
    pub thresholds: Vec<ThresholdHit>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmReport {
    pub name: String,
    pub trials: Vec<Trial>,
    /// Over non-diverged trials; absent if every trial diverged.
    pub mean_accuracy: Option<f64>,
    /// Sample standard deviation; absent with fewer than two usable trials.
    pub std_accuracy: Option<f64>,
    pub diverged_trials: usize,
    /// Mean first-crossing iteration per threshold, over the trials that
    /// reached it.
    pub mean_iterations_to_threshold: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: ArmReport,
    pub b: ArmReport,
    /// `mean(a) - mean(b)`.
    pub gap: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

/// Runs `cfg` with seeds `cfg.seed + trial` for each trial.
pub fn run_trials(cfg: &ExperimentConfig, trials: usize) -> Result<ArmReport> {
    ensure(trials >= 1, || "trials must be positive".into())?;
    let mut out = Vec::with_capacity(trials);
    for k in 0..trials {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(k as u64);
        let log = train(&c)?;
        let s = log.summary;
        out.push(Trial {
            seed: c.seed,
            final_test_accuracy: s.final_test_accuracy,
            best_test_accuracy: s.best_test_accuracy,
            generalization_gap: s.generalization_gap,
            thresholds: s.thresholds,
            diverged: s.diverged,
        });
    }
    let ok: Vec<&Trial> = out.iter().filter(|t| !t.diverged).collect();
    let accs: Vec<f64> = ok.iter().map(|t| t.final_test_accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    let mean_iterations_to_threshold = cfg
        .thresholds
        .iter()
        .enumerate()
        .map(|(i, &th)| {
            let hits: Vec<f64> = ok.iter().filter_map(|t| t.thresholds[i].iteration.map(|v| v as f64)).collect();
            (th, mean_std(&hits).0)
        })
        .collect();
    Ok(ArmReport {
        name: cfg.name.clone(),
        diverged_trials: out.len() - ok.len(),
        trials: out,
        mean_accuracy,
        std_accuracy,
        mean_iterations_to_threshold,
    })
}

/// Runs both configs `trials` times and reports the accuracy gap.
pub fn compare(a: &ExperimentConfig, b: &ExperimentConfig, trials: usize) -> Result<Comparison> {
    a.validate()?;
    b.validate()?;
    if a.data != b.data {
        return Err(Error::Validation("compared configs must use the same data".into()));
    }
    if a.model.shape() != b.model.shape() {
        return Err(Error::Validation("compared configs must share the model shape".into()));
    }
    let a = run_trials(a, trials)?;
    let b = run_trials(b, trials)?;
    let gap = a.mean_accuracy.zip(b.mean_accuracy).map(|(x, y)| x - y);
    Ok(Comparison { a, b, gap })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub per_class: usize,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Gap per size, in sweep order (largest size first).
    pub fn gaps(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.comparison.gap).collect()
    }
}

/// The baseline arm of `base` at a given training-set size.
pub fn baseline_of(base: &ExperimentConfig) -> Result<ExperimentConfig> {
    let sweep = base
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Validation("config has no [sweep] section".into()))?;
    let mut b = base.clone();
    b.schedule = sweep.baseline.schedule.clone();
    b.momentum = sweep.baseline.momentum.clone();
    if let Some(e) = sweep.baseline.epochs {
        b.epochs = Some(e);
        b.iterations = None;
    }
    b.name = sweep.baseline.name.clone().unwrap_or_else(|| format!("{}-baseline", base.name));
    Ok(b)
}

fn with_size(cfg: &ExperimentConfig, size: usize) -> ExperimentConfig {
    let mut c = cfg.clone();
    match &mut c.data {
        DataConfig::Mnist { per_class, .. } => *per_class = Some(size),
        DataConfig::Blobs { per_class, .. } => *per_class = size,
    }
    c
}

/// Fixes run length, step lengths and evaluation cadence in iterations, as
/// resolved on `n_train` examples.
fn pin_length(cfg: &ExperimentConfig, n_train: usize) -> ExperimentConfig {
    let ipe = cfg.iters_per_epoch(n_train);
    let mut c = cfg.clone();
    c.iterations = Some(cfg.total_iters(n_train));
    c.epochs = None;
    c.eval_every = Some(cfg.eval_every.unwrap_or(ipe));
    c.schedule = cfg.schedule.in_iterations(ipe);
    c.momentum = cfg.momentum.in_iterations(ipe);
    c
}

/// Compares the config's own schedule against its `[sweep.baseline]` at
/// each per-class training size. `sizes` must be strictly descending.
///
/// Both arms keep the iteration budget they have on the base config's
/// training set, so smaller sets are revisited for more epochs.
pub fn run_limited_data_sweep(base: &ExperimentConfig, sizes: &[usize], trials: usize) -> Result<SweepReport> {
    ensure(!sizes.is_empty(), || "sweep needs at least one size".into())?;
    ensure(sizes.windows(2).all(|w| w[0] > w[1]), || "sweep sizes must be strictly descending".into())?;
    base.validate()?;
    let n_train = base.load_data()?.0.len();
    let baseline = pin_length(&baseline_of(base)?, n_train);
    let base = &pin_length(base, n_train);
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let a = with_size(base, size);
        let b = with_size(&baseline, size);
        points.push(SweepPoint {
            per_class: size,
            comparison: compare(&a, &b, trials)?,
        });
    }
    Ok(SweepReport { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[]), (None, None));
        assert_eq!(mean_std(&[0.5]), (Some(0.5), None));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert_eq!(s, Some(1.0));
    }
}
