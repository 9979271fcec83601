//! Central-difference check of [`Model::backward`].

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Mode, Model};
use crate::error::{ensure, Result};

/// Steps below this are dominated by round-off.
pub const MIN_STEP: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Models with more parameters are checked on a seeded random sample of
    /// this many coordinates (at least 200).
    pub max_coords: usize,
    pub seed: u64,
    /// Magnitude below which gradients are compared absolutely rather than
    /// relatively.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            max_coords: 400,
            seed: 0,
            floor: 1e-6,
        }
    }
}

impl GradCheckOptions {
    pub fn with_step(h: f64) -> Self {
        Self { h, ..Self::default() }
    }
}

/// Max relative error between the analytic gradient and central
/// differences `(f(theta + h e) - f(theta - h e)) / 2h`.
///
/// Both sides evaluate the train-mode loss with one fixed set of dropout
/// masks and without touching the running batchnorm statistics, so they
/// differentiate the same function. The model itself is not modified.
pub fn grad_check(model: &Model, x: ArrayView2<f64>, labels: &[usize], opts: GradCheckOptions) -> Result<f64> {
    ensure(opts.h.is_finite() && opts.h >= MIN_STEP, || {
        format!("step {} is below the round-off floor {MIN_STEP}", opts.h)
    })?;
    ensure(opts.max_coords >= 200, || "at least 200 coordinates must be checked".into())?;
    let mut rng = model.dropout_rng().clone();
    let masks = model.draw_masks(&mut rng, x.nrows());
    let params = model.params();
    let trace = model.forward_with(params, x, labels, Mode::Train, &masks)?;
    let analytic = model.backward_with(params, &trace)?;

    let n = params.len();
    let coords: Vec<usize> = if n <= opts.max_coords {
        (0..n).collect()
    } else {
        let mut pick = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut c = sample(&mut pick, n, opts.max_coords).into_vec();
        c.sort_unstable();
        c
    };

    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for k in coords {
        let orig = probe[k];
        probe[k] = orig + opts.h;
        let up = model.forward_with(&probe, x, labels, Mode::Train, &masks)?.loss();
        probe[k] = orig - opts.h;
        let down = model.forward_with(&probe, x, labels, Mode::Train, &masks)?.loss();
        probe[k] = orig;
        let numeric = (up - down) / (2.0 * opts.h);
        let a = analytic[k];
        let scale = a.abs().max(numeric.abs());
        let err = if scale == 0.0 {
            0.0
        } else {
            (a - numeric).abs() / scale.max(opts.floor)
        };
        worst = worst.max(err);
    }
    Ok(worst)
}
