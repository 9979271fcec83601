//! Hessian-free optimal learning-rate estimate from weight iterates.
//!
//! For three consecutive iterates produced by gradient descent with rate
//! `eps`, the secant approximation of the curvature along the descent
//! direction gives the per-weight optimal rate
//!
//! ```text
//! eps* = eps * (theta[i+1] - theta[i]) / (2 theta[i+1] - theta[i] - theta[i+2])
//! ```
//!
//! A global rate is formed by summing absolute numerators and denominators
//! (or their root-sum-squares) over the valid coordinates, and the stream of
//! global estimates is smoothed with an exponential moving average.
//!
//! The estimator only observes a run; nothing here feeds back into the
//! learning rate that is actually applied.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, ensure, Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.1;
const WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    #[default]
    AbsSum,
    Rms,
}

/// Numerators, denominators and validity flags of the per-weight estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PerWeight {
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
    pub valid: Vec<bool>,
    pub eps_used: f64,
}

impl PerWeight {
    /// Per-coordinate optimal rates; `None` where the denominator fell under
    /// the floor.
    pub fn estimates(&self) -> Vec<Option<f64>> {
        self.numerators
            .iter()
            .zip(&self.denominators)
            .zip(&self.valid)
            .map(|((n, d), &ok)| ok.then(|| self.eps_used * n / d))
            .collect()
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Coordinate-wise three-iterate estimate. Coordinates whose denominator
/// magnitude is below `1e-12 * max(1, |theta|_inf)` are flagged invalid.
pub fn per_weight_estimates(first: &[f64], second: &[f64], third: &[f64], eps_used: f64) -> Result<PerWeight> {
    check_len("second snapshot", first.len(), second.len())?;
    check_len("third snapshot", first.len(), third.len())?;
    ensure(eps_used.is_finite() && eps_used > 0.0, || {
        format!("eps_used must be positive, got {eps_used}")
    })?;
    let scale = inf_norm(first).max(inf_norm(second)).max(inf_norm(third)).max(1.0);
    let floor = 1e-12 * scale;
    let n = first.len();
    let mut numerators = Vec::with_capacity(n);
    let mut denominators = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for k in 0..n {
        let num = second[k] - first[k];
        let den = 2.0 * second[k] - first[k] - third[k];
        numerators.push(num);
        denominators.push(den);
        valid.push(den.is_finite() && num.is_finite() && den.abs() >= floor);
    }
    Ok(PerWeight {
        numerators,
        denominators,
        valid,
        eps_used,
    })
}

/// Global estimate over the valid coordinates, summed in index order.
pub fn aggregate(pw: &PerWeight, mode: Aggregation) -> Result<f64> {
    let pairs = pw
        .numerators
        .iter()
        .zip(&pw.denominators)
        .zip(&pw.valid)
        .filter(|(_, &ok)| ok)
        .map(|(p, _)| p);
    let (num, den) = match mode {
        Aggregation::AbsSum => pairs.fold((0.0, 0.0), |(a, b), (n, d)| (a + n.abs(), b + d.abs())),
        Aggregation::Rms => {
            let (a, b) = pairs.fold((0.0, 0.0), |(a, b), (n, d)| (a + n * n, b + d * d));
            (a.sqrt(), b.sqrt())
        }
    };
    if pw.n_valid() == 0 || den <= 0.0 {
        return Err(Error::NoEstimate);
    }
    Ok(pw.eps_used * num / den)
}

/// One emitted estimate: the raw global value and the smoothed value after
/// folding it in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub raw: f64,
    pub smoothed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    window: VecDeque<Vec<f64>>,
    smoothed_lr: Option<f64>,
    alpha: f64,
    aggregation: Aggregation,
}

impl Default for EstimatorState {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA, Aggregation::AbsSum).expect("default alpha is valid")
    }
}

impl EstimatorState {
    pub fn new(alpha: f64, aggregation: Aggregation) -> Result<Self> {
        ensure(alpha > 0.0 && alpha <= 1.0, || format!("alpha must lie in (0,1], got {alpha}"))?;
        Ok(Self {
            window: VecDeque::with_capacity(WINDOW + 1),
            smoothed_lr: None,
            alpha,
            aggregation,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn window(&self) -> impl Iterator<Item = &[f64]> {
        self.window.iter().map(Vec::as_slice)
    }

    pub fn smoothed_lr(&self) -> Option<f64> {
        self.smoothed_lr
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Appends a copy of `params`, evicting the oldest snapshot once more
    /// than three are held.
    pub fn record_snapshot(&mut self, params: &[f64]) -> Result<()> {
        if let Some(prev) = self.window.back() {
            check_len("estimator snapshot", prev.len(), params.len())?;
        }
        if self.window.len() == WINDOW {
            let mut recycled = self.window.pop_front().expect("window is full");
            recycled.clear();
            recycled.extend_from_slice(params);
            self.window.push_back(recycled);
        } else {
            self.window.push_back(params.to_vec());
        }
        Ok(())
    }

    /// Folds `estimate` into the moving average. The first call adopts the
    /// estimate as-is.
    pub fn smooth(&mut self, estimate: f64) -> Result<f64> {
        ensure(estimate.is_finite() && estimate > 0.0, || {
            format!("estimate must be positive and finite, got {estimate}")
        })?;
        let next = match self.smoothed_lr {
            None => estimate,
            Some(prev) => self.alpha * estimate + (1.0 - self.alpha) * prev,
        };
        self.smoothed_lr = Some(next);
        Ok(next)
    }

    /// Raw global estimate from the current window.
    pub fn current_estimate(&self, eps_used: f64) -> Result<f64> {
        if self.window.len() < WINDOW {
            return Err(Error::NoEstimate);
        }
        let pw = per_weight_estimates(&self.window[0], &self.window[1], &self.window[2], eps_used)?;
        aggregate(&pw, self.aggregation)
    }

    /// Records a snapshot and, once three are held, emits the raw and
    /// smoothed estimates. `eps_used` is the learning rate that moved the
    /// parameters from the oldest to the middle snapshot.
    pub fn observe(&mut self, params: &[f64], eps_used: f64) -> Result<Option<Estimate>> {
        self.record_snapshot(params)?;
        match self.current_estimate(eps_used) {
            Ok(raw) if raw > 0.0 && raw.is_finite() => {
                let smoothed = self.smooth(raw)?;
                Ok(Some(Estimate { raw, smoothed }))
            }
            Ok(_) | Err(Error::NoEstimate) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Curvature of `grad_fn`'s potential along `delta`:
/// `delta . (grad(theta + delta) - grad(theta)) / |delta|^2`.
pub fn probe_curvature<F>(grad_fn: F, theta: &[f64], delta: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    check_len("probe direction", theta.len(), delta.len())?;
    let norm_sq: f64 = delta.iter().map(|d| d * d).sum();
    ensure(norm_sq > 0.0, || "probe direction must be nonzero".into())?;
    let shifted: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t + d).collect();
    let g1 = grad_fn(&shifted);
    let g0 = grad_fn(theta);
    check_len("gradient oracle output", theta.len(), g0.len())?;
    check_len("gradient oracle output", theta.len(), g1.len())?;
    let dot: f64 = delta.iter().zip(g1.iter().zip(&g0)).map(|(d, (a, b))| d * (a - b)).sum();
    Ok(dot / norm_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent oracle: plain GD recurrence on a diagonal quadratic.
    fn gd(lambda: &[f64], theta0: &[f64], eps: f64, steps: usize) -> Vec<Vec<f64>> {
        let mut out = vec![theta0.to_vec()];
        for _ in 0..steps {
            let prev = out.last().unwrap();
            out.push(prev.iter().zip(lambda).map(|(t, l)| t - eps * l * t).collect());
        }
        out
    }

    #[test]
    fn scalar_quadratic_examples() {
        let pw = per_weight_estimates(&[1.0], &[0.8], &[0.64], 0.1).unwrap();
        assert_relative_eq!(pw.estimates()[0].unwrap(), 0.5, max_relative = 1e-12);
        let pw = per_weight_estimates(&[1.0], &[0.4], &[0.16], 0.3).unwrap();
        assert_relative_eq!(pw.estimates()[0].unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn stalled_iterates_are_flagged() {
        let pw = per_weight_estimates(&[0.7, 1.0], &[0.7, 0.8], &[0.7, 0.64], 0.1).unwrap();
        assert_eq!(pw.valid, vec![false, true]);
        assert_eq!(pw.estimates()[0], None);
        assert_relative_eq!(aggregate(&pw, Aggregation::AbsSum).unwrap(), 0.5, max_relative = 1e-12);
        let none = per_weight_estimates(&[0.7], &[0.7], &[0.7], 0.1).unwrap();
        assert!(matches!(aggregate(&none, Aggregation::AbsSum), Err(Error::NoEstimate)));
        assert!(matches!(aggregate(&none, Aggregation::Rms), Err(Error::NoEstimate)));
    }

    #[test]
    fn mismatched_lengths() {
        assert!(matches!(
            per_weight_estimates(&[1.0], &[1.0, 2.0], &[1.0], 0.1),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn equal_curvature_aggregate() {
        let it = gd(&[2.0, 2.0], &[1.0, -1.0], 0.1, 2);
        let pw = per_weight_estimates(&it[0], &it[1], &it[2], 0.1).unwrap();
        assert_relative_eq!(aggregate(&pw, Aggregation::AbsSum).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(aggregate(&pw, Aggregation::Rms).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn mixed_curvature_aggregate() {
        let it = gd(&[2.0, 0.5], &[1.0, 1.0], 0.1, 2);
        let pw = per_weight_estimates(&it[0], &it[1], &it[2], 0.1).unwrap();
        let est = aggregate(&pw, Aggregation::AbsSum).unwrap();
        // brute force over the recurrence: (0.2 + 0.05) / (0.04 + 0.0025) * 0.1
        assert_relative_eq!(est, 10.0 / 17.0, max_relative = 1e-12);
        assert!(est > 0.5 && est < 2.0);
    }

    #[test]
    fn single_coordinate_aggregate_matches_per_weight() {
        let pw = per_weight_estimates(&[3.0], &[2.1], &[1.5], 0.05).unwrap();
        let direct = pw.estimates()[0].unwrap();
        assert_relative_eq!(aggregate(&pw, Aggregation::AbsSum).unwrap(), direct.abs(), max_relative = 1e-15);
        assert_relative_eq!(aggregate(&pw, Aggregation::Rms).unwrap(), direct.abs(), max_relative = 1e-15);
    }

    #[test]
    fn window_is_fifo() {
        let mut st = EstimatorState::default();
        st.record_snapshot(&[1.0]).unwrap();
        assert_eq!(st.window_len(), 1);
        for v in [2.0, 3.0, 4.0] {
            st.record_snapshot(&[v]).unwrap();
        }
        let w: Vec<f64> = st.window().map(|s| s[0]).collect();
        assert_eq!(w, vec![2.0, 3.0, 4.0]);
        assert!(matches!(st.record_snapshot(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn snapshots_are_copies() {
        let mut st = EstimatorState::default();
        let mut p = vec![1.0, 2.0];
        st.record_snapshot(&p).unwrap();
        p[0] = 9.0;
        assert_eq!(st.window().next().unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn smoothing_rules() {
        let mut st = EstimatorState::default();
        assert_eq!(st.smooth(3.0).unwrap(), 3.0);
        let mut st = EstimatorState::default();
        st.smooth(1.0).unwrap();
        assert_relative_eq!(st.smooth(2.0).unwrap(), 1.1, max_relative = 1e-15);
        assert!(st.smooth(0.0).is_err());
        assert!(st.smooth(f64::NAN).is_err());
        assert!(EstimatorState::new(0.0, Aggregation::AbsSum).is_err());
    }

    #[test]
    fn smoothing_from_zero_follows_geometric_series() {
        // seed the average at 0 by hand: smoothed_k = c * (1 - 0.9^k)
        let mut st = EstimatorState {
            smoothed_lr: Some(0.0),
            ..Default::default()
        };
        let c = 4.0;
        for k in 1..=10 {
            let s = st.smooth(c).unwrap();
            assert_relative_eq!(s, c * (1.0 - 0.9f64.powi(k)), max_relative = 1e-12);
        }
    }

    #[test]
    fn observe_emits_after_three_snapshots() {
        let it = gd(&[2.0], &[1.0], 0.1, 4);
        let mut st = EstimatorState::default();
        assert_eq!(st.observe(&it[0], 0.1).unwrap(), None);
        assert_eq!(st.observe(&it[1], 0.1).unwrap(), None);
        let e = st.observe(&it[2], 0.1).unwrap().unwrap();
        assert_relative_eq!(e.raw, 0.5, max_relative = 1e-12);
        assert_eq!(e.smoothed, e.raw);
    }

    #[test]
    fn probe_examples() {
        let quad = |t: &[f64]| vec![2.0 * t[0]];
        for theta in [-3.0, 0.0, 1.7] {
            assert_relative_eq!(probe_curvature(quad, &[theta], &[0.01]).unwrap(), 2.0, max_relative = 1e-12);
        }
        let linear = |_: &[f64]| vec![5.0];
        assert_eq!(probe_curvature(linear, &[1.0], &[0.1]).unwrap(), 0.0);
        let quartic = |t: &[f64]| vec![4.0 * t[0].powi(3)];
        for delta in [1e-2, 1e-3, 1e-4] {
            let est = probe_curvature(quartic, &[1.0], &[delta]).unwrap();
            // exact quotient is 12 + 12 delta + 4 delta^2
            assert!((est - 12.0).abs() <= 13.0 * delta, "delta {delta}: {est}");
        }
        assert!(probe_curvature(quad, &[1.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn quadratic_exactness(lambda in prop::sample::select(vec![0.5, 1.0, 2.0, 10.0]), frac in 0.01f64..0.99, theta0 in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], dim in 1usize..6) {
            let eps = frac * 2.0 / lambda;
            let start: Vec<f64> = (0..dim).map(|k| theta0 * (1.0 + k as f64)).collect();
            let it = gd(&vec![lambda; dim], &start, eps, 2);
            let pw = per_weight_estimates(&it[0], &it[1], &it[2], eps).unwrap();
            let est = aggregate(&pw, Aggregation::AbsSum).unwrap();
            prop_assert!((est - 1.0 / lambda).abs() <= 1e-9 / lambda, "{est}");
        }

        #[test]
        fn scale_invariance(c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0]) {
            let it = gd(&[2.0, 0.5, 3.0], &[1.0, -2.0, 0.5], 0.1, 2);
            let base = per_weight_estimates(&it[0], &it[1], &it[2], 0.1).unwrap();
            let scaled: Vec<Vec<f64>> = it.iter().map(|v| v.iter().map(|x| x * c).collect()).collect();
            let s = per_weight_estimates(&scaled[0], &scaled[1], &scaled[2], 0.1).unwrap();
            for (a, b) in base.estimates().iter().zip(s.estimates()) {
                let (a, b) = (a.unwrap(), b.unwrap());
                prop_assert!((a - b).abs() <= 1e-9 * a.abs());
            }
        }

        #[test]
        fn smoothing_contraction(start in 0.01f64..10.0, c in 0.01f64..10.0) {
            let mut st = EstimatorState::default();
            st.smooth(start).unwrap();
            let next = st.smooth(c).unwrap();
            prop_assert!(((next - c).abs() - 0.9 * (start - c).abs()).abs() <= 1e-12 * (1.0 + start + c));
        }

        #[test]
        fn abs_sum_and_rms_within_sqrt_dim(vals in prop::collection::vec((0.1f64..10.0, 0.1f64..2.0), 1..20)) {
            let lambda: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let start: Vec<f64> = vals.iter().map(|v| v.1).collect();
            let eps = 0.05;
            let it = gd(&lambda, &start, eps, 2);
            let pw = per_weight_estimates(&it[0], &it[1], &it[2], eps).unwrap();
            let a = aggregate(&pw, Aggregation::AbsSum).unwrap();
            let r = aggregate(&pw, Aggregation::Rms).unwrap();
            let k = (pw.n_valid() as f64).sqrt();
            prop_assert!(a <= r * k * (1.0 + 1e-12) && r <= a * k * (1.0 + 1e-12));
        }
    }
}
