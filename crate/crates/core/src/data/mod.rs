//! Datasets: MNIST ingestion, balanced subsets and synthetic oracles.

mod batches;
mod idx;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use batches::BatchSampler;
pub use idx::{load_mnist_idx, read_images, read_labels, write_mnist_idx, IMAGES_MAGIC, LABELS_MAGIC};

use crate::error::{check_len, ensure, Error, Result};

/// A labelled classification set. Rows of `inputs` are examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    provenance: String,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>, n_classes: usize, provenance: impl Into<String>) -> Result<Self> {
        check_len("dataset labels", inputs.nrows(), labels.len())?;
        ensure(n_classes >= 1, || "n_classes must be positive".into())?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Consistency(format!("label {bad} not below n_classes {n_classes}")));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "dataset inputs".into(),
            });
        }
        Ok(Self {
            inputs,
            labels,
            n_classes,
            provenance: provenance.into(),
        })
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Per-class example counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Copies the given rows (in order) into a new batch.
    pub fn gather(&self, rows: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let x = self.inputs.select(Axis(0), rows);
        let y = rows.iter().map(|&r| self.labels[r]).collect();
        (x, y)
    }

    pub fn select(&self, rows: &[usize], provenance: impl Into<String>) -> Dataset {
        let (inputs, labels) = self.gather(rows);
        Dataset {
            inputs,
            labels,
            n_classes: self.n_classes,
            provenance: provenance.into(),
        }
    }
}

/// Class-balanced random subset of `per_class` examples per class, in
/// shuffled order. Deterministic for a given seed.
pub fn subset(ds: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    ensure(per_class >= 1, || "per_class must be positive".into())?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    if let Some((class, have)) = by_class.iter().enumerate().find(|(_, v)| v.len() < per_class) {
        return Err(Error::InsufficientData(format!(
            "class {class} has {} examples, {per_class} requested",
            have.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(per_class * ds.n_classes);
    for mut idx in by_class {
        idx.shuffle(&mut rng);
        rows.extend_from_slice(&idx[..per_class]);
    }
    rows.shuffle(&mut rng);
    Ok(ds.select(&rows, format!("{}[{per_class}/class seed {seed}]", ds.provenance)))
}

/// Gaussian clusters, one per class, centred on scaled unit vectors
/// (feature width = `max(n_classes, 2)`).
pub fn synth_blobs(n_classes: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    ensure(n_classes >= 2, || format!("need at least 2 classes, got {n_classes}"))?;
    ensure(spread.is_finite() && spread >= 0.0, || format!("spread must be >= 0, got {spread}"))?;
    let dim = n_classes.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let n = n_classes * per_class;
    let mut inputs = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (row, mut x) in inputs.rows_mut().into_iter().enumerate() {
        let class = row % n_classes;
        for (j, v) in x.iter_mut().enumerate() {
            let centre = if j == class { 1.0 } else { 0.0 };
            *v = centre + spread * noise.sample(&mut rng);
        }
        labels.push(class);
    }
    Dataset::new(inputs, labels, n_classes, format!("blobs:{n_classes}x{per_class} spread {spread} seed {seed}"))
}

/// Diagonal quadratic `f(theta) = 0.5 * sum(lambda_k * theta_k^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    curvature: Vec<f64>,
    start: Vec<f64>,
}

impl QuadraticProblem {
    pub fn new(curvature: Vec<f64>, start: Vec<f64>) -> Result<Self> {
        check_len("quadratic start point", curvature.len(), start.len())?;
        ensure(curvature.iter().all(|&l| l.is_finite() && l > 0.0), || {
            "all curvatures must be positive".into()
        })?;
        Ok(Self { curvature, start })
    }

    pub fn scalar(lambda: f64, theta0: f64) -> Result<Self> {
        Self::new(vec![lambda], vec![theta0])
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn dim(&self) -> usize {
        self.curvature.len()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        0.5 * self.curvature.iter().zip(theta).map(|(l, t)| l * t * t).sum::<f64>()
    }

    pub fn grad(&self, theta: &[f64]) -> Vec<f64> {
        self.curvature.iter().zip(theta).map(|(l, t)| l * t).collect()
    }

    /// `steps + 1` plain gradient-descent iterates starting at the start
    /// point.
    pub fn gd_iterates(&self, lr: f64, steps: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut theta = self.start.clone();
        out.push(theta.clone());
        for _ in 0..steps {
            let g = self.grad(&theta);
            for (t, g) in theta.iter_mut().zip(g) {
                *t -= lr * g;
            }
            out.push(theta.clone());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(counts: &[usize]) -> Dataset {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        let n = labels.len();
        let inputs = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        Dataset::new(inputs, labels, counts.len(), "test").unwrap()
    }

    #[test]
    fn subset_is_balanced_and_deterministic() {
        let ds = labelled(&[30, 25, 40]);
        let a = subset(&ds, 20, 7).unwrap();
        assert_eq!(a.class_counts(), vec![20, 20, 20]);
        let b = subset(&ds, 20, 7).unwrap();
        assert_eq!(a, b);
        let c = subset(&ds, 20, 8).unwrap();
        assert_ne!(a.inputs(), c.inputs());
    }

    #[test]
    fn full_subset_is_permutation() {
        let ds = labelled(&[5, 5]);
        let s = subset(&ds, 5, 1).unwrap();
        let mut a: Vec<_> = s.inputs().column(0).to_vec();
        a.sort_by(f64::total_cmp);
        let mut b: Vec<_> = ds.inputs().column(0).to_vec();
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn subset_shortfall_names_class() {
        let ds = labelled(&[10, 3]);
        match subset(&ds, 4, 0) {
            Err(Error::InsufficientData(msg)) => assert!(msg.contains("class 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn blobs_basics() {
        let a = synth_blobs(2, 100, 0.1, 3).unwrap();
        assert_eq!(a.len(), 200);
        assert_eq!(a.class_counts(), vec![100, 100]);
        assert_eq!(a, synth_blobs(2, 100, 0.1, 3).unwrap());
        let flat = synth_blobs(3, 4, 0.0, 3).unwrap();
        for (row, &l) in flat.inputs().rows().into_iter().zip(flat.labels()) {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if j == l { 1.0 } else { 0.0 });
            }
        }
        assert!(synth_blobs(1, 4, 0.1, 0).is_err());
    }

    #[test]
    fn dataset_validation() {
        let x = Array2::zeros((2, 2));
        assert!(Dataset::new(x.clone(), vec![0], 2, "").is_err());
        assert!(Dataset::new(x.clone(), vec![0, 2], 2, "").is_err());
        let mut bad = x;
        bad[[0, 0]] = f64::NAN;
        assert!(Dataset::new(bad, vec![0, 1], 2, "").is_err());
    }

    #[test]
    fn quadratic_iterates() {
        let q = QuadraticProblem::scalar(2.0, 1.0).unwrap();
        let it = q.gd_iterates(0.1, 2);
        assert_eq!(it[1][0], 0.8);
        assert!((it[2][0] - 0.64).abs() < 1e-15);
        assert!(QuadraticProblem::scalar(0.0, 1.0).is_err());
    }
}
