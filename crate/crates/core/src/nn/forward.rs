use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LayerSpec, Model, BN_EPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for batchnorm, sampled dropout masks.
    Train,
    /// Running statistics for batchnorm, dropout disabled.
    Eval,
}

#[derive(Debug, Clone)]
enum Cache {
    Dense { input: Array2<f64> },
    Relu { output: Array2<f64> },
    Batchnorm {
        x_hat: Array2<f64>,
        inv_std: Array1<f64>,
        mean: Array1<f64>,
        var: Array1<f64>,
        batch_stats: bool,
    },
    Dropout { mask: Option<Array2<f64>> },
}

/// Everything backward needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    mode: Mode,
    caches: Vec<Cache>,
    probs: Array2<f64>,
    labels: Vec<usize>,
    loss: f64,
    predictions: Vec<usize>,
    n_params: usize,
}

impl ForwardTrace {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Mean softmax cross-entropy over the batch.
    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn predictions(&self) -> &[usize] {
        &self.predictions
    }

    pub fn probabilities(&self) -> &Array2<f64> {
        &self.probs
    }

    pub fn correct(&self) -> usize {
        self.predictions.iter().zip(&self.labels).filter(|(p, l)| p == l).count()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.labels.len() as f64
    }

    /// Normalized (pre scale/shift) activations of a batchnorm layer.
    pub fn normalized(&self, layer: usize) -> Option<&Array2<f64>> {
        match self.caches.get(layer)? {
            Cache::Batchnorm { x_hat, .. } => Some(x_hat),
            _ => None,
        }
    }

    /// Mean and biased variance a batchnorm layer normalized with.
    pub fn batch_statistics(&self, layer: usize) -> Option<(&Array1<f64>, &Array1<f64>)> {
        match self.caches.get(layer)? {
            Cache::Batchnorm { mean, var, .. } => Some((mean, var)),
            _ => None,
        }
    }
}

/// Mean cross-entropy of `softmax(logits)` against `labels`, with the row
/// probabilities.
pub fn softmax_cross_entropy(logits: ArrayView2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let mut probs = logits.to_owned();
    let mut total = 0.0;
    for (mut row, &label) in probs.rows_mut().into_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let z_label = row[label];
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
        total += max + sum.ln() - z_label;
    }
    (total / labels.len() as f64, probs)
}

fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}

impl Model {
    /// Forward pass. In train mode the running batchnorm statistics are
    /// updated as `maf * running + (1 - maf) * batch` and dropout masks are
    /// drawn from the model's seeded stream.
    pub fn forward(&mut self, x: ArrayView2<f64>, labels: &[usize], mode: Mode) -> Result<ForwardTrace> {
        if mode == Mode::Eval {
            return self.forward_eval(x, labels);
        }
        let mut rng = self.rng.clone();
        let masks = self.draw_masks(&mut rng, x.nrows());
        let trace = self.forward_with(&self.params, x, labels, Mode::Train, &masks)?;
        self.rng = rng;
        let mut bn = 0;
        for (layer, cache) in self.spec.layers.iter().zip(&trace.caches) {
            if let (LayerSpec::Batchnorm { maf, .. }, Cache::Batchnorm { mean, var, .. }) = (layer, cache) {
                let stats = &mut self.running[bn];
                for (r, b) in stats.mean.iter_mut().zip(mean) {
                    *r = maf * *r + (1.0 - maf) * b;
                }
                for (r, b) in stats.var.iter_mut().zip(var) {
                    *r = maf * *r + (1.0 - maf) * b;
                }
                bn += 1;
            }
        }
        Ok(trace)
    }

    /// Eval-mode forward; never touches model state.
    pub fn forward_eval(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<ForwardTrace> {
        self.forward_with(&self.params, x, labels, Mode::Eval, &[])
    }

    /// One mask per dropout layer (`None` for ratio 0), already scaled by
    /// `1 / (1 - ratio)`.
    pub(crate) fn draw_masks(&self, rng: &mut ChaCha8Rng, rows: usize) -> Vec<Option<Array2<f64>>> {
        let mut masks = Vec::new();
        let mut width = self.n_inputs;
        for layer in &self.spec.layers {
            match *layer {
                LayerSpec::Dense { outputs, .. } => width = outputs,
                LayerSpec::Dropout { ratio } => {
                    if ratio == 0.0 {
                        masks.push(None);
                    } else {
                        let keep = 1.0 / (1.0 - ratio);
                        masks.push(Some(Array2::from_shape_simple_fn((rows, width), || {
                            if rng.random::<f64>() < ratio {
                                0.0
                            } else {
                                keep
                            }
                        })));
                    }
                }
                _ => {}
            }
        }
        masks
    }

    pub(crate) fn forward_with(
        &self,
        params: &[f64],
        x: ArrayView2<f64>,
        labels: &[usize],
        mode: Mode,
        masks: &[Option<Array2<f64>>],
    ) -> Result<ForwardTrace> {
        if x.ncols() != self.n_inputs {
            return Err(Error::Dimension {
                what: "input width".into(),
                expected: self.n_inputs,
                actual: x.ncols(),
            });
        }
        if x.nrows() != labels.len() {
            return Err(Error::Dimension {
                what: "batch labels".into(),
                expected: x.nrows(),
                actual: labels.len(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::InsufficientData("empty batch".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.n_outputs) {
            return Err(Error::Consistency(format!("label {bad} outside 0..{}", self.n_outputs)));
        }
        let rows = x.nrows() as f64;
        let mut act = x.to_owned();
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let mut mask_iter = masks.iter();
        let mut bn = 0;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let off = self.offsets[i];
            match *layer {
                LayerSpec::Dense { inputs, outputs } => {
                    let w = ArrayView2::from_shape((inputs, outputs), &params[off..off + inputs * outputs])
                        .expect("dense weight layout");
                    let b = &params[off + inputs * outputs..off + inputs * outputs + outputs];
                    let mut out = Array2::from_shape_fn((act.nrows(), outputs), |(_, j)| b[j]);
                    general_mat_mul(1.0, &act, &w, 1.0, &mut out);
                    caches.push(Cache::Dense { input: act });
                    act = out;
                }
                LayerSpec::Relu => {
                    act.mapv_inplace(|v| v.max(0.0));
                    caches.push(Cache::Relu { output: act.clone() });
                }
                LayerSpec::Batchnorm { dim, .. } => {
                    let gamma = &params[off..off + dim];
                    let beta = &params[off + dim..off + 2 * dim];
                    let batch_stats = mode == Mode::Train;
                    let (mean, var) = if batch_stats {
                        let mean = act.sum_axis(Axis(0)) / rows;
                        let mut var = Array1::zeros(dim);
                        for row in act.rows() {
                            Zip::from(&mut var).and(&row).and(&mean).for_each(|v, &x, &m| *v += (x - m) * (x - m));
                        }
                        var /= rows;
                        (mean, var)
                    } else {
                        let stats = &self.running[bn];
                        (Array1::from(stats.mean.clone()), Array1::from(stats.var.clone()))
                    };
                    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    let mut x_hat = act;
                    for mut row in x_hat.rows_mut() {
                        Zip::from(&mut row).and(&mean).and(&inv_std).for_each(|x, &m, &s| *x = (*x - m) * s);
                    }
                    let mut out = x_hat.clone();
                    for mut row in out.rows_mut() {
                        for (j, v) in row.iter_mut().enumerate() {
                            *v = gamma[j] * *v + beta[j];
                        }
                    }
                    caches.push(Cache::Batchnorm {
                        x_hat,
                        inv_std,
                        mean,
                        var,
                        batch_stats,
                    });
                    act = out;
                    bn += 1;
                }
                LayerSpec::Dropout { .. } => {
                    let mask = if mode == Mode::Train {
                        mask_iter.next().cloned().ok_or_else(|| {
                            Error::Consistency("fewer dropout masks than dropout layers".into())
                        })?
                    } else {
                        None
                    };
                    if let Some(m) = &mask {
                        if m.dim() != act.dim() {
                            return Err(Error::Consistency(format!("dropout mask shape {:?} for activations {:?}", m.dim(), act.dim())));
                        }
                        act *= m;
                    }
                    caches.push(Cache::Dropout { mask });
                }
            }
            if act.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    what: format!("activations of layer {i}"),
                });
            }
        }
        let (loss, probs) = softmax_cross_entropy(act.view(), labels);
        if !loss.is_finite() {
            return Err(Error::Numeric { what: "loss".into() });
        }
        let predictions = argmax_rows(&probs);
        Ok(ForwardTrace {
            mode,
            caches,
            probs,
            labels: labels.to_vec(),
            loss,
            predictions,
            n_params: params.len(),
        })
    }

    /// Gradient of the trace's mean loss with respect to every parameter,
    /// in the flat layout. The model is not modified.
    pub fn backward(&self, trace: &ForwardTrace) -> Result<Vec<f64>> {
        self.backward_with(&self.params, trace)
    }

    pub(crate) fn backward_with(&self, params: &[f64], trace: &ForwardTrace) -> Result<Vec<f64>> {
        if trace.n_params != params.len() || trace.caches.len() != self.spec.layers.len() {
            return Err(Error::Consistency("forward trace was not produced by this model".into()));
        }
        let rows = trace.labels.len() as f64;
        let mut grad = vec![0.0; params.len()];
        let mut delta = trace.probs.clone();
        for (mut row, &l) in delta.rows_mut().into_iter().zip(&trace.labels) {
            row[l] -= 1.0;
        }
        delta /= rows;
        for (i, (layer, cache)) in self.spec.layers.iter().zip(&trace.caches).enumerate().rev() {
            let off = self.offsets[i];
            match (*layer, cache) {
                (LayerSpec::Dense { inputs, outputs }, Cache::Dense { input }) => {
                    let n_w = inputs * outputs;
                    {
                        let mut gw = ArrayViewMut2::from_shape((inputs, outputs), &mut grad[off..off + n_w])
                            .expect("dense weight layout");
                        general_mat_mul(1.0, &input.t(), &delta, 0.0, &mut gw);
                    }
                    for (g, s) in grad[off + n_w..off + n_w + outputs].iter_mut().zip(delta.sum_axis(Axis(0))) {
                        *g = s;
                    }
                    if i > 0 {
                        let w = ArrayView2::from_shape((inputs, outputs), &params[off..off + n_w])
                            .expect("dense weight layout");
                        delta = delta.dot(&w.t());
                    }
                }
                (LayerSpec::Relu, Cache::Relu { output }) => {
                    Zip::from(&mut delta).and(output).for_each(|d, &o| {
                        if o <= 0.0 {
                            *d = 0.0
                        }
                    });
                }
                (
                    LayerSpec::Batchnorm { dim, .. },
                    Cache::Batchnorm {
                        x_hat,
                        inv_std,
                        batch_stats,
                        ..
                    },
                ) => {
                    let gamma = &params[off..off + dim];
                    let dgamma = (&delta * x_hat).sum_axis(Axis(0));
                    let dbeta = delta.sum_axis(Axis(0));
                    grad[off..off + dim].copy_from_slice(dgamma.as_slice().expect("contiguous"));
                    grad[off + dim..off + 2 * dim].copy_from_slice(dbeta.as_slice().expect("contiguous"));
                    if *batch_stats {
                        // dx = inv_std / N * (N dxh - sum dxh - x_hat * sum(dxh * x_hat)),
                        // with dxh = gamma * dy; the sums reduce to dbeta and dgamma.
                        let n = rows;
                        for (mut d, xh) in delta.rows_mut().into_iter().zip(x_hat.rows()) {
                            for j in 0..dim {
                                let dxh = gamma[j] * d[j];
                                d[j] = inv_std[j] / n * (n * dxh - gamma[j] * dbeta[j] - xh[j] * gamma[j] * dgamma[j]);
                            }
                        }
                    } else {
                        for mut d in delta.rows_mut() {
                            for j in 0..dim {
                                d[j] *= gamma[j] * inv_std[j];
                            }
                        }
                    }
                }
                (LayerSpec::Dropout { .. }, Cache::Dropout { mask }) => {
                    if let Some(m) = mask {
                        delta *= m;
                    }
                }
                _ => return Err(Error::Consistency(format!("trace cache {i} does not match layer kind"))),
            }
        }
        Ok(grad)
    }
}
