//! A small dense network with hand-written reverse mode.
//!
//! Parameters live in one flat vector so optimizers and the learning-rate
//! estimator can treat them uniformly. Layout, in layer order:
//!
//! * `dense(in, out)`: weights `W[in][out]` row-major, then bias `b[out]`;
//! * `batchnorm(dim)`: scale `gamma[dim]`, then shift `beta[dim]`;
//! * `relu` and `dropout` own no parameters.
//!
//! Gradients returned by [`Model::backward`] use the same layout.

mod checkpoint;
mod forward;
mod gradcheck;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use forward::{softmax_cross_entropy, ForwardTrace, Mode};
pub use gradcheck::{grad_check, GradCheckOptions, MIN_STEP};

use crate::data::Dataset;
use crate::error::{ensure, Error, Result};

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    Relu,
    /// `maf` is the moving-average fraction of the running statistics.
    Batchnorm { dim: usize, maf: f64 },
    Dropout { ratio: f64 },
}

impl LayerSpec {
    /// Trainable parameters owned by this layer.
    pub fn n_params(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerSpec::Batchnorm { dim, .. } => 2 * dim,
            LayerSpec::Relu | LayerSpec::Dropout { .. } => 0,
        }
    }
}

/// Layer list plus the initialisation seed. The softmax cross-entropy head
/// is implicit and consumes the last layer's output as logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    /// `inputs -> hidden... -> classes` with ReLU between dense layers and
    /// optional batchnorm/dropout after each hidden ReLU block.
    pub fn mlp(inputs: usize, hidden: &[usize], classes: usize, batchnorm: Option<f64>, dropout: Option<f64>, seed: u64) -> Self {
        let mut layers = Vec::new();
        let mut width = inputs;
        for &h in hidden {
            layers.push(LayerSpec::Dense {
                inputs: width,
                outputs: h,
            });
            if let Some(maf) = batchnorm {
                layers.push(LayerSpec::Batchnorm { dim: h, maf });
            }
            layers.push(LayerSpec::Relu);
            if let Some(ratio) = dropout {
                layers.push(LayerSpec::Dropout { ratio });
            }
            width = h;
        }
        layers.push(LayerSpec::Dense {
            inputs: width,
            outputs: classes,
        });
        Self { layers, seed }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(LayerSpec::n_params).sum()
    }

    /// Checks adjacency and per-layer ranges; returns `(input, output)`
    /// widths.
    pub fn validate(&self) -> Result<(usize, usize)> {
        let mut width: Option<usize> = None;
        let mut input = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let (need, out) = match *layer {
                LayerSpec::Dense { inputs, outputs } => {
                    ensure(inputs > 0 && outputs > 0, || format!("layer {i}: dense dims must be positive"))?;
                    (Some(inputs), Some(outputs))
                }
                LayerSpec::Batchnorm { dim, maf } => {
                    ensure(dim > 0, || format!("layer {i}: batchnorm dim must be positive"))?;
                    ensure(maf > 0.0 && maf < 1.0, || format!("layer {i}: maf must lie in (0,1), got {maf}"))?;
                    (Some(dim), Some(dim))
                }
                LayerSpec::Dropout { ratio } => {
                    ensure((0.0..1.0).contains(&ratio), || {
                        format!("layer {i}: dropout ratio must lie in [0,1), got {ratio}")
                    })?;
                    (None, None)
                }
                LayerSpec::Relu => (None, None),
            };
            if let Some(need) = need {
                match width {
                    Some(w) if w != need => {
                        return Err(Error::Validation(format!(
                            "layer {i} expects width {need} but receives {w}"
                        )))
                    }
                    None => input = Some(need),
                    _ => {}
                }
            }
            if let Some(out) = out {
                width = Some(out);
            }
        }
        match (input, width) {
            (Some(i), Some(o)) => {
                ensure(o >= 2, || format!("the classifier head needs at least 2 outputs, got {o}"))?;
                Ok((i, o))
            }
            _ => Err(Error::Validation("model has no dense or batchnorm layer".into())),
        }
    }
}

/// Running mean and variance for one batchnorm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    offsets: Vec<usize>,
    params: Vec<f64>,
    running: Vec<RunningStats>,
    rng: ChaCha8Rng,
    n_inputs: usize,
    n_outputs: usize,
}

impl Model {
    /// Builds a model with uniform He-style fan-in initialisation.
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let (n_inputs, n_outputs) = spec.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut offsets = Vec::with_capacity(spec.layers.len());
        let mut params = Vec::new();
        let mut running = Vec::new();
        for layer in &spec.layers {
            offsets.push(params.len());
            match *layer {
                LayerSpec::Dense { inputs, outputs } => {
                    let bound = (6.0 / inputs as f64).sqrt();
                    params.extend((0..inputs * outputs).map(|_| init.random_range(-bound..bound)));
                    params.extend(std::iter::repeat_n(0.0, outputs));
                }
                LayerSpec::Batchnorm { dim, .. } => {
                    params.extend(std::iter::repeat_n(1.0, dim));
                    params.extend(std::iter::repeat_n(0.0, dim));
                    running.push(RunningStats {
                        mean: vec![0.0; dim],
                        var: vec![1.0; dim],
                    });
                }
                LayerSpec::Relu | LayerSpec::Dropout { .. } => {}
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1);
        Ok(Self {
            spec,
            offsets,
            params,
            running,
            rng,
            n_inputs,
            n_outputs,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn running_stats(&self) -> &[RunningStats] {
        &self.running
    }

    pub fn running_stats_mut(&mut self) -> &mut [RunningStats] {
        &mut self.running
    }

    pub(crate) fn dropout_rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Mean loss and accuracy over a whole dataset in eval mode, in chunks
    /// of `chunk` rows.
    pub fn evaluate(&self, ds: &Dataset, chunk: usize) -> Result<(f64, f64)> {
        if ds.is_empty() {
            return Err(Error::InsufficientData("cannot evaluate on an empty dataset".into()));
        }
        let chunk = chunk.max(1);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let rows: Vec<usize> = (0..ds.len()).collect();
        for block in rows.chunks(chunk) {
            let (x, y) = ds.gather(block);
            let trace = self.forward_eval(x.view(), &y)?;
            loss_sum += trace.loss() * block.len() as f64;
            correct += trace.correct();
        }
        Ok((loss_sum / ds.len() as f64, correct as f64 / ds.len() as f64))
    }
}
