//! Parameter update rules.
//!
//! Weight decay is coupled: the effective gradient is `g + wd * theta`
//! before the method rule runs. The momentum convention is
//! `v' = m * v + lr * g'`, `theta' = theta - v'`.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, ensure, Error, Result};

fn default_adagrad_eps() -> f64 {
    1e-10
}
fn default_rho() -> f64 {
    0.95
}
fn default_adadelta_eps() -> f64 {
    1e-6
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    SgdMomentum,
    Nesterov,
    Adagrad {
        #[serde(default = "default_adagrad_eps")]
        eps: f64,
    },
    Adadelta {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_adadelta_eps")]
        eps: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_adam_eps")]
        eps: f64,
    },
}

impl Method {
    pub fn adagrad() -> Self {
        Method::Adagrad {
            eps: default_adagrad_eps(),
        }
    }

    pub fn adadelta() -> Self {
        Method::Adadelta {
            rho: default_rho(),
            eps: default_adadelta_eps(),
        }
    }

    pub fn adam() -> Self {
        Method::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_adam_eps(),
        }
    }

    /// Whether the harness-supplied momentum coefficient is used.
    pub fn uses_momentum(&self) -> bool {
        matches!(self, Method::SgdMomentum | Method::Nesterov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub method: Method,
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::SgdMomentum,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn new(method: Method, weight_decay: f64) -> Result<Self> {
        let cfg = Self {
            method,
            weight_decay,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.weight_decay.is_finite() && self.weight_decay >= 0.0, || {
            format!("weight_decay must be >= 0, got {}", self.weight_decay)
        })?;
        let unit = |name: &str, v: f64| {
            ensure((0.0..1.0).contains(&v), || format!("{name} must lie in [0,1), got {v}"))
        };
        let eps_ok = |v: f64| ensure(v.is_finite() && v > 0.0, || format!("eps must be > 0, got {v}"));
        match self.method {
            Method::SgdMomentum | Method::Nesterov => Ok(()),
            Method::Adagrad { eps } => eps_ok(eps),
            Method::Adadelta { rho, eps } => {
                unit("rho", rho)?;
                eps_ok(eps)
            }
            Method::Adam { beta1, beta2, eps } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                eps_ok(eps)
            }
        }
    }
}

/// Per-method accumulators, each shaped like the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Momentum { velocity: Vec<f64> },
    Adagrad { sum_sq: Vec<f64> },
    Adadelta { avg_sq_grad: Vec<f64>, avg_sq_delta: Vec<f64> },
    Adam { m: Vec<f64>, v: Vec<f64>, step: u64 },
}

impl OptimizerState {
    pub fn new(method: &Method, len: usize) -> Self {
        match method {
            Method::SgdMomentum | Method::Nesterov => OptimizerState::Momentum {
                velocity: vec![0.0; len],
            },
            Method::Adagrad { .. } => OptimizerState::Adagrad {
                sum_sq: vec![0.0; len],
            },
            Method::Adadelta { .. } => OptimizerState::Adadelta {
                avg_sq_grad: vec![0.0; len],
                avg_sq_delta: vec![0.0; len],
            },
            Method::Adam { .. } => OptimizerState::Adam {
                m: vec![0.0; len],
                v: vec![0.0; len],
                step: 0,
            },
        }
    }

    pub fn len(&self) -> usize {
        match self {
            OptimizerState::Momentum { velocity } => velocity.len(),
            OptimizerState::Adagrad { sum_sq } => sum_sq.len(),
            OptimizerState::Adadelta { avg_sq_grad, .. } => avg_sq_grad.len(),
            OptimizerState::Adam { m, .. } => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self) -> Result<()> {
        match self {
            OptimizerState::Momentum { velocity } => check_finite("optimizer velocity", velocity),
            OptimizerState::Adagrad { sum_sq } => check_finite("adagrad accumulator", sum_sq),
            OptimizerState::Adadelta {
                avg_sq_grad,
                avg_sq_delta,
            } => {
                check_len("adadelta delta accumulator", avg_sq_grad.len(), avg_sq_delta.len())?;
                check_finite("adadelta gradient accumulator", avg_sq_grad)?;
                check_finite("adadelta delta accumulator", avg_sq_delta)
            }
            OptimizerState::Adam { m, v, .. } => {
                check_len("adam second moment", m.len(), v.len())?;
                check_finite("adam first moment", m)?;
                check_finite("adam second moment", v)
            }
        }
    }
}

/// An optimizer instance that updates parameters in place.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, len: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: OptimizerState::new(&config.method, len),
            config,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, momentum: f64) -> Result<()> {
        step_in_place(&self.config, &mut self.state, params, grads, lr, momentum)
    }
}

/// Pure form of one update: inputs are left untouched and the new
/// parameters and state are returned.
pub fn apply_update(
    config: &OptimizerConfig,
    state: &OptimizerState,
    params: &[f64],
    grads: &[f64],
    lr: f64,
    momentum: f64,
) -> Result<(Vec<f64>, OptimizerState)> {
    let mut params = params.to_vec();
    let mut state = state.clone();
    step_in_place(config, &mut state, &mut params, grads, lr, momentum)?;
    Ok((params, state))
}

fn step_in_place(
    config: &OptimizerConfig,
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    let n = params.len();
    check_len("gradient", n, grads.len())?;
    check_len("optimizer state", n, state.len())?;
    ensure(lr.is_finite() && lr > 0.0, || format!("learning rate must be positive, got {lr}"))?;
    ensure((0.0..1.0).contains(&momentum), || {
        format!("momentum must lie in [0,1), got {momentum}")
    })?;
    check_finite("parameters", params)?;
    check_finite("gradients", grads)?;
    state.check()?;

    let wd = config.weight_decay;
    let eff = |i: usize, p: &[f64]| grads[i] + wd * p[i];

    match (config.method, state) {
        (Method::SgdMomentum, OptimizerState::Momentum { velocity }) => {
            for i in 0..n {
                let g = eff(i, params);
                velocity[i] = momentum * velocity[i] + lr * g;
                params[i] -= velocity[i];
            }
        }
        (Method::Nesterov, OptimizerState::Momentum { velocity }) => {
            // look-ahead step expressed on the stored parameters
            for i in 0..n {
                let g = eff(i, params);
                let prev = velocity[i];
                velocity[i] = momentum * prev + lr * g;
                params[i] -= (1.0 + momentum) * velocity[i] - momentum * prev;
            }
        }
        (Method::Adagrad { eps }, OptimizerState::Adagrad { sum_sq }) => {
            for i in 0..n {
                let g = eff(i, params);
                sum_sq[i] += g * g;
                params[i] -= lr * g / (sum_sq[i].sqrt() + eps);
            }
        }
        (
            Method::Adadelta { rho, eps },
            OptimizerState::Adadelta {
                avg_sq_grad,
                avg_sq_delta,
            },
        ) => {
            for i in 0..n {
                let g = eff(i, params);
                avg_sq_grad[i] = rho * avg_sq_grad[i] + (1.0 - rho) * g * g;
                let delta = (avg_sq_delta[i] + eps).sqrt() / (avg_sq_grad[i] + eps).sqrt() * g;
                avg_sq_delta[i] = rho * avg_sq_delta[i] + (1.0 - rho) * delta * delta;
                params[i] -= lr * delta;
            }
        }
        (Method::Adam { beta1, beta2, eps }, OptimizerState::Adam { m, v, step }) => {
            *step += 1;
            let c1 = 1.0 - beta1.powi(*step as i32);
            let c2 = 1.0 - beta2.powi(*step as i32);
            for i in 0..n {
                let g = eff(i, params);
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        (method, _) => {
            return Err(Error::Consistency(format!(
                "optimizer state does not belong to method {method:?}"
            )))
        }
    }
    check_finite("updated parameters", params)
}

/// SGD noise scale `lr * n_samples / (batch_size * (1 - momentum))`.
pub fn noise_scale(lr: f64, n_samples: usize, batch_size: usize, momentum: f64) -> Result<f64> {
    ensure(lr.is_finite() && lr > 0.0, || format!("lr must be positive, got {lr}"))?;
    ensure(batch_size >= 1 && batch_size <= n_samples, || {
        format!("batch size {batch_size} must lie in [1, {n_samples}]")
    })?;
    ensure((0.0..1.0).contains(&momentum), || {
        format!("momentum must lie in [0,1), got {momentum}")
    })?;
    Ok(lr * n_samples as f64 / (batch_size as f64 * (1.0 - momentum)))
}
