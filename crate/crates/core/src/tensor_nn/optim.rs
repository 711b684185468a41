use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use crate::error::{config_err, usage, Result};

/// Optimizer choice and hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    SgdMomentum {
        lr: f64,
        momentum: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerKind {
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn sgd_momentum(lr: f64, momentum: f64) -> Self {
        OptimizerKind::SgdMomentum { lr, momentum }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                if !(lr > 0.0) || !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                    return Err(config_err!(
                        "invalid Adam hyperparameters lr={lr} beta1={beta1} beta2={beta2} eps={eps}"
                    ));
                }
            }
            OptimizerKind::SgdMomentum { lr, momentum } => {
                if !(lr > 0.0) || !(0.0..1.0).contains(&momentum) {
                    return Err(config_err!(
                        "invalid SGD hyperparameters lr={lr} momentum={momentum}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-parameter auxiliary buffers plus the step counter. Buffers are created
/// on the first step and bound to the parameter list order from then on.
#[derive(Clone, Debug)]
pub struct OptimizerState<T: Scalar = f32> {
    pub kind: OptimizerKind,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptimizerKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn bind(&mut self, params: &[&mut Tensor<T>]) -> Result<()> {
        if self.first.is_empty() && self.step == 0 {
            self.first = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            if matches!(self.kind, OptimizerKind::Adam { .. }) {
                self.second = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            }
            return Ok(());
        }
        if self.first.len() != params.len() {
            return Err(usage!(
                "optimizer bound to {} parameters, got {}",
                self.first.len(),
                params.len()
            ));
        }
        for (i, (buf, p)) in self.first.iter().zip(params).enumerate() {
            if buf.len() != p.len() {
                return Err(usage!(
                    "parameter {i} has {} elements, optimizer state has {}",
                    p.len(),
                    buf.len()
                ));
            }
        }
        Ok(())
    }

    /// Applies one update using each parameter's accumulated gradient.
    /// Parameters without a gradient buffer are treated as having zero gradient.
    pub fn apply(&mut self, params: &mut [&mut Tensor<T>]) -> Result<()> {
        self.bind(params)?;
        self.step += 1;
        match self.kind {
            OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                let t = self.step as i32;
                let b1 = T::from_f64_lossy(beta1);
                let b2 = T::from_f64_lossy(beta2);
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                let lr = T::from_f64_lossy(lr);
                let eps = T::from_f64_lossy(eps);
                for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    let (data, grad) = p.data_and_grad_mut();
                    for i in 0..data.len() {
                        let g = grad[i];
                        m[i] = b1 * m[i] + (T::one() - b1) * g;
                        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        data[i] = data[i] - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::SgdMomentum { lr, momentum } => {
                let mu = T::from_f64_lossy(momentum);
                let lr = T::from_f64_lossy(lr);
                for (p, vel) in params.iter_mut().zip(&mut self.first) {
                    let (data, grad) = p.data_and_grad_mut();
                    for i in 0..data.len() {
                        vel[i] = mu * vel[i] - lr * grad[i];
                        data[i] = data[i] + vel[i];
                    }
                }
            }
        }
        Ok(())
    }
}

/// One Adam update of `params` given `grads`, mutating `state`.
pub fn adam_step<T: Scalar>(params: &mut [&mut Tensor<T>], state: &mut OptimizerState<T>) -> Result<()> {
    if !matches!(state.kind, OptimizerKind::Adam { .. }) {
        return Err(usage!("adam_step called with {:?} state", state.kind));
    }
    state.apply(params)
}

pub fn sgd_momentum_step<T: Scalar>(params: &mut [&mut Tensor<T>], state: &mut OptimizerState<T>) -> Result<()> {
    if !matches!(state.kind, OptimizerKind::SgdMomentum { .. }) {
        return Err(usage!("sgd_momentum_step called with {:?} state", state.kind));
    }
    state.apply(params)
}
