//! First-order optimizers with decoupled weight decay.
//!
//! With learning rate `η`, weight decay `λ` and gradient `g`, each step is
//!
//! * SGD:      `θ ← θ − η·g − η·λ·θ`
//! * RMSProp:  `v ← α·v + (1−α)·g²`, `θ ← θ − η·g/(√v + ε) − η·λ·θ`
//!   with `α = 0.99`, `ε = 1e-8`
//! * Adam:     `m ← β₁·m + (1−β₁)·g`, `v ← β₂·v + (1−β₂)·g²`,
//!   `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`, `θ ← θ − η·m̂/(√v̂ + ε) − η·λ·θ`
//!   with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`
//!
//! The decay term is scaled by `η`, so `η = 0` leaves `θ` untouched.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const RMSPROP_ALPHA: f64 = 0.99;
pub const RMSPROP_EPS: f64 = 1e-8;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Rmsprop,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "rmsprop" => Ok(Self::Rmsprop),
            "adam" => Ok(Self::Adam),
            other => Err(invalid(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64, dim: usize) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(invalid(format!("learning rate {lr} must be finite and ≥ 0")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(invalid(format!("weight decay {weight_decay} must be finite and ≥ 0")));
        }
        Ok(Self { kind, lr, weight_decay, step: 0, m: vec![0.0; dim], v: vec![0.0; dim] })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Shape("optimizer state / parameter / gradient sizes differ".into()));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient passed to optimizer".into()));
        }
        self.step += 1;
        let (lr, wd) = (self.lr, self.weight_decay);
        match self.kind {
            OptimizerKind::Sgd => {
                for (t, g) in theta.iter_mut().zip(grad) {
                    *t -= lr * g + lr * wd * *t;
                }
            }
            OptimizerKind::Rmsprop => {
                for i in 0..theta.len() {
                    let g = grad[i];
                    self.v[i] = RMSPROP_ALPHA * self.v[i] + (1.0 - RMSPROP_ALPHA) * g * g;
                    theta[i] -= lr * g / (self.v[i].sqrt() + RMSPROP_EPS) + lr * wd * theta[i];
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for i in 0..theta.len() {
                    let g = grad[i];
                    self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
                    self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    theta[i] -= lr * mh / (vh.sqrt() + ADAM_EPS) + lr * wd * theta[i];
                }
            }
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("parameters after optimizer step".into()));
        }
        Ok(())
    }
}
