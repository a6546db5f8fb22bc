use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::train::params::{Gradients, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    clip_norm: Option<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    moments: Vec<Option<(Matrix, Matrix)>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, clip_norm: Option<f64>) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {lr}")));
        }
        if let Some(c) = clip_norm {
            if !(c > 0.0) {
                return Err(Error::config(format!("clip norm must be positive, got {c}")));
            }
        }
        Ok(Self {
            kind,
            lr,
            clip_norm,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments: Vec::new(),
        })
    }

    pub fn sgd(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, lr, None)
    }

    pub fn adam(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam, lr, None)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Check, clip, apply and zero `grads`. Frozen rows and non-trainable
    /// parameters are left untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &mut Gradients) -> Result<StepReport> {
        for (i, g) in grads.iter() {
            let Some(g) = g else { continue };
            if let Some(pos) = g.as_slice().iter().position(|v| !v.is_finite()) {
                let name = store.iter().nth(i).map(|(_, p)| p.name().to_string());
                return Err(Error::NonFinite {
                    param: name.unwrap_or_default(),
                    row: pos / g.cols(),
                    col: pos % g.cols(),
                });
            }
        }
        let grad_norm = grads.global_norm();
        let clipped = match self.clip_norm {
            Some(max) if grad_norm > max => {
                grads.clip_global_norm(max);
                true
            }
            _ => false,
        };
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => store.update_with(grads, |_, _, v, g| *v -= lr * g),
            OptimizerKind::Adam => {
                if self.moments.len() != store.len() {
                    self.moments = store
                        .iter()
                        .map(|(_, p)| {
                            let (r, c) = p.value().shape();
                            Some((Matrix::zeros(r, c), Matrix::zeros(r, c)))
                        })
                        .collect();
                }
                self.t += 1;
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let c1 = 1.0 - b1.powi(self.t as i32);
                let c2 = 1.0 - b2.powi(self.t as i32);
                let moments = &mut self.moments;
                store.update_with(grads, |pi, k, v, g| {
                    let (m, s) = moments[pi].as_mut().expect("moments allocated");
                    let mk = &mut m.as_mut_slice()[k];
                    *mk = b1 * *mk + (1.0 - b1) * g;
                    let sk = &mut s.as_mut_slice()[k];
                    *sk = b2 * *sk + (1.0 - b2) * g * g;
                    let m_hat = *mk / c1;
                    let s_hat = *sk / c2;
                    *v -= lr * m_hat / (s_hat.sqrt() + eps);
                });
            }
        }
        grads.zero();
        Ok(StepReport { grad_norm, clipped })
    }
}
