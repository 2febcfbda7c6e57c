use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::{ParamGrads, Params};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

/// Plain gradient descent or Adam with bias correction. Frozen parameters
/// and parameters without a gradient are never touched.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Optimizer {
        Optimizer { kind, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, moments: BTreeMap::new() }
    }

    pub fn sgd(lr: f64) -> Optimizer {
        Optimizer::new(OptimizerKind::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Optimizer {
        Optimizer::new(OptimizerKind::Adam, lr)
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut Params, grads: &ParamGrads) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let correction1 = 1.0 - b1.powi(self.t);
        let correction2 = 1.0 - b2.powi(self.t);
        for (name, g) in grads {
            if !params.get(name).is_some_and(|p| p.trainable) {
                continue;
            }
            let value = params.mut_value(name).expect("checked above");
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, &d) in value.data.iter_mut().zip(&g.data) {
                        *w -= self.lr * d;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = self.moments.entry(name.clone()).or_insert_with(|| (Tensor::zeros(g.rows, g.cols), Tensor::zeros(g.rows, g.cols)));
                    for (((w, &d), m), v) in value.data.iter_mut().zip(&g.data).zip(&mut m.data).zip(&mut v.data) {
                        *m = b1 * *m + (1.0 - b1) * d;
                        *v = b2 * *v + (1.0 - b2) * d * d;
                        let m_hat = *m / correction1;
                        let v_hat = *v / correction2;
                        *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}
