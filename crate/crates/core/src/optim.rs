//! First-order optimizers behind a common strategy trait, selected by name.

use crate::error::{Error, Result};
use ndarray::ArrayD;

/// In-place gradient-descent update over a flat list of parameter arrays.
///
/// The parameter list must keep the same length and per-entry shapes across
/// calls; stateful optimizers key their moments by position.
pub trait Optimizer {
    fn step(&mut self, params: &mut [ArrayD<f64>], grads: &[ArrayD<f64>]);
    fn name(&self) -> &'static str;
}

/// Plain stochastic gradient descent.
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut [ArrayD<f64>], grads: &[ArrayD<f64>]) {
        assert_eq!(params.len(), grads.len());
        for (p, g) in params.iter_mut().zip(grads) {
            p.zip_mut_with(g, |pv, &gv| *pv -= self.lr * gv);
        }
    }

    fn name(&self) -> &'static str {
        "sgd"
    }
}

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut [ArrayD<f64>], grads: &[ArrayD<f64>]) {
        assert_eq!(params.len(), grads.len());
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| ArrayD::zeros(g.raw_dim())).collect();
            self.v = grads.iter().map(|g| ArrayD::zeros(g.raw_dim())).collect();
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t);
        let b2t = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            m.zip_mut_with(&grads[i], |mv, &gv| {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
            });
            v.zip_mut_with(&grads[i], |vv, &gv| {
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
            });
            let lr = self.lr;
            let eps = self.eps;
            ndarray::Zip::from(&mut params[i])
                .and(&*m)
                .and(&*v)
                .for_each(|p, &mv, &vv| {
                    let m_hat = mv / b1t;
                    let v_hat = vv / b2t;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
    }

    fn name(&self) -> &'static str {
        "adam"
    }
}

/// Build an optimizer by name: `"adam"` or `"sgd"`.
pub fn build_optimizer(kind: &str, lr: f64) -> Result<Box<dyn Optimizer>> {
    match kind {
        "adam" => Ok(Box::new(Adam::new(lr))),
        "sgd" => Ok(Box::new(Sgd { lr })),
        other => Err(Error::Config(format!(
            "unknown optimizer '{other}' (expected 'adam' or 'sgd')"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    #[test]
    fn adam_converges_on_quadratic() {
        // minimize (x - 3)^2
        let mut params = vec![ArrayD::from_elem(IxDyn(&[1]), 0.0)];
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let x = params[0][[0]];
            let grad = vec![ArrayD::from_elem(IxDyn(&[1]), 2.0 * (x - 3.0))];
            opt.step(&mut params, &grad);
        }
        assert!((params[0][[0]] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(build_optimizer("newton", 0.1).is_err());
    }
}
