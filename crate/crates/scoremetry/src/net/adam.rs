//! Adam optimizer over the network's fixed parameter-tensor order.

use super::GradSet;
use crate::numerics::RealMat;
use crate::{Error, Result};

/// Adam state (first/second moment per parameter tensor, step counter).
///
/// Defaults: `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`, with bias-corrected
/// moments. The state is tied to the tensor shapes it was created from;
/// [`AdamState::step`] rejects mismatched gradients.
#[derive(Debug, Clone)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<RealMat>,
    v: Vec<RealMat>,
}

impl AdamState {
    /// Create state shaped like `params`.
    pub fn new(lr: f64, params: &[&RealMat]) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive and finite, got {lr}"
            )));
        }
        Ok(AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.iter().map(|p| RealMat::zeros(p.dim())).collect(),
            v: params.iter().map(|p| RealMat::zeros(p.dim())).collect(),
        })
    }

    /// Override the moment decay rates.
    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Result<Self> {
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        self.beta1 = beta1;
        self.beta2 = beta2;
        Ok(self)
    }

    /// Current learning rate.
    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Change the learning rate (for decay schedules).
    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive and finite, got {lr}"
            )));
        }
        self.lr = lr;
        Ok(())
    }

    /// Number of steps taken.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update: `p ← p − lr·m̂/(√v̂ + ε)` with bias-corrected moments.
    pub fn step(&mut self, params: Vec<&mut RealMat>, grads: &GradSet) -> Result<()> {
        if params.len() != self.m.len() || grads.tensors.len() != self.m.len() {
            return Err(Error::dims(format!(
                "adam: {} params / {} grads vs state of {} tensors",
                params.len(),
                grads.tensors.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, p) in params.into_iter().enumerate() {
            let g = &grads.tensors[k];
            if g.dim() != p.dim() {
                return Err(Error::dims(format!(
                    "adam: grad tensor {k} shape {:?} vs param {:?}",
                    g.dim(),
                    p.dim()
                )));
            }
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            ndarray::Zip::from(&mut *m).and(g).for_each(|m, &g| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            });
            ndarray::Zip::from(&mut *v).and(g).for_each(|v, &g| {
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            });
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            });
        }
        Ok(())
    }
}
