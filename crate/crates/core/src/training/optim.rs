use super::{EpConfig, GradientBundle, OptimizerKind};
use crate::error::{shape_err, Result};
use crate::network::Theta;

/// Adaptive moment estimation (or plain SGD) with one learning rate per
/// connection.
///
/// Gradients follow the EP update convention, so every step moves θ *along*
/// the bundle: `θ ← θ + lr·m̂/(√v̂ + ε)` for Adam, `θ ← θ + lr·g` for SGD.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: Vec<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    first: Option<Theta>,
    second: Option<Theta>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: Vec<f64>) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: None,
            second: None,
            t: 0,
        }
    }

    pub fn from_config(cfg: &EpConfig) -> Self {
        Self::new(cfg.optimizer, cfg.lr.clone())
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, theta: &mut Theta, grads: &GradientBundle) -> Result<()> {
        if grads.tensors.len() != theta.len() || self.lr.len() != theta.projection.len() + theta.fc.len() {
            return Err(shape_err("gradient bundle, parameters and learning rates disagree"));
        }
        for (w, g) in theta.tensors().zip(grads.tensors.tensors()) {
            if w.dim() != g.dim() {
                return Err(shape_err("gradient tensor shape differs from parameter shape"));
            }
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for ((w, g), &lr) in theta.tensors_mut().zip(grads.tensors.tensors()).zip(&self.lr) {
                    w.scaled_add(lr, g);
                }
            }
            OptimizerKind::Adam => {
                let first = self.first.get_or_insert_with(|| theta.zeros_like());
                let second = self.second.get_or_insert_with(|| theta.zeros_like());
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                let params = theta
                    .tensors_mut()
                    .zip(grads.tensors.tensors())
                    .zip(first.tensors_mut())
                    .zip(second.tensors_mut())
                    .zip(&self.lr);
                for ((((w, g), m), v), &lr) in params {
                    ndarray::Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        *w += lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    });
                }
            }
        }
        Ok(())
    }
}

/// One optimizer step from fresh moment estimates.
pub fn optimizer_step(theta: &Theta, grads: &GradientBundle, cfg: &EpConfig) -> Result<Theta> {
    let mut out = theta.clone();
    Optimizer::from_config(cfg).step(&mut out, grads)?;
    Ok(out)
}
