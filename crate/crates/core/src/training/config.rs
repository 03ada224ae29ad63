use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ModelSpec;

/// How the EP gradient is formed from the nudged fixed points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpMode {
    /// Free phase plus one `+β` nudge phase.
    TwoPhase,
    /// Free phase plus `+β` and `−β` nudge phases, both starting from `s_*`.
    ThreePhaseSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Equilibrium Propagation hyper-parameters.
///
/// `beta_ep` is the influence (nudging) factor. It is unrelated to the
/// Hopfield inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpConfig {
    pub beta_ep: f64,
    /// Free-phase length `T`.
    pub free_steps: usize,
    /// Nudge-phase length `K`.
    pub nudge_steps: usize,
    pub mode: EpMode,
    /// One learning rate per connection, projections first.
    pub lr: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Fixed-point residual regarded as converged.
    pub residual_tol: f64,
}

impl EpConfig {
    /// Sentiment setting: β=0.1, T=50, K=25, four connections, batch 128, 40 epochs.
    pub fn imdb() -> Self {
        Self {
            beta_ep: 0.1,
            free_steps: 50,
            nudge_steps: 25,
            mode: EpMode::ThreePhaseSymmetric,
            lr: vec![1e-4, 5e-5, 5e-5, 5e-5],
            epochs: 40,
            batch_size: 128,
            optimizer: OptimizerKind::Adam,
            residual_tol: 1e-3,
        }
    }

    /// Inference setting: β=0.5, T=60, K=30, six connections, batch 256, 50 epochs.
    pub fn snli() -> Self {
        Self {
            beta_ep: 0.5,
            free_steps: 60,
            nudge_steps: 30,
            mode: EpMode::ThreePhaseSymmetric,
            lr: vec![5e-4, 5e-4, 5e-4, 5e-4, 2e-4, 2e-4],
            epochs: 50,
            batch_size: 256,
            optimizer: OptimizerKind::Adam,
            residual_tol: 1e-3,
        }
    }

    /// Desk-scale setting for the synthetic cluster task with one hidden
    /// layer: β=0.5, T=30, K=10, three connections, batch 32, 20 epochs.
    pub fn synthetic() -> Self {
        Self {
            beta_ep: 0.5,
            free_steps: 30,
            nudge_steps: 10,
            mode: EpMode::ThreePhaseSymmetric,
            lr: vec![1e-3; 3],
            epochs: 20,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            residual_tol: 1e-3,
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let bad = |field: &str, msg: String| {
            Err(Error::Config {
                field: field.into(),
                msg,
            })
        };
        if !(self.beta_ep.abs() > 0.0 && self.beta_ep.abs() < 1.0) {
            return bad("beta_ep", format!("|beta_ep| must lie in (0, 1), got {}", self.beta_ep));
        }
        if self.nudge_steps == 0 || self.free_steps <= self.nudge_steps {
            return bad(
                "free_steps",
                format!(
                    "need free_steps > nudge_steps > 0, got T={} K={}",
                    self.free_steps, self.nudge_steps
                ),
            );
        }
        if self.lr.len() != spec.num_connections() {
            return bad(
                "lr",
                format!(
                    "{} learning rates for {} connections",
                    self.lr.len(),
                    spec.num_connections()
                ),
            );
        }
        if self.lr.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("lr", "learning rates must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs", "must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive".into());
        }
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol", "must be positive".into());
        }
        Ok(())
    }
}
