use std::fmt;

use ndarray::Array2;

use crate::network::{ConnectionId, Theta};

/// Where a gradient estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// `∂φ/∂θ` at a single state.
    PhiPartial,
    EpTwoPhase,
    EpSymmetric,
    /// Two-phase estimate after `t` nudge steps.
    EpTruncated(usize),
    /// Symmetric estimate after `t` steps of each nudge phase.
    EpSymmetricTruncated(usize),
    LocalRule,
    /// Truncated BPTT over the last `t` steps.
    Bptt(usize),
    FiniteDifference,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::PhiPartial => write!(f, "phi-partial"),
            Provenance::EpTwoPhase => write!(f, "EP-two-phase"),
            Provenance::EpSymmetric => write!(f, "EP-symmetric"),
            Provenance::EpTruncated(t) => write!(f, "EP-truncated({t})"),
            Provenance::EpSymmetricTruncated(t) => write!(f, "EP-symmetric-truncated({t})"),
            Provenance::LocalRule => write!(f, "local-rule"),
            Provenance::Bptt(t) => write!(f, "BPTT({t})"),
            Provenance::FiniteDifference => write!(f, "finite-difference"),
        }
    }
}

/// Per-connection gradient tensors, shaped exactly like [`Theta`].
///
/// EP and BPTT bundles use the update convention `θ ← θ + η·g`: they
/// point in the loss-decreasing direction.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub tensors: Theta,
    pub provenance: Provenance,
}

impl GradientBundle {
    pub fn new(tensors: Theta, provenance: Provenance) -> Self {
        Self { tensors, provenance }
    }

    pub fn get(&self, id: ConnectionId) -> Option<&Array2<f64>> {
        self.tensors.get(id)
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.tensors().all(|w| w.iter().all(|&v| v == 0.0))
    }

    pub fn norm(&self) -> f64 {
        self.tensors.norm()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors.to_flat()
    }

    pub fn cosine(&self, other: &GradientBundle) -> f64 {
        cosine(&self.to_flat(), &other.to_flat())
    }

    pub fn rel_mse(&self, other: &GradientBundle) -> f64 {
        rel_mse(&self.to_flat(), &other.to_flat())
    }

    /// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
    pub fn relative_error(&self, other: &GradientBundle) -> f64 {
        relative_error(&self.to_flat(), &other.to_flat())
    }
}

pub const REL_MSE_EPS: f64 = 1e-30;

/// `‖a − b‖² / (‖a‖·‖b‖ + ε)`.
pub fn rel_mse(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    diff / (norm(a) * norm(b) + REL_MSE_EPS)
}

/// Cosine similarity; 1 for two zero vectors, 0 when exactly one is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb),
    }
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
