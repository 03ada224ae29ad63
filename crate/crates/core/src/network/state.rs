use ndarray::{s, Array1, Array2};

use super::ModelSpec;
use crate::error::{shape_err, Result};

/// Static input of one sample: one `N × D` matrix per input sequence plus
/// the number of non-padding rows in each.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBundle {
    pub seqs: Vec<Array2<f64>>,
    pub valid_lengths: Vec<usize>,
}

impl InputBundle {
    pub fn new(seqs: Vec<Array2<f64>>, valid_lengths: Vec<usize>) -> Result<Self> {
        if seqs.len() != valid_lengths.len() {
            return Err(shape_err("one valid length is required per input sequence"));
        }
        for (x, &len) in seqs.iter().zip(&valid_lengths) {
            if len > x.nrows() {
                return Err(shape_err(format!("valid length {len} exceeds {} rows", x.nrows())));
            }
        }
        Ok(Self { seqs, valid_lengths })
    }

    /// Every row of every sequence is valid.
    pub fn dense(seqs: Vec<Array2<f64>>) -> Self {
        let valid_lengths = seqs.iter().map(|x| x.nrows()).collect();
        Self { seqs, valid_lengths }
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.seqs.len() != spec.input_arity() || self.valid_lengths.len() != spec.input_arity() {
            return Err(shape_err(format!(
                "model expects {} input sequences, got {}",
                spec.input_arity(),
                self.seqs.len()
            )));
        }
        for (k, (x, shape)) in self.seqs.iter().zip(&spec.inputs).enumerate() {
            if x.dim() != (shape.seq_len, shape.embed_dim) {
                return Err(shape_err(format!(
                    "input {k} has shape {:?}, expected ({}, {})",
                    x.dim(),
                    shape.seq_len,
                    shape.embed_dim
                )));
            }
            if self.valid_lengths[k] > shape.seq_len {
                return Err(shape_err(format!("input {k} valid length exceeds sequence length")));
            }
            if x.slice(s![self.valid_lengths[k].., ..]).iter().any(|&v| v != 0.0) {
                return Err(shape_err(format!("input {k} has non-zero padding rows")));
            }
        }
        Ok(())
    }
}

/// Layer index for state-space operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerId {
    Projection(usize),
    Fc(usize),
}

/// Collective state `s = (s^1, …, s^n)` at one time step.
///
/// `projections[j]` is the matrix-shaped state of projection layer `j`;
/// `layers` holds the fully connected states, the last being the output.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub projections: Vec<Array2<f64>>,
    pub layers: Vec<Array1<f64>>,
    pub time_index: usize,
}

impl NetworkState {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let d = spec.embed_dim();
        Self {
            projections: (0..spec.projections.len())
                .map(|j| Array2::zeros((spec.projection_rows(j), d)))
                .collect(),
            layers: spec.fc_sizes.iter().map(|&n| Array1::zeros(n)).collect(),
            time_index: 0,
        }
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        let expected = Self::zeros(spec);
        let proj_ok = self.projections.len() == expected.projections.len()
            && self
                .projections
                .iter()
                .zip(&expected.projections)
                .all(|(a, b)| a.dim() == b.dim());
        let fc_ok = self.layers.len() == expected.layers.len()
            && self.layers.iter().zip(&expected.layers).all(|(a, b)| a.len() == b.len());
        if proj_ok && fc_ok {
            Ok(())
        } else {
            Err(shape_err("network state does not match the model spec"))
        }
    }

    pub fn output(&self) -> &Array1<f64> {
        self.layers.last().expect("state has an output layer")
    }

    /// `F(s^1)`: projection states concatenated along the sequence axis, row-major.
    pub fn flat_projection(&self) -> Array1<f64> {
        self.projections.iter().flat_map(|p| p.iter().copied()).collect()
    }

    /// `‖self − other‖∞` over every layer.
    pub fn max_abs_diff(&self, other: &NetworkState) -> f64 {
        let proj = self
            .projections
            .iter()
            .zip(&other.projections)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()));
        let fc = self
            .layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()));
        proj.chain(fc).fold(0.0, f64::max)
    }

    /// Squared-error loss `½‖s^n − y‖²`.
    pub fn loss(&self, target: &Array1<f64>) -> f64 {
        0.5 * self
            .output()
            .iter()
            .zip(target.iter())
            .map(|(o, y)| (o - y) * (o - y))
            .sum::<f64>()
    }
}
