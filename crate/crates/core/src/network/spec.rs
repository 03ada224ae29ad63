use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of one input sequence: `seq_len` rows of `embed_dim` features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub seq_len: usize,
    pub embed_dim: usize,
}

/// A projection layer `s^{1j}` driven by `x_input · w_{1j}`.
///
/// When `attention` names an input, the layer's state is the Hopfield
/// attention output over that input's rows instead of a clamped activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub input: usize,
    pub attention: Option<usize>,
}

/// Architecture of a convergent RNN.
///
/// The projection states are concatenated along the sequence axis, in the
/// order listed, and flattened row-major before feeding the first fully
/// connected layer. `fc_sizes` ends with the class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub inputs: Vec<InputShape>,
    pub projections: Vec<ProjectionSpec>,
    pub fc_sizes: Vec<usize>,
}

fn invalid(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

impl ModelSpec {
    /// One input sequence, one projection layer, with or without self-attention.
    pub fn single_sequence(seq_len: usize, embed_dim: usize, fc_sizes: Vec<usize>, attention: bool) -> Self {
        Self {
            inputs: vec![InputShape { seq_len, embed_dim }],
            projections: vec![ProjectionSpec {
                input: 0,
                attention: attention.then_some(0),
            }],
            fc_sizes,
        }
    }

    /// Premise/hypothesis layout: self-attention on each input plus the two
    /// cross alignments, four projection layers in total.
    pub fn sequence_pair(seq_len: usize, embed_dim: usize, fc_sizes: Vec<usize>, attention: bool) -> Self {
        let proj = |input, key| ProjectionSpec {
            input,
            attention: attention.then_some(key),
        };
        Self {
            inputs: vec![InputShape { seq_len, embed_dim }; 2],
            // A' = attn(s11, A), β = attn(s12, B), α = attn(s13, A), B' = attn(s14, B)
            projections: vec![proj(0, 0), proj(0, 1), proj(1, 0), proj(1, 1)],
            fc_sizes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() || self.inputs.len() > 2 {
            return Err(invalid("inputs", "input arity must be 1 or 2"));
        }
        let d = self.inputs[0].embed_dim;
        for shape in &self.inputs {
            if shape.seq_len == 0 {
                return Err(invalid("seq_len", "must be positive"));
            }
            if shape.embed_dim == 0 || shape.embed_dim != d {
                return Err(invalid("embed_dim", "must be positive and shared by all inputs"));
            }
        }
        if self.projections.is_empty() {
            return Err(invalid("projections", "at least one projection layer is required"));
        }
        for p in &self.projections {
            if p.input >= self.inputs.len() {
                return Err(invalid("projections", format!("input index {} out of range", p.input)));
            }
            if let Some(k) = p.attention {
                if k >= self.inputs.len() {
                    return Err(invalid("projections", format!("attention source {k} out of range")));
                }
            }
        }
        if self.fc_sizes.is_empty() {
            return Err(invalid("fc_sizes", "at least the output layer is required"));
        }
        if self.fc_sizes.contains(&0) {
            return Err(invalid("fc_sizes", "layer sizes must be positive"));
        }
        if self.num_classes() < 2 {
            return Err(invalid("fc_sizes", "the output layer needs at least two classes"));
        }
        Ok(())
    }

    pub fn input_arity(&self) -> usize {
        self.inputs.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.inputs[0].embed_dim
    }

    pub fn num_classes(&self) -> usize {
        *self.fc_sizes.last().expect("validated spec has an output layer")
    }

    /// Rows of projection layer `j`.
    pub fn projection_rows(&self, j: usize) -> usize {
        self.inputs[self.projections[j].input].seq_len
    }

    /// Offset of projection `j` inside the flattened `F(s^1)`.
    pub fn projection_offset(&self, j: usize) -> usize {
        (0..j).map(|k| self.projection_rows(k)).sum::<usize>() * self.embed_dim()
    }

    /// Length of the flattened projection block.
    pub fn flat_len(&self) -> usize {
        self.projection_offset(self.projections.len())
    }

    /// Projection weights first, then fully connected weights.
    pub fn num_connections(&self) -> usize {
        self.projections.len() + self.fc_sizes.len()
    }

    /// Shape of fully connected weight `i` (rows = layer `i`, cols = the layer below).
    pub fn fc_shape(&self, i: usize) -> (usize, usize) {
        let below = if i == 0 { self.flat_len() } else { self.fc_sizes[i - 1] };
        (self.fc_sizes[i], below)
    }

    pub fn has_attention(&self) -> bool {
        self.projections.iter().any(|p| p.attention.is_some())
    }
}
