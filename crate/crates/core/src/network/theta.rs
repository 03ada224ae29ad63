use std::fmt;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::ModelSpec;
use crate::error::{shape_err, Result};

/// Identifies one weight tensor. `Fc(i)` is the weight feeding fully
/// connected layer `i` from the layer below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConnectionId {
    Projection(usize),
    Fc(usize),
}

impl fmt::Display for ConnectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnectionId::Projection(j) => write!(f, "proj{j}"),
            ConnectionId::Fc(i) => write!(f, "fc{i}"),
        }
    }
}

impl std::str::FromStr for ConnectionId {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| crate::Error::Format(format!("bad connection name `{s}`")))
        };
        if let Some(rest) = s.strip_prefix("proj") {
            Ok(ConnectionId::Projection(parse(rest)?))
        } else if let Some(rest) = s.strip_prefix("fc") {
            Ok(ConnectionId::Fc(parse(rest)?))
        } else {
            Err(crate::Error::Format(format!("bad connection name `{s}`")))
        }
    }
}

/// Network parameters: one matrix per connection and no biases.
///
/// Every connection is stored once. The downward pass of the dynamics reads
/// the same matrix transposed, so the weights are symmetric by construction.
/// The same container holds gradient estimates, which share its shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    /// `w_{1j}`, `D × D`, acting as `x · w_{1j}`.
    pub projection: Vec<Array2<f64>>,
    /// `fc[i]` maps layer `i-1` (or `F(s^1)` for `i = 0`) to layer `i`.
    pub fc: Vec<Array2<f64>>,
}

impl Theta {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let d = spec.embed_dim();
        Self {
            projection: spec.projections.iter().map(|_| Array2::zeros((d, d))).collect(),
            fc: (0..spec.fc_sizes.len()).map(|i| Array2::zeros(spec.fc_shape(i))).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            projection: self.projection.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            fc: self.fc.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        }
    }

    /// Uniform in `±gain·√(6/(fan_in+fan_out))` per connection.
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, gain: f64, rng: &mut R) -> Self {
        let mut theta = Self::zeros(spec);
        for w in theta.tensors_mut() {
            let (rows, cols) = w.dim();
            let limit = gain * (6.0 / (rows + cols) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite init bound");
            w.mapv_inplace(|_| dist.sample(rng));
        }
        theta
    }

    pub fn check_shapes(&self, spec: &ModelSpec) -> Result<()> {
        let expected = Self::zeros(spec);
        if self.projection.len() != expected.projection.len() || self.fc.len() != expected.fc.len() {
            return Err(shape_err("parameter set does not match the model's connection count"));
        }
        for ((id, w), (_, e)) in self.iter().zip(expected.iter()) {
            if w.dim() != e.dim() {
                return Err(shape_err(format!(
                    "connection {id} has shape {:?}, expected {:?}",
                    w.dim(),
                    e.dim()
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|w| w.iter().all(|v| v.is_finite()))
    }

    pub fn connection_ids(&self) -> Vec<ConnectionId> {
        self.iter().map(|(id, _)| id).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConnectionId, &Array2<f64>)> {
        let proj = self.projection.iter().enumerate().map(|(j, w)| (ConnectionId::Projection(j), w));
        let fc = self.fc.iter().enumerate().map(|(i, w)| (ConnectionId::Fc(i), w));
        proj.chain(fc)
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.projection.iter().chain(self.fc.iter())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.projection.iter_mut().chain(self.fc.iter_mut())
    }

    pub fn get(&self, id: ConnectionId) -> Option<&Array2<f64>> {
        match id {
            ConnectionId::Projection(j) => self.projection.get(j),
            ConnectionId::Fc(i) => self.fc.get(i),
        }
    }

    pub fn get_mut(&mut self, id: ConnectionId) -> Option<&mut Array2<f64>> {
        match id {
            ConnectionId::Projection(j) => self.projection.get_mut(j),
            ConnectionId::Fc(i) => self.fc.get_mut(i),
        }
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.tensors().map(|w| w.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters in connection order, each tensor row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().flat_map(|w| w.iter().copied()).collect()
    }

    /// Connection and (row, col) of flat coordinate `k`.
    pub fn locate(&self, mut k: usize) -> Option<(ConnectionId, usize, usize)> {
        for (id, w) in self.iter() {
            if k < w.len() {
                return Some((id, k / w.ncols(), k % w.ncols()));
            }
            k -= w.len();
        }
        None
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        let (id, r, c) = self.locate(k).expect("coordinate in range");
        self.get(id).expect("located connection")[[r, c]]
    }

    pub fn coordinate_mut(&mut self, k: usize) -> &mut f64 {
        let (id, r, c) = self.locate(k).expect("coordinate in range");
        &mut self.get_mut(id).expect("located connection")[[r, c]]
    }

    /// `self += alpha * other`.
    pub fn scaled_add(&mut self, alpha: f64, other: &Theta) {
        for (w, o) in self.tensors_mut().zip(other.tensors()) {
            w.scaled_add(alpha, o);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for w in self.tensors_mut() {
            w.mapv_inplace(|v| v * alpha);
        }
    }

    pub fn dot(&self, other: &Theta) -> f64 {
        self.tensors()
            .zip(other.tensors())
            .map(|(a, b)| (a * b).sum())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}
