//! Scalar primitive and transition dynamics.
//!
//! ```text
//! φ(x, s, θ) = Σ_j s^{1j} • (x_j · w_{1j}) + s^{2ᵀ} w_2 F(s^1) + Σ_{i≥2} s^{i+1ᵀ} w_{i+1} s^i
//! ```
//!
//! Every layer is updated synchronously from `s_t`:
//!
//! * projection layers with attention: `HopAttn(∂φ/∂s^{1j}, x_key)`,
//! * other projection and hidden layers: `σ(∂φ/∂s^i)`,
//! * output layer: `σ(∂φ/∂s^n) + β_ep (y − s^n_t)`,
//!
//! with `σ` the clamp to `[0, 1]`.

use ndarray::{s, Array1, Array2, ArrayD, ArrayView1};

use super::{InputBundle, LayerId, ModelSpec, NetworkState, Theta};
use crate::error::{domain_err, shape_err, Error, Result};
use crate::hopfield::{hop_attn, HopfieldConfig, StoredPatterns};

/// Hard-sigmoid activation: identity on `[0, 1]`, saturating outside.
#[inline]
pub fn sigma(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Subgradient of [`sigma`]; the kinks at exactly 0 and 1 take the interior value.
#[inline]
pub fn sigma_prime(v: f64) -> f64 {
    if (0.0..=1.0).contains(&v) {
        1.0
    } else {
        0.0
    }
}

/// State partials `∂φ/∂s` at one state, plus `φ` itself.
#[derive(Debug, Clone)]
pub struct PreActivations {
    pub projections: Vec<Array2<f64>>,
    pub layers: Vec<Array1<f64>>,
    pub phi: f64,
}

/// Result of iterating the transition map.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub state: NetworkState,
    /// `φ(s_t)` for `t = 0..=steps`.
    pub phi_trace: Vec<f64>,
    /// `‖s_{t+1} − s_t‖∞` for each step.
    pub residual_trace: Vec<f64>,
}

impl Relaxation {
    pub fn final_residual(&self) -> f64 {
        self.residual_trace.last().copied().unwrap_or(0.0)
    }

    pub fn final_phi(&self) -> f64 {
        *self.phi_trace.last().expect("trace holds the initial phi")
    }
}

/// Dynamics of one model on one static input.
///
/// Holds the input drives `x · w_{1j}` and the key sets, which stay fixed
/// for the whole relaxation.
pub struct Dynamics<'a> {
    spec: &'a ModelSpec,
    theta: &'a Theta,
    hop: HopfieldConfig,
    input: &'a InputBundle,
    drive: Vec<Array2<f64>>,
    keys: Vec<StoredPatterns>,
}

impl<'a> Dynamics<'a> {
    pub fn new(
        spec: &'a ModelSpec,
        theta: &'a Theta,
        hop: HopfieldConfig,
        input: &'a InputBundle,
    ) -> Result<Self> {
        spec.validate()?;
        theta.check_shapes(spec)?;
        input.check(spec)?;
        hop.validate()?;
        if hop.d_k != spec.embed_dim() {
            return Err(shape_err(format!(
                "Hopfield key dimension {} differs from embedding dimension {}",
                hop.d_k,
                spec.embed_dim()
            )));
        }
        let drive = spec
            .projections
            .iter()
            .zip(&theta.projection)
            .map(|(p, w)| input.seqs[p.input].dot(w))
            .collect();
        let keys = input
            .seqs
            .iter()
            .zip(&input.valid_lengths)
            .map(|(x, &len)| StoredPatterns::with_valid_rows(x.clone(), len))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            theta,
            hop,
            input,
            drive,
            keys,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn theta(&self) -> &Theta {
        self.theta
    }

    pub fn input(&self) -> &InputBundle {
        self.input
    }

    pub fn hopfield(&self) -> &HopfieldConfig {
        &self.hop
    }

    /// Stored patterns built from input sequence `k`.
    pub fn keys(&self, k: usize) -> &StoredPatterns {
        &self.keys[k]
    }

    /// `∂φ/∂s^i` for every layer, and `φ(s)`.
    pub fn pre_activations(&self, s: &NetworkState) -> PreActivations {
        let fc = &self.theta.fc;
        let m = fc.len();
        let flat = s.flat_projection();
        let forward: Vec<Array1<f64>> = (0..m)
            .map(|i| {
                if i == 0 {
                    fc[0].dot(&flat)
                } else {
                    fc[i].dot(&s.layers[i - 1])
                }
            })
            .collect();

        let mut phi: f64 = s
            .projections
            .iter()
            .zip(&self.drive)
            .map(|(sj, dj)| (sj * dj).sum())
            .sum();
        phi += s.layers.iter().zip(&forward).map(|(h, f)| h.dot(f)).sum::<f64>();

        let mut layers = forward;
        for i in 0..m - 1 {
            layers[i] += &fc[i + 1].t().dot(&s.layers[i + 1]);
        }

        let feedback = fc[0].t().dot(&s.layers[0]);
        let d = self.spec.embed_dim();
        let projections = (0..self.spec.projections.len())
            .map(|j| {
                let rows = self.spec.projection_rows(j);
                let off = self.spec.projection_offset(j);
                let block = feedback
                    .slice(s![off..off + rows * d])
                    .into_shape_with_order((rows, d))
                    .expect("contiguous feedback block");
                &self.drive[j] + &block
            })
            .collect();

        PreActivations {
            projections,
            layers,
            phi,
        }
    }

    pub fn phi(&self, s: &NetworkState) -> f64 {
        self.pre_activations(s).phi
    }

    fn check_nudge(&self, target: Option<&Array1<f64>>, beta_ep: f64) -> Result<()> {
        match target {
            None if beta_ep != 0.0 => Err(Error::Usage(
                "a target is required when the influence factor is non-zero".into(),
            )),
            Some(y) if y.len() != self.spec.num_classes() => Err(shape_err(format!(
                "target has length {}, expected {}",
                y.len(),
                self.spec.num_classes()
            ))),
            _ => Ok(()),
        }
    }

    /// Apply the transition map given the state partials of `s`.
    pub fn transition(
        &self,
        s: &NetworkState,
        pre: &PreActivations,
        target: Option<&Array1<f64>>,
        beta_ep: f64,
    ) -> Result<NetworkState> {
        let projections = self
            .spec
            .projections
            .iter()
            .zip(&pre.projections)
            .map(|(p, q)| match p.attention {
                Some(k) => hop_attn(q.view(), &self.keys[k], &self.hop),
                None => Ok(q.mapv(sigma)),
            })
            .collect::<Result<Vec<_>>>()?;

        let m = pre.layers.len();
        let mut layers: Vec<Array1<f64>> = pre.layers.iter().map(|v| v.mapv(sigma)).collect();
        if beta_ep != 0.0 {
            let y = target.expect("checked by caller");
            let out = &mut layers[m - 1];
            for ((o, &yk), &sk) in out.iter_mut().zip(y.iter()).zip(s.layers[m - 1].iter()) {
                *o += beta_ep * (yk - sk);
            }
        }
        Ok(NetworkState {
            projections,
            layers,
            time_index: s.time_index + 1,
        })
    }

    /// One synchronous step `s_t → s_{t+1}`.
    pub fn step(&self, s: &NetworkState, target: Option<&Array1<f64>>, beta_ep: f64) -> Result<NetworkState> {
        s.check(self.spec)?;
        self.check_nudge(target, beta_ep)?;
        let pre = self.pre_activations(s);
        self.transition(s, &pre, target, beta_ep)
    }

    /// Iterate [`Dynamics::step`] exactly `steps` times.
    pub fn relax(
        &self,
        s0: NetworkState,
        target: Option<&Array1<f64>>,
        beta_ep: f64,
        steps: usize,
    ) -> Result<Relaxation> {
        if steps == 0 {
            return Err(domain_err("relaxation needs at least one step"));
        }
        s0.check(self.spec)?;
        self.check_nudge(target, beta_ep)?;
        let mut phi_trace = Vec::with_capacity(steps + 1);
        let mut residual_trace = Vec::with_capacity(steps);
        let mut state = s0;
        for _ in 0..steps {
            let pre = self.pre_activations(&state);
            phi_trace.push(pre.phi);
            let next = self.transition(&state, &pre, target, beta_ep)?;
            residual_trace.push(next.max_abs_diff(&state));
            state = next;
        }
        phi_trace.push(self.phi(&state));
        Ok(Relaxation {
            state,
            phi_trace,
            residual_trace,
        })
    }
}

/// Scalar primitive `φ(x, s, θ)`.
pub fn phi(input: &InputBundle, s: &NetworkState, theta: &Theta, spec: &ModelSpec) -> Result<f64> {
    let dynamics = Dynamics::new(spec, theta, HopfieldConfig::new(spec.embed_dim()), input)?;
    s.check(spec)?;
    Ok(dynamics.phi(s))
}

/// Closed-form `∂φ/∂s^i` for one layer, shaped like that layer's state.
pub fn phi_grad_state(
    input: &InputBundle,
    s: &NetworkState,
    theta: &Theta,
    spec: &ModelSpec,
    layer: LayerId,
) -> Result<ArrayD<f64>> {
    let dynamics = Dynamics::new(spec, theta, HopfieldConfig::new(spec.embed_dim()), input)?;
    s.check(spec)?;
    let mut pre = dynamics.pre_activations(s);
    match layer {
        LayerId::Projection(j) if j < pre.projections.len() => Ok(pre.projections.swap_remove(j).into_dyn()),
        LayerId::Fc(i) if i < pre.layers.len() => Ok(pre.layers.swap_remove(i).into_dyn()),
        other => Err(domain_err(format!("layer {other:?} does not exist in this model"))),
    }
}

/// One transition step. `target` is required when `beta_ep != 0`.
#[allow(clippy::too_many_arguments)]
pub fn step(
    input: &InputBundle,
    target: Option<&Array1<f64>>,
    s: &NetworkState,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    beta_ep: f64,
) -> Result<NetworkState> {
    Dynamics::new(spec, theta, *hop, input)?.step(s, target, beta_ep)
}

/// `steps` transition steps from `s0`, with φ and residual traces.
#[allow(clippy::too_many_arguments)]
pub fn relax(
    input: &InputBundle,
    target: Option<&Array1<f64>>,
    s0: NetworkState,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    beta_ep: f64,
    steps: usize,
) -> Result<Relaxation> {
    Dynamics::new(spec, theta, *hop, input)?.relax(s0, target, beta_ep, steps)
}

/// Argmax of the output layer; ties go to the lowest index.
pub fn predict(s: &NetworkState) -> usize {
    argmax(s.output().view())
}

pub(crate) fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}
