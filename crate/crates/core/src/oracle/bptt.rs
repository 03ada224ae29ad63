//! Unrolled backpropagation through the free dynamics.
//!
//! The loss `½‖s^n_{T+t} − y‖²` is attached after `T + t` free steps from the
//! zero state. `∇^BPTT(t)` differentiates it with respect to the parameters
//! used in the last `t` transitions only, treating `s_T` as a constant.
//! Transition jacobians are written out by hand: clamp subgradients (1 on
//! `[0, 1]`, 0 outside) and the full softmax jacobian of every attention row,
//! `∂out/∂q = β_h Kᵀ(diag p − p pᵀ)K`.
//!
//! Bundles are returned as update directions, `−∂L/∂θ`, so they compare
//! directly with the EP estimates.

use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::error::{domain_err, Error, Result};
use crate::hopfield::{attention_weights, HopfieldConfig};
use crate::network::{sigma_prime, Dynamics, InputBundle, ModelSpec, NetworkState, PreActivations, Theta};
use crate::training::{GradientBundle, Provenance};

/// States `s_0 … s_L` of a free unroll and the state partials of each
/// `s_0 … s_{L−1}`; `boundary` marks the end of the head (`T`).
#[derive(Debug, Clone)]
pub struct UnrollTrace {
    pub states: Vec<NetworkState>,
    pub pre: Vec<PreActivations>,
    pub boundary: usize,
}

impl UnrollTrace {
    /// `head + tail` free steps from the zero state, all with `dynamics`.
    pub fn record(dynamics: &Dynamics<'_>, head: usize, tail: usize) -> Result<Self> {
        Self::record_split(dynamics, dynamics, head, tail)
    }

    /// `head` steps under `head_dyn`, then `tail` steps under `tail_dyn`.
    pub fn record_split(head_dyn: &Dynamics<'_>, tail_dyn: &Dynamics<'_>, head: usize, tail: usize) -> Result<Self> {
        if head_dyn.spec() != tail_dyn.spec() {
            return Err(Error::Usage("head and tail dynamics use different models".into()));
        }
        let mut states = Vec::with_capacity(head + tail + 1);
        let mut pre = Vec::with_capacity(head + tail);
        let mut s = NetworkState::zeros(head_dyn.spec());
        for k in 0..head + tail {
            let d = if k < head { head_dyn } else { tail_dyn };
            let p = d.pre_activations(&s);
            let next = d.transition(&s, &p, None, 0.0)?;
            states.push(s);
            pre.push(p);
            s = next;
        }
        states.push(s);
        Ok(Self {
            states,
            pre,
            boundary: head,
        })
    }

    /// Number of transitions recorded.
    pub fn steps(&self) -> usize {
        self.pre.len()
    }

    pub fn last(&self) -> &NetworkState {
        self.states.last().expect("trace holds s_0")
    }

    /// Re-run every transition from the recorded `s_0` and compare bitwise.
    pub fn replays_exactly(&self, dynamics: &Dynamics<'_>) -> Result<bool> {
        let mut s = self.states[0].clone();
        for k in 0..self.steps() {
            s = dynamics.step(&s, None, 0.0)?;
            if s != self.states[k + 1] {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Side of the clamp each σ argument falls on, for every step in `window`:
    /// −1 below 0, 0 inside `[0, 1]`, +1 above 1. Attention rows are smooth and
    /// contribute nothing.
    pub fn clamp_signature(&self, spec: &ModelSpec, window: Range<usize>) -> Vec<i8> {
        let side = |v: f64| {
            if v < 0.0 {
                -1
            } else if v > 1.0 {
                1
            } else {
                0
            }
        };
        let mut sig = Vec::new();
        for pre in &self.pre[window] {
            for (p, q) in spec.projections.iter().zip(&pre.projections) {
                if p.attention.is_none() {
                    sig.extend(q.iter().map(|&v| side(v)));
                }
            }
            for l in &pre.layers {
                sig.extend(l.iter().map(|&v| side(v)));
            }
        }
        sig
    }
}

fn outer_add(acc: &mut Array2<f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) {
    for (r, mut row) in acc.rows_mut().into_iter().enumerate() {
        let ar = a[r];
        if ar != 0.0 {
            row.scaled_add(ar, &b);
        }
    }
}

/// Vector-jacobian product through one transition.
///
/// `lambda` is the adjoint of `s_{k+1}`; returns the adjoint of `s_k` and adds
/// `∂L/∂θ` contributions of this step into `grad` when `accumulate` is set.
fn backward_step(
    dynamics: &Dynamics<'_>,
    s: &NetworkState,
    pre: &PreActivations,
    lambda: &NetworkState,
    grad: &mut Theta,
    accumulate: bool,
) -> Result<NetworkState> {
    let spec = dynamics.spec();
    let theta = dynamics.theta();
    let beta_h = dynamics.hopfield().beta_h;
    let m = spec.fc_sizes.len();

    let mu: Vec<Array1<f64>> = (0..m)
        .map(|i| {
            let mut v = lambda.layers[i].clone();
            v.zip_mut_with(&pre.layers[i], |l, &p| *l *= sigma_prime(p));
            v
        })
        .collect();

    let mut big_m = Vec::with_capacity(spec.projections.len());
    for (j, p) in spec.projections.iter().enumerate() {
        let lam = &lambda.projections[j];
        let q = &pre.projections[j];
        let mj = match p.attention {
            Some(k) => {
                let keys = dynamics.keys(k);
                let kmat = keys.patterns();
                let mut out = Array2::zeros(q.raw_dim());
                for ((qr, lr), mut or) in q.rows().into_iter().zip(lam.rows()).zip(out.rows_mut()) {
                    let p = attention_weights(qr, keys, beta_h)?;
                    let a = kmat.dot(&lr);
                    let pa = p.dot(&a);
                    let b = &p * &(a - pa);
                    or.assign(&(kmat.t().dot(&b) * beta_h));
                }
                out
            }
            None => {
                let mut v = lam.clone();
                v.zip_mut_with(q, |l, &p| *l *= sigma_prime(p));
                v
            }
        };
        big_m.push(mj);
    }
    let flat_m: Array1<f64> = big_m.iter().flat_map(|mj| mj.iter().copied()).collect();
    let flat_s = s.flat_projection();

    if accumulate {
        for (j, p) in spec.projections.iter().enumerate() {
            let x = &dynamics.input().seqs[p.input];
            grad.projection[j] += &x.t().dot(&big_m[j]);
        }
        outer_add(&mut grad.fc[0], mu[0].view(), flat_s.view());
        outer_add(&mut grad.fc[0], s.layers[0].view(), flat_m.view());
        for i in 1..m {
            outer_add(&mut grad.fc[i], mu[i].view(), s.layers[i - 1].view());
            outer_add(&mut grad.fc[i], s.layers[i].view(), mu[i - 1].view());
        }
    }

    let fc = &theta.fc;
    let mut layers = Vec::with_capacity(m);
    for i in 0..m {
        let mut v = Array1::zeros(spec.fc_sizes[i]);
        if i + 1 < m {
            v += &fc[i + 1].t().dot(&mu[i + 1]);
        }
        if i >= 1 {
            v += &fc[i].dot(&mu[i - 1]);
        } else {
            v += &fc[0].dot(&flat_m);
        }
        layers.push(v);
    }
    let flat_lambda = fc[0].t().dot(&mu[0]);
    let d = spec.embed_dim();
    let projections = (0..spec.projections.len())
        .map(|j| {
            let off = spec.projection_offset(j);
            let rows = spec.projection_rows(j);
            flat_lambda
                .slice(s![off..off + rows * d])
                .to_owned()
                .into_shape_with_order((rows, d))
                .expect("contiguous block")
        })
        .collect();
    Ok(NetworkState {
        projections,
        layers,
        time_index: s.time_index,
    })
}

fn loss_adjoint(spec: &ModelSpec, last: &NetworkState, target: &Array1<f64>) -> Result<NetworkState> {
    if target.len() != spec.num_classes() {
        return Err(Error::Shape(format!(
            "target has length {}, expected {}",
            target.len(),
            spec.num_classes()
        )));
    }
    let mut lambda = NetworkState::zeros(spec);
    lambda.time_index = last.time_index;
    *lambda.layers.last_mut().expect("output layer") = last.output() - target;
    Ok(lambda)
}

/// `∂L/∂θ` for the loss at state `end` of `trace`, accumulating parameter
/// contributions from the transitions in `window` (`window.end == end`).
///
/// `tail_dyn` must be the dynamics that produced the transitions in `window`.
pub fn backprop_trace(
    tail_dyn: &Dynamics<'_>,
    trace: &UnrollTrace,
    target: &Array1<f64>,
    end: usize,
    window: Range<usize>,
) -> Result<Theta> {
    if end > trace.steps() || window.end != end || window.start > window.end {
        return Err(Error::Usage(format!(
            "window {window:?} and loss step {end} do not fit a trace of {} steps",
            trace.steps()
        )));
    }
    let spec = tail_dyn.spec();
    if trace.states[0].check(spec).is_err() {
        return Err(Error::Usage("trace was recorded for a different model".into()));
    }
    let mut grad = Theta::zeros(spec);
    let mut lambda = loss_adjoint(spec, &trace.states[end], target)?;
    for k in window.rev() {
        lambda = backward_step(tail_dyn, &trace.states[k], &trace.pre[k], &lambda, &mut grad, true)?;
    }
    Ok(grad)
}

fn check_t(t: usize, nudge_steps: usize) -> Result<()> {
    if t == 0 || t > nudge_steps {
        Err(domain_err(format!("t must lie in 1..={nudge_steps}, got {t}")))
    } else {
        Ok(())
    }
}

fn negate(mut g: Theta) -> Theta {
    g.scale(-1.0);
    g
}

/// `∇^BPTT(t)`: update direction from the last `t` of `T + t` free steps.
#[allow(clippy::too_many_arguments)]
pub fn bptt_gradient(
    input: &InputBundle,
    target: &Array1<f64>,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    free_steps: usize,
    nudge_steps: usize,
    t: usize,
) -> Result<GradientBundle> {
    check_t(t, nudge_steps)?;
    let dynamics = Dynamics::new(spec, theta, *hop, input)?;
    let trace = UnrollTrace::record(&dynamics, free_steps, t)?;
    let g = backprop_trace(&dynamics, &trace, target, free_steps + t, free_steps..free_steps + t)?;
    Ok(GradientBundle::new(negate(g), Provenance::Bptt(t)))
}

/// `∇^BPTT(t)` for every `t = 1..=K` from one recorded trace.
#[allow(clippy::too_many_arguments)]
pub fn bptt_curve(
    input: &InputBundle,
    target: &Array1<f64>,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    free_steps: usize,
    nudge_steps: usize,
) -> Result<Vec<GradientBundle>> {
    let dynamics = Dynamics::new(spec, theta, *hop, input)?;
    let trace = UnrollTrace::record(&dynamics, free_steps, nudge_steps)?;
    (1..=nudge_steps)
        .map(|t| {
            let end = free_steps + t;
            let g = backprop_trace(&dynamics, &trace, target, end, free_steps..end)?;
            Ok(GradientBundle::new(negate(g), Provenance::Bptt(t)))
        })
        .collect()
}

/// Update direction for the loss after `steps` free steps, differentiated
/// through every step (θ shared by all of them).
pub fn bptt_gradient_full(
    input: &InputBundle,
    target: &Array1<f64>,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    steps: usize,
) -> Result<GradientBundle> {
    if steps == 0 {
        return Err(domain_err("unroll needs at least one step"));
    }
    let dynamics = Dynamics::new(spec, theta, *hop, input)?;
    let trace = UnrollTrace::record(&dynamics, 0, steps)?;
    let g = backprop_trace(&dynamics, &trace, target, steps, 0..steps)?;
    Ok(GradientBundle::new(negate(g), Provenance::Bptt(steps)))
}

/// Loss after `head` free steps under `theta_head` followed by `tail` steps
/// under `theta_tail`. With `theta_head` held fixed, its derivative in
/// `theta_tail` is `−∇^BPTT(tail)`.
#[allow(clippy::too_many_arguments)]
pub fn unrolled_loss_split(
    input: &InputBundle,
    target: &Array1<f64>,
    theta_head: &Theta,
    theta_tail: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    head: usize,
    tail: usize,
) -> Result<f64> {
    Ok(unrolled_trace_split(input, theta_head, theta_tail, spec, hop, head, tail)?
        .last()
        .loss(target))
}

/// Trace of the split unroll used by [`unrolled_loss_split`].
pub fn unrolled_trace_split(
    input: &InputBundle,
    theta_head: &Theta,
    theta_tail: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    head: usize,
    tail: usize,
) -> Result<UnrollTrace> {
    let head_dyn = Dynamics::new(spec, theta_head, *hop, input)?;
    let tail_dyn = Dynamics::new(spec, theta_tail, *hop, input)?;
    UnrollTrace::record_split(&head_dyn, &tail_dyn, head, tail)
}

/// Loss after `steps` free steps from the zero state.
pub fn unrolled_loss(
    input: &InputBundle,
    target: &Array1<f64>,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    steps: usize,
) -> Result<f64> {
    unrolled_loss_split(input, target, theta, theta, spec, hop, 0, steps)
}
