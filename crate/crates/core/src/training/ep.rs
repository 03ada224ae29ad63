//! EP gradient estimators.
//!
//! With `∂φ/∂θ` evaluated at fixed points (states held constant):
//!
//! ```text
//! two-phase   (1/β)  (∂φ/∂θ(s_*^β)  − ∂φ/∂θ(s_*))
//! symmetric   (1/2β) (∂φ/∂θ(s_*^β)  − ∂φ/∂θ(s_*^{−β}))
//! truncated   (1/β)  (∂φ/∂θ(s_t^β)  − ∂φ/∂θ(s_*))         t = 1..K
//! ```
//!
//! All estimates point in the loss-decreasing direction and are applied as
//! `θ ← θ + η·∇`.

use ndarray::{Array1, Array2, ArrayView1};

use super::{EpConfig, EpMode, GradientBundle, Provenance};
use crate::error::{domain_err, Result};
use crate::hopfield::HopfieldConfig;
use crate::network::{Dynamics, InputBundle, ModelSpec, NetworkState, Relaxation, Theta};

fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(r, c)| a[r] * b[c])
}

/// `∂φ/∂θ` at state `s`; independent of θ itself.
pub(crate) fn phi_partials(spec: &ModelSpec, input: &InputBundle, s: &NetworkState) -> Theta {
    let projection = spec
        .projections
        .iter()
        .zip(&s.projections)
        .map(|(p, sj)| input.seqs[p.input].t().dot(sj))
        .collect();
    let flat = s.flat_projection();
    let fc = (0..s.layers.len())
        .map(|i| {
            let below = if i == 0 { flat.view() } else { s.layers[i - 1].view() };
            outer(s.layers[i].view(), below)
        })
        .collect();
    Theta { projection, fc }
}

/// Closed-form `∂φ/∂θ` at state `s`.
pub fn phi_grad_params(
    input: &InputBundle,
    s: &NetworkState,
    theta: &Theta,
    spec: &ModelSpec,
) -> Result<GradientBundle> {
    spec.validate()?;
    theta.check_shapes(spec)?;
    input.check(spec)?;
    s.check(spec)?;
    Ok(GradientBundle::new(phi_partials(spec, input, s), Provenance::PhiPartial))
}

/// `scale · (∂φ/∂θ(a) − ∂φ/∂θ(b))`.
pub(crate) fn contrast(spec: &ModelSpec, input: &InputBundle, a: &NetworkState, b: &NetworkState, scale: f64) -> Theta {
    let pa = phi_partials(spec, input, a);
    let pb = phi_partials(spec, input, b);
    let mut out = pa.zeros_like();
    for ((o, x), y) in out.tensors_mut().zip(pa.tensors()).zip(pb.tensors()) {
        *o = (x - y) * scale;
    }
    out
}

/// Fixed points reached by the EP phases for one sample.
#[derive(Debug, Clone)]
pub struct FixedPoints {
    /// Free phase from the zero state; `free.state` is `s_*`.
    pub free: Relaxation,
    /// `+β` nudge phase from `s_*`.
    pub plus: NetworkState,
    /// `−β` nudge phase from `s_*` (symmetric mode only).
    pub minus: Option<NetworkState>,
}

/// Run the free phase and the nudge phases required by `cfg.mode`.
pub fn run_phases(dynamics: &Dynamics<'_>, target: &Array1<f64>, cfg: &EpConfig) -> Result<FixedPoints> {
    if cfg.beta_ep == 0.0 {
        return Err(domain_err("the influence factor must be non-zero"));
    }
    let spec = dynamics.spec();
    let free = dynamics.relax(NetworkState::zeros(spec), None, 0.0, cfg.free_steps)?;
    let plus = dynamics
        .relax(free.state.clone(), Some(target), cfg.beta_ep, cfg.nudge_steps)?
        .state;
    let minus = match cfg.mode {
        EpMode::TwoPhase => None,
        EpMode::ThreePhaseSymmetric => Some(
            dynamics
                .relax(free.state.clone(), Some(target), -cfg.beta_ep, cfg.nudge_steps)?
                .state,
        ),
    };
    Ok(FixedPoints { free, plus, minus })
}

/// Two-phase estimate `(1/β)(∂φ/∂θ(s_*^β) − ∂φ/∂θ(s_*))`.
pub fn ep_gradient_two_phase(
    input: &InputBundle,
    target: &Array1<f64>,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    cfg: &EpConfig,
) -> Result<GradientBundle> {
    let dynamics = Dynamics::new(spec, theta, *hop, input)?;
    let cfg = EpConfig {
        mode: EpMode::TwoPhase,
        ..cfg.clone()
    };
    let fp = run_phases(&dynamics, target, &cfg)?;
    let g = contrast(spec, input, &fp.plus, &fp.free.state, 1.0 / cfg.beta_ep);
    Ok(GradientBundle::new(g, Provenance::EpTwoPhase))
}

/// Symmetric estimate `(1/2β)(∂φ/∂θ(s_*^β) − ∂φ/∂θ(s_*^{−β}))`.
pub fn ep_gradient_symmetric(
    input: &InputBundle,
    target: &Array1<f64>,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    cfg: &EpConfig,
) -> Result<GradientBundle> {
    let dynamics = Dynamics::new(spec, theta, *hop, input)?;
    let cfg = EpConfig {
        mode: EpMode::ThreePhaseSymmetric,
        ..cfg.clone()
    };
    let fp = run_phases(&dynamics, target, &cfg)?;
    Ok(symmetric_from_fixed_points(spec, input, &fp.plus, fp.minus.as_ref().expect("symmetric mode"), cfg.beta_ep))
}

pub(crate) fn symmetric_from_fixed_points(
    spec: &ModelSpec,
    input: &InputBundle,
    plus: &NetworkState,
    minus: &NetworkState,
    beta_ep: f64,
) -> GradientBundle {
    let g = contrast(spec, input, plus, minus, 1.0 / (2.0 * beta_ep));
    GradientBundle::new(g, Provenance::EpSymmetric)
}

/// Two-phase estimate after exactly `t` nudge steps, `1 ≤ t ≤ K`.
pub fn ep_gradient_truncated(
    input: &InputBundle,
    target: &Array1<f64>,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    cfg: &EpConfig,
    t: usize,
) -> Result<GradientBundle> {
    if t == 0 || t > cfg.nudge_steps {
        return Err(domain_err(format!("t must lie in 1..={}, got {t}", cfg.nudge_steps)));
    }
    let dynamics = Dynamics::new(spec, theta, *hop, input)?;
    let free = dynamics.relax(NetworkState::zeros(spec), None, 0.0, cfg.free_steps)?;
    let nudged = dynamics.relax(free.state.clone(), Some(target), cfg.beta_ep, t)?;
    let g = contrast(spec, input, &nudged.state, &free.state, 1.0 / cfg.beta_ep);
    Ok(GradientBundle::new(g, Provenance::EpTruncated(t)))
}

/// EP estimates for every `t = 1..=K` from a single free phase.
///
/// `symmetric = false` gives the two-phase truncated curve; `true` contrasts
/// the `+β` and `−β` trajectories at equal `t`.
pub fn ep_curve(
    input: &InputBundle,
    target: &Array1<f64>,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    cfg: &EpConfig,
    symmetric: bool,
) -> Result<Vec<GradientBundle>> {
    let dynamics = Dynamics::new(spec, theta, *hop, input)?;
    let free = dynamics.relax(NetworkState::zeros(spec), None, 0.0, cfg.free_steps)?;
    let beta = cfg.beta_ep;
    let mut plus = free.state.clone();
    let mut minus = free.state.clone();
    let mut curve = Vec::with_capacity(cfg.nudge_steps);
    for t in 1..=cfg.nudge_steps {
        plus = dynamics.step(&plus, Some(target), beta)?;
        let bundle = if symmetric {
            minus = dynamics.step(&minus, Some(target), -beta)?;
            GradientBundle::new(
                contrast(spec, input, &plus, &minus, 1.0 / (2.0 * beta)),
                Provenance::EpSymmetricTruncated(t),
            )
        } else {
            GradientBundle::new(
                contrast(spec, input, &plus, &free.state, 1.0 / beta),
                Provenance::EpTruncated(t),
            )
        };
        curve.push(bundle);
    }
    Ok(curve)
}

/// Local contrastive rule computed from the two nudged fixed points alone:
///
/// ```text
/// Δw_{i+1} = (1/2β) (s^{i+1,β} s^{i,βᵀ} − s^{i+1,−β} s^{i,−βᵀ})
/// Δw_{1j}  = (1/2β) (x_jᵀ s^{1j,β} − x_jᵀ s^{1j,−β})
/// ```
///
/// Each connection only reads the states of the two layers it joins.
pub fn local_weight_update(
    spec: &ModelSpec,
    input: &InputBundle,
    s_plus: &NetworkState,
    s_minus: &NetworkState,
    beta_ep: f64,
) -> Result<GradientBundle> {
    spec.validate()?;
    input.check(spec)?;
    s_plus.check(spec)?;
    s_minus.check(spec)?;
    if beta_ep == 0.0 {
        return Err(domain_err("the influence factor must be non-zero"));
    }
    let scale = 1.0 / (2.0 * beta_ep);
    let mut update = Theta::zeros(spec);
    accumulate_local_update(&mut update, spec, input, s_plus, s_minus, scale, false);
    Ok(GradientBundle::new(update, Provenance::LocalRule))
}

/// Adds (or, with `accumulate = false`, writes) `scale·(pre⁺post⁺ − pre⁻post⁻)`
/// into every connection of `acc`.
pub(crate) fn accumulate_local_update(
    acc: &mut Theta,
    spec: &ModelSpec,
    input: &InputBundle,
    s_plus: &NetworkState,
    s_minus: &NetworkState,
    scale: f64,
    accumulate: bool,
) {
    for (j, p) in spec.projections.iter().enumerate() {
        let x = &input.seqs[p.input];
        let plus = x.t().dot(&s_plus.projections[j]);
        let minus = x.t().dot(&s_minus.projections[j]);
        let w = &mut acc.projection[j];
        ndarray::Zip::from(w).and(&plus).and(&minus).for_each(|w, &a, &b| {
            let v = (a - b) * scale;
            *w = if accumulate { *w + v } else { v };
        });
    }
    let flat_plus = s_plus.flat_projection();
    let flat_minus = s_minus.flat_projection();
    for i in 0..s_plus.layers.len() {
        let (post_p, post_m) = (&s_plus.layers[i], &s_minus.layers[i]);
        let (pre_p, pre_m) = if i == 0 {
            (&flat_plus, &flat_minus)
        } else {
            (&s_plus.layers[i - 1], &s_minus.layers[i - 1])
        };
        let w = &mut acc.fc[i];
        for (r, mut row) in w.rows_mut().into_iter().enumerate() {
            let (ap, am) = (post_p[r], post_m[r]);
            for (c, wv) in row.iter_mut().enumerate() {
                let v = (ap * pre_p[c] - am * pre_m[c]) * scale;
                *wv = if accumulate { *wv + v } else { v };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy_spec() -> ModelSpec {
        ModelSpec::single_sequence(2, 2, vec![3, 2], false)
    }

    #[test]
    fn zero_state_gives_zero_partials() {
        let spec = toy_spec();
        let input = InputBundle::dense(vec![array![[1.0, 2.0], [3.0, 4.0]]]);
        let g = phi_grad_params(&input, &NetworkState::zeros(&spec), &Theta::zeros(&spec), &spec).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn basis_states_give_single_entry() {
        let spec = toy_spec();
        let input = InputBundle::dense(vec![array![[1.0, 2.0], [3.0, 4.0]]]);
        let mut s = NetworkState::zeros(&spec);
        s.layers[0][2] = 1.0; // s^{i} = e_2
        s.layers[1][1] = 1.0; // s^{i+1} = e_1
        let g = phi_grad_params(&input, &s, &Theta::zeros(&spec), &spec).unwrap();
        let mut expected = Array2::zeros((2, 3));
        expected[[1, 2]] = 1.0;
        assert_eq!(g.tensors.fc[1], expected);
    }

    #[test]
    fn local_update_hand_values() {
        // Two-neuron layers: Δ = (a⁺b⁺ᵀ − a⁻b⁻ᵀ)/(2β)
        let spec = ModelSpec::single_sequence(1, 1, vec![2, 2], false);
        let input = InputBundle::dense(vec![array![[0.0]]]);
        let mut plus = NetworkState::zeros(&spec);
        let mut minus = NetworkState::zeros(&spec);
        plus.layers = vec![array![0.5, 0.25], array![0.75, 0.125]];
        minus.layers = vec![array![0.5, 0.5], array![0.25, 1.0]];
        let beta = 0.25;
        let g = local_weight_update(&spec, &input, &plus, &minus, beta).unwrap();
        let expected = array![
            [(0.75 * 0.5 - 0.25 * 0.5) * 2.0, (0.75 * 0.25 - 0.25 * 0.5) * 2.0],
            [(0.125 * 0.5 - 1.0 * 0.5) * 2.0, (0.125 * 0.25 - 1.0 * 0.5) * 2.0]
        ];
        for (a, b) in g.tensors.fc[1].iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_states_give_zero_update_and_beta_scales() {
        let spec = toy_spec();
        let input = InputBundle::dense(vec![array![[1.0, -1.0], [0.5, 0.5]]]);
        let mut s = NetworkState::zeros(&spec);
        s.layers[0] = array![0.2, 0.4, 0.6];
        s.layers[1] = array![0.3, 0.9];
        s.projections[0] = array![[0.1, 0.2], [0.3, 0.4]];
        assert!(local_weight_update(&spec, &input, &s, &s, 0.1).unwrap().is_zero());

        let mut other = s.clone();
        other.layers[1][0] = 0.7;
        let g1 = local_weight_update(&spec, &input, &s, &other, 0.1).unwrap();
        let g2 = local_weight_update(&spec, &input, &s, &other, 0.2).unwrap();
        for (a, b) in g1.to_flat().iter().zip(g2.to_flat()) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
        assert!(local_weight_update(&spec, &input, &s, &other, 0.0).is_err());
    }
}
