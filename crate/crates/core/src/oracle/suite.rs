//! Seeded toy networks for gradient certification.
//!
//! Every member has one HopAttn projection layer, `N ≤ 8`, `D ≤ 8` and at
//! most three fully connected layers. Candidates whose free phase does not
//! settle, or whose output units sit on or near a clamp boundary, are
//! rejected and the next seed is tried; the resulting suite is a pure
//! function of the configuration.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopfield::HopfieldConfig;
use crate::network::{Dynamics, InputBundle, ModelSpec, NetworkState, Theta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySuiteConfig {
    pub members: usize,
    pub base_seed: u64,
    /// Multiplier on the Glorot-uniform range; small values keep the
    /// dynamics contractive.
    pub init_gain: f64,
    pub max_seq_len: usize,
    pub max_embed_dim: usize,
    pub max_fc_layers: usize,
    /// Free steps used to screen candidates.
    pub screen_steps: usize,
    /// Residual a candidate's free phase must reach within `screen_steps`.
    pub settle_tol: f64,
    /// Minimum distance of every output unit from 0 and 1 at the fixed point.
    pub output_margin: f64,
    /// Give up after this many candidates.
    pub max_candidates: usize,
}

impl Default for ToySuiteConfig {
    fn default() -> Self {
        Self {
            members: 50,
            base_seed: 2024,
            init_gain: 0.5,
            max_seq_len: 8,
            max_embed_dim: 8,
            max_fc_layers: 3,
            screen_steps: 200,
            settle_tol: 1e-12,
            output_margin: 0.02,
            max_candidates: 5000,
        }
    }
}

impl ToySuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| {
            Err(Error::Config {
                field: field.into(),
                msg: msg.into(),
            })
        };
        if self.members == 0 {
            return bad("members", "must be positive");
        }
        if !(1..=8).contains(&self.max_seq_len) || !(1..=8).contains(&self.max_embed_dim) {
            return bad("max_seq_len", "sequence length and embedding dimension must lie in 1..=8");
        }
        if !(1..=3).contains(&self.max_fc_layers) {
            return bad("max_fc_layers", "must lie in 1..=3");
        }
        if !(self.init_gain > 0.0) {
            return bad("init_gain", "must be positive");
        }
        if self.screen_steps == 0 {
            return bad("screen_steps", "must be positive");
        }
        if !(0.0..0.5).contains(&self.output_margin) {
            return bad("output_margin", "must lie in [0, 0.5)");
        }
        Ok(())
    }
}

/// One toy network with its input and target.
#[derive(Debug, Clone)]
pub struct ToyMember {
    pub seed: u64,
    pub spec: ModelSpec,
    pub theta: Theta,
    pub hop: HopfieldConfig,
    pub input: InputBundle,
    pub target: Array1<f64>,
}

impl ToyMember {
    /// Unscreened candidate drawn from `seed`.
    pub fn generate(seed: u64, cfg: &ToySuiteConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=cfg.max_seq_len.max(2));
        let d = rng.random_range(2..=cfg.max_embed_dim.max(2));
        let n_fc = rng.random_range(1..=cfg.max_fc_layers);
        let classes = rng.random_range(2..=3);
        let mut fc_sizes: Vec<usize> = (0..n_fc - 1).map(|_| rng.random_range(2..=6)).collect();
        fc_sizes.push(classes);
        let spec = ModelSpec::single_sequence(n, d, fc_sizes, true);
        let theta = Theta::init(&spec, cfg.init_gain, &mut rng);
        let valid = if n > 2 && rng.random_bool(0.25) { n - 1 } else { n };
        let mut x = Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0));
        x.slice_mut(ndarray::s![valid.., ..]).fill(0.0);
        let input = InputBundle {
            seqs: vec![x],
            valid_lengths: vec![valid],
        };
        let mut target = Array1::zeros(classes);
        target[rng.random_range(0..classes)] = 1.0;
        Self {
            seed,
            spec,
            theta,
            hop: HopfieldConfig::new(d),
            input,
            target,
        }
    }

    pub fn dynamics(&self) -> Result<Dynamics<'_>> {
        Dynamics::new(&self.spec, &self.theta, self.hop, &self.input)
    }

    /// Whether the free phase settles and leaves every output unit inside
    /// `(margin, 1 − margin)`.
    pub fn passes_screen(&self, cfg: &ToySuiteConfig) -> Result<bool> {
        let d = self.dynamics()?;
        let r = d.relax(NetworkState::zeros(&self.spec), None, 0.0, cfg.screen_steps)?;
        let settled = r.final_residual() <= cfg.settle_tol;
        let interior = r
            .state
            .output()
            .iter()
            .all(|&v| v > cfg.output_margin && v < 1.0 - cfg.output_margin);
        Ok(settled && interior)
    }
}

/// Screened suite plus the number of rejected candidates.
#[derive(Debug, Clone)]
pub struct ToySuite {
    pub members: Vec<ToyMember>,
    pub rejected: usize,
}

pub fn toy_suite(cfg: &ToySuiteConfig) -> Result<ToySuite> {
    cfg.validate()?;
    let mut members = Vec::with_capacity(cfg.members);
    let mut rejected = 0;
    let mut seed = cfg.base_seed;
    while members.len() < cfg.members {
        if members.len() + rejected >= cfg.max_candidates {
            return Err(Error::Domain(format!(
                "only {} of {} toy members accepted after {} candidates",
                members.len(),
                cfg.members,
                cfg.max_candidates
            )));
        }
        let m = ToyMember::generate(seed, cfg);
        if m.passes_screen(cfg)? {
            members.push(m);
        } else {
            rejected += 1;
        }
        seed += 1;
    }
    Ok(ToySuite { members, rejected })
}
