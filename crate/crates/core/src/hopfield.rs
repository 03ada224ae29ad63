//! Modern Hopfield network primitives.
//!
//! ```text
//! E(ξ)    = -lse(β, Xᵀξ) + ½ ξᵀξ + β⁻¹ log N + ½ M²
//! lse(β, z) = β⁻¹ log Σᵢ exp(β zᵢ)
//! ξ_new   = X softmax(β Xᵀξ)
//! ```
//!
//! One update of the state pattern is exactly one row of scaled dot-product
//! attention with the stored patterns acting as both keys and values, so
//! [`hop_attn`] is implemented by running [`hopfield_update`] on every query
//! row. Padding rows of a [`StoredPatterns`] never receive attention mass.
//!
//! The inverse temperature here (`beta_h`) is unrelated to the EP influence
//! factor, which lives in `training::EpConfig::beta_ep`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{domain_err, shape_err, Result};

/// Continuous stored patterns, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredPatterns {
    patterns: Array2<f64>,
    valid_rows: usize,
}

impl StoredPatterns {
    /// All rows are valid patterns.
    pub fn new(patterns: Array2<f64>) -> Result<Self> {
        let n = patterns.nrows();
        Self::with_valid_rows(patterns, n)
    }

    /// The first `valid_rows` rows are patterns; the rest are zero padding.
    pub fn with_valid_rows(patterns: Array2<f64>, valid_rows: usize) -> Result<Self> {
        if patterns.nrows() == 0 || patterns.ncols() == 0 {
            return Err(domain_err("stored patterns must have at least one row and column"));
        }
        if valid_rows > patterns.nrows() {
            return Err(domain_err(format!(
                "valid_rows {} exceeds pattern count {}",
                valid_rows,
                patterns.nrows()
            )));
        }
        if patterns.iter().any(|v| !v.is_finite()) {
            return Err(domain_err("stored patterns contain non-finite entries"));
        }
        if patterns.slice(s![valid_rows.., ..]).iter().any(|&v| v != 0.0) {
            return Err(domain_err("padding rows of stored patterns must be all-zero"));
        }
        Ok(Self {
            patterns,
            valid_rows,
        })
    }

    pub fn patterns(&self) -> ArrayView2<'_, f64> {
        self.patterns.view()
    }

    /// The non-padding rows.
    pub fn valid(&self) -> ArrayView2<'_, f64> {
        self.patterns.slice(s![..self.valid_rows, ..])
    }

    pub fn len(&self) -> usize {
        self.patterns.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_rows == 0
    }

    pub fn valid_rows(&self) -> usize {
        self.valid_rows
    }

    pub fn dim(&self) -> usize {
        self.patterns.ncols()
    }

    /// Largest Euclidean norm over the valid rows (M in the energy).
    pub fn max_norm(&self) -> f64 {
        self.valid()
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Inverse temperature and key dimension of a Hopfield layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfieldConfig {
    pub beta_h: f64,
    pub d_k: usize,
}

impl HopfieldConfig {
    /// `beta_h = 1/√d_k`.
    pub fn new(d_k: usize) -> Self {
        Self {
            beta_h: 1.0 / (d_k as f64).sqrt(),
            d_k,
        }
    }

    pub fn with_beta(d_k: usize, beta_h: f64) -> Result<Self> {
        let cfg = Self { beta_h, d_k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_h > 0.0 && self.beta_h.is_finite()) {
            return Err(domain_err(format!("beta_h must be positive, got {}", self.beta_h)));
        }
        if self.d_k == 0 {
            return Err(domain_err("d_k must be positive"));
        }
        Ok(())
    }
}

/// `β⁻¹ log Σ exp(β·scoreᵢ)`, evaluated with the maximum factored out.
pub fn lse(beta: f64, scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(domain_err("lse of an empty score vector"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(domain_err(format!("lse requires beta > 0, got {beta}")));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(domain_err("lse scores must be finite"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|&v| (beta * (v - max)).exp()).sum();
    Ok(max + sum.ln() / beta)
}

/// In-place softmax of `beta * scores` with max subtraction.
fn softmax_scaled(beta: f64, scores: &mut Array1<f64>) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    scores.mapv_inplace(|v| {
        let e = (beta * (v - max)).exp();
        total += e;
        e
    });
    *scores /= total;
}

/// Attention weights `softmax(β Xᵀξ)` over all rows of `stored`; padding rows get 0.
pub fn attention_weights(
    xi: ArrayView1<'_, f64>,
    stored: &StoredPatterns,
    beta_h: f64,
) -> Result<Array1<f64>> {
    if xi.len() != stored.dim() {
        return Err(shape_err(format!(
            "state pattern has length {} but stored patterns have dimension {}",
            xi.len(),
            stored.dim()
        )));
    }
    if stored.is_empty() {
        return Err(domain_err("all stored patterns are masked"));
    }
    let mut scores = stored.valid().dot(&xi);
    softmax_scaled(beta_h, &mut scores);
    let mut weights = Array1::zeros(stored.len());
    weights.slice_mut(s![..stored.valid_rows()]).assign(&scores);
    Ok(weights)
}

/// Energy of the state pattern `xi` for the given stored patterns.
pub fn energy(xi: ArrayView1<'_, f64>, stored: &StoredPatterns, cfg: &HopfieldConfig) -> Result<f64> {
    cfg.validate()?;
    if xi.len() != stored.dim() {
        return Err(shape_err(format!(
            "state pattern has length {} but stored patterns have dimension {}",
            xi.len(),
            stored.dim()
        )));
    }
    if stored.is_empty() {
        return Err(domain_err("all stored patterns are masked"));
    }
    let scores = stored.valid().dot(&xi);
    let interaction = lse(cfg.beta_h, scores.as_slice().expect("contiguous scores"))?;
    let n = stored.valid_rows() as f64;
    let m = stored.max_norm();
    Ok(-interaction + 0.5 * xi.dot(&xi) + n.ln() / cfg.beta_h + 0.5 * m * m)
}

/// One CCCP step: `ξ_new = X softmax(β_h Xᵀξ)`.
pub fn hopfield_update(
    xi: ArrayView1<'_, f64>,
    stored: &StoredPatterns,
    cfg: &HopfieldConfig,
) -> Result<Array1<f64>> {
    cfg.validate()?;
    let weights = attention_weights(xi, stored, cfg.beta_h)?;
    Ok(weights.dot(&stored.patterns()))
}

/// `softmax(β_h QKᵀ) K` row-wise, with `β_h = 1/√d_k` by default.
///
/// Each output row is [`hopfield_update`] applied to the matching query row.
pub fn hop_attn(
    queries: ArrayView2<'_, f64>,
    keys: &StoredPatterns,
    cfg: &HopfieldConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if queries.ncols() != keys.dim() {
        return Err(shape_err(format!(
            "query rows have dimension {} but keys have dimension {}",
            queries.ncols(),
            keys.dim()
        )));
    }
    if keys.is_empty() {
        return Err(domain_err("all key rows are masked"));
    }
    let mut out = Array2::zeros(queries.raw_dim());
    for (q, mut o) in queries.rows().into_iter().zip(out.rows_mut()) {
        o.assign(&hopfield_update(q, keys, cfg)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lse_single_element_is_identity() {
        for &c in &[-3.5, 0.0, 1e-8, 42.0, 1e4] {
            assert_eq!(lse(2.0, &[c]).unwrap(), c);
        }
    }

    #[test]
    fn lse_two_zeros_is_ln2() {
        assert!((lse(1.0, &[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn lse_large_scores_match_extended_precision() {
        // 2·ln(e^500 + e^500.5) evaluated at 50 digits.
        let expected = 1001.948_153_968_360_2_f64;
        let got = lse(0.5, &[1000.0, 1001.0]).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-9, "{got}");
    }

    #[test]
    fn lse_rejects_bad_input() {
        assert!(lse(1.0, &[]).is_err());
        assert!(lse(1.0, &[f64::NAN]).is_err());
        assert!(lse(0.0, &[1.0]).is_err());
    }

    #[test]
    fn energy_single_pattern_at_pattern_is_zero() {
        let x = array![[0.3, -1.2, 2.0]];
        let stored = StoredPatterns::new(x.clone()).unwrap();
        let cfg = HopfieldConfig::with_beta(3, 0.7).unwrap();
        let e = energy(x.row(0), &stored, &cfg).unwrap();
        assert!(e.abs() < 1e-12, "{e}");
    }

    #[test]
    fn energy_zero_everything_is_zero() {
        let stored = StoredPatterns::new(Array2::zeros((1, 4))).unwrap();
        let cfg = HopfieldConfig::new(4);
        assert_eq!(energy(Array1::zeros(4).view(), &stored, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn energy_dimension_mismatch() {
        let stored = StoredPatterns::new(Array2::zeros((2, 4))).unwrap();
        let cfg = HopfieldConfig::new(4);
        assert!(matches!(
            energy(Array1::zeros(3).view(), &stored, &cfg),
            Err(crate::Error::Shape(_))
        ));
    }

    #[test]
    fn single_pattern_update_returns_pattern() {
        let x = array![[1.5, -0.25]];
        let stored = StoredPatterns::new(x.clone()).unwrap();
        for &beta in &[1e-3, 1.0, 80.0] {
            let cfg = HopfieldConfig::with_beta(2, beta).unwrap();
            let out = hopfield_update(array![9.0, -4.0].view(), &stored, &cfg).unwrap();
            assert_eq!(out, x.row(0));
        }
    }

    #[test]
    fn vanishing_beta_gives_mean() {
        let x = array![[1.0, 2.0], [3.0, -2.0], [-1.0, 6.0]];
        let stored = StoredPatterns::new(x).unwrap();
        let cfg = HopfieldConfig::with_beta(2, 1e-12).unwrap();
        let out = hopfield_update(array![10.0, 10.0].view(), &stored, &cfg).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-6 && (out[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn two_basis_patterns() {
        let stored = StoredPatterns::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let cfg = HopfieldConfig::with_beta(2, 1.0).unwrap();
        let out = hopfield_update(array![1.0, 0.0].view(), &stored, &cfg).unwrap();
        let e = std::f64::consts::E;
        assert!((out[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((out[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((out[0] - 0.731_059).abs() < 1e-6 && (out[1] - 0.268_941).abs() < 1e-6);
    }

    #[test]
    fn padding_rows_are_masked() {
        let keys = array![[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        let stored = StoredPatterns::with_valid_rows(keys, 1).unwrap();
        let cfg = HopfieldConfig::new(2);
        let out = hop_attn(array![[-5.0, 3.0], [0.0, 0.0]].view(), &stored, &cfg).unwrap();
        assert_eq!(out, array![[1.0, 0.0], [1.0, 0.0]]);
        let w = attention_weights(array![0.0, 1.0].view(), &stored, 1.0).unwrap();
        assert_eq!(w, array![1.0, 0.0, 0.0]);
    }

    #[test]
    fn nonzero_padding_rejected() {
        assert!(StoredPatterns::with_valid_rows(array![[1.0], [2.0]], 1).is_err());
        assert!(StoredPatterns::with_valid_rows(array![[1.0]], 2).is_err());
        assert!(StoredPatterns::new(array![[f64::INFINITY]]).is_err());
    }

    #[test]
    fn all_masked_keys_is_domain_error() {
        let stored = StoredPatterns::with_valid_rows(Array2::zeros((3, 2)), 0).unwrap();
        let cfg = HopfieldConfig::new(2);
        assert!(matches!(
            hop_attn(Array2::zeros((1, 2)).view(), &stored, &cfg),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn hop_attn_shape_mismatch() {
        let stored = StoredPatterns::new(Array2::ones((3, 2))).unwrap();
        let cfg = HopfieldConfig::new(2);
        assert!(matches!(
            hop_attn(Array2::zeros((1, 3)).view(), &stored, &cfg),
            Err(crate::Error::Shape(_))
        ));
    }

    #[test]
    fn default_beta_is_inverse_sqrt_dk() {
        assert_eq!(HopfieldConfig::new(16).beta_h, 0.25);
        assert!(HopfieldConfig::with_beta(4, -1.0).is_err());
    }
}
