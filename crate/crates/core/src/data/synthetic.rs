//! Synthetic cluster-key sequence task.
//!
//! Each class owns a Gaussian cluster in embedding space; centres are
//! mutually orthogonal whenever `n_classes ≤ embed_dim`. A sample of class
//! `k` places `dominant_rows` draws from cluster `k` and fills the other rows
//! with draws from the remaining clusters (no distractor cluster reaches the
//! dominant count), then shuffles the positions. The label is recoverable
//! from cluster membership pooled over the sequence, while any single
//! position is a weak predictor.

use ndarray::{Array1, Array2};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, SequenceSample};
use crate::error::{Error, Result};
use crate::network::InputBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterTaskConfig {
    pub seq_len: usize,
    pub embed_dim: usize,
    pub n_classes: usize,
    /// Norm of every cluster centre.
    pub center_norm: f64,
    /// Per-coordinate standard deviation of the row noise.
    pub noise_std: f64,
    /// Rows drawn from the label's cluster.
    pub dominant_rows: usize,
}

impl ClusterTaskConfig {
    pub fn new(seq_len: usize, embed_dim: usize, n_classes: usize) -> Self {
        Self {
            seq_len,
            embed_dim,
            n_classes,
            center_norm: 2.0,
            noise_std: 0.1,
            dominant_rows: Self::min_dominant(seq_len, n_classes),
        }
    }

    /// Smallest dominant count for which the distractors fit under the cap.
    pub fn min_dominant(seq_len: usize, n_classes: usize) -> usize {
        (1..=seq_len)
            .find(|&m| (n_classes - 1) * (m - 1) >= seq_len - m)
            .unwrap_or(seq_len)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| {
            Err(Error::Config {
                field: field.into(),
                msg: msg.into(),
            })
        };
        if self.n_classes < 2 {
            return bad("n_classes", "at least two classes are required");
        }
        if self.seq_len == 0 || self.embed_dim == 0 {
            return bad("seq_len", "sequence length and embedding dimension must be positive");
        }
        if self.dominant_rows > self.seq_len
            || self.dominant_rows < Self::min_dominant(self.seq_len, self.n_classes)
        {
            return bad("dominant_rows", "distractor rows cannot stay below the dominant count");
        }
        if !(self.center_norm > 0.0) || !(self.noise_std >= 0.0) {
            return bad("center_norm", "centre norm must be positive and noise non-negative");
        }
        Ok(())
    }
}

/// Cluster centres plus the sampling recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTask {
    pub config: ClusterTaskConfig,
    pub centers: Array2<f64>,
}

impl ClusterTask {
    pub fn new<R: Rng + ?Sized>(config: ClusterTaskConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut centers = Array2::<f64>::zeros((config.n_classes, config.embed_dim));
        for k in 0..config.n_classes {
            let mut c: Array1<f64> = (0..config.embed_dim).map(|_| rng.sample(StandardNormal)).collect();
            // Gram-Schmidt against earlier centres while there is room.
            if k < config.embed_dim {
                for prev in centers.rows().into_iter().take(k) {
                    let unit = &prev / config.center_norm;
                    let overlap = c.dot(&unit);
                    c.scaled_add(-overlap, &unit);
                }
            }
            let norm = c.dot(&c).sqrt();
            centers.row_mut(k).assign(&(c * (config.center_norm / norm)));
        }
        Ok(Self { config, centers })
    }

    fn draw_row<R: Rng + ?Sized>(&self, cluster: usize, rng: &mut R) -> Array1<f64> {
        let noise = self.config.noise_std;
        self.centers.row(cluster).mapv(|c| c + noise * rng.sample::<f64, _>(StandardNormal))
    }

    pub fn sample<R: Rng + ?Sized>(&self, label: usize, rng: &mut R) -> SequenceSample {
        let cfg = &self.config;
        let mut counts = vec![0usize; cfg.n_classes];
        counts[label] = cfg.dominant_rows;
        let mut clusters = vec![label; cfg.dominant_rows];
        let others: Vec<usize> = (0..cfg.n_classes).filter(|&k| k != label).collect();
        while clusters.len() < cfg.seq_len {
            let k = *others.choose(rng).expect("at least one other class");
            if counts[k] + 1 < cfg.dominant_rows {
                counts[k] += 1;
                clusters.push(k);
            }
        }
        clusters.shuffle(rng);
        let mut x = Array2::zeros((cfg.seq_len, cfg.embed_dim));
        for (mut row, &k) in x.rows_mut().into_iter().zip(&clusters) {
            row.assign(&self.draw_row(k, rng));
        }
        SequenceSample {
            input: InputBundle::dense(vec![x]),
            label,
            num_classes: cfg.n_classes,
        }
    }

    /// `n` samples with labels balanced to within one sample.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        let mut labels: Vec<usize> = (0..n).map(|i| i % self.config.n_classes).collect();
        labels.shuffle(rng);
        let samples = labels.into_iter().map(|l| self.sample(l, rng)).collect();
        Dataset::new(samples, self.config.n_classes)
    }
}

/// Deterministic dataset of `n_samples` drawn from a task whose centres are
/// also derived from `seed`. Split it with [`Dataset::split_at`] to get
/// train/test sets that share the same clusters.
pub fn synthetic_cluster_task(
    seed: u64,
    n_samples: usize,
    seq_len: usize,
    embed_dim: usize,
    n_classes: usize,
) -> Result<Dataset> {
    synthetic_cluster_task_with(seed, n_samples, ClusterTaskConfig::new(seq_len, embed_dim, n_classes))
}

pub fn synthetic_cluster_task_with(seed: u64, n_samples: usize, config: ClusterTaskConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let task = ClusterTask::new(config, &mut rng)?;
    Ok(task.generate(n_samples, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_balanced() {
        let ds = synthetic_cluster_task(3, 103, 12, 16, 4).unwrap();
        let counts = ds.class_counts();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = synthetic_cluster_task(9, 20, 6, 4, 3).unwrap();
        let b = synthetic_cluster_task(9, 20, 6, 4, 3).unwrap();
        assert_eq!(a, b);
        let c = synthetic_cluster_task(10, 20, 6, 4, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dominant_cluster_is_strict_plurality() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ClusterTaskConfig {
            noise_std: 0.0,
            ..ClusterTaskConfig::new(12, 8, 4)
        };
        let task = ClusterTask::new(cfg, &mut rng).unwrap();
        for label in 0..4 {
            let s = task.sample(label, &mut rng);
            let x = &s.input.seqs[0];
            let mut counts = [0usize; 4];
            for row in x.rows() {
                let k = (0..4)
                    .find(|&k| task.centers.row(k).iter().zip(row.iter()).all(|(a, b)| a == b))
                    .unwrap();
                counts[k] += 1;
            }
            let max_other = (0..4).filter(|&k| k != label).map(|k| counts[k]).max().unwrap();
            assert!(counts[label] > max_other, "{counts:?}");
        }
    }

    #[test]
    fn two_class_feasibility() {
        assert_eq!(ClusterTaskConfig::min_dominant(12, 2), 7);
        assert!(ClusterTaskConfig::new(12, 4, 2).validate().is_ok());
        let mut bad = ClusterTaskConfig::new(12, 4, 2);
        bad.dominant_rows = 6;
        assert!(bad.validate().is_err());
        let mut bad = ClusterTaskConfig::new(12, 4, 4);
        bad.n_classes = 1;
        assert!(bad.validate().is_err());
    }
}
