use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain_err, Result};
use crate::network::{InputBundle, ModelSpec};

/// One labelled example: 1 or 2 embedded sequences and a class index.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub input: InputBundle,
    pub label: usize,
    pub num_classes: usize,
}

impl SequenceSample {
    /// One-hot target of length `num_classes`.
    pub fn target(&self) -> Array1<f64> {
        let mut y = Array1::zeros(self.num_classes);
        y[self.label] = 1.0;
        y
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.label >= self.num_classes || self.num_classes != spec.num_classes() {
            return Err(domain_err(format!(
                "label {} invalid for {} classes (model has {})",
                self.label,
                self.num_classes,
                spec.num_classes()
            )));
        }
        self.input.check(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SequenceSample>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<SequenceSample>, num_classes: usize) -> Self {
        Self { samples, num_classes }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// First `n` samples and the rest.
    pub fn split_at(mut self, n: usize) -> (Dataset, Dataset) {
        let rest = self.samples.split_off(n.min(self.samples.len()));
        let c = self.num_classes;
        (self, Dataset::new(rest, c))
    }

    /// Exactly `limit` samples with class proportions preserved (see [`stratified_indices`]).
    pub fn stratified_subsample(&self, limit: usize, seed: u64) -> Dataset {
        let idx = stratified_indices(&self.labels(), self.num_classes, limit, seed);
        Dataset::new(idx.into_iter().map(|i| self.samples[i].clone()).collect(), self.num_classes)
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.is_empty() {
            return Err(domain_err("dataset is empty"));
        }
        self.samples.iter().try_for_each(|s| s.check(spec))
    }
}

/// Indices of a class-stratified subsample of size `min(limit, labels.len())`.
///
/// Each class gets `⌊limit·n_k/n⌋` slots; leftover slots go to the classes
/// with the largest fractional remainders (lowest class first on ties).
/// Members are drawn with a seeded shuffle and returned in original order.
pub fn stratified_indices(labels: &[usize], num_classes: usize, limit: usize, seed: u64) -> Vec<usize> {
    let n = labels.len();
    if limit >= n {
        return (0..n).collect();
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut alloc: Vec<usize> = by_class.iter().map(|m| limit * m.len() / n).collect();
    let mut remainders: Vec<(usize, usize)> = by_class
        .iter()
        .enumerate()
        .map(|(k, m)| ((limit * m.len()) % n, k))
        .collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = limit - alloc.iter().sum::<usize>();
    for &(_, k) in remainders.iter().cycle() {
        if left == 0 {
            break;
        }
        if alloc[k] < by_class[k].len() {
            alloc[k] += 1;
            left -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(limit);
    for (members, &take) in by_class.iter_mut().zip(&alloc) {
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..take]);
    }
    chosen.sort_unstable();
    chosen
}
