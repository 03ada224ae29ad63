//! Independent reference implementations shared by the integration tests.
//!
//! Everything here is written with explicit index loops and without calling
//! into the library's numerical code, so agreement is meaningful.
#![allow(dead_code)]

use eqprop_core::data::Dataset;
use eqprop_core::hopfield::HopfieldConfig;
use eqprop_core::network::{InputBundle, ModelSpec, NetworkState, Theta};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn clamp01(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else if v > 1.0 {
        1.0
    } else {
        v
    }
}

/// Flattened projection states, row-major, projections in order.
pub fn flat(s: &NetworkState) -> Vec<f64> {
    let mut out = Vec::new();
    for p in &s.projections {
        for r in 0..p.nrows() {
            for c in 0..p.ncols() {
                out.push(p[[r, c]]);
            }
        }
    }
    out
}

/// φ as an explicit sum of every bilinear term.
pub fn naive_phi(spec: &ModelSpec, theta: &Theta, input: &InputBundle, s: &NetworkState) -> f64 {
    let mut total = 0.0;
    for (j, p) in spec.projections.iter().enumerate() {
        let x = &input.seqs[p.input];
        let w = &theta.projection[j];
        let sj = &s.projections[j];
        for r in 0..x.nrows() {
            for c in 0..w.ncols() {
                let mut xw = 0.0;
                for k in 0..x.ncols() {
                    xw += x[[r, k]] * w[[k, c]];
                }
                total += sj[[r, c]] * xw;
            }
        }
    }
    let f = flat(s);
    for i in 0..spec.fc_sizes.len() {
        let w = &theta.fc[i];
        let below: Vec<f64> = if i == 0 { f.clone() } else { s.layers[i - 1].to_vec() };
        for r in 0..w.nrows() {
            for c in 0..w.ncols() {
                total += s.layers[i][r] * w[[r, c]] * below[c];
            }
        }
    }
    total
}

/// Two-loop attention: for each query, softmax over the first `valid` keys.
pub fn naive_hop_attn(q: &Array2<f64>, keys: &Array2<f64>, valid: usize, beta: f64) -> Array2<f64> {
    let mut out = Array2::zeros(q.raw_dim());
    for r in 0..q.nrows() {
        let mut scores = vec![0.0; valid];
        for n in 0..valid {
            for c in 0..q.ncols() {
                scores[n] += beta * q[[r, c]] * keys[[n, c]];
            }
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = weights.iter().sum();
        for n in 0..valid {
            for c in 0..q.ncols() {
                out[[r, c]] += weights[n] / z * keys[[n, c]];
            }
        }
    }
    out
}

/// Modern Hopfield energy from its definition, with a direct log-sum-exp.
pub fn naive_energy(xi: &[f64], keys: &Array2<f64>, valid: usize, beta: f64) -> f64 {
    let scores: Vec<f64> = (0..valid)
        .map(|n| (0..xi.len()).map(|c| keys[[n, c]] * xi[c]).sum())
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (beta * (s - max)).exp()).sum::<f64>().ln() / beta;
    let half_sq: f64 = 0.5 * xi.iter().map(|v| v * v).sum::<f64>();
    let m = (0..valid)
        .map(|n| (0..xi.len()).map(|c| keys[[n, c]] * keys[[n, c]]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    -lse + half_sq + (valid as f64).ln() / beta + 0.5 * m * m
}

/// ∂φ/∂s computed term by term for every layer.
pub fn naive_state_partials(
    spec: &ModelSpec,
    theta: &Theta,
    input: &InputBundle,
    s: &NetworkState,
) -> (Vec<Array2<f64>>, Vec<Array1<f64>>) {
    let m = spec.fc_sizes.len();
    let f = flat(s);
    let mut fc_pre: Vec<Array1<f64>> = spec.fc_sizes.iter().map(|&n| Array1::zeros(n)).collect();
    for i in 0..m {
        let w = &theta.fc[i];
        let below: Vec<f64> = if i == 0 { f.clone() } else { s.layers[i - 1].to_vec() };
        for r in 0..w.nrows() {
            for c in 0..w.ncols() {
                fc_pre[i][r] += w[[r, c]] * below[c];
                if i > 0 {
                    fc_pre[i - 1][c] += w[[r, c]] * s.layers[i][r];
                }
            }
        }
    }
    let mut feedback = vec![0.0; f.len()];
    let w0 = &theta.fc[0];
    for r in 0..w0.nrows() {
        for c in 0..w0.ncols() {
            feedback[c] += w0[[r, c]] * s.layers[0][r];
        }
    }
    let d = spec.embed_dim();
    let mut offset = 0;
    let mut proj_pre = Vec::new();
    for (j, p) in spec.projections.iter().enumerate() {
        let x = &input.seqs[p.input];
        let w = &theta.projection[j];
        let mut pre = Array2::zeros((x.nrows(), d));
        for r in 0..x.nrows() {
            for c in 0..d {
                let mut v = 0.0;
                for k in 0..d {
                    v += x[[r, k]] * w[[k, c]];
                }
                pre[[r, c]] = v + feedback[offset + r * d + c];
            }
        }
        offset += x.nrows() * d;
        proj_pre.push(pre);
    }
    (proj_pre, fc_pre)
}

/// One synchronous step composed from the naive pieces.
pub fn naive_step(
    spec: &ModelSpec,
    theta: &Theta,
    hop: &HopfieldConfig,
    input: &InputBundle,
    s: &NetworkState,
    target: Option<&Array1<f64>>,
    beta_ep: f64,
) -> NetworkState {
    let (proj_pre, fc_pre) = naive_state_partials(spec, theta, input, s);
    let projections = spec
        .projections
        .iter()
        .zip(proj_pre)
        .map(|(p, pre)| match p.attention {
            Some(k) => naive_hop_attn(&pre, &input.seqs[k], input.valid_lengths[k], hop.beta_h),
            None => pre.mapv(clamp01),
        })
        .collect();
    let m = fc_pre.len();
    let mut layers: Vec<Array1<f64>> = fc_pre.into_iter().map(|v| v.mapv(clamp01)).collect();
    if let Some(y) = target {
        for k in 0..layers[m - 1].len() {
            layers[m - 1][k] += beta_ep * (y[k] - s.layers[m - 1][k]);
        }
    }
    NetworkState {
        projections,
        layers,
        time_index: s.time_index + 1,
    }
}

/// Random small model (with or without attention), input, and a state in [0, 1].
pub fn random_toy(seed: u64) -> (ModelSpec, Theta, InputBundle, NetworkState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5);
    let d = rng.random_range(1..=4);
    let n_fc = rng.random_range(1..=3);
    let mut fc: Vec<usize> = (0..n_fc - 1).map(|_| rng.random_range(1..=5)).collect();
    fc.push(rng.random_range(2..=3));
    let pair = rng.random_bool(0.3);
    let attention = rng.random_bool(0.5);
    let spec = if pair {
        ModelSpec::sequence_pair(n, d, fc, attention)
    } else {
        ModelSpec::single_sequence(n, d, fc, attention)
    };
    let theta = Theta::init(&spec, 1.0, &mut rng);
    let seqs: Vec<Array2<f64>> = (0..spec.input_arity())
        .map(|_| Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0)))
        .collect();
    let input = InputBundle::dense(seqs);
    let mut s = NetworkState::zeros(&spec);
    for p in s.projections.iter_mut() {
        p.mapv_inplace(|_| rng.random_range(0.0..1.0));
    }
    for l in s.layers.iter_mut() {
        l.mapv_inplace(|_| rng.random_range(0.0..1.0));
    }
    (spec, theta, input, s)
}

/// Central difference of a scalar function of one variable.
pub fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn mean_pool(d: &Dataset) -> (Array2<f64>, Vec<usize>) {
    let dim = d.samples[0].input.seqs[0].ncols();
    let mut x = Array2::zeros((d.len(), dim + 1));
    for (i, s) in d.samples.iter().enumerate() {
        let seq = &s.input.seqs[0];
        let len = s.input.valid_lengths[0].max(1);
        for r in 0..len {
            for c in 0..dim {
                x[[i, c]] += seq[[r, c]] / len as f64;
            }
        }
        x[[i, dim]] = 1.0;
    }
    (x, d.labels())
}

/// Softmax regression on mean-pooled embeddings, full-batch gradient descent.
/// Returns (train accuracy, test accuracy).
pub fn mean_pool_logreg(train: &Dataset, test: &Dataset, iters: usize, lr: f64) -> (f64, f64) {
    let (x, y) = mean_pool(train);
    let (xt, yt) = mean_pool(test);
    let c = train.num_classes;
    let mut w = Array2::<f64>::zeros((x.ncols(), c));
    for _ in 0..iters {
        let logits = x.dot(&w);
        let mut g = Array2::<f64>::zeros(logits.raw_dim());
        for (i, row) in logits.rows().into_iter().enumerate() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for k in 0..c {
                g[[i, k]] = e[k] / z - if y[i] == k { 1.0 } else { 0.0 };
            }
        }
        w = w - x.t().dot(&g) * (lr / x.nrows() as f64);
    }
    let acc = |x: &Array2<f64>, y: &[usize]| {
        let l = x.dot(&w);
        let hits = l
            .rows()
            .into_iter()
            .zip(y)
            .filter(|(r, &label)| {
                let mut best = 0;
                for k in 1..c {
                    if r[k] > r[best] {
                        best = k;
                    }
                }
                best == label
            })
            .count();
        hits as f64 / y.len() as f64
    };
    (acc(&x, &y), acc(&xt, &yt))
}
