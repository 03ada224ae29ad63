//! Epoch loop: per-sample EP phases in parallel, ordered reduction, one
//! optimizer step per batch.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ep::{contrast, run_phases};
use super::{EpConfig, EpMode, GradientBundle, Optimizer, Provenance};
use crate::data::{Dataset, SequenceSample};
use crate::error::{Error, Result};
use crate::hopfield::HopfieldConfig;
use crate::network::{argmax, Dynamics, ModelSpec, NetworkState, Theta};

pub const METRICS_HEADER: &str = "epoch,split,accuracy,mean_loss,mean_residual,phi_final,seconds";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub seed: u64,
    /// Multiplier on the Glorot-uniform initialisation range.
    pub init_gain: f64,
    /// Fill the `seconds` column. Off by default so metrics files are
    /// byte-identical across runs.
    pub log_wall_clock: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            init_gain: 1.0,
            log_wall_clock: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: Split,
    pub accuracy: f64,
    pub mean_loss: f64,
    /// Mean final free-phase residual `‖s_T − s_{T−1}‖∞`.
    pub mean_residual: f64,
    /// Mean `φ` at the end of the free phase.
    pub phi_final: f64,
    pub seconds: Option<f64>,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        let secs = self.seconds.map(|s| format!("{s:.3}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch,
            self.split.as_str(),
            self.accuracy,
            self.mean_loss,
            self.mean_residual,
            self.phi_final,
            secs
        )
    }
}

pub trait MetricsSink {
    fn record(&mut self, row: &EpochMetrics) -> Result<()>;
}

impl MetricsSink for Vec<EpochMetrics> {
    fn record(&mut self, row: &EpochMetrics) -> Result<()> {
        self.push(row.clone());
        Ok(())
    }
}

/// Append-only CSV writer; the header is written on construction.
pub struct CsvMetricsSink<W: Write> {
    out: W,
}

impl<W: Write> CsvMetricsSink<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> MetricsSink for CsvMetricsSink<W> {
    fn record(&mut self, row: &EpochMetrics) -> Result<()> {
        writeln!(self.out, "{}", row.csv_row())?;
        self.out.flush()?;
        Ok(())
    }
}

/// Predictions and free-phase statistics over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    /// `confusion[true][predicted]`.
    pub confusion: Array2<usize>,
    pub accuracy: f64,
    pub mean_loss: f64,
    pub mean_residual: f64,
    pub phi_final: f64,
}

#[derive(Clone, Copy)]
struct SampleStats {
    correct: bool,
    loss: f64,
    residual: f64,
    phi: f64,
}

fn free_phase(
    sample: &SequenceSample,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    steps: usize,
) -> Result<(usize, SampleStats)> {
    let dynamics = Dynamics::new(spec, theta, *hop, &sample.input)?;
    let relax = dynamics.relax(NetworkState::zeros(spec), None, 0.0, steps)?;
    let pred = argmax(relax.state.output().view());
    Ok((
        pred,
        SampleStats {
            correct: pred == sample.label,
            loss: relax.state.loss(&sample.target()),
            residual: relax.final_residual(),
            phi: relax.final_phi(),
        },
    ))
}

/// Free-phase inference over `data`.
pub fn evaluate(
    data: &Dataset,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    free_steps: usize,
) -> Result<Evaluation> {
    data.check(spec)?;
    let results: Vec<(usize, SampleStats)> = data
        .samples
        .par_iter()
        .map(|s| free_phase(s, theta, spec, hop, free_steps))
        .collect::<Result<_>>()?;
    let c = data.num_classes;
    let mut confusion = Array2::zeros((c, c));
    for (s, (p, _)) in data.samples.iter().zip(&results) {
        confusion[[s.label, *p]] += 1;
    }
    let stats: Vec<SampleStats> = results.iter().map(|(_, st)| *st).collect();
    let (accuracy, mean_loss, mean_residual, phi_final) = summarize(&stats);
    Ok(Evaluation {
        predictions: results.into_iter().map(|(p, _)| p).collect(),
        confusion,
        accuracy,
        mean_loss,
        mean_residual,
        phi_final,
    })
}

fn summarize(stats: &[SampleStats]) -> (f64, f64, f64, f64) {
    let n = stats.len().max(1) as f64;
    let acc = stats.iter().filter(|s| s.correct).count() as f64 / n;
    let loss = stats.iter().map(|s| s.loss).sum::<f64>() / n;
    let res = stats.iter().map(|s| s.residual).sum::<f64>() / n;
    let phi = stats.iter().map(|s| s.phi).sum::<f64>() / n;
    (acc, loss, res, phi)
}

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Theta,
    pub history: Vec<EpochMetrics>,
}

/// Per-sample EP update direction for the configured mode, with the free
/// phase statistics of that sample.
fn sample_update(
    sample: &SequenceSample,
    theta: &Theta,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    cfg: &EpConfig,
) -> Result<(Theta, SampleStats)> {
    let dynamics = Dynamics::new(spec, theta, *hop, &sample.input)?;
    let target = sample.target();
    let fp = run_phases(&dynamics, &target, cfg)?;
    let s_free = &fp.free.state;
    let stats = SampleStats {
        correct: argmax(s_free.output().view()) == sample.label,
        loss: s_free.loss(&target),
        residual: fp.free.final_residual(),
        phi: fp.free.final_phi(),
    };
    let g = match (&cfg.mode, &fp.minus) {
        (EpMode::ThreePhaseSymmetric, Some(minus)) => {
            contrast(spec, &sample.input, &fp.plus, minus, 1.0 / (2.0 * cfg.beta_ep))
        }
        _ => contrast(spec, &sample.input, &fp.plus, s_free, 1.0 / cfg.beta_ep),
    };
    Ok((g, stats))
}

/// Train from a seeded initialisation. Train-split metrics are gathered from
/// the free phases run during the epoch (before each batch's update); the
/// test split is evaluated with the parameters at the end of the epoch.
pub fn fit(
    train: &Dataset,
    test: Option<&Dataset>,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    cfg: &EpConfig,
    opts: &FitOptions,
    sink: &mut dyn MetricsSink,
) -> Result<FitResult> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let theta = Theta::init(spec, opts.init_gain, &mut rng);
    fit_from(theta, train, test, spec, hop, cfg, opts, sink)
}

/// [`fit`] starting from the given parameters.
#[allow(clippy::too_many_arguments)]
pub fn fit_from(
    mut theta: Theta,
    train: &Dataset,
    test: Option<&Dataset>,
    spec: &ModelSpec,
    hop: &HopfieldConfig,
    cfg: &EpConfig,
    opts: &FitOptions,
    sink: &mut dyn MetricsSink,
) -> Result<FitResult> {
    spec.validate()?;
    cfg.validate(spec)?;
    hop.validate()?;
    theta.check_shapes(spec)?;
    train.check(spec)?;
    if let Some(t) = test {
        t.check(spec)?;
    }
    let mut optimizer = Optimizer::from_config(cfg);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_0f_ba7c4);
    let mut history = Vec::new();
    let mut first_residual: Option<f64> = None;
    let provenance = match cfg.mode {
        EpMode::TwoPhase => Provenance::EpTwoPhase,
        EpMode::ThreePhaseSymmetric => Provenance::EpSymmetric,
    };

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_stats = Vec::with_capacity(train.len());
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(Theta, SampleStats)> = batch
                .par_iter()
                .map(|&i| sample_update(&train.samples[i], &theta, spec, hop, cfg))
                .collect::<Result<_>>()?;
            let mut acc = theta.zeros_like();
            for (g, st) in &results {
                acc.scaled_add(1.0, g);
                epoch_stats.push(*st);
            }
            acc.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut theta, &GradientBundle::new(acc, provenance))?;
            if !theta.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite parameters after an update in epoch {epoch}"
                )));
            }
        }
        let (accuracy, mean_loss, mean_residual, phi_final) = summarize(&epoch_stats);
        let seconds = opts.log_wall_clock.then(|| started.elapsed().as_secs_f64());
        let row = EpochMetrics {
            epoch,
            split: Split::Train,
            accuracy,
            mean_loss,
            mean_residual,
            phi_final,
            seconds,
        };
        sink.record(&row)?;
        history.push(row);
        log::info!("epoch {epoch}: train accuracy {accuracy:.4}, loss {mean_loss:.5}, residual {mean_residual:.2e}");

        if let Some(test) = test {
            let ev = evaluate(test, &theta, spec, hop, cfg.free_steps)?;
            let row = EpochMetrics {
                epoch,
                split: Split::Test,
                accuracy: ev.accuracy,
                mean_loss: ev.mean_loss,
                mean_residual: ev.mean_residual,
                phi_final: ev.phi_final,
                seconds: opts.log_wall_clock.then(|| started.elapsed().as_secs_f64()),
            };
            sink.record(&row)?;
            history.push(row);
            log::info!("epoch {epoch}: test accuracy {:.4}", ev.accuracy);
        }

        let base = *first_residual.get_or_insert(mean_residual);
        if !mean_residual.is_finite() || (mean_residual > 10.0 * base && mean_residual > cfg.residual_tol) {
            return Err(Error::Divergence(format!(
                "epoch {epoch}: mean fixed-point residual {mean_residual:.3e} exceeds 10x the epoch-1 value {base:.3e}"
            )));
        }
    }
    Ok(FitResult { theta, history })
}
