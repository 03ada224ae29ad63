//! EP-vs-BPTT comparison tables.

use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::bptt::{bptt_curve, bptt_gradient};
use super::suite::ToyMember;
use crate::error::{shape_err, Result};
use crate::training::{cosine, ep_curve, ep_gradient_symmetric, rel_mse, EpConfig, EpMode, GradientBundle};

pub const GDU_HEADER: &str = "t,connection,rel_mse,cosine";
pub const WEIGHT_TRACE_HEADER: &str = "t,weight_id,ep_value,bptt_value";

/// One comparison at step `t`; `connection` is a connection name or `all`.
#[derive(Debug, Clone, PartialEq)]
pub struct GduRow {
    pub t: usize,
    pub connection: String,
    pub rel_mse: f64,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTraceRow {
    pub t: usize,
    pub weight_id: String,
    pub ep_value: f64,
    pub bptt_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GduReport {
    pub rows: Vec<GduRow>,
    pub weight_trace: Vec<WeightTraceRow>,
}

impl GduReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{GDU_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.t, r.connection, r.rel_mse, r.cosine)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_weight_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{WEIGHT_TRACE_HEADER}")?;
        for r in &self.weight_trace {
            writeln!(w, "{},{},{},{}", r.t, r.weight_id, r.ep_value, r.bptt_value)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows aggregated over every connection.
    pub fn overall(&self) -> impl Iterator<Item = &GduRow> {
        self.rows.iter().filter(|r| r.connection == "all")
    }
}

/// `n` distinct flat coordinates drawn from `0..len`.
pub fn pick_weights<R: Rng + ?Sized>(len: usize, n: usize, rng: &mut R) -> Vec<usize> {
    let mut idx = sample(rng, len, n.min(len)).into_vec();
    idx.sort_unstable();
    idx
}

/// Compare two curves of bundles index by index (`t = index + 1`).
///
/// Emits one `all` row and one row per connection for every `t`, plus the
/// values of the flat coordinates in `weights` along both curves.
pub fn gdu_report(ep: &[GradientBundle], bptt: &[GradientBundle], weights: &[usize]) -> Result<GduReport> {
    if ep.len() != bptt.len() {
        return Err(shape_err(format!(
            "curves have {} and {} points",
            ep.len(),
            bptt.len()
        )));
    }
    let mut report = GduReport::default();
    for (k, (a, b)) in ep.iter().zip(bptt).enumerate() {
        let t = k + 1;
        let (fa, fb) = (a.to_flat(), b.to_flat());
        let same_shape = a.tensors.tensors().count() == b.tensors.tensors().count()
            && a.tensors.tensors().zip(b.tensors.tensors()).all(|(x, y)| x.dim() == y.dim());
        if !same_shape {
            return Err(shape_err(format!("bundles at t={t} have different shapes")));
        }
        report.rows.push(GduRow {
            t,
            connection: "all".into(),
            rel_mse: rel_mse(&fa, &fb),
            cosine: cosine(&fa, &fb),
        });
        for ((id, x), (_, y)) in a.tensors.iter().zip(b.tensors.iter()) {
            let (x, y): (Vec<f64>, Vec<f64>) = (x.iter().copied().collect(), y.iter().copied().collect());
            report.rows.push(GduRow {
                t,
                connection: id.to_string(),
                rel_mse: rel_mse(&x, &y),
                cosine: cosine(&x, &y),
            });
        }
        for &w in weights {
            if w >= fa.len() {
                return Err(shape_err(format!("weight {w} out of range")));
            }
            let (id, r, c) = a.tensors.locate(w).expect("in range");
            report.weight_trace.push(WeightTraceRow {
                t,
                weight_id: format!("{id}[{r},{c}]"),
                ep_value: fa[w],
                bptt_value: fb[w],
            });
        }
    }
    Ok(report)
}

/// Symmetric EP curve and BPTT curve over `t = 1..=K` for one member.
pub fn member_curves(member: &ToyMember, cfg: &EpConfig) -> Result<(Vec<GradientBundle>, Vec<GradientBundle>)> {
    let ep = ep_curve(
        &member.input,
        &member.target,
        &member.theta,
        &member.spec,
        &member.hop,
        cfg,
        true,
    )?;
    let bptt = bptt_curve(
        &member.input,
        &member.target,
        &member.theta,
        &member.spec,
        &member.hop,
        cfg.free_steps,
        cfg.nudge_steps,
    )?;
    Ok((ep, bptt))
}

/// Symmetric EP at full `K` against `∇^BPTT(K)` for one member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberComparison {
    pub seed: u64,
    pub cosine: f64,
    pub rel_mse: f64,
}

/// Compare [`ep_gradient_symmetric`] with `∇^BPTT(K)` on every member.
pub fn compare_suite(members: &[ToyMember], cfg: &EpConfig) -> Result<Vec<MemberComparison>> {
    let cfg = EpConfig {
        mode: EpMode::ThreePhaseSymmetric,
        ..cfg.clone()
    };
    members
        .par_iter()
        .map(|m| {
            let ep = ep_gradient_symmetric(&m.input, &m.target, &m.theta, &m.spec, &m.hop, &cfg)?;
            let bp = bptt_gradient(
                &m.input,
                &m.target,
                &m.theta,
                &m.spec,
                &m.hop,
                cfg.free_steps,
                cfg.nudge_steps,
                cfg.nudge_steps,
            )?;
            Ok(MemberComparison {
                seed: m.seed,
                cosine: ep.cosine(&bp),
                rel_mse: ep.rel_mse(&bp),
            })
        })
        .collect()
}

/// Median of a slice (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
