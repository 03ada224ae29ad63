use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use eqprop_core::data::{load_embeddings, load_imdb, load_snli, synthetic_cluster_task_with, Dataset, LoaderOptions};
use eqprop_core::hopfield::{attention_weights, hopfield_update, HopfieldConfig, StoredPatterns};
use eqprop_core::network::{Checkpoint, Dynamics, NetworkState, Relaxation};
use eqprop_core::oracle::{
    bptt_curve, compare_suite, gdu_report, median, pick_weights, toy_suite, GduReport, MemberComparison,
    ToySuiteConfig,
};
use eqprop_core::training::{ep_curve, evaluate, fit, CsvMetricsSink, EpochMetrics, FitOptions, Split};
use log::{info, warn};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Curve, RunConfig, Task};
use crate::rundir::RunDir;
use crate::CliError;

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

pub fn init_threads(n: usize) -> Result<(), CliError> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
    }
    Ok(())
}

struct Splits {
    train: Dataset,
    test: Dataset,
}

fn required<'a, T>(value: &'a Option<T>, key: &str, task: Task) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("config field `{key}` is required for task {}", task.as_str())))
}

fn load_task(cfg: &RunConfig) -> Result<Splits, CliError> {
    let d = &cfg.data;
    if cfg.task == Task::Synthetic {
        let all = synthetic_cluster_task_with(d.seed, d.train_samples + d.test_samples, cfg.cluster_task())?;
        let (mut train, mut test) = all.split_at(d.train_samples);
        if let Some(limit) = d.limit {
            train = train.stratified_subsample(limit, d.seed);
            test = test.stratified_subsample(limit, d.seed);
        }
        return Ok(Splits { train, test });
    }
    let embeddings = required(&d.embeddings, "data.embeddings", cfg.task)?;
    let table = load_embeddings(embeddings)?;
    if table.dim() != cfg.model.embed_dim {
        return Err(CliError::Usage(format!(
            "invalid config field `model.embed_dim`: {} but {} has dimension {}",
            cfg.model.embed_dim,
            embeddings.display(),
            table.dim()
        )));
    }
    let opts = LoaderOptions {
        seq_len: cfg.model.seq_len,
        limit: d.limit,
        seed: d.seed,
    };
    let (train, test, skipped) = if cfg.task == Task::Imdb {
        let s = load_imdb(required(&d.imdb_dir, "data.imdb_dir", cfg.task)?, &table, &opts)?;
        (s.train, s.test, s.skipped_empty)
    } else {
        let s = load_snli(required(&d.snli_dir, "data.snli_dir", cfg.task)?, &table, &opts)?;
        info!("unlabeled pairs dropped (train/dev/test): {:?}", s.unlabeled);
        (s.train, s.test, s.skipped_empty)
    };
    if skipped > 0 {
        warn!("{skipped} samples tokenized to nothing and were dropped");
    }
    Ok(Splits { train, test })
}

fn last_accuracy(history: &[EpochMetrics], split: Split) -> Option<f64> {
    history.iter().rev().find(|m| m.split == split).map(|m| m.accuracy)
}

pub fn train(cfg: &RunConfig, dry_run: bool) -> Result<(), CliError> {
    if dry_run {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let dir = RunDir::acquire(&cfg.out_dir("train"))?;
    dir.write(CONFIG_FILE, &cfg.to_toml())?;
    let data = load_task(cfg)?;
    info!(
        "task {}: {} train / {} test samples",
        cfg.task.as_str(),
        data.train.len(),
        data.test.len()
    );
    let (spec, hop) = (cfg.spec(), cfg.hopfield());
    let mut sink = CsvMetricsSink::new(dir.create(METRICS_FILE)?)?;
    let opts = FitOptions {
        seed: cfg.seed,
        init_gain: cfg.init_gain,
        log_wall_clock: false,
    };
    let started = Instant::now();
    let result = fit(&data.train, Some(&data.test), &spec, &hop, &cfg.ep, &opts, &mut sink)?;
    sink.into_inner().flush()?;
    Checkpoint {
        spec,
        hopfield: hop,
        theta: result.theta,
    }
    .save(dir.file(CHECKPOINT_FILE))?;
    let fmt = |a: Option<f64>| a.map(|a| format!("{a:.4}")).unwrap_or_else(|| "n/a".into());
    println!(
        "final train accuracy {}, test accuracy {} after {} epochs ({:.1}s)",
        fmt(last_accuracy(&result.history, Split::Train)),
        fmt(last_accuracy(&result.history, Split::Test)),
        cfg.ep.epochs,
        started.elapsed().as_secs_f64()
    );
    println!("outputs in {}", dir.path().display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let data = load_task(cfg)?;
    let dir = RunDir::acquire(&cfg.out_dir("eval"))?;
    dir.write(CONFIG_FILE, &cfg.to_toml())?;
    let ev = evaluate(&data.test, &ckpt.theta, &ckpt.spec, &ckpt.hopfield, cfg.ep.free_steps)?;
    println!("test accuracy {:.4} on {} samples", ev.accuracy, data.test.len());
    let classes = ev.confusion.nrows();
    let mut confusion = String::from("true_label");
    for p in 0..classes {
        write!(confusion, ",pred_{p}").unwrap();
    }
    confusion.push('\n');
    for (t, row) in ev.confusion.rows().into_iter().enumerate() {
        let counts: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        println!("class {t}: {} (predicted 0..{})", counts.join(" "), classes - 1);
        writeln!(confusion, "{t},{}", counts.join(",")).unwrap();
    }
    dir.write(
        "eval.csv",
        &format!(
            "split,samples,accuracy,mean_loss,mean_residual,phi_final\ntest,{},{},{},{},{}\n",
            data.test.len(),
            ev.accuracy,
            ev.mean_loss,
            ev.mean_residual,
            ev.phi_final
        ),
    )?;
    dir.write("confusion.csv", &confusion)?;
    Ok(())
}

pub fn gdu(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = RunDir::acquire(&cfg.out_dir("gdu"))?;
    dir.write(CONFIG_FILE, &cfg.to_toml())?;
    let started = Instant::now();
    let suite = toy_suite(&cfg.suite)?;
    info!(
        "toy suite: {} members, {} candidates rejected",
        suite.members.len(),
        suite.rejected
    );
    let symmetric = cfg.gdu.curve == Curve::Symmetric;
    let mut summary = String::from("beta,seed,cosine,rel_mse\n");
    let mut medians = String::from("beta,t,median_rel_mse,median_cosine\n");
    let mut sweep: Vec<(f64, Vec<MemberComparison>)> = Vec::new();
    for &beta in &cfg.gdu.betas {
        let ep = cfg.gdu_ep(beta);
        let reports: Vec<(u64, GduReport)> = suite
            .members
            .par_iter()
            .map(|m| {
                let est = ep_curve(&m.input, &m.target, &m.theta, &m.spec, &m.hop, &ep, symmetric)?;
                let reference = bptt_curve(&m.input, &m.target, &m.theta, &m.spec, &m.hop, ep.free_steps, ep.nudge_steps)?;
                let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
                let weights = pick_weights(m.theta.len(), cfg.gdu.traced_weights, &mut rng);
                Ok((m.seed, gdu_report(&est, &reference, &weights)?))
            })
            .collect::<Result<_, eqprop_core::Error>>()?;
        let sub = format!("beta_{beta}");
        for (seed, r) in &reports {
            r.write_csv(dir.create(format!("{sub}/gdu_{seed}.csv"))?)?;
            r.write_weight_trace_csv(dir.create(format!("{sub}/weight_trace_{seed}.csv"))?)?;
        }
        for t in 1..=ep.nudge_steps {
            let rows: Vec<_> = reports
                .iter()
                .filter_map(|(_, r)| r.overall().find(|row| row.t == t))
                .collect();
            let rm: Vec<f64> = rows.iter().map(|r| r.rel_mse).collect();
            let cs: Vec<f64> = rows.iter().map(|r| r.cosine).collect();
            writeln!(medians, "{beta},{t},{},{}", median(&rm), median(&cs)).unwrap();
        }
        let cmp = compare_suite(&suite.members, &ep)?;
        for c in &cmp {
            writeln!(summary, "{beta},{},{},{}", c.seed, c.cosine, c.rel_mse).unwrap();
        }
        let cos: Vec<f64> = cmp.iter().map(|c| c.cosine).collect();
        let rm: Vec<f64> = cmp.iter().map(|c| c.rel_mse).collect();
        println!(
            "beta {beta}: median cosine {:.6}, median rel_mse {:.3e} (symmetric EP vs BPTT at t=K={})",
            median(&cos),
            median(&rm),
            ep.nudge_steps
        );
        sweep.push((beta, cmp));
    }
    dir.write("gdu_summary.csv", &summary)?;
    dir.write("gdu_median.csv", &medians)?;

    sweep.sort_by(|a, b| b.0.total_cmp(&a.0));
    let members = suite.members.len();
    let monotone = (0..members)
        .filter(|&i| sweep.windows(2).all(|w| w[1].1[i].rel_mse <= w[0].1[i].rel_mse))
        .count();
    println!("rel_mse non-increasing as beta shrinks on {monotone}/{members} members");
    let (beta_min, smallest) = sweep.last().expect("validated non-empty");
    let cos: Vec<f64> = smallest.iter().map(|c| c.cosine).collect();
    let med = median(&cos);
    println!(
        "{:.1}s; reports in {}",
        started.elapsed().as_secs_f64(),
        dir.path().display()
    );
    if med < cfg.gdu.min_median_cosine {
        return Err(CliError::Check(format!(
            "median cosine {med:.6} at beta {beta_min} is below {}",
            cfg.gdu.min_median_cosine
        )));
    }
    Ok(())
}

pub fn converge(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let c = &cfg.converge;
    let runs: Vec<(String, Relaxation)> = match checkpoint {
        None => {
            let suite = toy_suite(&ToySuiteConfig {
                members: c.runs,
                ..cfg.suite.clone()
            })?;
            suite
                .members
                .par_iter()
                .map(|m| {
                    let relax = m.dynamics()?.relax(NetworkState::zeros(&m.spec), None, 0.0, c.steps)?;
                    Ok((format!("seed{}", m.seed), relax))
                })
                .collect::<Result<_, eqprop_core::Error>>()?
        }
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let data = load_task(cfg)?;
            let n = c.runs.min(data.test.len());
            if n < c.runs {
                warn!("test split holds only {n} samples");
            }
            data.test.samples[..n]
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let dynamics = Dynamics::new(&ckpt.spec, &ckpt.theta, ckpt.hopfield, &s.input)?;
                    let relax = dynamics.relax(NetworkState::zeros(&ckpt.spec), None, 0.0, c.steps)?;
                    Ok((format!("sample{i}"), relax))
                })
                .collect::<Result<_, eqprop_core::Error>>()?
        }
    };
    let dir = RunDir::acquire(&cfg.out_dir("converge"))?;
    dir.write(CONFIG_FILE, &cfg.to_toml())?;
    let tol = cfg.ep.residual_tol;
    let mut traces = String::from("run,source,step,phi,residual\n");
    let mut summary = String::from("run,source,final_residual,phi_change,settled\n");
    let (mut failed, mut worst_res, mut worst_phi) = (0, 0.0f64, 0.0f64);
    for (run, (source, r)) in runs.iter().enumerate() {
        for (t, phi) in r.phi_trace.iter().enumerate() {
            let res = if t == 0 {
                String::new()
            } else {
                r.residual_trace[t - 1].to_string()
            };
            writeln!(traces, "{run},{source},{t},{phi},{res}").unwrap();
        }
        let n = r.phi_trace.len();
        let phi_t = r.phi_trace[n - 1];
        let phi_change = (phi_t - r.phi_trace[n - 2]).abs() / (1.0 + phi_t.abs());
        let settled = r.final_residual() <= tol && phi_change <= c.phi_tol;
        if !settled {
            failed += 1;
        }
        worst_res = worst_res.max(r.final_residual());
        worst_phi = worst_phi.max(phi_change);
        writeln!(summary, "{run},{source},{},{phi_change},{settled}", r.final_residual()).unwrap();
    }
    dir.write("converge.csv", &traces)?;
    dir.write("converge_summary.csv", &summary)?;
    println!(
        "{}/{} relaxations settled after {} steps; worst residual {worst_res:.3e} (<= {tol:e}), worst |dphi|/(1+|phi|) {worst_phi:.3e} (<= {:e})",
        runs.len() - failed,
        runs.len(),
        c.steps,
        c.phi_tol
    );
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} of {} relaxations did not settle", runs.len())));
    }
    Ok(())
}

struct Retrieval {
    max_weight: f64,
    participation: f64,
    error_to_target: f64,
    error_to_mean: f64,
}

fn retrieve(patterns: &Array2<f64>, query: &Array1<f64>, beta_h: f64) -> Result<Retrieval, CliError> {
    let stored = StoredPatterns::new(patterns.clone())?;
    let cfg = HopfieldConfig::with_beta(patterns.ncols(), beta_h)?;
    let w = attention_weights(query.view(), &stored, beta_h)?;
    let out = hopfield_update(query.view(), &stored, &cfg)?;
    let mean = patterns.mean_axis(Axis(0)).expect("at least one pattern");
    let dist = |a: &Array1<f64>, b: ndarray::ArrayView1<'_, f64>| (a - &b).mapv(|v| v * v).sum().sqrt();
    Ok(Retrieval {
        max_weight: w.fold(0.0f64, |m, &v| m.max(v)),
        participation: 1.0 / w.mapv(|v| v * v).sum(),
        error_to_target: dist(&out, patterns.row(0)),
        error_to_mean: dist(&out, mean.view()),
    })
}

pub fn hopfield_demo(cfg: &RunConfig) -> Result<(), CliError> {
    let d = &cfg.demo;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Orthogonal patterns of norm 2 versus jittered copies of one centre of norm 2.
    let mut separable = Array2::zeros((d.patterns, d.dim));
    for i in 0..d.patterns {
        separable[[i, i]] = 2.0;
    }
    let center = unit(d.dim, &mut rng) * 2.0;
    let mut clustered = Array2::zeros((d.patterns, d.dim));
    for mut row in clustered.rows_mut() {
        row.assign(&center);
        row.mapv_inplace(|v| v + rng.random_range(-0.2..0.2));
    }
    let noise = unit(d.dim, &mut rng) * d.noise;

    let dir = RunDir::acquire(&cfg.out_dir("hopfield-demo"))?;
    dir.write(CONFIG_FILE, &cfg.to_toml())?;
    let mut csv = String::from("pattern_set,beta_h,max_weight,participation,error_to_target,error_to_mean\n");
    println!(
        "{:<10} {:>8} {:>10} {:>13} {:>15} {:>13}",
        "set", "beta_h", "max_weight", "participation", "err_to_target", "err_to_mean"
    );
    for (name, patterns) in [("separable", &separable), ("clustered", &clustered)] {
        let query = &patterns.row(0).to_owned() + &noise;
        for &beta in &d.betas {
            let r = retrieve(patterns, &query, beta)?;
            println!(
                "{name:<10} {beta:>8} {:>10.6} {:>13.4} {:>15.3e} {:>13.3e}",
                r.max_weight, r.participation, r.error_to_target, r.error_to_mean
            );
            writeln!(
                csv,
                "{name},{beta},{},{},{},{}",
                r.max_weight, r.participation, r.error_to_target, r.error_to_mean
            )
            .unwrap();
        }
    }
    dir.write("hopfield_demo.csv", &csv)?;

    let default_beta = HopfieldConfig::new(d.dim).beta_h;
    let high = d.betas.iter().copied().fold(50.0f64, f64::max);
    let exact = retrieve(&separable, &(&separable.row(0).to_owned() + &noise), high)?;
    let meta = retrieve(&clustered, &(&clustered.row(0).to_owned() + &noise), default_beta)?;
    let exact_ok = exact.error_to_target <= 1e-3;
    let meta_ok = meta.participation >= d.patterns as f64 / 2.0 && meta.error_to_mean < meta.error_to_target;
    println!(
        "separable, beta_h={high}: error to stored pattern {:.3e} ({})",
        exact.error_to_target,
        if exact_ok { "exact retrieval" } else { "NOT retrieved" }
    );
    println!(
        "clustered, beta_h={default_beta}: {:.2} patterns share the weight, error to cluster mean {:.3e} ({})",
        meta.participation,
        meta.error_to_mean,
        if meta_ok { "metastable average" } else { "no averaging" }
    );
    if !(exact_ok && meta_ok) {
        return Err(CliError::Check("retrieval demonstration did not behave as expected".into()));
    }
    Ok(())
}

fn unit(dim: usize, rng: &mut impl Rng) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0));
        let n = v.dot(&v).sqrt();
        if n > 1e-3 {
            return v / n;
        }
    }
}
