//! Run configuration: task presets, TOML overlay, flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use eqprop_core::data::ClusterTaskConfig;
use eqprop_core::hopfield::HopfieldConfig;
use eqprop_core::network::ModelSpec;
use eqprop_core::oracle::ToySuiteConfig;
use eqprop_core::training::{EpConfig, EpMode};
use eqprop_core::Error;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Synthetic,
    Imdb,
    Snli,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Synthetic => "synthetic",
            Task::Imdb => "imdb",
            Task::Snli => "snli",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub seq_len: usize,
    pub embed_dim: usize,
    /// Fully connected layer sizes; the last one is the output layer.
    pub fc_sizes: Vec<usize>,
    pub attention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfieldSection {
    /// Inverse temperature; absent means `1/√embed_dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Seeds synthetic generation and stratified subsampling.
    pub seed: u64,
    /// Synthetic task sizes.
    pub train_samples: usize,
    pub test_samples: usize,
    /// Stratified cap applied to each split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imdb_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snli_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curve {
    /// Two-phase estimate after `t` nudge steps.
    Truncated,
    /// `+β` and `−β` trajectories contrasted at equal `t`.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GduSection {
    pub betas: Vec<f64>,
    pub free_steps: usize,
    pub nudge_steps: usize,
    pub curve: Curve,
    /// Individual weights whose values are traced along both curves.
    pub traced_weights: usize,
    /// Required median cosine at the smallest β.
    pub min_median_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub runs: usize,
    pub steps: usize,
    /// Bound on `|φ_T − φ_{T−1}| / (1 + |φ_T|)`.
    pub phi_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSection {
    pub dim: usize,
    pub patterns: usize,
    /// Norm of the perturbation added to the query.
    pub noise: f64,
    pub betas: Vec<f64>,
}

/// Fully resolved configuration. A snapshot of it is written to every run
/// directory and can be fed back through `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    /// Seeds initialisation and batch order.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub init_gain: f64,
    pub model: ModelSection,
    pub hopfield: HopfieldSection,
    pub ep: EpConfig,
    pub data: DataSection,
    pub suite: ToySuiteConfig,
    pub gdu: GduSection,
    pub converge: ConvergeSection,
    pub demo: DemoSection,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub task: Option<Task>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub limit: Option<usize>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn preset(task: Task) -> Self {
        let (model, ep) = match task {
            Task::Synthetic => (
                ModelSection {
                    seq_len: 12,
                    embed_dim: 16,
                    fc_sizes: vec![32, 4],
                    attention: true,
                },
                EpConfig::synthetic(),
            ),
            Task::Imdb => (
                ModelSection {
                    seq_len: 600,
                    embed_dim: 300,
                    fc_sizes: vec![1000, 40, 2],
                    attention: true,
                },
                EpConfig::imdb(),
            ),
            Task::Snli => (
                ModelSection {
                    seq_len: 25,
                    embed_dim: 300,
                    fc_sizes: vec![300, 3],
                    attention: true,
                },
                EpConfig::snli(),
            ),
        };
        Self {
            task,
            seed: 0,
            out_dir: None,
            threads: 0,
            init_gain: 1.0,
            model,
            hopfield: HopfieldSection { beta_h: None },
            ep,
            data: DataSection {
                seed: 0,
                train_samples: 2000,
                test_samples: 500,
                limit: None,
                imdb_dir: None,
                snli_dir: None,
                embeddings: None,
            },
            suite: ToySuiteConfig::default(),
            gdu: GduSection {
                betas: vec![0.5, 0.1, 0.02],
                free_steps: 100,
                nudge_steps: 30,
                curve: Curve::Truncated,
                traced_weights: 3,
                min_median_cosine: 0.95,
            },
            converge: ConvergeSection {
                runs: 50,
                steps: 50,
                phi_tol: 1e-4,
            },
            demo: DemoSection {
                dim: 16,
                patterns: 4,
                noise: 0.01,
                betas: vec![0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            },
        }
    }

    /// Preset for the task, overlaid with `file` and then with the flags.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self, CliError> {
        let table = match file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        let file_task = match table.get("task") {
            Some(v) => Some(
                Task::deserialize(v.clone())
                    .map_err(|e| CliError::Usage(format!("invalid config field `task`: {e}")))?,
            ),
            None => None,
        };
        let task = flags.task.or(file_task).unwrap_or(Task::Synthetic);
        let mut merged = toml::Table::try_from(Self::preset(task)).expect("presets serialize");
        merge(&mut merged, table);
        merged.insert("task".into(), toml::Value::String(task.as_str().into()));
        // Round-trip through text so schema errors point at the offending key.
        let text = toml::to_string(&merged).expect("tables serialize");
        let mut cfg: Self = toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;

        if let Some(seed) = flags.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &flags.out {
            cfg.out_dir = Some(out.clone());
        }
        if let Some(limit) = flags.limit {
            cfg.data.limit = Some(limit);
        }
        if let Some(threads) = flags.threads {
            cfg.threads = threads;
        }
        if cfg.hopfield.beta_h.is_none() {
            cfg.hopfield.beta_h = Some(HopfieldConfig::new(cfg.model.embed_dim).beta_h);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn spec(&self) -> ModelSpec {
        let m = &self.model;
        match self.task {
            Task::Snli => ModelSpec::sequence_pair(m.seq_len, m.embed_dim, m.fc_sizes.clone(), m.attention),
            _ => ModelSpec::single_sequence(m.seq_len, m.embed_dim, m.fc_sizes.clone(), m.attention),
        }
    }

    pub fn hopfield(&self) -> HopfieldConfig {
        let d_k = self.model.embed_dim;
        HopfieldConfig {
            beta_h: self.hopfield.beta_h.unwrap_or_else(|| HopfieldConfig::new(d_k).beta_h),
            d_k,
        }
    }

    pub fn cluster_task(&self) -> ClusterTaskConfig {
        ClusterTaskConfig::new(self.model.seq_len, self.model.embed_dim, self.num_classes())
    }

    pub fn num_classes(&self) -> usize {
        self.model.fc_sizes.last().copied().unwrap_or(0)
    }

    pub fn out_dir(&self, command: &str) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| Path::new("runs").join(command))
    }

    /// EP settings used by the certification commands.
    pub fn gdu_ep(&self, beta: f64) -> EpConfig {
        EpConfig {
            beta_ep: beta,
            free_steps: self.gdu.free_steps,
            nudge_steps: self.gdu.nudge_steps,
            mode: EpMode::ThreePhaseSymmetric,
            ..self.ep.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let spec = self.spec();
        spec.validate().map_err(|e| prefixed("model", e))?;
        self.hopfield().validate().map_err(|e| field("hopfield.beta_h", e.to_string()))?;
        self.ep.validate(&spec).map_err(|e| prefixed("ep", e))?;
        if !(self.init_gain > 0.0 && self.init_gain.is_finite()) {
            return Err(field("init_gain", "must be positive"));
        }
        let classes = match self.task {
            Task::Synthetic => None,
            Task::Imdb => Some(2),
            Task::Snli => Some(3),
        };
        if let Some(c) = classes {
            if self.num_classes() != c {
                return Err(field(
                    "model.fc_sizes",
                    format!("task {} has {c} classes, output layer has {}", self.task.as_str(), self.num_classes()),
                ));
            }
        }
        if self.task == Task::Synthetic {
            self.cluster_task().validate().map_err(|e| prefixed("model", e))?;
            if self.data.train_samples == 0 || self.data.test_samples == 0 {
                return Err(field("data.train_samples", "both synthetic splits must be non-empty"));
            }
        }
        if self.data.limit == Some(0) {
            return Err(field("data.limit", "must be positive"));
        }
        self.suite.validate().map_err(|e| prefixed("suite", e))?;
        let g = &self.gdu;
        if g.betas.is_empty() || g.betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(field("gdu.betas", "need at least one β in (0, 1)"));
        }
        if g.nudge_steps == 0 || g.free_steps <= g.nudge_steps {
            return Err(field("gdu.free_steps", "need free_steps > nudge_steps > 0"));
        }
        if !(0.0..=1.0).contains(&g.min_median_cosine) {
            return Err(field("gdu.min_median_cosine", "must lie in [0, 1]"));
        }
        let c = &self.converge;
        if c.runs == 0 || c.steps < 2 {
            return Err(field("converge.runs", "need at least one run of at least two steps"));
        }
        if !(c.phi_tol > 0.0) {
            return Err(field("converge.phi_tol", "must be positive"));
        }
        let d = &self.demo;
        if d.dim < d.patterns || d.patterns < 3 {
            return Err(field("demo.patterns", "need 3 <= patterns <= dim"));
        }
        if !(d.noise >= 0.0) || d.betas.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(field("demo.betas", "β values must be positive and noise non-negative"));
        }
        Ok(())
    }
}

fn field(name: &str, msg: impl Into<String>) -> CliError {
    CliError::Usage(format!("invalid config field `{name}`: {}", msg.into()))
}

fn prefixed(section: &str, e: Error) -> CliError {
    match e {
        Error::Config { field: f, msg } => field(&format!("{section}.{f}"), msg),
        other => field(section, other.to_string()),
    }
}

/// Recursive overlay; tables merge key by key, everything else replaces.
fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
