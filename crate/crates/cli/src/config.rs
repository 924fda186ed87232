//! Run configuration: one TOML file with a section per module. Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use flowfactor::metrics::{FactorVaeConfig, MetricsConfig};
use flowfactor::model::ModelConfig;
use flowfactor::odeint::{SolverKind, SolverSpec};
use flowfactor::training::{AdamConfig, TrainConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub train: TrainSection,
    pub model: ModelSection,
    pub solver: SolverSection,
    pub metrics: MetricsSection,
    pub ablate: AblateSection,
    pub swap: SwapSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Holds `dataset.bin` and `codec.bin`.
    pub data_dir: PathBuf,
    /// Parent of the per-run directories.
    pub runs_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            runs_dir: "runs".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub steps: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub lambda_orth: f64,
    pub eps_orth: f64,
    pub checkpoint_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            steps: t.steps,
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            eps_adam: t.adam.eps,
            lambda_orth: t.lambda_orth,
            eps_orth: t.eps_orth,
            checkpoint_every: t.checkpoint_every,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub tokens: usize,
    pub channels: usize,
    pub factors: usize,
    pub factor_dim: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub key_dim: usize,
    pub time_dim: usize,
    pub encoder_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            tokens: m.tokens,
            channels: m.channels,
            factors: m.factors,
            factor_dim: m.factor_dim,
            hidden: m.hidden,
            blocks: m.blocks,
            key_dim: m.key_dim,
            time_dim: m.time_dim,
            encoder_hidden: m.encoder_hidden,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// `euler`, `rk4` or `dopri5`.
    pub kind: String,
    pub steps: usize,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSpec::default();
        Self {
            kind: s.kind.to_string(),
            steps: s.steps,
            rtol: s.rtol,
            atol: s.atol,
            max_steps: s.max_steps,
            initial_step: s.initial_step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub votes_train: usize,
    pub votes_eval: usize,
    pub vote_batch: usize,
    pub prune_std: f64,
    pub l1_strength: f64,
    pub bins: usize,
    pub samples: usize,
    /// Project the concatenated factor tokens onto their top N principal
    /// directions before scoring.
    pub reduce: bool,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let m = MetricsConfig::default();
        Self {
            votes_train: m.factorvae.votes_train,
            votes_eval: m.factorvae.votes_eval,
            vote_batch: m.factorvae.vote_batch,
            prune_std: m.factorvae.prune_std,
            l1_strength: m.l1_strength,
            bins: m.bins,
            samples: m.samples,
            reduce: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub seeds: usize,
    /// Training steps per arm; 0 means `train.steps`.
    pub steps: u64,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self { seeds: 5, steps: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwapSection {
    pub trials: usize,
    /// Ground-truth factors a sweep may target, by name.
    pub factors: Vec<String>,
}

impl Default for SwapSection {
    fn default() -> Self {
        Self {
            trials: 200,
            factors: vec!["x".into(), "y".into(), "hue".into()],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The resolved configuration as TOML, written next to run artifacts.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.solver_spec()?.validate()?;
        if self.metrics.bins < 2 || self.metrics.samples == 0 || self.metrics.vote_batch < 2 {
            bail!("metrics: bins and vote_batch must be at least 2 and samples positive");
        }
        self.swap_factor_indices()?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            tokens: m.tokens,
            channels: m.channels,
            factors: m.factors,
            factor_dim: m.factor_dim,
            hidden: m.hidden,
            blocks: m.blocks,
            key_dim: m.key_dim,
            time_dim: m.time_dim,
            encoder_hidden: m.encoder_hidden,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            steps: t.steps,
            adam: AdamConfig {
                learning_rate: t.learning_rate,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.eps_adam,
            },
            lambda_orth: t.lambda_orth,
            eps_orth: t.eps_orth,
            seed: self.seed,
            checkpoint_every: t.checkpoint_every,
            model: self.model_config(),
        }
    }

    pub fn solver_spec(&self) -> Result<SolverSpec> {
        let s = &self.solver;
        let kind: SolverKind = s.kind.parse()?;
        Ok(SolverSpec {
            kind,
            steps: s.steps,
            rtol: s.rtol,
            atol: s.atol,
            max_steps: s.max_steps,
            initial_step: s.initial_step,
            ..SolverSpec::default()
        })
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        let m = &self.metrics;
        MetricsConfig {
            factorvae: FactorVaeConfig {
                votes_train: m.votes_train,
                votes_eval: m.votes_eval,
                vote_batch: m.vote_batch,
                prune_std: m.prune_std,
            },
            l1_strength: m.l1_strength,
            bins: m.bins,
            samples: m.samples,
        }
    }

    pub fn swap_factor_indices(&self) -> Result<Vec<usize>> {
        let names = flowfactor::data::FACTOR_NAMES;
        if self.swap.factors.is_empty() {
            bail!("swap.factors must name at least one factor");
        }
        self.swap
            .factors
            .iter()
            .map(|f| match names.iter().position(|n| n == f) {
                Some(k) => Ok(k),
                None => bail!("swap.factors: unknown factor {f:?} (expected one of {names:?})"),
            })
            .collect()
    }
}
