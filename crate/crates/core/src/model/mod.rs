//! Factor encoder, factor-conditioned velocity network and routing head.
//!
//! Parameters live in [`ModelParams`] as an ordered list of named tensors.
//! A [`Network`] view binds them to a [`Tape`], either as gradient leaves
//! for training or as constants for inference.

mod checkpoint;
mod network;

use std::collections::HashMap;

use crate::binio::FormatError;
use crate::data::LatentLayout;
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, TensorError};

pub use network::{time_embed, FactorSet, FlowState, Network, Routing};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("checkpoint parameter {found:?} does not match expected {expected:?}")]
    ParamMismatch { expected: String, found: String },
    #[error("factor index {index} out of range for {factors} factor tokens")]
    FactorIndex { index: usize, factors: usize },
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Architecture hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Latent tokens per image.
    pub tokens: usize,
    /// Channels per latent token.
    pub channels: usize,
    /// Number of factor tokens.
    pub factors: usize,
    pub factor_dim: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub key_dim: usize,
    pub time_dim: usize,
    pub encoder_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            tokens: 16,
            channels: 4,
            factors: 10,
            factor_dim: 16,
            hidden: 64,
            blocks: 3,
            key_dim: 16,
            time_dim: 16,
            encoder_hidden: 256,
        }
    }
}

impl ModelConfig {
    pub fn layout(&self) -> LatentLayout {
        LatentLayout {
            tokens: self.tokens,
            channels: self.channels,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.tokens * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tokens", self.tokens),
            ("channels", self.channels),
            ("factors", self.factors),
            ("factor_dim", self.factor_dim),
            ("hidden", self.hidden),
            ("key_dim", self.key_dim),
            ("time_dim", self.time_dim),
            ("encoder_hidden", self.encoder_hidden),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be positive")));
        }
        if self.time_dim % 2 != 0 {
            return Err(ModelError::Config("time_dim must be even".into()));
        }
        Ok(())
    }

    pub(crate) fn as_words(&self) -> [usize; 9] {
        [
            self.tokens,
            self.channels,
            self.factors,
            self.factor_dim,
            self.hidden,
            self.blocks,
            self.key_dim,
            self.time_dim,
            self.encoder_hidden,
        ]
    }

    pub(crate) fn from_words(w: [usize; 9]) -> Self {
        Self {
            tokens: w[0],
            channels: w[1],
            factors: w[2],
            factor_dim: w[3],
            hidden: w[4],
            blocks: w[5],
            key_dim: w[6],
            time_dim: w[7],
            encoder_hidden: w[8],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    Uniform { fan_in: usize },
    Zero,
}

struct Slot {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn linear_slots(out: &mut Vec<Slot>, prefix: &str, fan_in: usize, fan_out: usize, zero: bool) {
    let init = if zero { Init::Zero } else { Init::Uniform { fan_in } };
    out.push(Slot {
        name: format!("{prefix}.weight"),
        shape: vec![fan_in, fan_out],
        init,
    });
    out.push(Slot {
        name: format!("{prefix}.bias"),
        shape: vec![fan_out],
        init: Init::Zero,
    });
}

fn matrix_slot(out: &mut Vec<Slot>, name: String, rows: usize, cols: usize) {
    out.push(Slot {
        name,
        shape: vec![rows, cols],
        init: Init::Uniform { fan_in: rows },
    });
}

/// Parameter names, shapes and initialisers in checkpoint order.
fn slots(c: &ModelConfig) -> Vec<Slot> {
    let mut s = Vec::new();
    let eh = c.encoder_hidden;
    linear_slots(&mut s, "encoder.0", crate::data::PIXELS, eh, false);
    linear_slots(&mut s, "encoder.1", eh, eh, false);
    linear_slots(&mut s, "encoder.2", eh, c.factors * c.factor_dim, false);

    linear_slots(&mut s, "velocity.input", c.channels + c.time_dim + c.tokens, c.hidden, false);
    for b in 0..c.blocks {
        linear_slots(&mut s, &format!("velocity.block{b}.mlp.0"), c.hidden, c.hidden, false);
        linear_slots(&mut s, &format!("velocity.block{b}.mlp.1"), c.hidden, c.hidden, false);
        matrix_slot(&mut s, format!("velocity.block{b}.attn.query"), c.hidden, c.key_dim);
        matrix_slot(&mut s, format!("velocity.block{b}.attn.key"), c.factor_dim, c.key_dim);
        matrix_slot(&mut s, format!("velocity.block{b}.attn.value"), c.factor_dim, c.hidden);
    }
    linear_slots(&mut s, "velocity.output", c.hidden, c.channels, true);

    matrix_slot(&mut s, "routing.query".into(), c.hidden, c.key_dim);
    matrix_slot(&mut s, "routing.key".into(), c.factor_dim, c.key_dim);
    s
}

/// Trainable weights of the factor encoder (γ) and velocity network (θ).
#[derive(Clone, Debug)]
pub struct ModelParams {
    config: ModelConfig,
    names: Vec<String>,
    values: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ModelParams {
    /// Weights uniform in `±1/√fan_in`, biases and the velocity output
    /// projection zero.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let mut names = Vec::new();
        let mut values = Vec::new();
        for slot in slots(&config) {
            let n: usize = slot.shape.iter().product();
            let data = match slot.init {
                Init::Zero => vec![0.0; n],
                Init::Uniform { fan_in } => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..n).map(|_| rng.range(-bound, bound)).collect()
                }
            };
            names.push(slot.name);
            values.push(Tensor::new(slot.shape, data)?);
        }
        Ok(Self::assemble(config, names, values))
    }

    fn assemble(config: ModelConfig, names: Vec<String>, values: Vec<Tensor>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self {
            config,
            names,
            values,
            index,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.values[i])
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Whether the name belongs to the factor encoder.
    pub fn is_encoder(name: &str) -> bool {
        name.starts_with("encoder.")
    }

    /// A view whose tensors come from `bind(name, value)`.
    pub fn network_with<'a>(
        &'a self,
        tape: &'a Tape,
        bind: impl Fn(&str, &Tensor) -> Tensor,
    ) -> Network<'a> {
        let values = self
            .names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| bind(n, v))
            .collect();
        Network::new(tape, &self.config, &self.index, values)
    }

    /// Every parameter registered as a gradient leaf on `tape`.
    pub fn trainable<'a>(&'a self, tape: &'a Tape) -> Network<'a> {
        self.network_with(tape, |_, v| tape.param(v))
    }

    /// Parameters as constants; nothing is recorded.
    pub fn frozen<'a>(&'a self, tape: &'a Tape) -> Network<'a> {
        self.network_with(tape, |_, v| v.detach())
    }
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.names == other.names
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.bit_eq(b))
    }
}
