//! Losses, optimiser and the joint training loop for the encoder and the
//! velocity network.

mod adam;
mod losses;

use std::fmt::Write as _;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use losses::{fm_loss, make_bridge, orth_loss, orth_loss_single, total_loss};

use crate::data::{DataError, LatentCodec, ToyDataset, NUM_SCENES, PIXELS};
use crate::model::{ModelConfig, ModelError, ModelParams, Network};
use crate::rng::{splitmix64, Rng};
use crate::tensor::{Tape, Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("non-finite gradient for parameter {param} at element {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: u64,
    pub adam: AdamConfig,
    pub lambda_orth: f64,
    pub eps_orth: f64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            steps: 20_000,
            adam: AdamConfig::default(),
            lambda_orth: 1e-2,
            eps_orth: 1e-8,
            seed: 0,
            checkpoint_every: 1000,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::Config("batch_size must be at least 2".into()));
        }
        if !(self.lambda_orth >= 0.0) {
            return Err(TrainError::Config("lambda_orth must be non-negative".into()));
        }
        if !(self.eps_orth > 0.0) || !(self.adam.learning_rate > 0.0) {
            return Err(TrainError::Config("eps_orth and learning_rate must be positive".into()));
        }
        self.model.validate()?;
        Ok(())
    }

    /// Seed for parameter initialisation, distinct from every per-sample
    /// stream.
    pub fn init_seed(&self) -> u64 {
        splitmix64(self.seed).1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub fm: f64,
    pub orth: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub records: Vec<LossRecord>,
}

impl LossTrace {
    pub const HEADER: &'static str = "step,fm_loss,orth_loss,total";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.records.len() + 1));
        out.push_str(Self::HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(out, "{},{:e},{:e},{:e}", r.step, r.fm, r.orth, r.total).expect("string write");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(Self::HEADER) {
            return Err("missing loss header".into());
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
            if f.len() != 4 {
                return Err(format!("line {}: expected 4 fields", i + 2));
            }
            records.push(LossRecord {
                step: f[0].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                fm: parse(f[1])?,
                orth: parse(f[2])?,
                total: parse(f[3])?,
            });
        }
        Ok(Self { records })
    }

    pub fn fm(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fm).collect()
    }

    pub fn orth(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.orth).collect()
    }
}

/// The toy dataset paired with codec latents for every scene.
pub struct TrainingSet<'a> {
    pub codec: &'a LatentCodec,
    latents: Vec<f64>,
}

impl<'a> TrainingSet<'a> {
    pub fn new(codec: &'a LatentCodec) -> Result<Self, DataError> {
        let ds = ToyDataset;
        let mut latents = Vec::with_capacity(NUM_SCENES * codec.dims());
        for start in (0..NUM_SCENES).step_by(1024) {
            let count = 1024.min(NUM_SCENES - start);
            latents.extend(codec.encode_batch(&ds.image_block(start, count))?);
        }
        Ok(Self { codec, latents })
    }

    pub fn latent(&self, scene: usize) -> &[f64] {
        let d = self.codec.dims();
        &self.latents[scene * d..(scene + 1) * d]
    }
}

/// One training batch: conditioning images, bridge points and targets.
#[derive(Clone, Debug)]
pub struct Batch {
    pub scenes: Vec<usize>,
    /// `[B, PIXELS]`.
    pub images: Tensor,
    pub ts: Vec<f64>,
    /// `[B, M, d]`.
    pub zt: Tensor,
    /// `[B, M, d]`.
    pub target: Tensor,
}

impl Batch {
    /// Draws sample `index` of `step` from the stream seeded by
    /// `seed ^ (step·batch_size + index)`: scene, prior latent, then time.
    pub fn sample(set: &TrainingSet, cfg: &TrainConfig, step: u64) -> Result<Self, TrainError> {
        let (m, d) = (cfg.model.tokens, cfg.model.channels);
        if m * d != set.codec.dims() {
            return Err(TrainError::Config(format!(
                "model latent {m}×{d} does not match codec dimensionality {}",
                set.codec.dims()
            )));
        }
        let b = cfg.batch_size;
        let ds = ToyDataset;
        let mut scenes = Vec::with_capacity(b);
        let mut images = Vec::with_capacity(b * PIXELS);
        let mut ts = Vec::with_capacity(b);
        let mut zt = Vec::with_capacity(b * m * d);
        let mut target = Vec::with_capacity(b * m * d);
        for i in 0..b {
            let mut rng = Rng::new(cfg.seed ^ (step * b as u64 + i as u64));
            let scene = rng.below(NUM_SCENES);
            let z0 = rng.gaussian_vec(m * d);
            let t = rng.uniform();
            let (point, u) = make_bridge(&z0, set.latent(scene), t)?;
            scenes.push(scene);
            images.extend(ds.image(scene));
            ts.push(t);
            zt.extend(point);
            target.extend(u);
        }
        Ok(Self {
            scenes,
            images: Tensor::matrix(b, PIXELS, images)?,
            ts,
            zt: Tensor::new(vec![b, m, d], zt)?,
            target: Tensor::new(vec![b, m, d], target)?,
        })
    }
}

/// Loss terms of one batch, recorded on the network's tape.
pub struct Objective {
    pub fm: Tensor,
    pub orth: Tensor,
    pub total: Tensor,
}

pub fn objective(net: &Network, batch: &Batch, lambda_orth: f64, eps_orth: f64) -> Result<Objective, TrainError> {
    let tape = net.tape();
    let factors = net.encode_factors(&batch.images)?;
    let (v, h) = net.predict_velocity(&batch.zt, &batch.ts, &factors)?;
    let routing = net.route_velocity(&h, &factors, &v)?;
    let fm = fm_loss(tape, &v, &batch.target)?;
    let orth = orth_loss(tape, &routing.velocities, eps_orth)?;
    let total = total_loss(tape, &fm, &orth, lambda_orth)?;
    Ok(Objective { fm, orth, total })
}

/// Runs the optimiser from a fresh initialisation. `on_checkpoint` sees
/// the parameters every `checkpoint_every` steps.
pub fn train(
    cfg: &TrainConfig,
    set: &TrainingSet,
    mut on_checkpoint: impl FnMut(u64, &ModelParams, &LossTrace),
) -> Result<(ModelParams, LossTrace), TrainError> {
    cfg.validate()?;
    let mut params = ModelParams::init(cfg.model, cfg.init_seed())?;
    let mut state = AdamState::new(params.values());
    let mut trace = LossTrace::default();
    for step in 1..=cfg.steps {
        let batch = Batch::sample(set, cfg, step)?;
        let tape = Tape::new();
        let net = params.trainable(&tape);
        let obj = objective(&net, &batch, cfg.lambda_orth, cfg.eps_orth)?;
        let record = LossRecord {
            step,
            fm: obj.fm.item(),
            orth: obj.orth.item(),
            total: obj.total.item(),
        };
        if !record.total.is_finite() {
            return Err(TrainError::NonFiniteLoss { step });
        }
        let grads = tape.backward(&obj.total)?;
        let grads: Vec<Vec<f64>> = net.values().iter().map(|p| grads.wrt_or_zero(p)).collect();
        drop(net);
        let names = params.names().to_vec();
        adam_step(params.values_mut(), &names, &grads, &mut state, step, &cfg.adam)?;
        trace.records.push(record);
        if step % 100 == 0 {
            log::info!("step {step}: fm {:.4} orth {:.4}", record.fm, record.orth);
        }
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            on_checkpoint(step, &params, &trace);
        }
    }
    Ok((params, trace))
}
