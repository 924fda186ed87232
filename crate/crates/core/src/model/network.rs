use std::collections::HashMap;
use std::f64::consts::PI;

use super::{ModelConfig, ModelError, Result};
use crate::data::PIXELS;
use crate::tensor::{Tape, Tensor, TensorError};

/// Sinusoidal features `[sin(2π f_j t).., cos(2π f_j t)..]` with `f_j = 2^j`.
pub fn time_embed(t: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; 2 * half];
    for j in 0..half {
        let w = 2.0 * PI * (1u64 << j) as f64 * t;
        out[j] = w.sin();
        out[half + j] = w.cos();
    }
    out
}

/// The factor tokens extracted from one image, `[N, d_s]`.
#[derive(Clone, Debug)]
pub struct FactorSet {
    pub tokens: Tensor,
}

impl FactorSet {
    pub fn len(&self) -> usize {
        self.tokens.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces token `index` with the one from `other`.
    pub fn swapped(&self, other: &FactorSet, index: usize) -> Result<FactorSet> {
        if index >= self.len() || self.tokens.shape() != other.tokens.shape() {
            return Err(ModelError::FactorIndex {
                index,
                factors: self.len(),
            });
        }
        let d = self.tokens.shape()[1];
        let mut tokens = self.tokens.detach();
        tokens.data_mut()[index * d..(index + 1) * d]
            .copy_from_slice(&other.tokens.data()[index * d..(index + 1) * d]);
        Ok(FactorSet { tokens })
    }

    pub fn bit_eq(&self, other: &FactorSet) -> bool {
        self.tokens.bit_eq(&other.tokens)
    }
}

/// Latent tokens at time `t` plus the conditioning they are advanced under.
#[derive(Clone, Debug)]
pub struct FlowState {
    /// `[M, d]`.
    pub z: Tensor,
    pub t: f64,
    pub factors: FactorSet,
}

/// Output of the routing head for a batch.
#[derive(Clone, Debug)]
pub struct Routing {
    /// Per-token softmax over factors, `[B, M, N]`.
    pub attn: Tensor,
    /// Gated velocities, `[B, N, M·d]`; row `i` of sample `b` is `v^(i)`.
    pub velocities: Tensor,
}

/// Parameters bound to a tape.
pub struct Network<'a> {
    tape: &'a Tape,
    config: &'a ModelConfig,
    index: &'a HashMap<String, usize>,
    values: Vec<Tensor>,
}

impl<'a> Network<'a> {
    pub(super) fn new(
        tape: &'a Tape,
        config: &'a ModelConfig,
        index: &'a HashMap<String, usize>,
        values: Vec<Tensor>,
    ) -> Self {
        Self {
            tape,
            config,
            index,
            values,
        }
    }

    pub fn tape(&self) -> &'a Tape {
        self.tape
    }

    pub fn config(&self) -> &ModelConfig {
        self.config
    }

    /// Bound tensors in checkpoint order.
    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    fn p(&self, name: &str) -> &Tensor {
        &self.values[self.index[name]]
    }

    fn linear(&self, x: &Tensor, prefix: &str) -> Result<Tensor> {
        let w = self.p(&format!("{prefix}.weight"));
        let b = self.p(&format!("{prefix}.bias"));
        Ok(self.tape.linear(x, w, b)?)
    }

    /// `[B, PIXELS]` images to `[B, N, d_s]` factor tokens.
    pub fn encode_factors(&self, images: &Tensor) -> Result<Tensor> {
        let t = self.tape;
        if images.ndim() != 2 || images.shape()[1] != PIXELS {
            return Err(TensorError::ShapeMismatch {
                op: "encode_factors",
                shapes: vec![images.shape().to_vec()],
            }
            .into());
        }
        let batch = images.shape()[0];
        let h = t.relu(&self.linear(images, "encoder.0")?)?;
        let h = t.relu(&self.linear(&h, "encoder.1")?)?;
        let out = self.linear(&h, "encoder.2")?;
        Ok(t.reshape(&out, &[batch, self.config.factors, self.config.factor_dim])?)
    }

    /// Single-head attention of `[B·M, h]` hidden rows over `[B, N, d_s]`
    /// factor tokens; returns the weights `[B, M, N]` and attended values
    /// `[B·M, h]`.
    pub fn cross_attention(
        &self,
        block: usize,
        hidden: &Tensor,
        factors: &Tensor,
        temperature: f64,
    ) -> Result<(Tensor, Tensor)> {
        let t = self.tape;
        let c = self.config;
        let prefix = format!("velocity.block{block}.attn");
        let q = t.matmul(hidden, self.p(&format!("{prefix}.query")))?;
        let weights = self.attention_weights(&q, factors, self.p(&format!("{prefix}.key")), temperature)?;
        let batch = factors.shape()[0];
        let flat = t.reshape(factors, &[batch * c.factors, c.factor_dim])?;
        let v = t.matmul(&flat, self.p(&format!("{prefix}.value")))?;
        let v = t.reshape(&v, &[batch, c.factors, c.hidden])?;
        let out = t.bmm(&weights, &v)?;
        let out = t.reshape(&out, &[batch * c.tokens, c.hidden])?;
        Ok((weights, out))
    }

    /// `softmax(q kᵀ / (temperature·√d_k))` per latent token, `[B, M, N]`.
    fn attention_weights(
        &self,
        q: &Tensor,
        factors: &Tensor,
        w_key: &Tensor,
        temperature: f64,
    ) -> Result<Tensor> {
        let t = self.tape;
        let c = self.config;
        let batch = factors.shape()[0];
        let flat = t.reshape(factors, &[batch * c.factors, c.factor_dim])?;
        let k = t.matmul(&flat, w_key)?;
        let k = t.reshape(&k, &[batch, c.factors, c.key_dim])?;
        let q = t.reshape(q, &[batch, c.tokens, c.key_dim])?;
        let logits = t.bmm(&q, &t.transpose(&k)?)?;
        let logits = t.scale(&logits, 1.0 / (temperature * (c.key_dim as f64).sqrt()))?;
        Ok(t.softmax_rows(&logits)?)
    }

    /// Aggregate velocity `[B, M, d]` and final hidden features `[B, M, h]`
    /// for latents `z: [B, M, d]` at times `ts` under `factors: [B, N, d_s]`.
    pub fn predict_velocity(&self, z: &Tensor, ts: &[f64], factors: &Tensor) -> Result<(Tensor, Tensor)> {
        let t = self.tape;
        let c = self.config;
        let batch = ts.len();
        let rows = batch * c.tokens;
        let good = z.shape() == [batch, c.tokens, c.channels]
            && factors.shape() == [batch, c.factors, c.factor_dim];
        if !good {
            return Err(TensorError::ShapeMismatch {
                op: "predict_velocity",
                shapes: vec![z.shape().to_vec(), factors.shape().to_vec()],
            }
            .into());
        }
        // Per-token conditioning: time features then a one-hot token position.
        let width = c.time_dim + c.tokens;
        let mut extra = Vec::with_capacity(rows * width);
        for &s in ts {
            let e = time_embed(s, c.time_dim);
            for m in 0..c.tokens {
                extra.extend_from_slice(&e);
                extra.extend((0..c.tokens).map(|j| (j == m) as u8 as f64));
            }
        }
        let extra = Tensor::matrix(rows, width, extra)?;
        let z = t.reshape(z, &[rows, c.channels])?;
        let x = t.concat(&[&z, &extra], 1)?;
        let mut h = self.linear(&x, "velocity.input")?;
        for b in 0..c.blocks {
            let r = t.relu(&self.linear(&h, &format!("velocity.block{b}.mlp.0"))?)?;
            h = t.add(&h, &self.linear(&r, &format!("velocity.block{b}.mlp.1"))?)?;
            let (_, attended) = self.cross_attention(b, &h, factors, 1.0)?;
            h = t.add(&h, &attended)?;
        }
        let v = self.linear(&h, "velocity.output")?;
        Ok((
            t.reshape(&v, &[batch, c.tokens, c.channels])?,
            t.reshape(&h, &[batch, c.tokens, c.hidden])?,
        ))
    }

    /// Routing weights from hidden features `[B, M, h]` and factor tokens,
    /// and the gated per-factor velocities.
    pub fn route_velocity(&self, hidden: &Tensor, factors: &Tensor, v_agg: &Tensor) -> Result<Routing> {
        let t = self.tape;
        let c = self.config;
        let batch = factors.shape()[0];
        let flat = t.reshape(hidden, &[batch * c.tokens, c.hidden])?;
        let q = t.matmul(&flat, self.p("routing.query"))?;
        let attn = self.attention_weights(&q, factors, self.p("routing.key"), 1.0)?;

        // velocities[b, i, m·d + ch] = attn[b, m, i] · v_agg[b, m, ch]
        let per_factor = t.reshape(&t.transpose(&attn)?, &[batch * c.factors * c.tokens, 1])?;
        let gate = t.matmul(&per_factor, &Tensor::full(&[1, c.channels], 1.0))?;
        let gate = t.reshape(&gate, &[batch, c.factors, c.latent_dim()])?;
        let v = t.reshape(v_agg, &[batch, 1, c.latent_dim()])?;
        let copies: Vec<&Tensor> = std::iter::repeat(&v).take(c.factors).collect();
        let v = t.concat(&copies, 1)?;
        let velocities = t.mul(&gate, &v)?;
        Ok(Routing { attn, velocities })
    }

    /// Factor tokens of a single image.
    pub fn factor_set(&self, image: &[f64]) -> Result<FactorSet> {
        let x = Tensor::matrix(1, image.len(), image.to_vec())?;
        let tokens = self.encode_factors(&x)?;
        let c = self.config;
        Ok(FactorSet {
            tokens: self.tape.reshape(&tokens, &[c.factors, c.factor_dim])?,
        })
    }

    /// Velocity of a single flow state, `[M, d]`, and hidden features `[M, h]`.
    pub fn velocity(&self, state: &FlowState) -> Result<(Tensor, Tensor)> {
        let t = self.tape;
        let c = self.config;
        let z = t.reshape(&state.z, &[1, c.tokens, c.channels])?;
        let f = t.reshape(&state.factors.tokens, &[1, c.factors, c.factor_dim])?;
        let (v, h) = self.predict_velocity(&z, &[state.t], &f)?;
        Ok((
            t.reshape(&v, &[c.tokens, c.channels])?,
            t.reshape(&h, &[c.tokens, c.hidden])?,
        ))
    }

    /// Single-sample routing: `[M, N]` weights and the `N` factor
    /// velocities, each `[M, d]`.
    pub fn route(&self, hidden: &Tensor, factors: &FactorSet, v_agg: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let t = self.tape;
        let c = self.config;
        let r = self.route_velocity(
            &t.reshape(hidden, &[1, c.tokens, c.hidden])?,
            &t.reshape(&factors.tokens, &[1, c.factors, c.factor_dim])?,
            &t.reshape(v_agg, &[1, c.tokens, c.channels])?,
        )?;
        let mut parts = Vec::with_capacity(c.factors);
        for i in 0..c.factors {
            let row = t.slice(&r.velocities, 1, i, 1)?;
            parts.push(t.reshape(&row, &[c.tokens, c.channels])?);
        }
        Ok((t.reshape(&r.attn, &[c.tokens, c.factors])?, parts))
    }
}
