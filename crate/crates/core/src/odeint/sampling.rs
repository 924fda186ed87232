use super::{integrate, OdeError, Result, SolverSpec, Trajectory};
use crate::data::LatentCodec;
use crate::model::{FactorSet, FlowState, ModelParams};
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor};

/// The learned field `(t, z) ↦ v(z, factors, t)` over flattened latents.
pub fn velocity_field<'a>(
    params: &'a ModelParams,
    factors: &'a FactorSet,
) -> impl FnMut(f64, &[f64]) -> Result<Vec<f64>> + 'a {
    let c = *params.config();
    move |t, z| {
        let tape = Tape::new();
        let net = params.frozen(&tape);
        let z = Tensor::matrix(c.tokens, c.channels, z.to_vec()).map_err(|e| OdeError::Field(e.to_string()))?;
        let state = FlowState {
            z,
            t,
            factors: factors.clone(),
        };
        let (v, _) = net.velocity(&state).map_err(|e| OdeError::Field(e.to_string()))?;
        Ok(v.to_vec())
    }
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub prior: Vec<f64>,
    pub latent: Vec<f64>,
    pub image: Vec<f64>,
    pub trajectory: Trajectory,
}

/// Draws `z0 ~ N(0, I)` from `rng`, integrates the conditioned field to
/// `t = 1` and decodes.
pub fn sample(
    params: &ModelParams,
    factors: &FactorSet,
    codec: &LatentCodec,
    solver: &SolverSpec,
    rng: &mut Rng,
) -> Result<Sample> {
    let prior = rng.gaussian_vec(params.config().latent_dim());
    let trajectory = integrate(velocity_field(params, factors), &prior, solver)?;
    let latent = trajectory.last().to_vec();
    let image = codec
        .decode(&latent)
        .map_err(|e| OdeError::Field(e.to_string()))?;
    Ok(Sample {
        prior,
        latent,
        image,
        trajectory,
    })
}

/// Samples under the source image's factor tokens with token `index`
/// replaced by the target image's.
pub fn swap_factors(
    source: &[f64],
    target: &[f64],
    index: usize,
    params: &ModelParams,
    codec: &LatentCodec,
    solver: &SolverSpec,
    rng: &mut Rng,
) -> Result<Sample> {
    let tape = Tape::new();
    let net = params.frozen(&tape);
    let field_err = |e: crate::model::ModelError| OdeError::Field(e.to_string());
    let src = net.factor_set(source).map_err(field_err)?;
    let tgt = net.factor_set(target).map_err(field_err)?;
    let swapped = src.swapped(&tgt, index).map_err(field_err)?;
    sample(params, &swapped, codec, solver, rng)
}
