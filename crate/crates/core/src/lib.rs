//! Factor-conditioned flow matching for disentangled representation learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense f64 tensors and a reverse-mode gradient tape.
//! * [`rng`] and [`data`]: SplitMix64 randomness, the procedural toy scenes
//!   with known generative factors, and the PCA latent codec.
//! * [`model`]: factor encoder, factor-conditioned velocity network and the
//!   output-attention routing head.
//! * [`training`]: flow-matching and orthogonality losses, Adam, and the
//!   training loop.
//! * [`odeint`]: Euler, RK4 and Dormand–Prince integrators, sampling and
//!   factor swapping.
//! * [`metrics`]: FactorVAE score, DCI disentanglement, MIG and the analytic
//!   attribute extractor.

pub mod binio;
pub mod data;
pub mod metrics;
pub mod model;
pub mod odeint;
pub mod ppm;
pub mod rng;
pub mod tensor;
pub mod training;
