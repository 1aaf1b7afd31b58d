//! Bayesian kernel machine regression (BKMR) and its heteroscedastic
//! extension (HBKMR).
//!
//! The outcome is modeled as `y = h(Z) + Xβ + ε` with
//! `h ~ MVN(0, τK_r)` and `εᵢ ~ N(0, exp(wᵢ'γ))`. With an intercept-only
//! variance design this is ordinary BKMR. The numerical core is generic over
//! the scalar type through [`Real`]; the aliases at the crate root fix it to
//! `f64`.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod model;
pub mod sampler;
pub mod simulate;
mod linalg;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub use data::{Encoding, VarianceSpec};

pub type Dataset = data::Dataset<f64>;
pub type VarianceDesign = data::VarianceDesign<f64>;
pub type QuantileProfile = data::QuantileProfile<f64>;
pub type KernelMatrix = kernel::KernelMatrix<f64>;
pub type CovFactor = kernel::CovFactor<f64>;
pub type ParamState = model::ParamState<f64>;
pub type PriorSpec = model::PriorSpec<f64>;
pub type PosteriorSamples = sampler::PosteriorSamples<f64>;

pub use model::ParamLayout;
pub use sampler::{fit, initialize, McmcConfig, RUpdate};
pub type EffectEstimate = inference::EffectEstimate<f64>;
pub type ResidualReport = diagnostics::ResidualReport<f64>;
pub type Simulated = simulate::Simulated<f64>;
