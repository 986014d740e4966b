//! Mixture-of-experts distributional regression.
//!
//! A response is modeled as a mixture of parametric distributions whose
//! parameters and mixing weights each follow an additive predictor built
//! from intercepts, linear effects, P-splines, lasso-penalized effects and
//! small neural networks. Models are fitted by mini-batch first-order
//! optimization of the penalized negative log-likelihood.

pub mod api;
pub mod data;
pub mod deepnet;
pub mod distributions;
pub mod error;
pub mod formula;
pub mod mixture;
pub mod numerics;
pub mod simulate;
pub mod train;

pub use api::{
    coefficients, fit, inflareg, inflareg_spec, mixdistreg, mixdistreg_spec, oinreg, oinreg_spec, sammer,
    sammer_spec, zinreg, zinreg_spec, zoinreg, zoinreg_spec, CoefGroup, Coefficients, FittedModel,
};
pub use data::Dataset;
pub use deepnet::{Activation, LayerSpec, NetworkDecl};
pub use distributions::{log_density, Family, ResponseTransform};
pub use error::{Error, Result};
pub use formula::{parse_formula, Formula, Smooth, Term, VarRanges};
pub use mixture::{assemble, make_mixture, ComponentSpec, MixtureModel, MixtureSpec, MixtureStats, PredictorId, Segment};
pub use train::{grad_nll, split_validation, train, History, OptimizerConfig, TrainConfig};
