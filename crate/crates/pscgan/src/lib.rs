//! Posterior-sampling conditional WGAN denoiser toolkit: data pipeline,
//! generator/critic models, min-max training with a mean-enforcing MSE
//! penalty, stochastic inference with sample averaging, evaluation metrics
//! (PSNR, FID, patch densities, normality testing), and an analytic Gaussian
//! oracle for verification.

pub mod config;
pub mod data;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod plot;
pub mod rng;
pub mod checkpoint;
pub mod training;

pub use error::{Error, Result};
