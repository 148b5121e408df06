//! Latent-noise watermarking for diffusion models built on homogeneous
//! continuous LWE ("Gaussian pancakes").
//!
//! A key is a secret unit direction `w`. Marking moves each block of the
//! Haar-transformed latent onto the nearest pancake orthogonal to `w`, which
//! keeps the latent distributed as a standard normal to anyone without `w`.
//! Extraction projects the blocks back on `w`, folds the projections onto
//! the unit circle and runs a Rayleigh test.
//!
//! The numerical core is generic over [`Scalar`] (`f32`, `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod attack;
pub mod clwe;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod io;
pub mod latent;
pub mod rayleigh;
pub mod scalar;
pub mod stats;
pub mod watermark;

pub mod cli;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use attack::{
    averaging_attack, covariance_auc, covariance_score, roc_auc, threshold_classifier_accuracy,
    AttackTrialConfig, AucResult,
};
pub use clwe::{
    hclwe_density_unnormalized, hclwe_transform, latent_to_rho, rho, rho_to_latent,
    sample_unit_direction, z_scores, LatticeIndex, UnitConvention,
};
pub use latent::{blocks_of, dwt2, idwt2, unblock, BlockShape, LatentDims};
pub use rayleigh::{rayleigh_test, RayleighResult};
pub use stats::{derive_substream, ks_test, rose_histogram, RandomStream, RoseHistogram};
pub use watermark::{extract_latent, mark_latent, setup, DetectionReport};

pub type ClweParams = clwe::ClweParams<f64>;
pub type ClweParams32 = clwe::ClweParams<f32>;
pub type SecretDirection = clwe::SecretDirection<f64>;
pub type SecretDirection32 = clwe::SecretDirection<f32>;
pub type SampleMatrix = clwe::SampleMatrix<f64>;
pub type SampleMatrix32 = clwe::SampleMatrix<f32>;
pub type LatentTensor = latent::LatentTensor<f64>;
pub type LatentTensor32 = latent::LatentTensor<f32>;
pub type SecretKey = watermark::SecretKey<f64>;
pub type SecretKey32 = watermark::SecretKey<f32>;
