//! Seeded simulations behind the CLI's `simulate` and `rose` commands and the
//! acceptance suite.

use rand::Rng;
use rayon::prelude::*;

use crate::attack::AucResult;
use crate::clwe::{
    hclwe_transform, sample_unit_direction, z_scores, ClweParams, SampleMatrix, UnitConvention,
};
use crate::error::{invalid_param, Result};
use crate::latent::{BlockShape, LatentDims, LatentTensor};
use crate::scalar::SQRT_2PI;
use crate::stats::{derive_substream, standard_normal};
use crate::watermark::{extract_latent, mark_latent, setup};

/// Sample source for a z-score simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZScoreSource {
    /// Base Gaussian (no signal).
    Normal,
    /// hCLWE samples.
    Pancakes,
    /// hCLWE samples plus isotropic Gaussian noise. `width` is a ρ-width on
    /// the pancake scale, the same units as β: each coordinate receives
    /// noise of ρ-width `width/γ`, so z-scores are blurred by ρ-width
    /// `width`.
    NoisyPancakes { width: f64 },
}

/// z-scores of `count` samples from `source` against a fresh random
/// direction.
pub fn simulate_z_scores<R: Rng + ?Sized>(
    source: ZScoreSource,
    params: &ClweParams<f64>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = sample_unit_direction(rng, params.n())?;
    let base = SampleMatrix::gaussian(rng, count, params.n(), UnitConvention::RhoUnits)?;
    let samples = match source {
        ZScoreSource::Normal => base,
        ZScoreSource::Pancakes => hclwe_transform(base, &w, params, rng)?,
        ZScoreSource::NoisyPancakes { width } => {
            if !(width.is_finite() && width >= 0.0) {
                return Err(invalid_param(format!("noise width must be >= 0, got {width}")));
            }
            let clwe = hclwe_transform(base, &w, params, rng)?;
            let sd = width / params.gamma() / SQRT_2PI;
            let data = clwe
                .data()
                .iter()
                .map(|&v| v + sd * standard_normal(rng))
                .collect();
            SampleMatrix::new(count, params.n(), data, UnitConvention::RhoUnits)?
        }
    };
    z_scores(&samples, &w, params.gamma())
}

/// Latent-level detection experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSimConfig {
    pub params: ClweParams<f64>,
    pub block_shape: BlockShape,
    pub latent_dims: LatentDims,
    /// Standard deviation of additive N(0, σ²) noise on every latent entry.
    pub noise_sd: f64,
    pub trials: usize,
    pub seed: u64,
}

fn add_noise<R: Rng + ?Sized>(t: &mut LatentTensor<f64>, sd: f64, rng: &mut R) {
    if sd > 0.0 {
        for v in t.data_mut() {
            *v += sd * standard_normal(rng);
        }
    }
}

/// ROC AUC of the Rayleigh statistic on marked versus unmarked latents.
///
/// Trial `t` draws a fresh key from substream `3t`, marks a latent from
/// substream `3t + 1`, and scores an independent unmarked latent from
/// substream `3t + 2` against the same key.
pub fn detection_auc(cfg: &DetectionSimConfig) -> Result<AucResult> {
    if cfg.trials < 2 {
        return Err(invalid_param("detection simulation needs at least 2 trials"));
    }
    if !(cfg.noise_sd.is_finite() && cfg.noise_sd >= 0.0) {
        return Err(invalid_param(format!("noise_sd must be >= 0, got {}", cfg.noise_sd)));
    }
    let scored: Result<Vec<(f64, f64)>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let key = setup(
                &mut derive_substream(cfg.seed, 3 * t),
                cfg.params,
                cfg.block_shape,
                cfg.latent_dims,
            )?;
            let mut rng = derive_substream(cfg.seed, 3 * t + 1);
            let base = LatentTensor::standard_normal(&mut rng, cfg.latent_dims)?;
            let mut marked = mark_latent(&base, &key, &mut rng)?;
            add_noise(&mut marked, cfg.noise_sd, &mut rng);

            let mut rng = derive_substream(cfg.seed, 3 * t + 2);
            let mut clean = LatentTensor::standard_normal(&mut rng, cfg.latent_dims)?;
            add_noise(&mut clean, cfg.noise_sd, &mut rng);

            Ok((
                extract_latent(&marked, &key, 0.01)?.statistic,
                extract_latent(&clean, &key, 0.01)?.statistic,
            ))
        })
        .collect();
    let (pos, neg) = scored?.into_iter().unzip();
    AucResult::from_scores(pos, neg)
}
