//! Distinguishing attacks used to probe undetectability: the covariance
//! eigenvalue attack with ROC and fixed-threshold evaluation, and the
//! averaging (steganographic) attack on marked/unmarked latent pairs.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::clwe::{
    hclwe_transform, rho_to_latent, sample_unit_direction, ClweParams, SampleMatrix,
    UnitConvention,
};
use crate::eigen::SymmetricMatrix;
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::latent::{blocks_of, dwt2, BlockShape, LatentDims, LatentTensor};
use crate::scalar::Scalar;
use crate::stats::derive_substream;
use crate::watermark::{mark_latent, setup};

/// One grid point of a covariance-attack simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackTrialConfig {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
}

impl AttackTrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(invalid_param(format!("trials must be >= 2, got {}", self.trials)));
        }
        if self.m == 0 {
            return Err(invalid_param("m must be positive"));
        }
        ClweParams::new(self.n, self.gamma, self.beta)?;
        Ok(())
    }

    fn params(&self) -> ClweParams<f64> {
        ClweParams::new(self.n, self.gamma, self.beta).expect("validated")
    }
}

/// ROC AUC of positive against negative scores, keeping the scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucResult {
    pub auc: f64,
    pub trials: usize,
    pub scores_positive: Vec<f64>,
    pub scores_negative: Vec<f64>,
}

impl AucResult {
    pub fn from_scores(scores_positive: Vec<f64>, scores_negative: Vec<f64>) -> Result<Self> {
        let auc = roc_auc(&scores_positive, &scores_negative)?;
        Ok(Self {
            auc,
            trials: scores_positive.len(),
            scores_positive,
            scores_negative,
        })
    }
}

/// Mann–Whitney AUC: `P(pos > neg) + ½ P(pos = neg)`.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(invalid_input("roc_auc needs nonempty positive and negative scores"));
    }
    if pos.iter().chain(neg).any(|v| v.is_nan()) {
        return Err(invalid_input("NaN score"));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = all[i..j].iter().filter(|e| e.1).count();
        rank_sum += avg_rank * tied_pos as f64;
        i = j;
    }
    let (p, q) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Covariance score `max_i |μ_i − 1/(2π)|` over the eigenvalues of
/// `AᵀA/(2πm)` for latent-unit samples `A`.
pub fn covariance_score<T: Scalar>(samples: &SampleMatrix<T>) -> Result<f64> {
    if samples.units() != UnitConvention::LatentUnits {
        return Err(Error::UnitConvention(
            "covariance_score expects LatentUnits samples".into(),
        ));
    }
    let (m, n) = (samples.rows(), samples.cols());
    if m < n {
        warn!("covariance score from {m} samples of dimension {n}; the estimate is rank deficient");
    }
    let mut gram = vec![0.0f64; n * n];
    let mut row = vec![0.0f64; n];
    for r in samples.iter_rows() {
        for (dst, v) in row.iter_mut().zip(r) {
            *dst = v.f64();
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("non-finite entry in covariance input"));
        }
        for i in 0..n {
            let ri = row[i];
            let dst = &mut gram[i * n..(i + 1) * n];
            for j in i..n {
                dst[j] += ri * row[j];
            }
        }
    }
    let scale = 1.0 / (2.0 * PI * m as f64);
    gram.iter_mut().for_each(|g| *g *= scale);
    let eig = SymmetricMatrix::from_upper(n, gram).eigenvalues();
    let centre = 1.0 / (2.0 * PI);
    Ok(eig.iter().fold(0.0f64, |acc, mu| acc.max((mu - centre).abs())))
}

/// `m × n` hCLWE samples in latent units for a fresh random direction.
pub fn clwe_attack_samples<R: rand::Rng + ?Sized>(
    params: &ClweParams<f64>,
    m: usize,
    rng: &mut R,
) -> Result<SampleMatrix<f64>> {
    let w = sample_unit_direction(rng, params.n())?;
    let base = SampleMatrix::gaussian(rng, m, params.n(), UnitConvention::RhoUnits)?;
    rho_to_latent(hclwe_transform(base, &w, params, rng)?)
}

/// Covariance scores of `trials` hCLWE draws and `trials` Gaussian draws.
///
/// Trial `t` uses substreams `2t` (hCLWE) and `2t + 1` (Gaussian) of the
/// seed, so results do not depend on thread scheduling.
pub fn covariance_trial_scores(cfg: &AttackTrialConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let params = cfg.params();
    let scored: Result<Vec<(f64, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let t = t as u64;
            let mut rng = derive_substream(cfg.seed, 2 * t);
            let pos = covariance_score(&clwe_attack_samples(&params, cfg.m, &mut rng)?)?;
            let mut rng = derive_substream(cfg.seed, 2 * t + 1);
            let normal: SampleMatrix<f64> =
                SampleMatrix::gaussian(&mut rng, cfg.m, cfg.n, UnitConvention::LatentUnits)?;
            Ok((pos, covariance_score(&normal)?))
        })
        .collect();
    Ok(scored?.into_iter().unzip())
}

/// ROC AUC of the covariance attack at one grid point.
pub fn covariance_auc(cfg: &AttackTrialConfig) -> Result<AucResult> {
    let (pos, neg) = covariance_trial_scores(cfg)?;
    AucResult::from_scores(pos, neg)
}

/// Balanced accuracy of the rule `score > threshold ⇒ hCLWE`.
pub fn threshold_accuracy(pos: &[f64], neg: &[f64], threshold: f64) -> f64 {
    let tp = pos.iter().filter(|&&s| s > threshold).count() as f64;
    let tn = neg.iter().filter(|&&s| s <= threshold).count() as f64;
    0.5 * (tp / pos.len() as f64 + tn / neg.len() as f64)
}

/// Accuracy of thresholding the covariance score at `γ²·exp(−π(β² + γ²))`.
pub fn threshold_classifier_accuracy(cfg: &AttackTrialConfig) -> Result<f64> {
    let (pos, neg) = covariance_trial_scores(cfg)?;
    Ok(threshold_accuracy(&pos, &neg, cfg.params().covariance_gap()))
}

/// Covariance attack against watermarked latents as an attacker would see
/// them: the DWT blocks of `images` latents marked with one key are pooled
/// into a single sample matrix (`images · m_per_image` rows). Negatives pool
/// the blocks of as many unmarked latents.
pub fn marked_latent_covariance_auc(
    params: ClweParams<f64>,
    block_shape: BlockShape,
    dims: LatentDims,
    images: usize,
    trials: usize,
    seed: u64,
) -> Result<AucResult> {
    if trials < 2 || images == 0 {
        return Err(invalid_param("need at least 2 trials and 1 image per trial"));
    }
    let pooled = |latents: &[LatentTensor<f64>]| -> Result<f64> {
        let mut data = Vec::new();
        for l in latents {
            data.extend_from_slice(blocks_of(&dwt2(l)?, block_shape)?.data());
        }
        let rows = data.len() / block_shape.len();
        covariance_score(&SampleMatrix::new(
            rows,
            block_shape.len(),
            data,
            UnitConvention::LatentUnits,
        )?)
    };
    let scored: Result<Vec<(f64, f64)>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = derive_substream(seed, 2 * t);
            let key = setup(&mut rng, params, block_shape, dims)?;
            let marked = (0..images)
                .map(|_| {
                    let base = LatentTensor::standard_normal(&mut rng, dims)?;
                    mark_latent(&base, &key, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rng = derive_substream(seed, 2 * t + 1);
            let clean = (0..images)
                .map(|_| LatentTensor::standard_normal(&mut rng, dims))
                .collect::<Result<Vec<_>>>()?;
            Ok((pooled(&marked)?, pooled(&clean)?))
        })
        .collect();
    let (pos, neg) = scored?.into_iter().unzip();
    AucResult::from_scores(pos, neg)
}

/// Output of [`averaging_attack`].
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingOutcome<T> {
    /// Elementwise mean of `marked_i − unmarked_i`.
    pub mean_difference: LatentTensor<T>,
    /// Per-entry standard error of that mean.
    pub standard_error: LatentTensor<T>,
    /// `marked_i − mean_difference`.
    pub cleaned: Vec<LatentTensor<T>>,
}

impl<T: Scalar> AveragingOutcome<T> {
    /// Largest `|mean| / standard error` over all entries.
    pub fn max_abs_t(&self) -> f64 {
        self.mean_difference
            .data()
            .iter()
            .zip(self.standard_error.data())
            .map(|(m, se)| {
                let (m, se) = (m.f64().abs(), se.f64());
                if se == 0.0 {
                    if m == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    m / se
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Estimate a fixed watermark pattern as the mean marked-minus-unmarked
/// difference and subtract it from every marked latent.
pub fn averaging_attack<T: Scalar>(
    marked: &[LatentTensor<T>],
    unmarked: &[LatentTensor<T>],
) -> Result<AveragingOutcome<T>> {
    if marked.len() != unmarked.len() {
        return Err(Error::DimensionMismatch {
            expected: marked.len(),
            found: unmarked.len(),
        });
    }
    let Some(first) = marked.first() else {
        return Err(invalid_input("averaging attack needs at least one pair"));
    };
    let dims = first.dims();
    if let Some(bad) = marked.iter().chain(unmarked).find(|t| t.dims() != dims) {
        return Err(invalid_input(format!(
            "pair tensor is {} but the first marked tensor is {dims}",
            bad.dims()
        )));
    }
    let count = marked.len() as f64;
    let volume = dims.volume();
    let mut sum = vec![0.0f64; volume];
    let mut sum_sq = vec![0.0f64; volume];
    for (a, b) in marked.iter().zip(unmarked) {
        for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
            let d = x.f64() - y.f64();
            sum[i] += d;
            sum_sq[i] += d * d;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
    let se: Vec<f64> = if marked.len() > 1 {
        sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, mu)| {
                let var = ((sq - count * mu * mu) / (count - 1.0)).max(0.0);
                (var / count).sqrt()
            })
            .collect()
    } else {
        vec![0.0; volume]
    };
    let mean_t: Vec<T> = mean.iter().map(|&v| T::of(v)).collect();
    let cleaned = marked
        .iter()
        .map(|a| {
            let data = a.data().iter().zip(&mean_t).map(|(&x, &m)| x - m).collect();
            LatentTensor::new(dims, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragingOutcome {
        mean_difference: LatentTensor::new(dims, mean_t)?,
        standard_error: LatentTensor::new(dims, se.into_iter().map(T::of).collect())?,
        cleaned,
    })
}
