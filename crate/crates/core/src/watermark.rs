//! Key generation, marking and extraction on latent tensors.

use rand::Rng;
use serde::Serialize;

use crate::clwe::{
    latent_to_rho, rho_to_latent, sample_unit_direction, z_scores, ClweParams, LatticeIndex,
    PancakeSampler, SecretDirection,
};
use crate::error::{invalid_param, Error, Result};
use crate::latent::{blocks_of, dwt2, idwt2, unblock, BlockShape, LatentDims, LatentTensor};
use crate::rayleigh::rayleigh_test;
use crate::scalar::Scalar;

/// Version of the transform conventions frozen into keys: single-level
/// orthonormal Haar with quadrant packing, and the block order of
/// [`blocks_of`].
pub const FORMAT_VERSION: u32 = 1;

/// Decision threshold on the Rayleigh p-value when none is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Watermarking key: the secret direction plus every convention needed to
/// re-derive the sample rows of a latent.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey<T> {
    direction: SecretDirection<T>,
    params: ClweParams<T>,
    block_shape: BlockShape,
    latent_dims: LatentDims,
    format_version: u32,
}

impl<T: Scalar> SecretKey<T> {
    pub fn new(
        direction: SecretDirection<T>,
        params: ClweParams<T>,
        block_shape: BlockShape,
        latent_dims: LatentDims,
    ) -> Result<Self> {
        if block_shape.len() != params.n() {
            return Err(invalid_param(format!(
                "block {block_shape} holds {} values but n = {}",
                block_shape.len(),
                params.n()
            )));
        }
        if direction.dim() != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                found: direction.dim(),
            });
        }
        if !latent_dims.height.is_multiple_of(2) || !latent_dims.width.is_multiple_of(2) {
            return Err(invalid_param(format!(
                "latent dims {latent_dims} need even height and width"
            )));
        }
        block_shape.tile_count(latent_dims)?;
        Ok(Self {
            direction,
            params,
            block_shape,
            latent_dims,
            format_version: FORMAT_VERSION,
        })
    }

    pub fn direction(&self) -> &SecretDirection<T> {
        &self.direction
    }

    pub fn params(&self) -> &ClweParams<T> {
        &self.params
    }

    pub fn block_shape(&self) -> BlockShape {
        self.block_shape
    }

    pub fn latent_dims(&self) -> LatentDims {
        self.latent_dims
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    /// Number of blocks (samples) per latent.
    pub fn samples_per_latent(&self) -> usize {
        self.block_shape
            .tile_count(self.latent_dims)
            .expect("validated at construction")
    }

    fn check_dims(&self, latent: &LatentTensor<T>) -> Result<()> {
        if latent.dims() != self.latent_dims {
            return Err(invalid_param(format!(
                "latent is {} but the key expects {}",
                latent.dims(),
                self.latent_dims
            )));
        }
        Ok(())
    }
}

/// Generate a fresh key with a uniformly random direction.
pub fn setup<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    params: ClweParams<T>,
    block_shape: BlockShape,
    latent_dims: LatentDims,
) -> Result<SecretKey<T>> {
    // Validate shapes before spending randomness.
    if block_shape.len() != params.n() {
        return Err(invalid_param(format!(
            "block {block_shape} holds {} values but n = {}",
            block_shape.len(),
            params.n()
        )));
    }
    block_shape.tile_count(latent_dims)?;
    let direction = sample_unit_direction(rng, params.n())?;
    SecretKey::new(direction, params, block_shape, latent_dims)
}

/// Embed the key's pancake structure into a unit-variance base latent.
///
/// `dwt2 → blocks → ρ units → pancake transform → latent units → unblock →
/// idwt2`.
pub fn mark_latent<T: Scalar, R: Rng + ?Sized>(
    base: &LatentTensor<T>,
    key: &SecretKey<T>,
    rng: &mut R,
) -> Result<LatentTensor<T>> {
    mark_latent_with(base, key, LatticeIndex::default(), rng)
}

/// [`mark_latent`] with an explicit lattice-index rule.
pub fn mark_latent_with<T: Scalar, R: Rng + ?Sized>(
    base: &LatentTensor<T>,
    key: &SecretKey<T>,
    index: LatticeIndex,
    rng: &mut R,
) -> Result<LatentTensor<T>> {
    key.check_dims(base)?;
    let coeffs = dwt2(base)?;
    let samples = latent_to_rho(blocks_of(&coeffs, key.block_shape)?)?;
    let sampler = PancakeSampler::new(key.params, index);
    let marked = sampler.transform(samples, &key.direction, rng)?;
    let coeffs = unblock(&rho_to_latent(marked)?, key.block_shape, key.latent_dims)?;
    idwt2(&coeffs)
}

/// Outcome of [`extract_latent`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionReport {
    pub m_samples: usize,
    pub mean_resultant: f64,
    /// Rayleigh statistic `Z = m·R̄²`; monotone in the evidence, used as the
    /// detection score for ROC analysis.
    pub statistic: f64,
    pub p_value: f64,
    pub log_p: f64,
    pub threshold: f64,
    pub decision: bool,
}

/// Z-scores of every block of `latent` under `key`.
pub fn latent_z_scores<T: Scalar>(latent: &LatentTensor<T>, key: &SecretKey<T>) -> Result<Vec<f64>> {
    key.check_dims(latent)?;
    let coeffs = dwt2(latent)?;
    let samples = latent_to_rho(blocks_of(&coeffs, key.block_shape)?)?;
    z_scores(&samples, &key.direction, key.params.gamma())
}

/// Test a latent for the key's watermark. Deterministic in `(latent, key)`.
pub fn extract_latent<T: Scalar>(
    latent: &LatentTensor<T>,
    key: &SecretKey<T>,
    threshold: f64,
) -> Result<DetectionReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid_param(format!("threshold {threshold} outside [0, 1]")));
    }
    let z = latent_z_scores(latent, key)?;
    let r = rayleigh_test(&z)?;
    Ok(DetectionReport {
        m_samples: z.len(),
        mean_resultant: r.mean_resultant,
        statistic: r.statistic,
        p_value: r.p_value,
        log_p: r.log_p,
        threshold,
        decision: r.p_value < threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{derive_substream, seeded_stream};

    fn standard_key(seed: u64) -> SecretKey<f64> {
        let params = ClweParams::new(32, 2.0, 0.001).unwrap();
        setup(
            &mut seeded_stream(seed),
            params,
            BlockShape::new(2, 4, 4),
            LatentDims::new(4, 64, 64),
        )
        .unwrap()
    }

    #[test]
    fn setup_standard_configuration() {
        let k = standard_key(1);
        assert!((k.direction().norm() - 1.0).abs() <= 1e-12);
        assert_eq!(k.samples_per_latent(), 512);
        assert_eq!(k.format_version(), FORMAT_VERSION);
        assert_eq!(k, standard_key(1));
        assert_ne!(k, standard_key(2));
    }

    #[test]
    fn setup_rejects_bad_shapes() {
        let mut rng = seeded_stream(0);
        let p48 = ClweParams::new(48, 2.0f64, 0.001).unwrap();
        let err = setup(&mut rng, p48, BlockShape::new(3, 4, 4), LatentDims::new(4, 64, 64));
        assert!(matches!(err, Err(Error::Divisibility { axis: "channels", .. })));
        let p32 = ClweParams::new(32, 2.0f64, 0.001).unwrap();
        assert!(setup(&mut rng, p32, BlockShape::new(2, 2, 4), LatentDims::new(4, 64, 64)).is_err());
        assert!(setup(&mut rng, p32, BlockShape::new(2, 4, 4), LatentDims::new(4, 63, 64)).is_err());
    }

    #[test]
    fn mark_then_extract() {
        let key = standard_key(3);
        let mut rng = seeded_stream(4);
        let base = LatentTensor::standard_normal(&mut rng, key.latent_dims()).unwrap();
        let marked = mark_latent(&base, &key, &mut rng).unwrap();
        let r = extract_latent(&marked, &key, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.m_samples, 512);
        assert!(r.decision);
        assert!(r.p_value < 1e-50, "{r:?}");
        let clean = extract_latent(&base, &key, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(clean, extract_latent(&base, &key, DEFAULT_THRESHOLD).unwrap());
        assert_eq!(clean.decision, clean.p_value < DEFAULT_THRESHOLD);
    }

    #[test]
    fn mark_preserves_orthogonal_coefficients() {
        let key = standard_key(5);
        let mut rng = seeded_stream(6);
        let base = LatentTensor::standard_normal(&mut rng, key.latent_dims()).unwrap();
        let marked = mark_latent(&base, &key, &mut rng).unwrap();
        let a = blocks_of(&dwt2(&base).unwrap(), key.block_shape()).unwrap();
        let b = blocks_of(&dwt2(&marked).unwrap(), key.block_shape()).unwrap();
        let w = key.direction().as_slice();
        for (ra, rb) in a.iter_rows().zip(b.iter_rows()) {
            let pa = key.direction().dot(ra);
            let pb = key.direction().dot(rb);
            for i in 0..w.len() {
                assert!(((ra[i] - pa * w[i]) - (rb[i] - pb * w[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dims_must_match_key() {
        let key = standard_key(1);
        let x = LatentTensor::<f64>::zeros(LatentDims::new(4, 32, 32)).unwrap();
        assert!(mark_latent(&x, &key, &mut seeded_stream(0)).is_err());
        assert!(extract_latent(&x, &key, 0.01).is_err());
        let y = LatentTensor::<f64>::zeros(key.latent_dims()).unwrap();
        assert!(extract_latent(&y, &key, 1.5).is_err());
    }

    #[test]
    fn mark_is_reproducible() {
        let key = standard_key(9);
        let base = LatentTensor::standard_normal(&mut seeded_stream(1), key.latent_dims()).unwrap();
        let a = mark_latent(&base, &key, &mut derive_substream(2, 0)).unwrap();
        let b = mark_latent(&base, &key, &mut derive_substream(2, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn marking_matches_direct_sample_pipeline() {
        // The transform on blocks commutes with the wavelet: extracting the
        // marked coefficient blocks equals transforming the base blocks.
        let key = standard_key(11);
        let base = LatentTensor::standard_normal(&mut seeded_stream(12), key.latent_dims()).unwrap();
        let marked = mark_latent(&base, &key, &mut derive_substream(13, 0)).unwrap();
        let direct = {
            let s = latent_to_rho(blocks_of(&dwt2(&base).unwrap(), key.block_shape()).unwrap()).unwrap();
            PancakeSampler::new(*key.params(), LatticeIndex::default())
                .transform(s, key.direction(), &mut derive_substream(13, 0))
                .unwrap()
        };
        let got = latent_to_rho(blocks_of(&dwt2(&marked).unwrap(), key.block_shape()).unwrap()).unwrap();
        for (a, b) in got.data().iter().zip(direct.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
