//! Latent tensors, the single-level orthonormal Haar transform and block
//! partitioning into sample matrices.
//!
//! Coefficient layout (per channel, `H × W` input, `h = H/2`, `v = W/2`):
//!
//! ```text
//! +----+----+
//! | LL | LH |   rows 0..h
//! +----+----+
//! | HL | HH |   rows h..H
//! +----+----+
//! ```
//!
//! For an input 2×2 cell `[[a, b], [c, d]]`:
//! `LL = (a+b+c+d)/2`, `LH = (a−b+c−d)/2`, `HL = (a+b−c−d)/2`,
//! `HH = (a−b−c+d)/2`. The map is orthonormal, hence its own transpose
//! is its inverse.

use rayon::prelude::*;

use crate::clwe::{SampleMatrix, UnitConvention};
use crate::error::{invalid_param, Error, Result};
use crate::scalar::Scalar;

/// `(channels, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatentDims {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl LatentDims {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn volume(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
}

impl std::fmt::Display for LatentDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Dense `channels × height × width` tensor in C order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor<T> {
    dims: LatentDims,
    data: Vec<T>,
}

impl<T: Scalar> LatentTensor<T> {
    pub fn new(dims: LatentDims, data: Vec<T>) -> Result<Self> {
        if dims.channels == 0 || dims.height == 0 || dims.width == 0 {
            return Err(invalid_param(format!("tensor dims must be positive, got {dims}")));
        }
        if data.len() != dims.volume() {
            return Err(Error::DimensionMismatch {
                expected: dims.volume(),
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: LatentDims) -> Result<Self> {
        Self::new(dims, vec![T::zero(); dims.volume()])
    }

    /// iid N(0, 1) entries.
    pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R, dims: LatentDims) -> Result<Self> {
        let data = (0..dims.volume())
            .map(|_| T::of(crate::stats::standard_normal(rng)))
            .collect();
        Self::new(dims, data)
    }

    pub fn dims(&self) -> LatentDims {
        self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.dims.height + y) * self.dims.width + x
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(c, y, x)]
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v.f64() * v.f64()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.f64().abs()))
    }

    fn channel_len(&self) -> usize {
        self.dims.height * self.dims.width
    }

    fn check_even(&self) -> Result<()> {
        if !self.dims.height.is_multiple_of(2) {
            return Err(Error::Divisibility {
                axis: "height",
                extent: self.dims.height,
                block: 2,
            });
        }
        if !self.dims.width.is_multiple_of(2) {
            return Err(Error::Divisibility {
                axis: "width",
                extent: self.dims.width,
                block: 2,
            });
        }
        Ok(())
    }
}

/// Single-level orthonormal 2-D Haar analysis, channel by channel.
pub fn dwt2<T: Scalar>(latent: &LatentTensor<T>) -> Result<LatentTensor<T>> {
    latent.check_even()?;
    let LatentDims { height, width, .. } = latent.dims;
    let (h2, w2) = (height / 2, width / 2);
    let half = T::of(0.5);
    let mut out = vec![T::zero(); latent.data.len()];
    out.par_chunks_mut(latent.channel_len())
        .zip(latent.data.par_chunks(latent.channel_len()))
        .for_each(|(dst, src)| {
            for i in 0..h2 {
                for j in 0..w2 {
                    let a = src[2 * i * width + 2 * j];
                    let b = src[2 * i * width + 2 * j + 1];
                    let c = src[(2 * i + 1) * width + 2 * j];
                    let d = src[(2 * i + 1) * width + 2 * j + 1];
                    dst[i * width + j] = (a + b + c + d) * half;
                    dst[i * width + j + w2] = (a - b + c - d) * half;
                    dst[(i + h2) * width + j] = (a + b - c - d) * half;
                    dst[(i + h2) * width + j + w2] = (a - b - c + d) * half;
                }
            }
        });
    LatentTensor::new(latent.dims, out)
}

/// Inverse of [`dwt2`].
pub fn idwt2<T: Scalar>(coeffs: &LatentTensor<T>) -> Result<LatentTensor<T>> {
    coeffs.check_even()?;
    let LatentDims { height, width, .. } = coeffs.dims;
    let (h2, w2) = (height / 2, width / 2);
    let half = T::of(0.5);
    let mut out = vec![T::zero(); coeffs.data.len()];
    out.par_chunks_mut(coeffs.channel_len())
        .zip(coeffs.data.par_chunks(coeffs.channel_len()))
        .for_each(|(dst, src)| {
            for i in 0..h2 {
                for j in 0..w2 {
                    let ll = src[i * width + j];
                    let lh = src[i * width + j + w2];
                    let hl = src[(i + h2) * width + j];
                    let hh = src[(i + h2) * width + j + w2];
                    dst[2 * i * width + 2 * j] = (ll + lh + hl + hh) * half;
                    dst[2 * i * width + 2 * j + 1] = (ll - lh + hl - hh) * half;
                    dst[(2 * i + 1) * width + 2 * j] = (ll + lh - hl - hh) * half;
                    dst[(2 * i + 1) * width + 2 * j + 1] = (ll - lh - hl + hh) * half;
                }
            }
        });
    LatentTensor::new(coeffs.dims, out)
}

/// Block extent along (channel, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockShape {
    pub bc: usize,
    pub bh: usize,
    pub bw: usize,
}

impl BlockShape {
    pub const fn new(bc: usize, bh: usize, bw: usize) -> Self {
        Self { bc, bh, bw }
    }

    /// Samples dimension `bc·bh·bw`.
    pub fn len(&self) -> usize {
        self.bc * self.bh * self.bw
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.bc, self.bh, self.bw]
    }

    /// Check that the block tiles `dims` exactly; returns the block count.
    pub fn tile_count(&self, dims: LatentDims) -> Result<usize> {
        if self.bc == 0 || self.bh == 0 || self.bw == 0 {
            return Err(invalid_param(format!("block extents must be positive, got {self}")));
        }
        for (axis, extent, block) in [
            ("channels", dims.channels, self.bc),
            ("height", dims.height, self.bh),
            ("width", dims.width, self.bw),
        ] {
            if extent % block != 0 {
                return Err(Error::Divisibility {
                    axis,
                    extent,
                    block,
                });
            }
        }
        Ok((dims.channels / self.bc) * (dims.height / self.bh) * (dims.width / self.bw))
    }
}

impl std::fmt::Display for BlockShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.bc, self.bh, self.bw)
    }
}

/// Tensor offsets of every block entry, in sample order.
///
/// Blocks run channel-group major, then row major over spatial tiles;
/// inside a block entries run channel major, then row major.
fn block_offsets(dims: LatentDims, shape: BlockShape) -> Vec<usize> {
    let (gc, gh, gw) = (
        dims.channels / shape.bc,
        dims.height / shape.bh,
        dims.width / shape.bw,
    );
    let mut offsets = Vec::with_capacity(dims.volume());
    for cg in 0..gc {
        for ty in 0..gh {
            for tx in 0..gw {
                for dc in 0..shape.bc {
                    for dy in 0..shape.bh {
                        let c = cg * shape.bc + dc;
                        let y = ty * shape.bh + dy;
                        let row = (c * dims.height + y) * dims.width + tx * shape.bw;
                        offsets.extend(row..row + shape.bw);
                    }
                }
            }
        }
    }
    offsets
}

/// Partition a tensor into `m × n` samples (latent units).
pub fn blocks_of<T: Scalar>(tensor: &LatentTensor<T>, shape: BlockShape) -> Result<SampleMatrix<T>> {
    let m = shape.tile_count(tensor.dims)?;
    let data = block_offsets(tensor.dims, shape)
        .into_iter()
        .map(|o| tensor.data[o])
        .collect();
    SampleMatrix::new(m, shape.len(), data, UnitConvention::LatentUnits)
}

/// Reassemble a tensor from [`blocks_of`] output.
pub fn unblock<T: Scalar>(
    samples: &SampleMatrix<T>,
    shape: BlockShape,
    dims: LatentDims,
) -> Result<LatentTensor<T>> {
    if samples.units() != UnitConvention::LatentUnits {
        return Err(Error::UnitConvention(format!(
            "unblock expects LatentUnits, got {:?}",
            samples.units()
        )));
    }
    let m = shape.tile_count(dims)?;
    if samples.cols() != shape.len() {
        return Err(Error::DimensionMismatch {
            expected: shape.len(),
            found: samples.cols(),
        });
    }
    if samples.rows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: samples.rows(),
        });
    }
    let mut data = vec![T::zero(); dims.volume()];
    for (o, &v) in block_offsets(dims, shape).into_iter().zip(samples.data()) {
        data[o] = v;
    }
    LatentTensor::new(dims, data)
}
