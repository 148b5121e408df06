//! Homogeneous CLWE ("Gaussian pancake") mathematics.
//!
//! Everything here lives in the ρ convention, where the base Gaussian has
//! covariance `I/(2π)` and `ρ_s(x) = exp(−π‖x/s‖²)`. Latent tensors are unit
//! variance, so samples coming from a latent must pass through
//! [`latent_to_rho`] first; [`SampleMatrix`] carries the convention and the
//! operations below refuse the wrong one.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::scalar::{Scalar, SQRT_2PI};
use crate::stats::{standard_normal, std_normal_cdf, std_normal_sf};

/// Pancake geometry `(n, γ, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClweParams<T> {
    n: usize,
    gamma: T,
    beta: T,
}

impl<T: Scalar> ClweParams<T> {
    pub fn new(n: usize, gamma: T, beta: T) -> Result<Self> {
        if n < 2 {
            return Err(invalid_param(format!("dimension n must be >= 2, got {n}")));
        }
        if !(gamma.is_finite() && gamma > T::zero()) {
            return Err(invalid_param(format!("gamma must be positive, got {gamma}")));
        }
        if !(beta.is_finite() && beta > T::zero()) {
            return Err(invalid_param(format!("beta must be positive, got {beta}")));
        }
        if beta >= gamma {
            return Err(invalid_param(format!(
                "beta ({beta}) must be smaller than gamma ({gamma})"
            )));
        }
        Ok(Self { n, gamma, beta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// `γ′ = sqrt(β² + γ²)`.
    pub fn gamma_prime(&self) -> T {
        self.beta.hypot(self.gamma)
    }

    /// The covariance-attack threshold `γ²·exp(−π(β² + γ²))`.
    pub fn covariance_gap(&self) -> f64 {
        let (g, b) = (self.gamma.f64(), self.beta.f64());
        g * g * (-PI * (b * b + g * g)).exp()
    }
}

/// Unit-norm secret direction `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretDirection<T> {
    w: Vec<T>,
}

/// Tolerance on `‖w‖` for directions constructed in memory.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-12;

impl<T: Scalar> SecretDirection<T> {
    /// Normalize an arbitrary nonzero vector.
    pub fn from_vec(v: Vec<T>) -> Result<Self> {
        if v.len() < 2 {
            return Err(invalid_param(format!(
                "direction needs at least 2 components, got {}",
                v.len()
            )));
        }
        check_finite(&v)?;
        let norm = l2_norm(&v);
        if norm == 0.0 {
            return Err(invalid_input("cannot normalize the zero vector"));
        }
        let inv = T::of(1.0 / norm);
        let w: Vec<T> = v.into_iter().map(|x| x * inv).collect();
        Ok(Self { w })
    }

    /// Accept `w` as is when `|‖w‖ − 1| ≤ tolerance`.
    pub fn from_unit(w: Vec<T>, tolerance: f64) -> Result<Self> {
        if w.len() < 2 {
            return Err(invalid_param("direction needs at least 2 components"));
        }
        check_finite(&w)?;
        let norm = l2_norm(&w);
        if (norm - 1.0).abs() > tolerance {
            return Err(invalid_input(format!(
                "direction norm {norm} deviates from 1 by more than {tolerance:e}"
            )));
        }
        Ok(Self { w })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.w)
    }

    pub fn dot(&self, y: &[T]) -> T {
        dot(&self.w, y)
    }
}

/// Scale convention a [`SampleMatrix`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitConvention {
    /// Unit-variance latent coordinates.
    LatentUnits,
    /// ρ convention, base covariance `I/(2π)`.
    RhoUnits,
}

/// `m` samples of dimension `n`, stored row major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    units: UnitConvention,
}

impl<T: Scalar> SampleMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>, units: UnitConvention) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid_param("sample matrix needs at least one row and column"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            data,
            units,
        })
    }

    /// `rows × cols` iid draws from the base Gaussian of `units`.
    pub fn gaussian<R: Rng + ?Sized>(
        rng: &mut R,
        rows: usize,
        cols: usize,
        units: UnitConvention,
    ) -> Result<Self> {
        let scale = match units {
            UnitConvention::LatentUnits => 1.0,
            UnitConvention::RhoUnits => 1.0 / SQRT_2PI,
        };
        let data = (0..rows * cols)
            .map(|_| T::of(scale * standard_normal(rng)))
            .collect();
        Self::new(rows, cols, data, units)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn units(&self) -> UnitConvention {
        self.units
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.cols)
    }

    /// `⟨y_i, v⟩` for every row.
    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok(self.iter_rows().map(|r| dot(r, v)).collect())
    }

    fn expect_units(&self, units: UnitConvention, op: &str) -> Result<()> {
        if self.units != units {
            return Err(Error::UnitConvention(format!(
                "{op} expects {units:?}, got {:?}",
                self.units
            )));
        }
        Ok(())
    }

    fn rescale(mut self, factor: f64, units: UnitConvention) -> Self {
        let f = T::of(factor);
        for x in &mut self.data {
            *x = *x * f;
        }
        self.units = units;
        self
    }
}

/// Multiply every entry by `1/sqrt(2π)`.
pub fn latent_to_rho<T: Scalar>(samples: SampleMatrix<T>) -> Result<SampleMatrix<T>> {
    samples.expect_units(UnitConvention::LatentUnits, "latent_to_rho")?;
    Ok(samples.rescale(1.0 / SQRT_2PI, UnitConvention::RhoUnits))
}

/// Multiply every entry by `sqrt(2π)`.
pub fn rho_to_latent<T: Scalar>(samples: SampleMatrix<T>) -> Result<SampleMatrix<T>> {
    samples.expect_units(UnitConvention::RhoUnits, "rho_to_latent")?;
    Ok(samples.rescale(SQRT_2PI, UnitConvention::LatentUnits))
}

/// `ρ_s(x) = exp(−π‖x/s‖²)`.
pub fn rho<T: Scalar>(x: &[T], s: T) -> Result<T> {
    if !(s.is_finite() && s > T::zero()) {
        return Err(invalid_param(format!("rho width must be positive, got {s}")));
    }
    check_finite(x)?;
    let s = s.f64();
    let sq: f64 = x.iter().map(|v| (v.f64() / s).powi(2)).sum();
    Ok(T::of((-PI * sq).exp()))
}

/// Uniform random unit vector in `R^n` (normalized iid Gaussian).
pub fn sample_unit_direction<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
) -> Result<SecretDirection<T>> {
    if n < 2 {
        return Err(invalid_param(format!("direction dimension must be >= 2, got {n}")));
    }
    loop {
        let v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // Probability zero, but a degenerate draw must not produce NaNs.
        if norm > 1e-150 {
            let w = v.into_iter().map(|x| T::of(x / norm)).collect();
            return Ok(SecretDirection { w });
        }
    }
}

/// `Σ_{k∈Z} ρ_β(k − t)`, truncated to the integers within
/// `max(3, ⌈6β⌉)` of `t`; everything dropped is below `e^{−9π}` relative.
pub fn periodic_gaussian_sum(t: f64, beta: f64) -> f64 {
    let reach = (6.0 * beta).ceil().max(3.0);
    let lo = (t.floor() - reach) as i64;
    let hi = (t.ceil() + reach) as i64;
    (lo..=hi)
        .map(|k| {
            let d = (k as f64 - t) / beta;
            (-PI * d * d).exp()
        })
        .sum()
}

/// Unnormalized hCLWE density `ρ(y) · Σ_k ρ_β(k − γ⟨w, y⟩)`.
pub fn hclwe_density_unnormalized<T: Scalar>(
    y: &[T],
    w: &SecretDirection<T>,
    params: &ClweParams<T>,
) -> Result<T> {
    if y.len() != w.dim() || y.len() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            found: y.len(),
        });
    }
    check_finite(y)?;
    let base = rho(y, T::one())?.f64();
    let t = params.gamma().f64() * w.dot(y).f64();
    Ok(T::of(base * periodic_gaussian_sum(t, params.beta().f64())))
}

/// Closed form of the hCLWE marginal along `w`.
///
/// Completing the square in `ρ(t)·ρ_β(k − γt)` turns the marginal into a
/// Gaussian mixture: component `k` has weight `∝ ρ_γ′(k)`, center
/// `kγ/γ′²` and ρ-width `β/γ′`.
#[derive(Debug, Clone)]
pub struct PancakeMarginal {
    weights: Vec<f64>,
    centers: Vec<f64>,
    width: f64,
}

impl PancakeMarginal {
    pub fn new<T: Scalar>(params: &ClweParams<T>) -> Self {
        let (g, b) = (params.gamma().f64(), params.beta().f64());
        let gp = params.gamma_prime().f64();
        let reach = ((40.0 / PI).sqrt() * gp).ceil() as i64 + 1;
        let mut weights = Vec::new();
        let mut centers = Vec::new();
        for k in -reach..=reach {
            let kf = k as f64;
            weights.push((-PI * kf * kf / (gp * gp)).exp());
            centers.push(kf * g / (gp * gp));
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self {
            weights,
            centers,
            width: b / gp,
        }
    }

    fn component_scale(&self) -> f64 {
        SQRT_2PI / self.width
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let s = self.component_scale();
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| w * std_normal_cdf((t - c) * s))
            .sum()
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let s = self.component_scale();
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| {
                let d = (t - c) / self.width;
                w * s * (-PI * d * d).exp() / SQRT_2PI
            })
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let within = self.width * self.width / (2.0 * PI);
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| w * (c * c + within))
            .sum()
    }
}

/// How the sampler picks the pancake index `k` of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LatticeIndex {
    /// Monotone quantile coupling of `⟨y, w⟩` onto the discrete Gaussian
    /// `ρ_γ′(k)`. Agrees with rounding for all but a thin band of inputs
    /// and makes the output exactly hCLWE distributed.
    #[default]
    DiscreteGaussianQuantile,
    /// `k = round_half_even(γ′⟨y, w⟩)`. Draws `k` from a rounded continuous
    /// Gaussian; the output carries excess variance `≈ 1/(12γ²)` along `w`.
    Nearest,
}

/// Upper tails `P(K > k)` of the discrete Gaussian `ρ_γ′` on `Z`, `k ≥ 0`.
#[derive(Debug, Clone)]
struct DiscreteGaussianTails {
    tails: Vec<f64>,
}

impl DiscreteGaussianTails {
    fn new(gamma_prime: f64) -> Self {
        let g2 = gamma_prime * gamma_prime;
        // ρ_γ′(j) drops below 1e-300 past this point.
        let top = ((690.0 / PI).sqrt() * gamma_prime).ceil() as usize + 1;
        let mass: Vec<f64> = (0..=top)
            .map(|j| (-PI * (j * j) as f64 / g2).exp())
            .collect();
        let total = mass[0] + 2.0 * mass[1..].iter().sum::<f64>();
        let mut tails = vec![0.0; top + 1];
        let mut acc = 0.0;
        for k in (0..top).rev() {
            acc += mass[k + 1];
            tails[k] = acc / total;
        }
        Self { tails }
    }

    /// Quantile of `Φ(x)` in the discrete Gaussian.
    fn index_for(&self, x: f64) -> i64 {
        let (q, sign) = if x >= 0.0 {
            (std_normal_sf(x), 1)
        } else {
            (std_normal_cdf(x), -1)
        };
        let k = self
            .tails
            .iter()
            .position(|&t| t <= q)
            .unwrap_or(self.tails.len());
        sign * k as i64
    }
}

/// Maps base-Gaussian samples onto the hCLWE distribution by moving each
/// sample along `w` to a pancake and adding `ρ_β` noise.
#[derive(Debug, Clone)]
pub struct PancakeSampler<T> {
    params: ClweParams<T>,
    index: LatticeIndex,
    tails: DiscreteGaussianTails,
}

impl<T: Scalar> PancakeSampler<T> {
    pub fn new(params: ClweParams<T>, index: LatticeIndex) -> Self {
        let tails = DiscreteGaussianTails::new(params.gamma_prime().f64());
        Self {
            params,
            index,
            tails,
        }
    }

    pub fn params(&self) -> &ClweParams<T> {
        &self.params
    }

    /// Pancake index for a sample whose projection on `w` is `along`.
    pub fn lattice_index(&self, along: T) -> i64 {
        match self.index {
            LatticeIndex::DiscreteGaussianQuantile => self.tails.index_for(along.f64() * SQRT_2PI),
            LatticeIndex::Nearest => {
                (self.params.gamma_prime() * along).f64().round_ties_even() as i64
            }
        }
    }

    /// Move one row to pancake `k` with in-pancake offset `noise`.
    pub(crate) fn shift_row(&self, row: &mut [T], w: &SecretDirection<T>, noise: T) {
        let along = w.dot(row);
        let k = T::of(self.lattice_index(along) as f64);
        let g = self.params.gamma();
        let gp = self.params.gamma_prime();
        let delta = (noise + k * g / gp) / gp - along;
        for (y, &wi) in row.iter_mut().zip(w.as_slice()) {
            *y = *y + delta * wi;
        }
    }

    /// Transform every row of `samples` (ρ units). One normal draw is
    /// consumed per row, in row order.
    pub fn transform<R: Rng + ?Sized>(
        &self,
        samples: SampleMatrix<T>,
        w: &SecretDirection<T>,
        rng: &mut R,
    ) -> Result<SampleMatrix<T>> {
        samples.expect_units(UnitConvention::RhoUnits, "hclwe_transform")?;
        if samples.cols() != self.params.n() || w.dim() != self.params.n() {
            return Err(Error::DimensionMismatch {
                expected: self.params.n(),
                found: samples.cols(),
            });
        }
        let noise_sd = self.params.beta().f64() / SQRT_2PI;
        let mut samples = samples;
        let cols = samples.cols;
        for row in samples.data.chunks_exact_mut(cols) {
            let noise = T::of(noise_sd * standard_normal(rng));
            self.shift_row(row, w, noise);
        }
        Ok(samples)
    }
}

/// Convert ρ-convention Gaussian samples to hCLWE samples with the default
/// lattice-index rule.
pub fn hclwe_transform<T: Scalar, R: Rng + ?Sized>(
    samples: SampleMatrix<T>,
    w: &SecretDirection<T>,
    params: &ClweParams<T>,
    rng: &mut R,
) -> Result<SampleMatrix<T>> {
    PancakeSampler::new(*params, LatticeIndex::default()).transform(samples, w, rng)
}

/// `z_i = γ⟨y_i, w⟩ mod 1`, mapped into `[0, 1)`.
pub fn z_scores<T: Scalar>(
    samples: &SampleMatrix<T>,
    w: &SecretDirection<T>,
    gamma: T,
) -> Result<Vec<f64>> {
    samples.expect_units(UnitConvention::RhoUnits, "z_scores")?;
    let g = gamma.f64();
    Ok(samples
        .project(w.as_slice())?
        .into_iter()
        .map(|p| wrap_unit(g * p.f64()))
        .collect())
}

/// `x mod 1` in `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x a hair below an integer rounds up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn l2_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.f64() * x.f64()).sum::<f64>().sqrt()
}

fn check_finite<T: Scalar>(v: &[T]) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(invalid_input(format!("non-finite component {bad}")));
    }
    Ok(())
}
