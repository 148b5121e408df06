//! Floating point abstraction shared by the transform and CLWE code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the latent math is generic over (`f32` and `f64`).
///
/// Random draws and the statistical machinery run in `f64`; values are
/// narrowed into `Self` at the edges so both widths consume identical
/// random streams.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Dtype tag used in NPY headers.
    const NPY_DESCR: &'static str;

    /// Lossy conversion from an `f64` literal or intermediate.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    /// Widen to `f64`.
    fn f64(self) -> f64 {
        self.to_f64().expect("Scalar always widens to f64")
    }

    fn to_le_bytes_vec(self, out: &mut Vec<u8>);

    fn from_le_slice(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const NPY_DESCR: &'static str = "<f4";

    fn to_le_bytes_vec(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le_slice(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte slice"))
    }
}

impl Scalar for f64 {
    const NPY_DESCR: &'static str = "<f8";

    fn to_le_bytes_vec(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le_slice(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte slice"))
    }
}

/// `sqrt(2π)`, the scale between unit-variance latents and the ρ convention.
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
