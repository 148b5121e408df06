//! Key files: a TOML document with a fixed field order.
//!
//! ```toml
//! format_version = 1
//! gamma = 2.0
//! beta = 0.001
//! block_shape = [2, 4, 4]
//! latent_dims = [4, 64, 64]
//! direction = [0.12, -0.31, ...]
//! threshold = 0.01
//! ```
//!
//! Floats are written in shortest round-trip form, so a written key reloads
//! bit for bit. Unknown fields are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clwe::{ClweParams, SecretDirection};
use crate::error::{Error, Result};
use crate::latent::{BlockShape, LatentDims};
use crate::watermark::{SecretKey, FORMAT_VERSION};

/// `|‖w‖ − 1|` accepted when loading a key.
pub const LOAD_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyFile {
    pub format_version: u32,
    pub gamma: f64,
    pub beta: f64,
    pub block_shape: [usize; 3],
    pub latent_dims: [usize; 3],
    pub direction: Vec<f64>,
    pub threshold: f64,
}

impl KeyFile {
    pub fn from_key(key: &SecretKey<f64>, threshold: f64) -> Self {
        Self {
            format_version: key.format_version(),
            gamma: key.params().gamma(),
            beta: key.params().beta(),
            block_shape: key.block_shape().as_array(),
            latent_dims: key.latent_dims().as_array(),
            direction: key.direction().as_slice().to_vec(),
            threshold,
        }
    }

    /// Validate every key invariant and build the in-memory key.
    pub fn into_key(self) -> Result<(SecretKey<f64>, f64)> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Key(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Key(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        let wrap = |e: Error| Error::Key(e.to_string());
        let params = ClweParams::new(self.direction.len(), self.gamma, self.beta).map_err(wrap)?;
        let direction =
            SecretDirection::from_unit(self.direction, LOAD_NORM_TOLERANCE).map_err(wrap)?;
        let [bc, bh, bw] = self.block_shape;
        let [c, h, w] = self.latent_dims;
        let key = SecretKey::new(
            direction,
            params,
            BlockShape::new(bc, bh, bw),
            LatentDims::new(c, h, w),
        )
        .map_err(wrap)?;
        Ok((key, self.threshold))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("key file fields are plain TOML values")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Key(e.to_string()))
    }
}

pub fn write_key(
    key: &SecretKey<f64>,
    threshold: f64,
    path: impl AsRef<Path>,
    force: bool,
) -> Result<()> {
    let path = path.as_ref();
    super::guard_overwrite(path, force)?;
    fs::write(path, KeyFile::from_key(key, threshold).to_toml())?;
    Ok(())
}

/// Load a key and its stored decision threshold.
pub fn read_key(path: impl AsRef<Path>) -> Result<(SecretKey<f64>, f64)> {
    KeyFile::from_toml(&fs::read_to_string(path)?)?.into_key()
}
