//! Run configuration (`--config`), a TOML file validated before any work.
//!
//! ```toml
//! seed = 7
//! trials = 100
//! output_path = "fig5.csv"
//!
//! [covariance]
//! n = [32, 64]
//! m = [1000, 10000, 100000]
//! gamma = [1.0, 2.0, 4.0, 8.0]
//! beta = 0.001
//!
//! [detect_roc]
//! noise_sd = [0.0, 0.1, 0.2, 0.5]
//! gamma = 2.0
//! beta = 0.001
//! block_shape = [2, 4, 4]
//! latent_dims = [4, 64, 64]
//! ```

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::clwe::ClweParams;
use crate::error::{Error, Result};
use crate::latent::{BlockShape, LatentDims};

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output_path: Option<String>,
    pub covariance: Option<CovarianceGrid>,
    pub detect_roc: Option<DetectRocGrid>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceGrid {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub gamma: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectRocGrid {
    pub noise_sd: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_block")]
    pub block_shape: [usize; 3],
    #[serde(default = "default_dims")]
    pub latent_dims: [usize; 3],
}

fn default_beta() -> f64 {
    0.001
}

fn default_gamma() -> f64 {
    2.0
}

fn default_block() -> [usize; 3] {
    [2, 4, 4]
}

fn default_dims() -> [usize; 3] {
    [4, 64, 64]
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(t) = self.trials {
            if t < 2 {
                return bad(format!("trials must be >= 2, got {t}"));
            }
        }
        if let Some(g) = &self.covariance {
            if g.n.is_empty() || g.m.is_empty() || g.gamma.is_empty() {
                return bad("covariance grid needs nonempty n, m and gamma lists".into());
            }
            if g.m.contains(&0) {
                return bad("covariance grid has m = 0".into());
            }
            for &n in &g.n {
                for &gamma in &g.gamma {
                    ClweParams::new(n, gamma, g.beta).map_err(|e| Error::Config(e.to_string()))?;
                }
            }
        }
        if let Some(d) = &self.detect_roc {
            d.validate()?;
        }
        Ok(())
    }
}

impl DetectRocGrid {
    pub fn validate(&self) -> Result<()> {
        if self.noise_sd.is_empty() || self.noise_sd.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("noise_sd must be a nonempty list of values >= 0".into()));
        }
        let [bc, bh, bw] = self.block_shape;
        let block = BlockShape::new(bc, bh, bw);
        ClweParams::new(block.len(), self.gamma, self.beta)
            .map_err(|e| Error::Config(e.to_string()))?;
        let [c, h, w] = self.latent_dims;
        block
            .tile_count(LatentDims::new(c, h, w))
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
