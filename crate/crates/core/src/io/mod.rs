//! File formats: NPY tensors, key files, run configuration and CSV tables.

pub mod config;
pub mod key;
pub mod npy;
pub mod table;

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn guard_overwrite(path: &Path, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    Ok(())
}
