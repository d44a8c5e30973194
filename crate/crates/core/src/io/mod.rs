//! On-disk formats: the weight container, float grids (maps, depth,
//! occupancy), PNG images, OBJ/MTL meshes, the scene configuration and the
//! run manifest.

mod binary;
mod config;
mod grids;
mod image;
mod manifest;
mod obj;
mod weights;

pub use config::{CameraConfig, LossConfig, MapsConfig, ModelSize, SceneConfig, SurfacesConfig};
pub use grids::{
    decode_depth, decode_grid, decode_maps, encode_depth, encode_grid, encode_maps, load_depth, load_grid, load_maps,
    save_depth, save_grid, save_maps, DEPTH_MAGIC, GRID_MAGIC, MAPS_MAGIC,
};
pub use image::{contact_sheet, load_png, save_png, save_rgba_png, to_rgb8};
pub use manifest::{sha256_hex, Manifest, OutputEntry};
pub use obj::{save_obj, save_textured_obj};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, DTYPE_F32, WEIGHTS_MAGIC};

use std::path::Path;

use crate::error::{Error, Result};

/// Format version written by every container in this module.
pub const FORMAT_VERSION: u32 = 1;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "GRAMHD_THREADS";

/// Sizes the global thread pool from `GRAMHD_THREADS` when set. Returns the
/// requested count, or `None` when the variable is absent.
pub fn init_threads_from_env() -> Result<Option<usize>> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size thread pool: {e}")))?;
    Ok(Some(n))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes`, creating missing parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
