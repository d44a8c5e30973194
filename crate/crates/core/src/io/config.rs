//! TOML scene configuration.
//!
//! ```toml
//! seed = 7
//! [model]
//! size = "tiny"
//! [surfaces]
//! count = 24
//! [maps]
//! lr_size = 32
//! sr_factor = 4
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::sha256_hex;
use super::read_file;
use crate::error::{Error, Result};
use crate::geometry::{
    SurfaceSet, DEFAULT_CENTER, DEFAULT_N_SURFACES, DEFAULT_PLANE_Z, DEFAULT_RADIUS_MAX, DEFAULT_RADIUS_MIN,
    DEFAULT_T_FAR, DEFAULT_T_NEAR,
};
use crate::gridding::{GridOptions, DEFAULT_BG_HALF_WIDTH, DEFAULT_FG_HALF_WIDTH, DEFAULT_LR_SIZE};
use crate::losses::{ConsistencyWeights, DEFAULT_R1_WEIGHT};
use crate::model::ModelConfig;
use crate::render::{Camera, DEFAULT_CAMERA_FAR, DEFAULT_CAMERA_NEAR, DEFAULT_FOV_DEG, DEFAULT_ORBIT_RADIUS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelSize {
    #[default]
    Standard,
    Tiny,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub size: ModelSize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { size: ModelSize::Standard }
    }
}

/// Sphere radii are `linspace(radius_min, radius_max, count - 1)` unless
/// `radii` lists them explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfacesConfig {
    pub count: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    pub plane_z: f64,
}

impl Default for SurfacesConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_N_SURFACES,
            radius_min: DEFAULT_RADIUS_MIN,
            radius_max: DEFAULT_RADIUS_MAX,
            radii: None,
            plane_z: DEFAULT_PLANE_Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub orbit_radius: f64,
    pub fov_deg: f64,
    pub height: usize,
    pub width: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        let c = Camera::default();
        Self {
            yaw: c.yaw,
            pitch: c.pitch,
            roll: c.roll,
            orbit_radius: DEFAULT_ORBIT_RADIUS,
            fov_deg: DEFAULT_FOV_DEG,
            height: c.height,
            width: c.width,
            near: DEFAULT_CAMERA_NEAR,
            far: DEFAULT_CAMERA_FAR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapsConfig {
    pub lr_size: usize,
    pub sr_factor: usize,
    pub fg_half_width: f64,
    pub bg_half_width: f64,
    pub t_near: f64,
    pub t_far: f64,
}

impl Default for MapsConfig {
    fn default() -> Self {
        Self {
            lr_size: DEFAULT_LR_SIZE,
            sr_factor: 16,
            fg_half_width: DEFAULT_FG_HALF_WIDTH,
            bg_half_width: DEFAULT_BG_HALF_WIDTH,
            t_near: DEFAULT_T_NEAR,
            t_far: DEFAULT_T_FAR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub image_weight: f64,
    pub maps_weight: f64,
    pub r1_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        let w = ConsistencyWeights::default();
        Self {
            image_weight: w.image,
            maps_weight: w.maps,
            r1_weight: DEFAULT_R1_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub surfaces: SurfacesConfig,
    pub camera: CameraConfig,
    pub maps: MapsConfig,
    pub loss: LossConfig,
}

/// 1-based line of `key` inside `[table]` (top level when `table` is empty).
fn line_of(src: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.split(']').next()) {
            current = name.trim().to_string();
            continue;
        }
        let k = t.split('=').next().unwrap_or("").trim();
        if current == table && k == key {
            return Some(i + 1);
        }
    }
    None
}

impl SceneConfig {
    /// Parses and validates. Errors name the offending field and, when it
    /// appears in `src`, its line.
    pub fn parse(src: &str) -> Result<Self> {
        let cfg: SceneConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        if let Err((table, key, msg)) = cfg.check() {
            let field = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
            let at = line_of(src, table, key).map(|l| format!("line {l}, ")).unwrap_or_default();
            return Err(Error::Config(format!("{at}field `{field}`: {msg}")));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let src = std::str::from_utf8(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(src).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
            .map_err(|(table, key, msg)| Error::Config(format!("field `{table}.{key}`: {msg}")))
    }

    fn check(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let s = &self.surfaces;
        if s.count < 2 {
            return Err(("surfaces", "count", format!("need at least 2 surfaces, got {}", s.count)));
        }
        match &s.radii {
            Some(r) => {
                if r.len() + 1 != s.count {
                    return Err(("surfaces", "radii", format!("{} radii for {} surfaces", r.len(), s.count)));
                }
                if r.iter().any(|&v| !(v > 0.0 && v.is_finite())) || r.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(("surfaces", "radii", "radii must be positive and strictly increasing".into()));
                }
            }
            None => {
                if !(s.radius_min > 0.0) {
                    return Err(("surfaces", "radius_min", format!("must be positive, got {}", s.radius_min)));
                }
                if s.count > 2 && !(s.radius_max > s.radius_min) {
                    return Err(("surfaces", "radius_max", "must exceed radius_min".into()));
                }
            }
        }
        if !s.plane_z.is_finite() {
            return Err(("surfaces", "plane_z", "must be finite".into()));
        }
        let c = &self.camera;
        for (key, v) in [("yaw", c.yaw), ("pitch", c.pitch), ("roll", c.roll)] {
            if !v.is_finite() {
                return Err(("camera", key, "must be finite".into()));
            }
        }
        if !(c.orbit_radius > 0.0 && c.orbit_radius.is_finite()) {
            return Err(("camera", "orbit_radius", "must be positive".into()));
        }
        if !(c.fov_deg > 0.0 && c.fov_deg < 120.0) {
            return Err(("camera", "fov_deg", format!("must be in (0, 120), got {}", c.fov_deg)));
        }
        if c.height == 0 {
            return Err(("camera", "height", "must be positive".into()));
        }
        if c.width == 0 {
            return Err(("camera", "width", "must be positive".into()));
        }
        if !(c.near > 0.0 && c.far > c.near) {
            return Err(("camera", "far", "need 0 < near < far".into()));
        }
        let m = &self.maps;
        if m.lr_size < 2 {
            return Err(("maps", "lr_size", format!("must be at least 2, got {}", m.lr_size)));
        }
        if !(m.sr_factor.is_power_of_two() && m.sr_factor >= 2) {
            return Err(("maps", "sr_factor", format!("must be a power of two >= 2, got {}", m.sr_factor)));
        }
        if !(m.fg_half_width > 0.0) {
            return Err(("maps", "fg_half_width", "must be positive".into()));
        }
        if !(m.bg_half_width > 0.0) {
            return Err(("maps", "bg_half_width", "must be positive".into()));
        }
        if !(m.t_near >= 0.0 && m.t_far > m.t_near) {
            return Err(("maps", "t_far", "need 0 <= t_near < t_far".into()));
        }
        let l = &self.loss;
        for (key, v) in [("image_weight", l.image_weight), ("maps_weight", l.maps_weight), ("r1_weight", l.r1_weight)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(("loss", key, "must be a non-negative number".into()));
            }
        }
        Ok(())
    }

    /// Defaults filled in, keys in a fixed order.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("scene config always serializes")
    }

    pub fn sha256(&self) -> String {
        sha256_hex(self.canonical_toml().as_bytes())
    }

    pub fn surface_set(&self) -> Result<SurfaceSet> {
        let s = &self.surfaces;
        let radii = match &s.radii {
            Some(r) => r.clone(),
            None => crate::math::linspace(s.radius_min, s.radius_max, s.count - 1),
        };
        SurfaceSet::analytic(DEFAULT_CENTER, &radii, s.plane_z)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        match self.model.size {
            ModelSize::Standard => ModelConfig::standard(self.maps.sr_factor),
            ModelSize::Tiny => ModelConfig::tiny(self.maps.sr_factor),
        }
    }

    pub fn grid_options(&self) -> GridOptions {
        let m = &self.maps;
        GridOptions {
            height: m.lr_size,
            width: m.lr_size,
            fg_half_width: m.fg_half_width,
            bg_half_width: m.bg_half_width,
            t_near: m.t_near,
            t_far: m.t_far,
            with_features: true,
        }
    }

    pub fn camera(&self) -> Camera {
        let c = &self.camera;
        Camera {
            yaw: c.yaw,
            pitch: c.pitch,
            roll: c.roll,
            orbit_radius: c.orbit_radius,
            fov_deg: c.fov_deg,
            height: c.height,
            width: c.width,
            near: c.near,
            far: c.far,
            ..Camera::default()
        }
    }

    pub fn consistency_weights(&self) -> ConsistencyWeights {
        ConsistencyWeights {
            image: self.loss.image_weight,
            maps: self.loss.maps_weight,
        }
    }
}
