//! Manifold gridding: flattening each surface onto a regular 2D grid by
//! orthogonal projection along -Z and sampling radiance at the hits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersect_surface, Ray, SurfaceSet, DEFAULT_T_FAR, DEFAULT_T_NEAR};
use crate::math::{linspace, Vec3};
use crate::params::NetParams;
use crate::radiance::{LatentCode, RadianceField};

/// Z coordinate of the gridding ray origins.
pub const GRID_ORIGIN_Z: f64 = 1.0;
pub const GRID_DIRECTION: Vec3 = Vec3::new(0.0, 0.0, -1.0);
pub const DEFAULT_LR_SIZE: usize = 64;
pub const DEFAULT_FG_HALF_WIDTH: f64 = 1.0;
pub const DEFAULT_BG_HALF_WIDTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Warp {
    Linear,
    BgTrans,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceMeta {
    pub half_width: f64,
    pub is_background: bool,
    pub warp: Warp,
}

/// Per-surface 2D grids, `N x H x W x C`, channels `[r, g, b, occupancy, features...]`.
///
/// Row `j` of a map holds world `y = linspace(-l, l, H)[j]` (before warping),
/// column `i` holds world `x` likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct MapStack {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub meta: Vec<SurfaceMeta>,
    pub data: Vec<f32>,
}

impl MapStack {
    pub fn zeros(meta: Vec<SurfaceMeta>, height: usize, width: usize, channels: usize) -> Self {
        let n = meta.len();
        Self {
            height,
            width,
            channels,
            meta,
            data: vec![0.0; n * height * width * channels],
        }
    }

    pub fn new(
        meta: Vec<SurfaceMeta>,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if data.len() != meta.len() * height * width * channels {
            return Err(Error::InvalidArgument(format!(
                "map stack {}x{height}x{width}x{channels} needs {} values, got {}",
                meta.len(),
                meta.len() * height * width * channels,
                data.len()
            )));
        }
        if channels < 4 {
            return Err(Error::InvalidArgument(format!(
                "map stack needs at least 4 channels, got {channels}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            meta,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn surface_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn surface(&self, i: usize) -> &[f32] {
        let n = self.surface_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn surface_mut(&mut self, i: usize) -> &mut [f32] {
        let n = self.surface_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn texel(&self, i: usize, row: usize, col: usize) -> &[f32] {
        let c = self.channels;
        &self.surface(i)[(row * self.width + col) * c..][..c]
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.len(), self.height, self.width, self.channels]
    }

    /// Copy holding only the first four (radiance) channels.
    pub fn radiance_only(&self) -> MapStack {
        if self.channels == 4 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .flat_map(|t| t[..4].iter().copied())
            .collect();
        MapStack {
            height: self.height,
            width: self.width,
            channels: 4,
            meta: self.meta.clone(),
            data,
        }
    }
}

/// Background warp: linear in the middle, tangent-stretched beyond |x| = 0.5.
pub fn bg_transform(x: f64) -> Result<f64> {
    let pole = 0.5 + std::f64::consts::FRAC_PI_2;
    if !(x.abs() < pole) {
        return Err(Error::Domain(format!(
            "bg_transform argument {x} outside (-{pole}, {pole})"
        )));
    }
    Ok(if x < -0.5 {
        2.0 * (x + 0.5).tan() - 1.0
    } else if x > 0.5 {
        2.0 * (x - 0.5).tan() + 1.0
    } else {
        2.0 * x
    })
}

pub fn bg_transform_inverse(y: f64) -> f64 {
    if y < -1.0 {
        ((y + 1.0) / 2.0).atan() - 0.5
    } else if y > 1.0 {
        ((y - 1.0) / 2.0).atan() + 0.5
    } else {
        y / 2.0
    }
}

/// World coordinates of the grid samples along one axis.
pub fn grid_axis(n: usize, half_width: f64, warp: Warp) -> Vec<f64> {
    match warp {
        Warp::Linear => linspace(-half_width, half_width, n),
        Warp::BgTrans => linspace(-1.0, 1.0, n)
            .into_iter()
            .map(|u| bg_transform(u).expect("|u| <= 1 is inside the warp domain") * half_width)
            .collect(),
    }
}

/// Rays parallel to -Z starting on `z = 1`, row-major (row = y index).
pub fn grid_rays(height: usize, width: usize, half_width: f64, warp: Warp) -> Result<Vec<Ray>> {
    grid_rays_range(height, width, half_width, warp, DEFAULT_T_NEAR, DEFAULT_T_FAR)
}

pub fn grid_rays_range(
    height: usize,
    width: usize,
    half_width: f64,
    warp: Warp,
    t_near: f64,
    t_far: f64,
) -> Result<Vec<Ray>> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid size must be positive, got {height}x{width}"
        )));
    }
    if !(half_width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "half width must be positive, got {half_width}"
        )));
    }
    let xs = grid_axis(width, half_width, warp);
    let ys = grid_axis(height, half_width, warp);
    let mut rays = Vec::with_capacity(height * width);
    for &y in &ys {
        for &x in &xs {
            rays.push(Ray::new(
                Vec3::new(x, y, GRID_ORIGIN_Z),
                GRID_DIRECTION,
                t_near,
                t_far,
            )?);
        }
    }
    Ok(rays)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub height: usize,
    pub width: usize,
    pub fg_half_width: f64,
    pub bg_half_width: f64,
    pub t_near: f64,
    pub t_far: f64,
    pub with_features: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            height: DEFAULT_LR_SIZE,
            width: DEFAULT_LR_SIZE,
            fg_half_width: DEFAULT_FG_HALF_WIDTH,
            bg_half_width: DEFAULT_BG_HALF_WIDTH,
            t_near: DEFAULT_T_NEAR,
            t_far: DEFAULT_T_FAR,
            with_features: true,
        }
    }
}

impl GridOptions {
    pub fn meta_for(&self, surfaces: &SurfaceSet) -> Vec<SurfaceMeta> {
        (0..surfaces.len())
            .map(|i| {
                if surfaces.is_background(i) {
                    SurfaceMeta {
                        half_width: self.bg_half_width,
                        is_background: true,
                        warp: Warp::BgTrans,
                    }
                } else {
                    SurfaceMeta {
                        half_width: self.fg_half_width,
                        is_background: false,
                        warp: Warp::Linear,
                    }
                }
            })
            .collect()
    }
}

/// Front-most hit of every grid ray on surface `index`; `None` on a miss.
pub fn grid_hits(surfaces: &SurfaceSet, index: usize, meta: &SurfaceMeta, opts: &GridOptions) -> Result<Vec<Option<Vec3>>> {
    let rays = grid_rays_range(
        opts.height,
        opts.width,
        meta.half_width,
        meta.warp,
        opts.t_near,
        opts.t_far,
    )?;
    Ok(rays
        .iter()
        .map(|r| intersect_surface(r, surfaces, index).first().map(|h| h.point))
        .collect())
}

/// Samples the radiance network on every surface's grid.
///
/// Cells whose ray misses the surface stay all-zero (occupancy 0).
pub fn grid_manifolds(
    latent: &LatentCode,
    surfaces: &SurfaceSet,
    params: &NetParams,
    opts: &GridOptions,
) -> Result<MapStack> {
    let field = RadianceField::new(latent, params)?;
    let channels = field.channels(opts.with_features);
    let meta = opts.meta_for(surfaces);
    let mut maps = MapStack::zeros(meta.clone(), opts.height, opts.width, channels);
    let surface_len = maps.surface_len();
    maps.data
        .par_chunks_mut(surface_len)
        .zip(meta.par_iter())
        .enumerate()
        .try_for_each(|(i, (out, m))| -> Result<()> {
            let hits = grid_hits(surfaces, i, m, opts)?;
            let (cells, points): (Vec<usize>, Vec<Vec3>) = hits
                .iter()
                .enumerate()
                .filter_map(|(c, h)| h.map(|p| (c, p)))
                .unzip();
            let mut vals = vec![0.0f32; points.len() * channels];
            field.eval_into(&points, GRID_DIRECTION, opts.with_features, &mut vals);
            for (cell, v) in cells.iter().zip(vals.chunks_exact(channels)) {
                out[cell * channels..(cell + 1) * channels].copy_from_slice(v);
            }
            Ok(())
        })?;
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_CENTER;

    #[test]
    fn bg_transform_values() {
        assert_eq!(bg_transform(0.0).unwrap(), 0.0);
        assert_eq!(bg_transform(0.5).unwrap(), 1.0);
        let v = bg_transform(1.0).unwrap();
        assert!((v - (2.0 * 0.5f64.tan() + 1.0)).abs() < 1e-12);
        assert!((v - 2.092_604_979_687_581).abs() < 1e-9);
        assert!(matches!(
            bg_transform(-0.5 - std::f64::consts::FRAC_PI_2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bg_transform_inverse_round_trips() {
        for i in 0..=200 {
            let x = -1.0 + i as f64 / 100.0;
            let y = bg_transform(x).unwrap();
            assert!((bg_transform_inverse(y) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_ray_extent() {
        let rays = grid_rays(64, 64, 0.75, Warp::Linear).unwrap();
        assert_eq!(rays.len(), 64 * 64);
        assert_eq!(rays[0].origin.x, -0.75);
        assert_eq!(rays[63].origin.x, 0.75);
        assert_eq!(rays[0].origin.y, -0.75);
        assert!(rays.iter().all(|r| r.origin.z == 1.0 && r.direction == GRID_DIRECTION));
    }

    #[test]
    fn degenerate_grid_uses_lower_endpoint() {
        let rays = grid_rays(1, 1, 2.0, Warp::Linear).unwrap();
        assert_eq!(rays[0].origin.x, -2.0);
        assert!(grid_rays(0, 4, 1.0, Warp::Linear).is_err());
        assert!(grid_rays(4, 4, 0.0, Warp::Linear).is_err());
    }

    #[test]
    fn bg_warp_keeps_center_and_stretches_edges() {
        let rays = grid_rays(3, 3, 3.0, Warp::BgTrans).unwrap();
        assert_eq!(rays[4].origin.x, 0.0);
        assert!((rays[5].origin.x - 3.0 * bg_transform(1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn small_sphere_misses_corner_cells() {
        let set = SurfaceSet::analytic(DEFAULT_CENTER, &[0.5], -1.0).unwrap();
        let opts = GridOptions {
            height: 16,
            width: 16,
            ..GridOptions::default()
        };
        let meta = opts.meta_for(&set);
        let hits = grid_hits(&set, 0, &meta[0], &opts).unwrap();
        assert!(hits[0].is_none());
        assert!(hits[15].is_none());
        assert!(hits[8 * 16 + 8].is_some());
    }
}
