//! Proxy shape extraction (multiview depth fusion followed by marching cubes)
//! and textured-mesh baking for the cached rasterizer.

mod bake;
mod fusion;
mod marching_cubes;
mod raster;
pub mod tables;

pub use bake::{bake_textured_mesh, bake_textured_mesh_with, BakeOptions};
pub use fusion::{fuse_occupancy, fuse_occupancy_with, orbit_cameras, FusionOptions, GridSpec, OccupancyGrid};
pub use marching_cubes::marching_cubes;
pub use raster::render_cached;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Triangles below this area are dropped.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-vertex texture coordinates in `[0, 1]²`; empty when untextured.
    pub uvs: Vec<[f64; 2]>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_area(&self, t: [u32; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i as usize]);
        (b - a).cross(c - a).norm() * 0.5
    }

    /// Drops vertices no triangle refers to, renumbering the rest.
    pub fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut uvs = Vec::new();
        for t in &mut self.triangles {
            for i in t.iter_mut() {
                let old = *i as usize;
                if remap[old] == u32::MAX {
                    remap[old] = vertices.len() as u32;
                    vertices.push(self.vertices[old]);
                    if !self.uvs.is_empty() {
                        uvs.push(self.uvs[old]);
                    }
                }
                *i = remap[old];
            }
        }
        self.vertices = vertices;
        self.uvs = uvs;
    }
}

/// RGBA texture; row `j` is texture coordinate `v = j / (H - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    height: usize,
    width: usize,
    texels: Vec<[f32; 4]>,
}

impl Texture {
    /// From row-major `H x W x 4` values.
    pub fn from_rgba(height: usize, width: usize, rgba: &[f32]) -> Result<Self> {
        if height == 0 || width == 0 || rgba.len() != height * width * 4 {
            return Err(Error::InvalidArgument(format!(
                "texture {height}x{width} needs {} values, got {}",
                height * width * 4,
                rgba.len()
            )));
        }
        let texels = rgba.chunks_exact(4).map(|t| [t[0], t[1], t[2], t[3]]).collect();
        Ok(Self { height, width, texels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn texel(&self, r: usize, c: usize) -> [f32; 4] {
        self.texels[r * self.width + c]
    }

    /// Row-major `H x W x 4` copy of the texels.
    pub fn to_rgba(&self) -> Vec<f32> {
        self.texels.iter().flatten().copied().collect()
    }

    /// Bilinear lookup at `(u, v) ∈ [0, 1]²`, clamped to the border.
    #[inline]
    pub fn sample(&self, u: f64, v: f64) -> [f32; 4] {
        let (wm, hm) = ((self.width - 1) as f32, (self.height - 1) as f32);
        let x = (u as f32 * wm).clamp(0.0, wm);
        let y = (v as f32 * hm).clamp(0.0, hm);
        let x0 = (x as usize).min(self.width.saturating_sub(2));
        let y0 = (y as usize).min(self.height.saturating_sub(2));
        let fx = x - x0 as f32;
        let fy = y - y0 as f32;
        let i = y0 * self.width + x0;
        let dx = usize::from(self.width > 1);
        let top = &self.texels[i..i + dx + 1];
        let bot = if self.height > 1 { &self.texels[i + self.width..i + self.width + dx + 1] } else { top };
        bilerp(&top[0], &top[dx], &bot[0], &bot[dx], fx, fy)
    }
}

#[cfg(target_arch = "x86_64")]
#[inline(always)]
fn bilerp(p00: &[f32; 4], p01: &[f32; 4], p10: &[f32; 4], p11: &[f32; 4], fx: f32, fy: f32) -> [f32; 4] {
    use std::arch::x86_64::*;
    // SAFETY: SSE is part of the x86_64 baseline and every pointer refers
    // to four initialized f32 values.
    unsafe {
        let (a, b) = (_mm_loadu_ps(p00.as_ptr()), _mm_loadu_ps(p01.as_ptr()));
        let (c, d) = (_mm_loadu_ps(p10.as_ptr()), _mm_loadu_ps(p11.as_ptr()));
        let (wx, wy) = (_mm_set1_ps(fx), _mm_set1_ps(fy));
        let top = _mm_add_ps(a, _mm_mul_ps(_mm_sub_ps(b, a), wx));
        let bot = _mm_add_ps(c, _mm_mul_ps(_mm_sub_ps(d, c), wx));
        let mut out = [0.0f32; 4];
        _mm_storeu_ps(out.as_mut_ptr(), _mm_add_ps(top, _mm_mul_ps(_mm_sub_ps(bot, top), wy)));
        out
    }
}

#[cfg(not(target_arch = "x86_64"))]
#[inline(always)]
fn bilerp(p00: &[f32; 4], p01: &[f32; 4], p10: &[f32; 4], p11: &[f32; 4], fx: f32, fy: f32) -> [f32; 4] {
    let mut out = [0.0; 4];
    for k in 0..4 {
        let t = p00[k] + (p01[k] - p00[k]) * fx;
        let b = p10[k] + (p11[k] - p10[k]) * fx;
        out[k] = t + (b - t) * fy;
    }
    out
}

/// One baked surface: its mesh (every crossing sheet) and its radiance map.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturedMesh {
    pub surface_index: usize,
    pub mesh: Mesh,
    pub texture: Texture,
}
