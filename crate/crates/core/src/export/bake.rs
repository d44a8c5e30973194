use rayon::prelude::*;

use super::{Mesh, Texture, TexturedMesh, MIN_TRIANGLE_AREA};
use crate::error::{Error, Result};
use crate::geometry::{eval_scalar_field, intersect_surface, ScalarField, SurfaceSet, DEFAULT_T_FAR, DEFAULT_T_NEAR};
use crate::gridding::{grid_rays_range, MapStack, DEFAULT_LR_SIZE};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BakeOptions {
    /// Lattice points per side used for tessellation.
    pub lattice: usize,
    pub t_near: f64,
    pub t_far: f64,
}

impl Default for BakeOptions {
    fn default() -> Self {
        Self {
            lattice: DEFAULT_LR_SIZE,
            t_near: DEFAULT_T_NEAR,
            t_far: DEFAULT_T_FAR,
        }
    }
}

pub fn bake_textured_mesh(surfaces: &SurfaceSet, maps: &MapStack) -> Result<Vec<TexturedMesh>> {
    bake_textured_mesh_with(surfaces, maps, &BakeOptions::default())
}

/// Tessellates every surface on its gridding lattice. Each lattice ray may
/// cross a surface several times; crossings are grouped into sheets by
/// direction (entering / leaving) and order, and each sheet is meshed
/// separately with one quad per lattice cell whose four corners hit it.
/// Texture coordinates are the normalized lattice coordinates.
pub fn bake_textured_mesh_with(surfaces: &SurfaceSet, maps: &MapStack, opts: &BakeOptions) -> Result<Vec<TexturedMesh>> {
    if maps.len() != surfaces.len() {
        return Err(Error::InvalidArgument(format!(
            "{} maps for {} surfaces",
            maps.len(),
            surfaces.len()
        )));
    }
    if maps.channels < 4 || maps.height < 2 || maps.width < 2 {
        return Err(Error::InvalidArgument("baking needs rgb + occupancy maps of at least 2x2".into()));
    }
    if opts.lattice < 2 {
        return Err(Error::InvalidArgument(format!("lattice must be at least 2, got {}", opts.lattice)));
    }
    (0..surfaces.len())
        .into_par_iter()
        .map(|i| {
            let mesh = bake_surface(surfaces, maps, i, opts)?;
            let rgba: Vec<f32> = maps
                .surface(i)
                .chunks_exact(maps.channels)
                .flat_map(|px| px[..4].iter().copied())
                .collect();
            let texture = Texture::from_rgba(maps.height, maps.width, &rgba)?;
            Ok(TexturedMesh {
                surface_index: i,
                mesh,
                texture,
            })
        })
        .collect()
}

/// `+1` when the field grows along `dir` at `p`, `-1` otherwise; planes get 0.
fn facing(surfaces: &SurfaceSet, index: usize, p: Vec3, dir: Vec3) -> i8 {
    if matches!(surfaces.field, ScalarField::AnalyticSpherePlane { .. }) && surfaces.is_background(index) {
        return 0;
    }
    let h = 1e-6;
    let ahead = eval_scalar_field(p + dir * h, &surfaces.field);
    let behind = eval_scalar_field(p - dir * h, &surfaces.field);
    if ahead >= behind {
        1
    } else {
        -1
    }
}

fn bake_surface(surfaces: &SurfaceSet, maps: &MapStack, index: usize, opts: &BakeOptions) -> Result<Mesh> {
    let meta = maps.meta[index];
    let n = opts.lattice;
    let rays = grid_rays_range(n, n, meta.half_width, meta.warp, opts.t_near, opts.t_far)?;
    // per lattice point: (facing, ordinal within that facing) -> point
    let mut sheets: Vec<(i8, usize)> = Vec::new();
    let mut points: Vec<Vec<Option<Vec3>>> = Vec::new();
    for (cell, ray) in rays.iter().enumerate() {
        let mut seen = [0usize; 3];
        for hit in intersect_surface(ray, surfaces, index) {
            let f = facing(surfaces, index, hit.point, ray.direction);
            let ord = seen[(f + 1) as usize];
            seen[(f + 1) as usize] += 1;
            let s = match sheets.iter().position(|&k| k == (f, ord)) {
                Some(s) => s,
                None => {
                    sheets.push((f, ord));
                    points.push(vec![None; n * n]);
                    sheets.len() - 1
                }
            };
            points[s][cell] = Some(hit.point);
        }
    }
    let mut mesh = Mesh::default();
    let inv = 1.0 / (n - 1) as f64;
    for sheet in &points {
        let mut ids = vec![u32::MAX; n * n];
        for (cell, p) in sheet.iter().enumerate() {
            if let Some(p) = p {
                ids[cell] = mesh.vertices.len() as u32;
                mesh.vertices.push(*p);
                mesh.uvs.push([(cell % n) as f64 * inv, (cell / n) as f64 * inv]);
            }
        }
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                let q = [ids[r * n + c], ids[r * n + c + 1], ids[(r + 1) * n + c], ids[(r + 1) * n + c + 1]];
                for t in [[q[0], q[1], q[3]], [q[0], q[3], q[2]]] {
                    if t.iter().all(|&v| v != u32::MAX) && mesh.triangle_area(t) >= MIN_TRIANGLE_AREA {
                        mesh.triangles.push(t);
                    }
                }
            }
        }
    }
    mesh.compact();
    Ok(mesh)
}
