use rayon::prelude::*;

use super::TexturedMesh;
use crate::error::Result;
use crate::math::Vec3;
use crate::render::{Camera, Image};

/// Side of the square pixel tiles rasterized independently.
const TILE: usize = 16;

/// Pixels whose transmittance falls below this take no further fragments.
const MIN_TRANSMITTANCE: f32 = 1e-4;

/// Sub-pixel steps per pixel of the fixed-point screen coordinates.
const SUBPIXEL: f64 = 256.0;

/// Triangles reaching further than this many pixels outside the image are
/// dropped, which keeps the fixed-point edge products inside `i64`.
const GUARD_BAND: f64 = (1 << 20) as f64;

#[derive(Clone, Copy)]
struct ScreenVertex {
    /// Fixed-point pixel coordinates.
    x: i64,
    y: i64,
    /// `1/z`, `u/z`, `v/z`: affine in screen space.
    attr: [f64; 3],
    id: u64,
}

/// `sign * (dx (Y - ay) - dy (X - ax)) >= bias` inside, in fixed point.
#[derive(Clone, Copy)]
struct EdgeEq {
    ax: i64,
    ay: i64,
    dx: i64,
    dy: i64,
    sign: i64,
    /// 0 when the triangle owns pixels exactly on this edge, 1 otherwise.
    bias: i64,
}

impl EdgeEq {
    /// Coefficients are taken from the endpoint with the smaller id, so the
    /// two triangles sharing an edge evaluate exactly opposite values. Of
    /// the two, the one for which the edge is a top or left edge owns it.
    fn new(a: &ScreenVertex, b: &ScreenVertex, tri_sign: i64) -> Self {
        let (p, q, flip) = if a.id <= b.id { (a, b, 1) } else { (b, a, -1) };
        let (dx, dy) = (tri_sign * (b.x - a.x), tri_sign * (b.y - a.y));
        let owned = dy > 0 || (dy == 0 && dx < 0);
        Self {
            ax: p.x,
            ay: p.y,
            dx: q.x - p.x,
            dy: q.y - p.y,
            sign: flip * tri_sign,
            bias: if owned { 0 } else { 1 },
        }
    }

    fn eval(&self, x: i64, y: i64) -> i64 {
        self.sign * (self.dx * (y - self.ay) - self.dy * (x - self.ax))
    }
}

struct ScreenTriangle {
    mesh: u32,
    /// Opposite to vertex 0, 1, 2 respectively.
    edges: [EdgeEq; 3],
    /// Per attribute, `value = a col + b row + c`.
    planes: [[f64; 3]; 3],
    rows: (usize, usize),
    cols: (usize, usize),
}

/// Camera projection with the per-frame constants hoisted.
struct Projector {
    position: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    sx: f64,
    sy: f64,
    near: f64,
    far: f64,
    half_w: f64,
    half_h: f64,
}

impl Projector {
    fn new(camera: &Camera) -> Self {
        let frame = camera.frame();
        let (tx, ty) = camera.tan_half_fov();
        let (half_w, half_h) = (0.5 * camera.width as f64, 0.5 * camera.height as f64);
        Self {
            position: frame.position,
            right: frame.right,
            up: frame.up,
            forward: frame.forward,
            sx: half_w / tx,
            sy: half_h / ty,
            near: camera.near,
            far: camera.far,
            half_w,
            half_h,
        }
    }

    /// `(col, row, 1/z)` of `p`, or `None` outside the depth range.
    fn project(&self, p: Vec3) -> Option<(f64, f64, f64)> {
        let d = p - self.position;
        let z = d.dot(self.forward);
        if !(z >= self.near && z <= self.far) {
            return None;
        }
        let iz = 1.0 / z;
        let col = self.half_w + d.dot(self.right) * iz * self.sx - 0.5;
        let row = self.half_h - d.dot(self.up) * iz * self.sy - 0.5;
        Some((col, row, iz))
    }
}

/// Visible triangles and their indices in front-to-back order.
fn setup_triangles(meshes: &[TexturedMesh], camera: &Camera) -> (Vec<ScreenTriangle>, Vec<u32>) {
    let proj = Projector::new(camera);
    let (h, w) = (camera.height as f64, camera.width as f64);
    let (wmax, hmax) = ((w - 1.0) * SUBPIXEL, (h - 1.0) * SUBPIXEL);
    let step = SUBPIXEL as i64;
    let mut tris: Vec<ScreenTriangle> = Vec::new();
    let mut keys: Vec<(f32, u32)> = Vec::new();
    let mut screen: Vec<ScreenVertex> = Vec::new();
    // bits: left, right, above, below the image; 16 marks an unusable vertex
    let mut codes: Vec<u8> = Vec::new();
    let unusable = ScreenVertex {
        x: 0,
        y: 0,
        attr: [0.0; 3],
        id: 0,
    };
    for (mi, tm) in meshes.iter().enumerate() {
        let m = &tm.mesh;
        let base = (mi as u64) << 32;
        screen.clear();
        codes.clear();
        for (i, p) in m.vertices.iter().enumerate() {
            let Some((col, row, iz)) = proj.project(*p).filter(|(c, r, _)| c.abs() < GUARD_BAND && r.abs() < GUARD_BAND)
            else {
                screen.push(unusable);
                codes.push(16);
                continue;
            };
            let uv = m.uvs.get(i).copied().unwrap_or([0.0, 0.0]);
            let v = ScreenVertex {
                x: (col * SUBPIXEL).round() as i64,
                y: (row * SUBPIXEL).round() as i64,
                attr: [iz, uv[0] * iz, uv[1] * iz],
                id: base | i as u64,
            };
            let (x, y) = (v.x as f64, v.y as f64);
            codes.push(u8::from(x < 0.0) | u8::from(x > wmax) << 1 | u8::from(y < 0.0) << 2 | u8::from(y > hmax) << 3);
            screen.push(v);
        }
        for t in &m.triangles {
            let [i, j, k] = t.map(|v| v as usize);
            let (ci, cj, ck) = (codes[i], codes[j], codes[k]);
            if (ci | cj | ck) & 16 != 0 || ci & cj & ck != 0 {
                continue;
            }
            let (a, b, c) = (screen[i], screen[j], screen[k]);
            let min_x = a.x.min(b.x).min(c.x) as f64;
            let max_x = a.x.max(b.x).max(c.x) as f64;
            let min_y = a.y.min(b.y).min(c.y) as f64;
            let max_y = a.y.max(b.y).max(c.y) as f64;
            let (c0, c1) = ((min_x / SUBPIXEL).ceil().max(0.0), (max_x / SUBPIXEL).floor().min(w - 1.0));
            let (r0, r1) = ((min_y / SUBPIXEL).ceil().max(0.0), (max_y / SUBPIXEL).floor().min(h - 1.0));
            if c0 > c1 || r0 > r1 {
                continue;
            }
            let area = EdgeEq::new(&a, &b, 1).eval(c.x, c.y);
            if area == 0 {
                continue;
            }
            let s = area.signum();
            let edges = [EdgeEq::new(&b, &c, s), EdgeEq::new(&c, &a, s), EdgeEq::new(&a, &b, s)];
            // barycentric i = (kc col + kr row + k0) / area
            let inv_area = 1.0 / area.abs() as f64;
            let mut planes = [[0.0; 3]; 3];
            for (e, v) in edges.iter().zip([a, b, c]) {
                let kc = (-e.sign * e.dy * step) as f64 * inv_area;
                let kr = (e.sign * e.dx * step) as f64 * inv_area;
                let k0 = e.eval(0, 0) as f64 * inv_area;
                for (plane, value) in planes.iter_mut().zip(v.attr) {
                    plane[0] += kc * value;
                    plane[1] += kr * value;
                    plane[2] += k0 * value;
                }
            }
            keys.push(((3.0 / (a.attr[0] + b.attr[0] + c.attr[0])) as f32, tris.len() as u32));
            tris.push(ScreenTriangle {
                mesh: mi as u32,
                edges,
                planes,
                rows: (r0 as usize, r1 as usize),
                cols: (c0 as usize, c1 as usize),
            });
        }
    }
    keys.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    (tris, keys.into_iter().map(|(_, i)| i).collect())
}

/// Calls `f(row, lo, hi)` for every row of `tri` inside the given half-open
/// row and column windows, where `lo..=hi` are exactly the pixel centers
/// passing all three edge tests.
fn for_each_span(tri: &ScreenTriangle, rows: (usize, usize), cols: (usize, usize), mut f: impl FnMut(usize, i64, i64)) {
    let step = SUBPIXEL as i64;
    let c_lo = tri.cols.0.max(cols.0) as i64;
    let c_hi = (tri.cols.1 + 1).min(cols.1) as i64 - 1;
    for row in tri.rows.0.max(rows.0)..(tri.rows.1 + 1).min(rows.1) {
        let y = row as i64 * step;
        let (mut lo, mut hi) = (c_lo, c_hi);
        for e in &tri.edges {
            // base + slope * col >= bias
            let base = e.eval(0, y);
            let slope = -e.sign * e.dy * step;
            let need = e.bias - base;
            match slope.signum() {
                1 => lo = lo.max(-(-need).div_euclid(slope)),
                -1 => hi = hi.min((-need).div_euclid(-slope)),
                _ if need > 0 => hi = lo - 1,
                _ => {}
            }
        }
        if lo <= hi {
            f(row, lo, hi);
        }
    }
}

/// Software rasterization of baked meshes. Triangles of all surfaces are
/// ordered by mean camera depth and composited front to back in that fixed
/// order, with the texture alpha as occupancy; a pixel stops taking
/// fragments once it is effectively opaque.
///
/// Work is split into square tiles so each tile's texture footprint stays
/// cache resident.
pub fn render_cached(meshes: &[TexturedMesh], camera: &Camera) -> Result<Image> {
    camera.validate()?;
    let (h, w) = (camera.height, camera.width);
    let (tris, order) = setup_triangles(meshes, camera);
    let (tiles_y, tiles_x) = (h.div_ceil(TILE), w.div_ceil(TILE));
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_y * tiles_x];
    for &i in &order {
        let t = &tris[i as usize];
        for ty in t.rows.0 / TILE..=t.rows.1 / TILE {
            for tx in t.cols.0 / TILE..=t.cols.1 / TILE {
                bins[ty * tiles_x + tx].push(i);
            }
        }
    }
    let tiles: Vec<Vec<f32>> = bins
        .par_iter()
        .enumerate()
        .map(|(tile, bin)| {
            let rows = ((tile / tiles_x) * TILE, ((tile / tiles_x) * TILE + TILE).min(h));
            let cols = ((tile % tiles_x) * TILE, ((tile % tiles_x) * TILE + TILE).min(w));
            let tw = cols.1 - cols.0;
            let npix = (rows.1 - rows.0) * tw;
            let mut rgb = vec![[0.0f32; 3]; npix];
            let mut trans = vec![1.0f32; npix];
            let mut open = npix;
            for &ti in bin {
                if open == 0 {
                    break;
                }
                let tri = &tris[ti as usize];
                let tex = &meshes[tri.mesh as usize].texture;
                let [pz, pu, pv] = tri.planes;
                for_each_span(tri, rows, cols, |row, lo, hi| {
                    let (r, c) = (row as f64, lo as f64);
                    let mut inv_z = pz[0] * c + pz[1] * r + pz[2];
                    let mut u_z = pu[0] * c + pu[1] * r + pu[2];
                    let mut v_z = pv[0] * c + pv[1] * r + pv[2];
                    let start = (row - rows.0) * tw + lo as usize - cols.0;
                    let end = start + (hi - lo) as usize + 1;
                    for (t, color) in trans[start..end].iter_mut().zip(&mut rgb[start..end]) {
                        if *t >= MIN_TRANSMITTANCE {
                            let z = 1.0 / inv_z;
                            let texel = tex.sample(u_z * z, v_z * z);
                            let wgt = *t * texel[3].clamp(0.0, 1.0);
                            for k in 0..3 {
                                color[k] += wgt * texel[k];
                            }
                            *t -= wgt;
                            if *t < MIN_TRANSMITTANCE {
                                open -= 1;
                            }
                        }
                        inv_z += pz[0];
                        u_z += pu[0];
                        v_z += pv[0];
                    }
                });
            }
            let mut out: Vec<f32> = rgb.into_iter().flatten().collect();
            for v in &mut out {
                *v = v.clamp(0.0, 1.0);
            }
            out
        })
        .collect();
    let mut img = Image::zeros(h, w);
    for (tile, out) in tiles.iter().enumerate() {
        let (r0, c0) = ((tile / tiles_x) * TILE, (tile % tiles_x) * TILE);
        let tw = (c0 + TILE).min(w) - c0;
        for (lr, chunk) in out.chunks_exact(tw * 3).enumerate() {
            let start = ((r0 + lr) * w + c0) * 3;
            img.data[start..start + tw * 3].copy_from_slice(chunk);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::export::{bake_textured_mesh, Mesh, Texture};
    use crate::geometry::{SurfaceSet, DEFAULT_CENTER};
    use crate::gridding::{GridOptions, MapStack};

    #[test]
    fn empty_scene_is_black() {
        let img = render_cached(&[], &Camera::default().with_resolution(8, 8)).unwrap();
        assert!(img.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shared_edges_are_covered_once() {
        // a fine grid of quads with a constant half-transparent white texture
        let n = 9;
        let mut mesh = Mesh::default();
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (-0.2 + 0.4 * i as f64 / (n - 1) as f64, -0.2 + 0.4 * j as f64 / (n - 1) as f64);
                mesh.vertices.push(Vec3::new(x, y, -1.5));
                mesh.uvs.push([0.5, 0.5]);
            }
        }
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let q = [j * n + i, j * n + i + 1, (j + 1) * n + i, (j + 1) * n + i + 1].map(|v| v as u32);
                mesh.triangles.push([q[0], q[1], q[3]]);
                mesh.triangles.push([q[0], q[3], q[2]]);
            }
        }
        let tm = TexturedMesh {
            surface_index: 0,
            mesh,
            texture: Texture::from_rgba(2, 2, &[1.0, 1.0, 1.0, 0.5].repeat(4)).unwrap(),
        };
        // 12° at distance 2.7 spans about ±0.28, so the quad covers the centre
        let img = render_cached(&[tm], &Camera::default().with_resolution(64, 64)).unwrap();
        let centre = img.pixel(32, 32);
        assert!((centre[0] - 0.5).abs() < 1e-6);
        let covered: Vec<f32> = img.data.iter().copied().filter(|v| *v > 0.0).collect();
        assert!(covered.iter().all(|v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn opaque_plane_matches_direct_texture_lookup() {
        let s = SurfaceSet::analytic(DEFAULT_CENTER, &[0.5], -1.0).unwrap();
        let opts = GridOptions::default();
        let meta = opts.meta_for(&s);
        let size = 32;
        let mut maps = MapStack::zeros(meta, size, size, 4);
        for (i, px) in maps.surface_mut(1).chunks_exact_mut(4).enumerate() {
            let (r, c) = (i / size, i % size);
            px.copy_from_slice(&[(r as f32 / 31.0), (c as f32 / 31.0), ((r + c) % 2) as f32 * 0.2, 1.0]);
        }
        let meshes = bake_textured_mesh(&s, &maps).unwrap();
        let cam = Camera::default().with_resolution(48, 48);
        let img = render_cached(&meshes[1..], &cam).unwrap();
        let direct = crate::render::render_image(&cam, &s, &{
            let mut m = maps.clone();
            m.surface_mut(0).fill(0.0);
            m
        })
        .unwrap();
        let max = img.data.iter().zip(&direct.data).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        assert!(max < 1e-3, "max diff {max}");
    }
}
