//! Ray-manifold rendering: every camera ray is intersected with the surface
//! set, radiance is looked up in the flattened maps and composited front to
//! back by occupancy.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{intersect_ray, Ray, SurfaceSet, DEFAULT_CENTER, DEFAULT_T_FAR, DEFAULT_T_NEAR};
use crate::gridding::{bg_transform_inverse, MapStack, SurfaceMeta, Warp, GRID_ORIGIN_Z};
use crate::math::Vec3;

pub const DEFAULT_ORBIT_RADIUS: f64 = 2.7;
pub const DEFAULT_FOV_DEG: f64 = 12.0;
pub const DEFAULT_CAMERA_NEAR: f64 = 0.1;
pub const DEFAULT_CAMERA_FAR: f64 = 6.0;
/// Slack when deciding whether a projected coordinate is on the map.
const EDGE_EPS: f64 = 1e-9;

/// Orbit camera. `yaw` turns around world +Y, `pitch` raises the camera,
/// `roll` spins the image around the viewing axis. Pixel `(row 0, col 0)`
/// is the top-left corner; `fov_deg` is vertical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub orbit_radius: f64,
    pub look_at: Vec3,
    pub fov_deg: f64,
    pub height: usize,
    pub width: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
            orbit_radius: DEFAULT_ORBIT_RADIUS,
            look_at: DEFAULT_CENTER,
            fov_deg: DEFAULT_FOV_DEG,
            height: 256,
            width: 256,
            near: DEFAULT_CAMERA_NEAR,
            far: DEFAULT_CAMERA_FAR,
        }
    }
}

/// World-space camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame {
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

impl Camera {
    pub fn with_pose(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self {
            yaw,
            pitch,
            roll,
            ..Self::default()
        }
    }

    pub fn with_resolution(mut self, height: usize, width: usize) -> Self {
        self.height = height;
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 120.0) {
            return Err(Error::InvalidArgument(format!(
                "field of view must lie in (0, 120) degrees, got {}",
                self.fov_deg
            )));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(format!(
                "camera resolution must be positive, got {}x{}",
                self.height, self.width
            )));
        }
        if !(self.orbit_radius > 0.0) || !self.orbit_radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "orbit radius must be positive, got {}",
                self.orbit_radius
            )));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::InvalidArgument(format!(
                "camera needs 0 < near < far, got [{}, {}]",
                self.near, self.far
            )));
        }
        if ![self.yaw, self.pitch, self.roll].iter().all(|v| v.is_finite()) || !self.look_at.is_finite() {
            return Err(Error::InvalidArgument("camera pose is not finite".into()));
        }
        Ok(())
    }

    pub fn frame(&self) -> CameraFrame {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let offset = Vec3::new(sy * cp, sp, cy * cp);
        let position = self.look_at + offset * self.orbit_radius;
        let forward = -offset;
        // Frame from yaw and pitch directly so it stays defined looking straight down.
        let right0 = Vec3::new(cy, 0.0, -sy);
        let up0 = right0.cross(forward);
        let (sr, cr) = self.roll.sin_cos();
        CameraFrame {
            position,
            forward,
            right: right0 * cr + up0 * sr,
            up: up0 * cr - right0 * sr,
        }
    }

    /// Half extent of the image plane at unit depth, `(x, y)`.
    pub fn tan_half_fov(&self) -> (f64, f64) {
        let ty = (self.fov_deg.to_radians() * 0.5).tan();
        (ty * self.width as f64 / self.height as f64, ty)
    }

    /// Unit direction through the center of pixel `(row, col)`; `row`/`col`
    /// may be fractional.
    pub fn pixel_direction(&self, frame: &CameraFrame, row: f64, col: f64) -> Vec3 {
        let (tx, ty) = self.tan_half_fov();
        let x = ((col + 0.5) / self.width as f64 * 2.0 - 1.0) * tx;
        let y = (1.0 - (row + 0.5) / self.height as f64 * 2.0) * ty;
        (frame.forward + frame.right * x + frame.up * y).normalized()
    }

    pub fn pixel_ray(&self, frame: &CameraFrame, row: usize, col: usize) -> Ray {
        Ray {
            origin: frame.position,
            direction: self.pixel_direction(frame, row as f64, col as f64),
            t_near: self.near,
            t_far: self.far,
        }
    }

    /// Continuous pixel coordinates `(row, col)` and camera depth of a world
    /// point; `None` behind the camera. Pixel centers sit at integers.
    pub fn project(&self, frame: &CameraFrame, p: Vec3) -> Option<(f64, f64, f64)> {
        let d = p - frame.position;
        let z = d.dot(frame.forward);
        if z <= 0.0 {
            return None;
        }
        let (tx, ty) = self.tan_half_fov();
        let x = d.dot(frame.right) / z / tx;
        let y = d.dot(frame.up) / z / ty;
        let col = (x + 1.0) * 0.5 * self.width as f64 - 0.5;
        let row = (1.0 - y) * 0.5 * self.height as f64 - 0.5;
        Some((row, col, z))
    }
}

/// `H x W x 3` RGB image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::InvalidArgument(format!(
                "image {height}x{width} needs {} values, got {}",
                height * width * 3,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width * 3],
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Per-pixel camera depth `Σ T_i α_i z_i` and the accumulated weight `Σ T_i α_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub height: usize,
    pub width: usize,
    pub depth: Vec<f32>,
    pub coverage: Vec<f32>,
}

impl DepthMap {
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.depth[row * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub color: [f64; 3],
    pub weights: Vec<f64>,
    pub transmittance: Vec<f64>,
}

/// Front-to-back occupancy compositing of `(color, alpha)` samples.
pub fn composite(samples: &[([f64; 3], f64)]) -> Composite {
    let mut color = [0.0; 3];
    let mut weights = Vec::with_capacity(samples.len());
    let mut transmittance = Vec::with_capacity(samples.len());
    let mut t = 1.0;
    for (c, a) in samples {
        let w = t * a;
        for k in 0..3 {
            color[k] += w * c[k];
        }
        weights.push(w);
        transmittance.push(t);
        t *= 1.0 - a;
    }
    Composite {
        color,
        weights,
        transmittance,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGradients {
    /// `∂C/∂c_i`, identical for all three channels.
    pub d_color: Vec<f64>,
    /// `∂C/∂α_i`, per channel.
    pub d_alpha: Vec<[f64; 3]>,
}

/// Analytic partial derivatives of [`composite`].
pub fn composite_gradients(samples: &[([f64; 3], f64)]) -> CompositeGradients {
    let comp = composite(samples);
    let n = samples.len();
    // suffix[i] = Σ_{k>i} w_k c_k
    let mut suffix = vec![[0.0; 3]; n];
    let mut acc = [0.0; 3];
    for i in (0..n).rev() {
        suffix[i] = acc;
        for k in 0..3 {
            acc[k] += comp.weights[i] * samples[i].0[k];
        }
    }
    let d_alpha = (0..n)
        .map(|i| {
            let (c, a) = samples[i];
            let t = comp.transmittance[i];
            let rest = if 1.0 - a > 1e-8 {
                let s = suffix[i];
                [s[0] / (1.0 - a), s[1] / (1.0 - a), s[2] / (1.0 - a)]
            } else {
                suffix_without(samples, i)
            };
            [t * c[0] - rest[0], t * c[1] - rest[1], t * c[2] - rest[2]]
        })
        .collect();
    CompositeGradients {
        d_color: comp.weights,
        d_alpha,
    }
}

/// `Σ_{k>i} (Π_{j<k, j≠i} (1 - α_j)) α_k c_k`, without dividing by `1 - α_i`.
fn suffix_without(samples: &[([f64; 3], f64)], i: usize) -> [f64; 3] {
    let mut t = 1.0;
    let mut out = [0.0; 3];
    for (k, (c, a)) in samples.iter().enumerate() {
        if k > i {
            for ch in 0..3 {
                out[ch] += t * a * c[ch];
            }
        }
        if k != i {
            t *= 1.0 - a;
        }
    }
    out
}

/// Borrowed view of one `H x W x C` map.
#[derive(Debug, Clone, Copy)]
pub struct MapView<'a> {
    pub data: &'a [f32],
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl<'a> MapView<'a> {
    pub fn of(maps: &'a MapStack, surface: usize) -> Self {
        Self {
            data: maps.surface(surface),
            height: maps.height,
            width: maps.width,
            channels: maps.channels,
        }
    }

    /// Bilinear blend of the first `out.len()` channels at column `u`, row
    /// `v`. Returns `false` (leaving `out` untouched) outside the grid.
    pub fn sample_into(&self, u: f64, v: f64, out: &mut [f64]) -> bool {
        let (wm, hm) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(u >= -EDGE_EPS && u <= wm + EDGE_EPS && v >= -EDGE_EPS && v <= hm + EDGE_EPS) {
            return false;
        }
        let u = u.clamp(0.0, wm);
        let v = v.clamp(0.0, hm);
        let x0 = (u.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (v.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let c = self.channels;
        let at = |y: usize, x: usize| (y * self.width + x) * c;
        let (i00, i01, i10, i11) = (at(y0, x0), at(y0, x1), at(y1, x0), at(y1, x1));
        for (k, o) in out.iter_mut().enumerate() {
            let top = self.data[i00 + k] as f64 * (1.0 - fx) + self.data[i01 + k] as f64 * fx;
            let bot = self.data[i10 + k] as f64 * (1.0 - fx) + self.data[i11 + k] as f64 * fx;
            *o = top * (1.0 - fy) + bot * fy;
        }
        true
    }
}

/// All channels at `(u, v) = (column, row)`, or `None` off the grid.
pub fn sample_map_bilinear(map: &MapView, uv: (f64, f64)) -> Option<Vec<f64>> {
    let mut out = vec![0.0; map.channels];
    map.sample_into(uv.0, uv.1, &mut out).then_some(out)
}

/// Continuous map coordinate of one world coordinate along a grid axis.
fn axis_to_grid(x: f64, n: usize, meta: &SurfaceMeta) -> Option<f64> {
    let s = x / meta.half_width;
    let unit = match meta.warp {
        Warp::Linear => s,
        Warp::BgTrans => bg_transform_inverse(s),
    };
    if !(unit.abs() <= 1.0 + EDGE_EPS) {
        return None;
    }
    Some((unit.clamp(-1.0, 1.0) + 1.0) * 0.5 * (n - 1) as f64)
}

/// Map coordinate `(u = column, v = row)` of a surface point, inverting the
/// gridding placement. `None` when the point falls outside the sampled extent.
pub fn project_to_map(point: Vec3, meta: &SurfaceMeta, height: usize, width: usize) -> Option<(f64, f64)> {
    Some((axis_to_grid(point.x, width, meta)?, axis_to_grid(point.y, height, meta)?))
}

/// Hits farther than the gridding slab are dropped so the renderer only uses
/// surface parts the maps were sampled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub slab_z_min: f64,
    pub slab_z_max: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self::for_grid_range(DEFAULT_T_NEAR, DEFAULT_T_FAR)
    }
}

impl RenderOptions {
    pub fn for_grid_range(t_near: f64, t_far: f64) -> Self {
        Self {
            slab_z_min: GRID_ORIGIN_Z - t_far,
            slab_z_max: GRID_ORIGIN_Z - t_near,
        }
    }
}

fn check_inputs(camera: &Camera, surfaces: &SurfaceSet, maps: &MapStack) -> Result<()> {
    camera.validate()?;
    if maps.len() != surfaces.len() {
        return Err(Error::InvalidArgument(format!(
            "{} maps for {} surfaces",
            maps.len(),
            surfaces.len()
        )));
    }
    if maps.channels < 4 {
        return Err(Error::InvalidArgument(format!(
            "rendering needs rgb + occupancy maps, got {} channels",
            maps.channels
        )));
    }
    if maps.height < 1 || maps.width < 1 {
        return Err(Error::InvalidArgument("empty maps".into()));
    }
    Ok(())
}

/// Walks the hits of one pixel ray front to back, calling `visit(rgba, z)`
/// for every on-map sample until the ray is saturated.
fn trace_pixel(
    ray: &Ray,
    frame: &CameraFrame,
    surfaces: &SurfaceSet,
    maps: &MapStack,
    opts: &RenderOptions,
    mut visit: impl FnMut([f64; 4], f64) -> bool,
) {
    for hit in intersect_ray(ray, surfaces) {
        let p = hit.point;
        if p.z < opts.slab_z_min || p.z > opts.slab_z_max {
            continue;
        }
        let meta = &maps.meta[hit.surface_index];
        let Some((u, v)) = project_to_map(p, meta, maps.height, maps.width) else {
            continue;
        };
        let mut rgba = [0.0; 4];
        MapView::of(maps, hit.surface_index).sample_into(u, v, &mut rgba);
        rgba[3] = rgba[3].clamp(0.0, 1.0);
        let z = (p - frame.position).dot(frame.forward);
        if !visit(rgba, z) {
            break;
        }
    }
}

pub fn render_image(camera: &Camera, surfaces: &SurfaceSet, maps: &MapStack) -> Result<Image> {
    render_image_with(camera, surfaces, maps, &RenderOptions::default())
}

pub fn render_image_with(
    camera: &Camera,
    surfaces: &SurfaceSet,
    maps: &MapStack,
    opts: &RenderOptions,
) -> Result<Image> {
    check_inputs(camera, surfaces, maps)?;
    let frame = camera.frame();
    let mut img = Image::zeros(camera.height, camera.width);
    let w = camera.width;
    img.data.par_chunks_mut(w * 3).enumerate().for_each(|(row, out)| {
        for col in 0..w {
            let ray = camera.pixel_ray(&frame, row, col);
            let mut t = 1.0;
            let mut c = [0.0f64; 3];
            trace_pixel(&ray, &frame, surfaces, maps, opts, |rgba, _| {
                let wgt = t * rgba[3];
                for k in 0..3 {
                    c[k] += wgt * rgba[k];
                }
                t *= 1.0 - rgba[3];
                t > 0.0
            });
            for k in 0..3 {
                out[col * 3 + k] = c[k].clamp(0.0, 1.0) as f32;
            }
        }
    });
    Ok(img)
}

pub fn render_depth(camera: &Camera, surfaces: &SurfaceSet, maps: &MapStack) -> Result<DepthMap> {
    render_depth_with(camera, surfaces, maps, &RenderOptions::default())
}

pub fn render_depth_with(
    camera: &Camera,
    surfaces: &SurfaceSet,
    maps: &MapStack,
    opts: &RenderOptions,
) -> Result<DepthMap> {
    check_inputs(camera, surfaces, maps)?;
    let frame = camera.frame();
    let (h, w) = (camera.height, camera.width);
    let mut both = vec![(0.0f32, 0.0f32); h * w];
    both.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
        for (col, o) in out.iter_mut().enumerate() {
            let ray = camera.pixel_ray(&frame, row, col);
            let (mut t, mut d, mut cov) = (1.0f64, 0.0f64, 0.0f64);
            trace_pixel(&ray, &frame, surfaces, maps, opts, |rgba, z| {
                let wgt = t * rgba[3];
                d += wgt * z;
                cov += wgt;
                t *= 1.0 - rgba[3];
                t > 0.0
            });
            *o = (d as f32, cov as f32);
        }
    });
    let (depth, coverage) = both.into_iter().unzip();
    Ok(DepthMap {
        height: h,
        width: w,
        depth,
        coverage,
    })
}

/// Stacks row `row`, columns `cols`, of every image: output row `k` comes
/// from image `k`.
pub fn build_epi(images: &[Image], row: usize, cols: std::ops::Range<usize>) -> Result<Image> {
    if images.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "an EPI needs at least 2 images, got {}",
            images.len()
        )));
    }
    let (h, w) = (images[0].height, images[0].width);
    if images.iter().any(|im| im.width != w || im.height != h) {
        return Err(Error::InvalidArgument("EPI images must share one size".into()));
    }
    if row >= h || cols.start >= cols.end || cols.end > w {
        return Err(Error::InvalidArgument(format!(
            "EPI segment row {row}, columns {cols:?} outside {h}x{w} images"
        )));
    }
    let n = cols.end - cols.start;
    let mut data = Vec::with_capacity(images.len() * n * 3);
    for im in images {
        let start = (row * w + cols.start) * 3;
        data.extend_from_slice(&im.data[start..start + n * 3]);
    }
    Image::new(images.len(), n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::init_default_surfaces;
    use crate::gridding::{grid_rays, DEFAULT_BG_HALF_WIDTH, DEFAULT_FG_HALF_WIDTH};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fg_meta() -> SurfaceMeta {
        SurfaceMeta {
            half_width: DEFAULT_FG_HALF_WIDTH,
            is_background: false,
            warp: Warp::Linear,
        }
    }

    fn bg_meta() -> SurfaceMeta {
        SurfaceMeta {
            half_width: DEFAULT_BG_HALF_WIDTH,
            is_background: true,
            warp: Warp::BgTrans,
        }
    }

    #[test]
    fn composite_examples() {
        let c = composite(&[([1.0; 3], 0.5), ([0.0; 3], 1.0)]);
        assert_eq!(c.color, [0.5; 3]);
        assert_eq!(c.weights, vec![0.5, 0.5]);
        assert_eq!(c.transmittance, vec![1.0, 0.5]);

        let c = composite(&[([0.2, 0.4, 0.9], 1.0)]);
        assert_eq!(c.color, [0.2, 0.4, 0.9]);

        let c = composite(&[([1.0; 3], 0.0), ([0.3; 3], 0.0)]);
        assert_eq!(c.color, [0.0; 3]);
        assert!(c.weights.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn gradient_examples() {
        let g = composite_gradients(&[([0.3, 0.6, 0.9], 0.7)]);
        assert_eq!(g.d_color, vec![0.7]);
        assert_eq!(g.d_alpha[0], [0.3, 0.6, 0.9]);

        let (c1, c2) = ([0.9, 0.2, 0.4], [0.1, 0.5, 0.3]);
        let g = composite_gradients(&[(c1, 0.5), (c2, 1.0)]);
        for k in 0..3 {
            assert!((g.d_alpha[0][k] - (c1[k] - c2[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_at_opaque_sample_uses_products() {
        let s = [([0.2, 0.3, 0.4], 0.3), ([0.5, 0.1, 0.9], 1.0), ([0.7, 0.7, 0.1], 0.6)];
        let g = composite_gradients(&s);
        // C = a0 c0 + (1-a0) a1 c1 + (1-a0)(1-a1) a2 c2; d/da1 = (1-a0)(c1 - a2 c2)
        for k in 0..3 {
            let want = 0.7 * (s[1].0[k] - 0.6 * s[2].0[k]);
            assert!((g.d_alpha[1][k] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-4;
        for _ in 0..200 {
            let s: Vec<([f64; 3], f64)> = (0..5)
                .map(|_| {
                    (
                        [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
                        rng.random_range(0.01..0.99),
                    )
                })
                .collect();
            let g = composite_gradients(&s);
            for i in 0..5 {
                let mut p = s.clone();
                let mut m = s.clone();
                p[i].1 += h;
                m[i].1 -= h;
                let (cp, cm) = (composite(&p).color, composite(&m).color);
                for k in 0..3 {
                    let fd = (cp[k] - cm[k]) / (2.0 * h);
                    assert!((fd - g.d_alpha[i][k]).abs() <= 1e-5 * fd.abs().max(1e-3));
                }
            }
        }
    }

    #[test]
    fn bilinear_examples() {
        // f(x, y) = x + 2y on a 3x4 grid
        let (h, w) = (3, 4);
        let data: Vec<f32> = (0..h * w).map(|i| ((i % w) + 2 * (i / w)) as f32).collect();
        let map = MapView {
            data: &data,
            height: h,
            width: w,
            channels: 1,
        };
        assert_eq!(sample_map_bilinear(&map, (2.0, 1.0)).unwrap(), vec![4.0]);
        assert_eq!(sample_map_bilinear(&map, (0.5, 0.5)).unwrap(), vec![1.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (u, v) = (rng.random_range(0.0..3.0), rng.random_range(0.0..2.0));
            let got = sample_map_bilinear(&map, (u, v)).unwrap()[0];
            assert!((got - (u + 2.0 * v)).abs() < 1e-12);
        }
        assert!(sample_map_bilinear(&map, (3.0, 2.0)).is_some());
        assert!(sample_map_bilinear(&map, (3.01, 0.0)).is_none());
        assert!(sample_map_bilinear(&map, (0.0, -0.01)).is_none());
    }

    #[test]
    fn projection_inverts_grid_placement() {
        let m = fg_meta();
        let (u, v) = project_to_map(Vec3::new(0.0, 0.0, -1.0), &m, 64, 64).unwrap();
        assert_eq!((u, v), (31.5, 31.5));
        let (u, _) = project_to_map(Vec3::new(1.0, 0.0, -1.0), &m, 64, 64).unwrap();
        assert_eq!(u, 63.0);
        assert!(project_to_map(Vec3::new(1.01, 0.0, -1.0), &m, 64, 64).is_none());

        for meta in [fg_meta(), bg_meta()] {
            let rays = grid_rays(17, 23, meta.half_width, meta.warp).unwrap();
            for (i, r) in rays.iter().enumerate() {
                let (u, v) = project_to_map(r.origin, &meta, 17, 23).unwrap();
                assert!((u - (i % 23) as f64).abs() < 1e-5);
                assert!((v - (i / 23) as f64).abs() < 1e-5);
            }
        }
        assert!(project_to_map(Vec3::new(7.0, 0.0, -1.0), &bg_meta(), 64, 64).is_none());
    }

    #[test]
    fn camera_frame_and_projection() {
        let cam = Camera::default();
        let f = cam.frame();
        assert!((f.position - Vec3::new(0.0, 0.0, 1.2)).norm() < 1e-12);
        assert!((f.forward - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((f.right - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((f.up - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);

        let cam = Camera {
            yaw: 0.3,
            pitch: -0.2,
            roll: 0.1,
            ..Camera::default()
        }
        .with_resolution(40, 60);
        let f = cam.frame();
        for (r, c) in [(0.0, 0.0), (13.0, 41.0), (39.0, 59.0)] {
            let p = f.position + cam.pixel_direction(&f, r, c) * 2.3;
            let (pr, pc, z) = cam.project(&f, p).unwrap();
            assert!((pr - r).abs() < 1e-9 && (pc - c).abs() < 1e-9);
            assert!(z > 0.0);
        }
        assert!(cam.project(&f, f.position - f.forward).is_none());
    }

    #[test]
    fn camera_validation() {
        let mut cam = Camera::default();
        cam.fov_deg = 120.0;
        assert!(cam.validate().is_err());
        cam.fov_deg = 30.0;
        cam.height = 0;
        assert!(cam.validate().is_err());
    }

    fn constant_maps(n: usize, meta: Vec<SurfaceMeta>, rgba: [f32; 4], which: usize) -> MapStack {
        let mut maps = MapStack::zeros(meta, 8, 8, 4);
        for px in maps.surface_mut(which).chunks_exact_mut(4) {
            px.copy_from_slice(&rgba);
        }
        assert_eq!(maps.len(), n);
        maps
    }

    #[test]
    fn opaque_background_renders_uniformly() {
        let surfaces = init_default_surfaces(3).unwrap();
        let meta = vec![fg_meta(), fg_meta(), bg_meta()];
        let maps = constant_maps(3, meta, [0.2, 0.5, 0.8, 1.0], 2);
        let img = render_image(&Camera::default().with_resolution(16, 16), &surfaces, &maps).unwrap();
        for px in img.data.chunks_exact(3) {
            assert!((px[0] - 0.2).abs() < 1e-6 && (px[1] - 0.5).abs() < 1e-6 && (px[2] - 0.8).abs() < 1e-6);
        }
        let depth = render_depth(&Camera::default().with_resolution(16, 16), &surfaces, &maps).unwrap();
        // centre pixel ray is close to the axis: plane at z = -1, camera at z = 1.2
        let d = depth.at(8, 8);
        assert!((d - 2.2).abs() < 1e-4, "{d}");
        assert!(depth.coverage.iter().all(|c| (c - 1.0).abs() < 1e-6));
    }

    #[test]
    fn empty_maps_render_black_with_zero_depth() {
        let surfaces = init_default_surfaces(4).unwrap();
        let maps = MapStack::zeros(vec![fg_meta(), fg_meta(), fg_meta(), bg_meta()], 8, 8, 4);
        let cam = Camera::default().with_resolution(8, 8);
        assert!(render_image(&cam, &surfaces, &maps).unwrap().data.iter().all(|v| *v == 0.0));
        assert!(render_depth(&cam, &surfaces, &maps).unwrap().depth.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_maps_rejected() {
        let surfaces = init_default_surfaces(4).unwrap();
        let maps = MapStack::zeros(vec![fg_meta(), bg_meta()], 8, 8, 4);
        assert!(render_image(&Camera::default(), &surfaces, &maps).is_err());
    }

    #[test]
    fn epi_shape_and_static_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = Image::new(4, 300, (0..3600).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let imgs = vec![img; 30];
        let epi = build_epi(&imgs, 2, 10..266).unwrap();
        assert_eq!((epi.height, epi.width), (30, 256));
        for r in 1..30 {
            assert_eq!(epi.data[r * 768..(r + 1) * 768], epi.data[..768]);
        }
        assert!(build_epi(&imgs, 4, 0..10).is_err());
        assert!(build_epi(&imgs[..1], 0, 0..10).is_err());
        assert!(build_epi(&imgs, 0, 0..301).is_err());
    }
}
