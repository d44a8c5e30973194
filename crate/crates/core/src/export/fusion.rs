use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{sigmoid, Vec3};
use crate::render::{Camera, DepthMap};

/// Regular lattice of `resolution³` points spanning a box, corners included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: usize,
    pub min: Vec3,
    pub max: Vec3,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 128,
            min: Vec3::new(-1.0, -1.0, -2.5),
            max: Vec3::new(1.0, 1.0, -0.5),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        if !(self.min.x < self.max.x && self.min.y < self.max.y && self.min.z < self.max.z) {
            return Err(Error::InvalidArgument("grid box must have positive extent".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> Vec3 {
        (self.max - self.min) / (self.resolution - 1) as f64
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let s = self.spacing();
        Vec3::new(
            self.min.x + s.x * i as f64,
            self.min.y + s.y * j as f64,
            self.min.z + s.z * k as f64,
        )
    }
}

/// Scalar field on a [`GridSpec`] lattice, `values[(k * n + j) * n + i]`
/// with `i` along x.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    pub values: Vec<f32>,
}

impl OccupancyGrid {
    pub fn new(spec: GridSpec, values: Vec<f32>) -> Result<Self> {
        spec.validate()?;
        let n = spec.resolution;
        if values.len() != n * n * n {
            return Err(Error::InvalidArgument(format!(
                "grid of resolution {n} needs {} values, got {}",
                n * n * n,
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn(spec: GridSpec, f: impl Fn(Vec3) -> f64 + Sync) -> Result<Self> {
        spec.validate()?;
        let n = spec.resolution;
        let mut values = vec![0.0f32; n * n * n];
        values.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                for i in 0..n {
                    slab[j * n + i] = f(spec.point(i, j, k)) as f32;
                }
            }
        });
        Ok(Self { spec, values })
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f32 {
        let n = self.spec.resolution;
        self.values[(k * n + j) * n + i]
    }

    pub fn voxel_size(&self) -> f64 {
        let s = self.spec.spacing();
        s.x.max(s.y).max(s.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionOptions {
    /// Sigmoid sharpness.
    pub k: f64,
    /// Views in which a point lies more than this far behind the observed
    /// depth are treated as occluded and left out of the mean. `None` keeps
    /// every in-frustum view.
    pub occlusion_margin: Option<f64>,
    /// Pixels whose accumulated weight is below this count as empty.
    pub min_coverage: f32,
}

impl Default for FusionOptions {
    fn default() -> Self {
        Self {
            k: 10.0,
            occlusion_margin: Some(0.2),
            min_coverage: 0.5,
        }
    }
}

/// `count` cameras based on `base`: yaws evenly spread over
/// `[-yaw_span, yaw_span]`, pitches cycling through `-pitch, 0, +pitch`.
pub fn orbit_cameras(base: &Camera, count: usize, yaw_span: f64, pitch: f64) -> Vec<Camera> {
    let yaws = if count == 1 { vec![0.0] } else { crate::math::linspace(-yaw_span, yaw_span, count) };
    yaws.into_iter()
        .enumerate()
        .map(|(i, yaw)| Camera {
            yaw,
            pitch: [-pitch, 0.0, pitch][i % 3],
            ..*base
        })
        .collect()
}

pub fn fuse_occupancy(views: &[(DepthMap, Camera)], grid: &GridSpec) -> Result<OccupancyGrid> {
    fuse_occupancy_with(views, grid, &FusionOptions::default())
}

/// Per grid point and view, `α = sigmoid(k (z - d))` with `z` the point's
/// camera depth and `d` the depth observed at its pixel; the grid value is
/// the mean over views that see the point.
///
/// Points no view sees get 0.5; points every covering view reports as
/// occluded get 1.
pub fn fuse_occupancy_with(
    views: &[(DepthMap, Camera)],
    grid: &GridSpec,
    opts: &FusionOptions,
) -> Result<OccupancyGrid> {
    grid.validate()?;
    if views.is_empty() {
        return Err(Error::InvalidArgument("depth fusion needs at least one view".into()));
    }
    for (d, cam) in views {
        cam.validate()?;
        if d.height != cam.height || d.width != cam.width {
            return Err(Error::InvalidArgument(format!(
                "depth map {}x{} does not match camera {}x{}",
                d.height, d.width, cam.height, cam.width
            )));
        }
    }
    let frames: Vec<_> = views.iter().map(|(_, c)| c.frame()).collect();
    let n = grid.resolution;
    let mut values = vec![0.0f32; n * n * n];
    values.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
        for j in 0..n {
            for i in 0..n {
                let p = grid.point(i, j, k);
                let (mut sum, mut count, mut occluded) = (0.0, 0usize, 0usize);
                for ((depth, cam), frame) in views.iter().zip(&frames) {
                    let Some((row, col, z)) = cam.project(frame, p) else {
                        continue;
                    };
                    let (r, c) = (row.round(), col.round());
                    if r < 0.0 || c < 0.0 || r >= cam.height as f64 || c >= cam.width as f64 {
                        continue;
                    }
                    let idx = r as usize * cam.width + c as usize;
                    let cov = depth.coverage[idx];
                    let d = if cov >= opts.min_coverage {
                        depth.depth[idx] as f64 / cov as f64
                    } else {
                        f64::INFINITY
                    };
                    if let Some(m) = opts.occlusion_margin {
                        if z - d > m {
                            occluded += 1;
                            continue;
                        }
                    }
                    sum += sigmoid(opts.k * (z - d));
                    count += 1;
                }
                slab[j * n + i] = if count > 0 {
                    (sum / count as f64) as f32
                } else if occluded > 0 {
                    1.0
                } else {
                    0.5
                };
            }
        }
    });
    OccupancyGrid::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_view(depth: f32, h: usize, w: usize) -> (DepthMap, Camera) {
        let cam = Camera::default().with_resolution(h, w);
        let map = DepthMap {
            height: h,
            width: w,
            depth: vec![depth; h * w],
            coverage: vec![1.0; h * w],
        };
        (map, cam)
    }

    fn tiny_spec(z: f64) -> GridSpec {
        GridSpec {
            resolution: 2,
            min: Vec3::new(-0.01, -0.01, z),
            max: Vec3::new(0.01, 0.01, z + 1e-9),
        }
    }

    #[test]
    fn point_on_observed_depth_is_half() {
        // default camera sits at z = 1.2 looking down -z
        let view = flat_view(2.7, 16, 16);
        let g = fuse_occupancy_with(&[view], &tiny_spec(-1.5), &FusionOptions::default()).unwrap();
        assert!(g.values.iter().all(|v| (v - 0.5).abs() < 1e-3), "{:?}", g.values);
    }

    #[test]
    fn point_one_unit_behind_is_sigmoid_ten() {
        let view = flat_view(1.7, 16, 16);
        let opts = FusionOptions {
            occlusion_margin: None,
            ..FusionOptions::default()
        };
        let g = fuse_occupancy_with(&[view], &tiny_spec(-1.5), &opts).unwrap();
        let want = sigmoid(10.0) as f32;
        assert!(g.values.iter().all(|v| (v - want).abs() < 1e-3));
        assert!((want - 0.99995).abs() < 1e-5);
    }

    #[test]
    fn unseen_points_are_uninformative() {
        let view = flat_view(2.7, 16, 16);
        let spec = GridSpec {
            resolution: 2,
            min: Vec3::new(5.0, 5.0, -1.5),
            max: Vec3::new(5.1, 5.1, -1.4),
        };
        let g = fuse_occupancy(&[view], &spec).unwrap();
        assert!(g.values.iter().all(|v| *v == 0.5));
        assert!(fuse_occupancy(&[], &spec).is_err());
    }

    #[test]
    fn occluded_only_points_are_full() {
        let view = flat_view(1.0, 16, 16);
        let g = fuse_occupancy(&[view], &tiny_spec(-1.5)).unwrap();
        assert!(g.values.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn plain_mean_is_monotone_along_depth() {
        let views: Vec<_> = [2.0f32, 2.5, 3.1].iter().map(|d| flat_view(*d, 8, 8)).collect();
        let opts = FusionOptions {
            occlusion_margin: None,
            ..FusionOptions::default()
        };
        let mut last = 0.0;
        for s in 0..40 {
            let z = 0.5 - 0.1 * s as f64;
            let g = fuse_occupancy_with(&views, &tiny_spec(z), &opts).unwrap();
            assert!(g.values[0] >= last);
            last = g.values[0];
        }
    }
}
