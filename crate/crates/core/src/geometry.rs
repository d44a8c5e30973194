//! Manifold geometry: the scalar field, its iso-surfaces and ray intersection.
//!
//! Two field modes exist. The analytic mode is a Euclidean distance field around
//! a center point whose level sets are concentric spheres, plus a separate
//! background plane. The MLP mode is a small smooth network whose level sets are
//! located numerically along each ray.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::math::{linspace, Vec3};
use crate::params::{DenseRef, NetParams, Tensor};

pub const DEFAULT_CENTER: Vec3 = Vec3::new(0.0, 0.0, -1.5);
pub const DEFAULT_PLANE_Z: f64 = -1.0;
pub const DEFAULT_N_SURFACES: usize = 24;
pub const DEFAULT_RADIUS_MIN: f64 = 0.5;
pub const DEFAULT_RADIUS_MAX: f64 = 2.6;
pub const DEFAULT_T_NEAR: f64 = 0.1;
pub const DEFAULT_T_FAR: f64 = 6.0;

/// Below this magnitude a sphere discriminant counts as a single tangent hit.
pub const TANGENT_EPS: f64 = 1e-10;

/// Dense layers of a scalar-field network, resolved from [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpField {
    pub prefix: String,
    /// Layer widths including the 3-wide input and 1-wide output.
    pub widths: Vec<usize>,
    layers: Arc<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl MlpField {
    pub fn from_params(params: &NetParams, prefix: &str) -> Result<Self> {
        let mut layers = Vec::new();
        let mut widths = vec![3];
        let mut i = 0;
        while params.contains(&format!("{prefix}.{i}.weight")) {
            let w = params.get(&format!("{prefix}.{i}.weight"))?;
            if w.shape.len() != 2 || w.shape[1] != *widths.last().unwrap() {
                return Err(Error::ModelFormat(format!(
                    "`{prefix}.{i}.weight` has shape {:?}, expected (_, {})",
                    w.shape,
                    widths.last().unwrap()
                )));
            }
            let out = w.shape[0];
            let dense = DenseRef::load(params, &format!("{prefix}.{i}"), None, out)?;
            layers.push((
                dense.weight.iter().map(|&v| v as f64).collect(),
                dense.bias.iter().map(|&v| v as f64).collect(),
            ));
            widths.push(out);
            i += 1;
        }
        if layers.is_empty() {
            return Err(Error::MissingWeights(format!("{prefix}.0.weight")));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::ModelFormat(format!(
                "scalar field `{prefix}` must end in a single output, got {}",
                widths.last().unwrap()
            )));
        }
        Ok(Self {
            prefix: prefix.to_string(),
            widths,
            layers: Arc::new(layers),
        })
    }

    /// Affine layers with softplus between them; the last layer is linear.
    pub fn eval(&self, p: Vec3) -> f64 {
        let mut act = vec![p.x, p.y, p.z];
        let n = self.layers.len();
        for (li, (w, b)) in self.layers.iter().enumerate() {
            let in_dim = act.len();
            let mut next = b.clone();
            for (o, v) in next.iter_mut().enumerate() {
                let row = &w[o * in_dim..(o + 1) * in_dim];
                *v += row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>();
            }
            if li + 1 < n {
                for v in next.iter_mut() {
                    *v = softplus64(*v);
                }
            }
            act = next;
        }
        act[0]
    }
}

fn softplus64(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    AnalyticSpherePlane { center: Vec3, plane_z: f64 },
    Mlp(MlpField),
}

pub fn eval_scalar_field(point: Vec3, field: &ScalarField) -> f64 {
    match field {
        ScalarField::AnalyticSpherePlane { center, .. } => (point - *center).norm(),
        ScalarField::Mlp(mlp) => mlp.eval(point),
    }
}

/// Numerical settings for locating MLP-field level crossings along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootFinding {
    pub samples: usize,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for RootFinding {
    fn default() -> Self {
        Self {
            samples: 64,
            max_iters: 20,
            tolerance: 1e-5,
        }
    }
}

/// The N manifold surfaces. The last one is the background.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSet {
    pub field: ScalarField,
    /// One level per surface. In analytic mode the foreground levels are sphere
    /// radii and the background entry is `+inf`, since the background there is
    /// the plane `z = plane_z` rather than a level set.
    pub levels: Vec<f64>,
    pub root_finding: RootFinding,
}

impl SurfaceSet {
    pub fn new(field: ScalarField, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("surface set needs at least one level".into()));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(format!(
                "surface levels must be strictly increasing: {levels:?}"
            )));
        }
        if let ScalarField::AnalyticSpherePlane { .. } = field {
            if levels[..levels.len() - 1].iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
                return Err(Error::InvalidArgument("sphere radii must be positive".into()));
            }
        }
        Ok(Self {
            field,
            levels,
            root_finding: RootFinding::default(),
        })
    }

    /// Concentric spheres around `center` plus the plane `z = plane_z`.
    pub fn analytic(center: Vec3, radii: &[f64], plane_z: f64) -> Result<Self> {
        let mut levels = radii.to_vec();
        levels.push(f64::INFINITY);
        Self::new(ScalarField::AnalyticSpherePlane { center, plane_z }, levels)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn background_index(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn is_background(&self, index: usize) -> bool {
        index == self.background_index()
    }

    /// Analytic sphere radii (all levels except the background).
    pub fn radii(&self) -> &[f64] {
        &self.levels[..self.levels.len() - 1]
    }

    /// Tensors describing this set, for storage next to the network weights.
    pub fn to_params(&self) -> NetParams {
        let mut p = NetParams::new();
        let (mode, center, plane_z) = match &self.field {
            ScalarField::AnalyticSpherePlane { center, plane_z } => (0.0, *center, *plane_z),
            ScalarField::Mlp(_) => (1.0, Vec3::ZERO, 0.0),
        };
        p.insert("surfaces.mode", Tensor::scalar(mode));
        p.insert(
            "surfaces.center",
            Tensor {
                shape: vec![3],
                data: vec![center.x as f32, center.y as f32, center.z as f32],
            },
        );
        p.insert("surfaces.plane_z", Tensor::scalar(plane_z as f32));
        p.insert(
            "surfaces.levels",
            Tensor {
                shape: vec![self.levels.len()],
                data: self.levels.iter().map(|&l| l as f32).collect(),
            },
        );
        let rf = self.root_finding;
        p.insert(
            "surfaces.root_finding",
            Tensor {
                shape: vec![3],
                data: vec![rf.samples as f32, rf.max_iters as f32, rf.tolerance as f32],
            },
        );
        if let ScalarField::Mlp(mlp) = &self.field {
            for (i, (w, b)) in mlp.layers.iter().enumerate() {
                let (o, inp) = (mlp.widths[i + 1], mlp.widths[i]);
                p.insert(
                    format!("{}.{i}.weight", mlp.prefix),
                    Tensor {
                        shape: vec![o, inp],
                        data: w.iter().map(|&v| v as f32).collect(),
                    },
                );
                p.insert(
                    format!("{}.{i}.bias", mlp.prefix),
                    Tensor {
                        shape: vec![o],
                        data: b.iter().map(|&v| v as f32).collect(),
                    },
                );
            }
        }
        p
    }

    pub fn from_params(params: &NetParams) -> Result<Self> {
        let mode = params.expect("surfaces.mode", &[1])?.data[0];
        let levels_t = params.get("surfaces.levels")?;
        let levels: Vec<f64> = levels_t.data.iter().map(|&l| l as f64).collect();
        let field = if mode == 0.0 {
            let c = &params.expect("surfaces.center", &[3])?.data;
            let plane_z = params.expect("surfaces.plane_z", &[1])?.data[0] as f64;
            ScalarField::AnalyticSpherePlane {
                center: Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64),
                plane_z,
            }
        } else if mode == 1.0 {
            ScalarField::Mlp(MlpField::from_params(params, MANIFOLD_PREFIX)?)
        } else {
            return Err(Error::ModelFormat(format!("unknown surface mode {mode}")));
        };
        let mut set = SurfaceSet::new(field, levels)?;
        if let Ok(rf) = params.expect("surfaces.root_finding", &[3]) {
            set.root_finding = RootFinding {
                samples: rf.data[0] as usize,
                max_iters: rf.data[1] as usize,
                tolerance: rf.data[2].to_string().parse().unwrap_or(rf.data[2] as f64),
            };
        }
        Ok(set)
    }
}

pub const MANIFOLD_PREFIX: &str = "manifold";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_near: f64, t_far: f64) -> Result<Self> {
        if !origin.is_finite() || !direction.is_finite() {
            return Err(Error::InvalidArgument("ray with non-finite components".into()));
        }
        if ((direction.norm()) - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "ray direction must be unit length, |d| = {}",
                direction.norm()
            )));
        }
        if !(t_near < t_far) {
            return Err(Error::InvalidArgument(format!(
                "ray needs t_near < t_far, got [{t_near}, {t_far}]"
            )));
        }
        Ok(Self {
            origin,
            direction,
            t_near,
            t_far,
        })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub point: Vec3,
    pub surface_index: usize,
    pub t: f64,
}

/// All crossings of `ray` with every surface, sorted by ascending `t`.
pub fn intersect_ray(ray: &Ray, surfaces: &SurfaceSet) -> Vec<Intersection> {
    let mut hits = Vec::with_capacity(2 * surfaces.len());
    match &surfaces.field {
        ScalarField::AnalyticSpherePlane { center, plane_z } => {
            for (i, &r) in surfaces.radii().iter().enumerate() {
                sphere_hits(ray, *center, r, i, &mut hits);
            }
            plane_hit(ray, *plane_z, surfaces.background_index(), &mut hits);
        }
        ScalarField::Mlp(mlp) => {
            let all: Vec<usize> = (0..surfaces.len()).collect();
            mlp_hits(ray, mlp, &surfaces.levels, &all, surfaces.root_finding, &mut hits);
        }
    }
    sort_hits(&mut hits);
    hits
}

/// Crossings of `ray` with a single surface, sorted by `t`.
pub fn intersect_surface(ray: &Ray, surfaces: &SurfaceSet, index: usize) -> Vec<Intersection> {
    let mut hits = Vec::with_capacity(2);
    match &surfaces.field {
        ScalarField::AnalyticSpherePlane { center, plane_z } => {
            if surfaces.is_background(index) {
                plane_hit(ray, *plane_z, index, &mut hits);
            } else {
                sphere_hits(ray, *center, surfaces.levels[index], index, &mut hits);
            }
        }
        ScalarField::Mlp(mlp) => {
            mlp_hits(ray, mlp, &surfaces.levels, &[index], surfaces.root_finding, &mut hits);
        }
    }
    sort_hits(&mut hits);
    hits
}

fn sort_hits(hits: &mut [Intersection]) {
    hits.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then(a.surface_index.cmp(&b.surface_index))
    });
}

fn in_range(ray: &Ray, t: f64) -> bool {
    t >= ray.t_near && t <= ray.t_far
}

fn sphere_hits(ray: &Ray, center: Vec3, radius: f64, index: usize, out: &mut Vec<Intersection>) {
    let oc = ray.origin - center;
    let b = oc.dot(ray.direction);
    let c = oc.dot(oc) - radius * radius;
    let disc = b * b - c;
    if disc.abs() < TANGENT_EPS {
        let t = -b;
        if in_range(ray, t) {
            out.push(Intersection {
                point: ray.at(t),
                surface_index: index,
                t,
            });
        }
        return;
    }
    if disc < 0.0 {
        return;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -b - b.signum() * sq;
    let (mut t0, mut t1) = if q == 0.0 { (-b - sq, -b + sq) } else { (q, c / q) };
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    for t in [t0, t1] {
        if in_range(ray, t) {
            out.push(Intersection {
                point: ray.at(t),
                surface_index: index,
                t,
            });
        }
    }
}

fn plane_hit(ray: &Ray, plane_z: f64, index: usize, out: &mut Vec<Intersection>) {
    if ray.direction.z == 0.0 {
        return;
    }
    let t = (plane_z - ray.origin.z) / ray.direction.z;
    if in_range(ray, t) {
        let mut point = ray.at(t);
        point.z = plane_z;
        out.push(Intersection {
            point,
            surface_index: index,
            t,
        });
    }
}

fn mlp_hits(
    ray: &Ray,
    mlp: &MlpField,
    levels: &[f64],
    which: &[usize],
    rf: RootFinding,
    out: &mut Vec<Intersection>,
) {
    let ts = linspace(ray.t_near, ray.t_far, rf.samples.max(2));
    let vals: Vec<f64> = ts.iter().map(|&t| mlp.eval(ray.at(t))).collect();
    for &index in which {
        let level = levels[index];
        for k in 0..ts.len() - 1 {
            let (fa, fb) = (vals[k] - level, vals[k + 1] - level);
            if fa == 0.0 {
                out.push(Intersection {
                    point: ray.at(ts[k]),
                    surface_index: index,
                    t: ts[k],
                });
                continue;
            }
            // The right endpoint of the last interval is checked here since no
            // later interval starts there.
            if fb == 0.0 && k + 1 == ts.len() - 1 {
                out.push(Intersection {
                    point: ray.at(ts[k + 1]),
                    surface_index: index,
                    t: ts[k + 1],
                });
                continue;
            }
            if fa.signum() == fb.signum() || fb == 0.0 {
                continue;
            }
            let t = refine_root(|t| mlp.eval(ray.at(t)) - level, ts[k], ts[k + 1], fa, fb, rf);
            out.push(Intersection {
                point: ray.at(t),
                surface_index: index,
                t,
            });
        }
    }
}

/// Secant iteration safeguarded by the sign-change bracket `[a, b]`.
fn refine_root(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    fb: f64,
    rf: RootFinding,
) -> f64 {
    let (mut x0, mut f0, mut x1, mut f1) = (a, fa, b, fb);
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..rf.max_iters {
        if best.1.abs() < rf.tolerance {
            break;
        }
        let mut x = if f1 != f0 {
            x1 - f1 * (x1 - x0) / (f1 - f0)
        } else {
            0.5 * (a + b)
        };
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        x0 = x1;
        f0 = f1;
        x1 = x;
        f1 = fx;
    }
    // Secant steps stall on strongly curved brackets; finish with bisection.
    let mut guard = 0;
    while best.1.abs() >= rf.tolerance && guard < 200 {
        let x = 0.5 * (a + b);
        let fx = f(x);
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        guard += 1;
    }
    best.0
}

/// Default analytic set: `n_surfaces - 1` concentric spheres around
/// `(0, 0, -1.5)` with evenly spaced radii, plus the background plane `z = -1`.
pub fn init_default_surfaces(n_surfaces: usize) -> Result<SurfaceSet> {
    init_surfaces(n_surfaces, DEFAULT_RADIUS_MIN, DEFAULT_RADIUS_MAX)
}

pub fn init_surfaces(n_surfaces: usize, r_min: f64, r_max: f64) -> Result<SurfaceSet> {
    if n_surfaces < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 surfaces (one sphere and the background), got {n_surfaces}"
        )));
    }
    if !(r_min > 0.0 && r_min < r_max) && n_surfaces > 2 {
        return Err(Error::InvalidArgument(format!(
            "radius range must satisfy 0 < r_min < r_max, got [{r_min}, {r_max}]"
        )));
    }
    let radii = linspace(r_min, r_max, n_surfaces - 1);
    SurfaceSet::analytic(DEFAULT_CENTER, &radii, DEFAULT_PLANE_Z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn down_ray(x: f64, y: f64) -> Ray {
        Ray::new(Vec3::new(x, y, 1.0), Vec3::new(0.0, 0.0, -1.0), 0.1, 6.0).unwrap()
    }

    fn analytic_field() -> ScalarField {
        ScalarField::AnalyticSpherePlane {
            center: DEFAULT_CENTER,
            plane_z: DEFAULT_PLANE_Z,
        }
    }

    #[test]
    fn analytic_field_is_distance_to_center() {
        let f = analytic_field();
        assert_eq!(eval_scalar_field(Vec3::new(0.0, 0.0, -1.5), &f), 0.0);
        assert_eq!(eval_scalar_field(Vec3::new(0.0, 0.0, -0.5), &f), 1.0);
        assert_eq!(eval_scalar_field(Vec3::new(1.0, 0.0, -1.5), &f), 1.0);
    }

    #[test]
    fn unit_sphere_on_axis_hits_twice() {
        let set = SurfaceSet::analytic(DEFAULT_CENTER, &[1.0], -100.0).unwrap();
        let hits = intersect_surface(&down_ray(0.0, 0.0), &set, 0);
        assert_eq!(hits.len(), 2);
        assert!((hits[0].point.z - -0.5).abs() < 1e-12);
        assert!((hits[1].point.z - -2.5).abs() < 1e-12);
        assert!(hits[0].t < hits[1].t);
    }

    #[test]
    fn background_plane_hit() {
        let set = SurfaceSet::analytic(DEFAULT_CENTER, &[1.0], -1.0).unwrap();
        let hits = intersect_surface(&down_ray(0.0, 0.0), &set, 1);
        assert_eq!(hits.len(), 1);
        assert!((hits[0].t - 2.0).abs() < 1e-12);
        assert_eq!(hits[0].point, Vec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn ray_outside_sphere_misses() {
        let set = SurfaceSet::analytic(DEFAULT_CENTER, &[1.0], -1.0).unwrap();
        let hits = intersect_ray(&down_ray(5.0, 5.0), &set);
        assert!(hits.iter().all(|h| h.surface_index == 1));
    }

    #[test]
    fn tangent_ray_counts_once() {
        let set = SurfaceSet::analytic(DEFAULT_CENTER, &[1.0], -100.0).unwrap();
        let hits = intersect_surface(&down_ray(1.0, 0.0), &set, 0);
        assert_eq!(hits.len(), 1);
        assert!((hits[0].point.z - -1.5).abs() < 1e-9);
    }

    #[test]
    fn all_hits_sorted_and_on_ray() {
        let set = init_default_surfaces(24).unwrap();
        let d = Vec3::new(0.1, -0.05, -1.0).normalized();
        let ray = Ray::new(Vec3::new(0.0, 0.0, 1.2), d, 0.1, 6.0).unwrap();
        let hits = intersect_ray(&ray, &set);
        assert!(!hits.is_empty());
        for w in hits.windows(2) {
            assert!(w[0].t <= w[1].t);
        }
        for h in &hits {
            assert!((h.point - ray.at(h.t)).norm() < 1e-6);
            if !set.is_background(h.surface_index) {
                let s = eval_scalar_field(h.point, &set.field);
                assert!((s - set.levels[h.surface_index]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn default_surfaces() {
        let set = init_default_surfaces(24).unwrap();
        assert_eq!(set.len(), 24);
        assert_eq!(set.radii().len(), 23);
        assert_eq!(set.radii()[0], 0.5);
        assert_eq!(set.radii()[22], 2.6);
        assert!(set.radii().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(set.background_index(), 23);
        let two = init_default_surfaces(2).unwrap();
        assert_eq!(two.radii().len(), 1);
        assert!(matches!(init_default_surfaces(1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ray_validation() {
        assert!(Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0), 0.1, 1.0).is_err());
        assert!(Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn non_increasing_levels_rejected() {
        let f = analytic_field();
        assert!(SurfaceSet::new(f.clone(), vec![1.0, 1.0, f64::INFINITY]).is_err());
        assert!(SurfaceSet::new(f, vec![]).is_err());
    }

    fn tiny_mlp() -> NetParams {
        // s(x) = softplus(2z + 0.3x) - softplus(-y) + 0.1, smooth and monotone in z.
        let mut p = NetParams::new();
        p.insert(
            "manifold.0.weight",
            Tensor::new(vec![2, 3], vec![0.3, 0.0, 2.0, 0.0, -1.0, 0.0]).unwrap(),
        );
        p.insert("manifold.0.bias", Tensor::new(vec![2], vec![0.0, 0.0]).unwrap());
        p.insert("manifold.1.weight", Tensor::new(vec![1, 2], vec![1.0, -1.0]).unwrap());
        p.insert("manifold.1.bias", Tensor::new(vec![1], vec![0.1]).unwrap());
        p
    }

    #[test]
    fn mlp_field_roots_satisfy_level() {
        let mlp = MlpField::from_params(&tiny_mlp(), "manifold").unwrap();
        assert_eq!(mlp.widths, vec![3, 2, 1]);
        let set = SurfaceSet::new(ScalarField::Mlp(mlp), vec![-0.5, 0.0, 0.4]).unwrap();
        let ray = Ray::new(
            Vec3::new(0.2, 0.1, 1.0),
            Vec3::new(0.05, 0.0, -1.0).normalized(),
            0.1,
            6.0,
        )
        .unwrap();
        let hits = intersect_ray(&ray, &set);
        assert_eq!(hits.len(), 3);
        for h in &hits {
            let s = eval_scalar_field(h.point, &set.field);
            assert!((s - set.levels[h.surface_index]).abs() < 1e-4, "{h:?} -> {s}");
        }
        for w in hits.windows(2) {
            assert!(w[0].t <= w[1].t);
        }
    }

    #[test]
    fn unresolved_mlp_handle_is_missing_weights() {
        let err = MlpField::from_params(&NetParams::new(), "manifold").unwrap_err();
        assert!(matches!(err, Error::MissingWeights(_)));
    }

    #[test]
    fn surface_set_round_trips_through_params() {
        let set = init_default_surfaces(5).unwrap();
        let back = SurfaceSet::from_params(&set.to_params()).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in set.levels.iter().zip(&back.levels) {
            assert!((a - b).abs() < 1e-6 || (a.is_infinite() && b.is_infinite()));
        }

        let mlp = MlpField::from_params(&tiny_mlp(), "manifold").unwrap();
        let set = SurfaceSet::new(ScalarField::Mlp(mlp), vec![0.0, 1.0]).unwrap();
        let back = SurfaceSet::from_params(&set.to_params()).unwrap();
        assert_eq!(back, set);
    }
}
