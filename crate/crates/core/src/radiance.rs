//! Latent-conditioned radiance network: a FiLM-modulated sine MLP producing
//! color, occupancy and a projected intermediate feature at 3D points.
//!
//! Layer layout, all under the `radiance.` prefix:
//!
//! * `mapping.{0,1,2}` + `mapping.out`: latent -> per-layer frequencies and phases
//! * `film.{i}`: trunk layers, `sin(freq * (W x + b) + phase)`
//! * `sigma`: occupancy head on the last trunk activation
//! * `color_film` + `color`: view-conditioned color branch
//! * `feature.{k}`: affine projections of tapped trunk activations, summed

use crate::error::{Error, Result};
use crate::math::{leaky_relu, sigmoid_f32, Vec3};
use crate::params::{DenseRef, NetParams, Tensor};

pub const PREFIX: &str = "radiance";
pub const MAPPING_SLOPE: f32 = 0.2;
/// Points per forward batch. Results do not depend on it beyond float rounding.
pub const BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub values: Vec<f32>,
}

impl LatentCode {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("latent code has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(d_z: usize) -> Self {
        Self {
            values: vec![0.0; d_z],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            shape: vec![self.values.len()],
            data: self.values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadianceSample {
    pub color: [f32; 3],
    pub occupancy: f32,
    pub feature: Option<Vec<f32>>,
}

/// Shape of the radiance network.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceArch {
    pub d_z: usize,
    pub hidden: usize,
    pub trunk_layers: usize,
    pub d_f: usize,
    pub feature_taps: Vec<usize>,
    pub mapping_hidden: usize,
    pub mapping_layers: usize,
}

impl Default for RadianceArch {
    fn default() -> Self {
        Self {
            d_z: 256,
            hidden: 256,
            trunk_layers: 8,
            d_f: 32,
            feature_taps: vec![1, 3, 5, 7],
            mapping_hidden: 256,
            mapping_layers: 3,
        }
    }
}

impl RadianceArch {
    /// Trunk layers plus the color layer.
    pub fn film_layers(&self) -> usize {
        self.trunk_layers + 1
    }

    /// Reads the architecture back from stored tensor shapes.
    pub fn infer(params: &NetParams) -> Result<Self> {
        let m0 = params.get(&format!("{PREFIX}.mapping.0.weight"))?;
        if m0.shape.len() != 2 {
            return Err(Error::ModelFormat("radiance mapping weight must be 2D".into()));
        }
        let (mapping_hidden, d_z) = (m0.shape[0], m0.shape[1]);
        let mut mapping_layers = 0;
        while params.contains(&format!("{PREFIX}.mapping.{mapping_layers}.weight")) {
            mapping_layers += 1;
        }
        let f0 = params.get(&format!("{PREFIX}.film.0.weight"))?;
        let hidden = f0.shape[0];
        let mut trunk_layers = 0;
        while params.contains(&format!("{PREFIX}.film.{trunk_layers}.weight")) {
            trunk_layers += 1;
        }
        let taps_t = params.get(&format!("{PREFIX}.feature_taps"))?;
        let feature_taps: Vec<usize> = taps_t.data.iter().map(|&v| v as usize).collect();
        let d_f = match feature_taps.first() {
            Some(_) => params.get(&format!("{PREFIX}.feature.0.weight"))?.shape[0],
            None => 0,
        };
        let arch = Self {
            d_z,
            hidden,
            trunk_layers,
            d_f,
            feature_taps,
            mapping_hidden,
            mapping_layers,
        };
        if arch.feature_taps.iter().any(|&t| t >= arch.trunk_layers) {
            return Err(Error::ModelFormat(format!(
                "feature taps {:?} exceed {} trunk layers",
                arch.feature_taps, arch.trunk_layers
            )));
        }
        Ok(arch)
    }
}

/// Per FiLM layer frequency (gamma) and phase (beta) vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmConditioning {
    pub frequencies: Vec<Vec<f32>>,
    pub phases: Vec<Vec<f32>>,
}

/// Maps `z` through the radiance mapping MLP. The output layer is split into
/// all frequencies followed by all phases.
pub fn map_film_conditioning(latent: &LatentCode, params: &NetParams) -> Result<FilmConditioning> {
    let arch = RadianceArch::infer(params)?;
    film_from_arch(latent, params, &arch)
}

fn film_from_arch(
    latent: &LatentCode,
    params: &NetParams,
    arch: &RadianceArch,
) -> Result<FilmConditioning> {
    if latent.dim() != arch.d_z {
        return Err(Error::ModelFormat(format!(
            "latent has {} entries, network expects {}",
            latent.dim(),
            arch.d_z
        )));
    }
    let mut act = latent.values.clone();
    let mut in_dim = arch.d_z;
    for i in 0..arch.mapping_layers {
        let layer = DenseRef::load(
            params,
            &format!("{PREFIX}.mapping.{i}"),
            Some(in_dim),
            arch.mapping_hidden,
        )?;
        act = layer.forward(&act);
        act.iter_mut().for_each(|v| *v = leaky_relu(*v, MAPPING_SLOPE));
        in_dim = arch.mapping_hidden;
    }
    let n = arch.film_layers() * arch.hidden;
    let out = DenseRef::load(params, &format!("{PREFIX}.mapping.out"), Some(in_dim), 2 * n)?;
    let raw = out.forward(&act);
    let (freq, phase) = raw.split_at(n);
    Ok(FilmConditioning {
        frequencies: freq.chunks(arch.hidden).map(<[f32]>::to_vec).collect(),
        phases: phase.chunks(arch.hidden).map(<[f32]>::to_vec).collect(),
    })
}

/// A radiance network bound to one latent code, ready for repeated queries.
pub struct RadianceField<'a> {
    arch: RadianceArch,
    film: FilmConditioning,
    trunk: Vec<DenseRef<'a>>,
    sigma: DenseRef<'a>,
    color_film: DenseRef<'a>,
    color: DenseRef<'a>,
    features: Vec<DenseRef<'a>>,
}

impl<'a> RadianceField<'a> {
    pub fn new(latent: &LatentCode, params: &'a NetParams) -> Result<Self> {
        let arch = RadianceArch::infer(params)?;
        let film = film_from_arch(latent, params, &arch)?;
        let h = arch.hidden;
        let trunk = (0..arch.trunk_layers)
            .map(|i| {
                let in_dim = if i == 0 { 3 } else { h };
                DenseRef::load(params, &format!("{PREFIX}.film.{i}"), Some(in_dim), h)
            })
            .collect::<Result<Vec<_>>>()?;
        let sigma = DenseRef::load(params, &format!("{PREFIX}.sigma"), Some(h), 1)?;
        let color_film = DenseRef::load(params, &format!("{PREFIX}.color_film"), Some(h + 3), h)?;
        let color = DenseRef::load(params, &format!("{PREFIX}.color"), Some(h), 3)?;
        let features = (0..arch.feature_taps.len())
            .map(|k| DenseRef::load(params, &format!("{PREFIX}.feature.{k}"), Some(h), arch.d_f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            arch,
            film,
            trunk,
            sigma,
            color_film,
            color,
            features,
        })
    }

    pub fn arch(&self) -> &RadianceArch {
        &self.arch
    }

    /// Channels written per point by [`Self::eval_into`].
    pub fn channels(&self, with_features: bool) -> usize {
        if with_features {
            4 + self.arch.d_f
        } else {
            4
        }
    }

    /// Evaluates a batch, writing `[r, g, b, occupancy, features...]` rows into
    /// `out` (row stride = `self.channels(with_features)`).
    pub fn eval_into(
        &self,
        points: &[Vec3],
        view_dir: Vec3,
        with_features: bool,
        out: &mut [f32],
    ) {
        let stride = self.channels(with_features);
        assert_eq!(out.len(), points.len() * stride);
        for (pts, rows) in points.chunks(BATCH).zip(out.chunks_mut(BATCH * stride)) {
            self.eval_batch(pts, view_dir, with_features, rows, stride);
        }
    }

    fn eval_batch(
        &self,
        points: &[Vec3],
        view_dir: Vec3,
        with_features: bool,
        out: &mut [f32],
        stride: usize,
    ) {
        let b = points.len();
        let h = self.arch.hidden;
        let mut x: Vec<f32> = points
            .iter()
            .flat_map(|p| [p.x as f32, p.y as f32, p.z as f32])
            .collect();
        let mut pre = vec![0.0f32; b * h];
        let mut feat = if with_features {
            vec![0.0f32; b * self.arch.d_f]
        } else {
            Vec::new()
        };
        let mut tap_out = vec![0.0f32; if with_features { b * self.arch.d_f } else { 0 }];
        for (li, layer) in self.trunk.iter().enumerate() {
            layer.forward_batch(&x, b, &mut pre);
            film_sine(&mut pre, &self.film.frequencies[li], &self.film.phases[li]);
            std::mem::swap(&mut x, &mut pre);
            if pre.len() != b * h {
                pre.resize(b * h, 0.0);
            }
            if with_features {
                if let Some(k) = self.arch.feature_taps.iter().position(|&t| t == li) {
                    self.features[k].forward_batch(&x, b, &mut tap_out);
                    feat.iter_mut().zip(&tap_out).for_each(|(f, t)| *f += t);
                }
            }
        }
        let mut sigma = vec![0.0f32; b];
        self.sigma.forward_batch(&x, b, &mut sigma);

        let d = [view_dir.x as f32, view_dir.y as f32, view_dir.z as f32];
        let mut xc = Vec::with_capacity(b * (h + 3));
        for row in x.chunks_exact(h) {
            xc.extend_from_slice(row);
            xc.extend_from_slice(&d);
        }
        let last = self.arch.trunk_layers;
        self.color_film.forward_batch(&xc, b, &mut pre);
        film_sine(&mut pre, &self.film.frequencies[last], &self.film.phases[last]);
        let mut rgb = vec![0.0f32; b * 3];
        self.color.forward_batch(&pre, b, &mut rgb);

        for (i, row) in out.chunks_exact_mut(stride).enumerate() {
            row[0] = sigmoid_f32(rgb[3 * i]);
            row[1] = sigmoid_f32(rgb[3 * i + 1]);
            row[2] = sigmoid_f32(rgb[3 * i + 2]);
            row[3] = sigmoid_f32(sigma[i]);
            if with_features {
                let df = self.arch.d_f;
                row[4..4 + df].copy_from_slice(&feat[i * df..(i + 1) * df]);
            }
        }
    }
}

fn film_sine(pre: &mut [f32], freq: &[f32], phase: &[f32]) {
    let h = freq.len();
    for row in pre.chunks_exact_mut(h) {
        for ((v, f), p) in row.iter_mut().zip(freq).zip(phase) {
            *v = (f * *v + p).sin();
        }
    }
}

pub fn generate_radiance(
    latent: &LatentCode,
    points: &[Vec3],
    view_dir: Vec3,
    params: &NetParams,
    with_features: bool,
) -> Result<Vec<RadianceSample>> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("non-finite query point".into()));
    }
    if (view_dir.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument("view direction must be unit length".into()));
    }
    let field = RadianceField::new(latent, params)?;
    let stride = field.channels(with_features);
    let mut out = vec![0.0f32; points.len() * stride];
    field.eval_into(points, view_dir, with_features, &mut out);
    Ok(out
        .chunks_exact(stride)
        .map(|row| RadianceSample {
            color: [row[0], row[1], row[2]],
            occupancy: row[3],
            feature: with_features.then(|| row[4..].to_vec()),
        })
        .collect())
}
