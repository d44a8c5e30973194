//! Map super-resolution: RRDB feature trunk followed by style-modulated
//! sub-pixel upsampling, run independently on every surface map.
//!
//! Two networks share one style mapping MLP: `sr.fg` processes the foreground
//! maps with shared weights, `sr.bg` (half the channel widths) the background.

pub mod conv;
pub mod modulation;
pub mod shuffle;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gridding::MapStack;
use crate::math::{leaky_relu, sigmoid_f32};
use crate::params::{DenseRef, NetParams};
use crate::radiance::LatentCode;

pub use conv::{conv2d, conv_layer, ConvLayerParams, FeatureMap};
pub use modulation::{modulate_weights, DEMOD_EPS};
pub use shuffle::pixel_shuffle;

pub const LEAKY_SLOPE: f32 = 0.2;
pub const RESIDUAL_SCALE: f32 = 0.2;
pub const DENSE_BLOCKS_PER_RRDB: usize = 3;
pub const CONVS_PER_DENSE_BLOCK: usize = 5;
pub const KERNEL: usize = 3;
pub const FG_PREFIX: &str = "sr.fg";
pub const BG_PREFIX: &str = "sr.bg";
pub const MAPPING_PREFIX: &str = "sr.mapping";

/// Channel plan of one super-resolution network.
#[derive(Debug, Clone, PartialEq)]
pub struct SrArch {
    pub in_channels: usize,
    pub block_width: usize,
    pub growth: usize,
    pub rrdb_blocks: usize,
    /// Output channels of each x2 sub-pixel stage, in order.
    pub up_channels: Vec<usize>,
    pub hr_channels: usize,
    pub out_channels: usize,
}

impl SrArch {
    /// Foreground network for a given upsampling factor (4, 8 or 16).
    pub fn foreground(in_channels: usize, factor: usize) -> Result<Self> {
        let stages = stages_for_factor(factor)?;
        Ok(Self {
            in_channels,
            block_width: 64,
            growth: 32,
            rrdb_blocks: 8,
            up_channels: [64, 64, 32, 16][..stages].to_vec(),
            hr_channels: 16,
            out_channels: 4,
        })
    }

    /// Same layout with every internal width halved.
    pub fn halved(&self) -> Self {
        Self {
            in_channels: self.in_channels,
            block_width: (self.block_width / 2).max(1),
            growth: (self.growth / 2).max(1),
            rrdb_blocks: self.rrdb_blocks,
            up_channels: self.up_channels.iter().map(|c| (c / 2).max(1)).collect(),
            hr_channels: (self.hr_channels / 2).max(1),
            out_channels: self.out_channels,
        }
    }

    pub fn factor(&self) -> usize {
        1 << self.up_channels.len()
    }

    /// Names and input widths of the modulated layers, in application order.
    pub fn modulated_layers(&self) -> Vec<(String, usize)> {
        let mut layers = Vec::new();
        let mut c = self.block_width;
        for (s, &out) in self.up_channels.iter().enumerate() {
            layers.push((format!("up.{s}"), c));
            c = out;
        }
        layers.push(("hr_conv".to_string(), c));
        layers.push(("proj".to_string(), self.hr_channels));
        layers
    }

    /// Reads the layout back from stored tensor shapes under `prefix`.
    pub fn infer(params: &NetParams, prefix: &str) -> Result<Self> {
        let first = params.get(&format!("{prefix}.conv_first.weight"))?;
        let (block_width, in_channels) = (first.shape[0], first.shape[1]);
        let mut rrdb_blocks = 0;
        while params.contains(&format!("{prefix}.rrdb.{rrdb_blocks}.rdb.0.conv.0.weight")) {
            rrdb_blocks += 1;
        }
        let growth = if rrdb_blocks > 0 {
            params.get(&format!("{prefix}.rrdb.0.rdb.0.conv.0.weight"))?.shape[0]
        } else {
            0
        };
        let mut up_channels = Vec::new();
        while let Ok(t) = params.get(&format!("{prefix}.up.{}.weight", up_channels.len())) {
            up_channels.push(t.shape[0] / 4);
        }
        let hr_channels = params.get(&format!("{prefix}.hr_conv.weight"))?.shape[0];
        let out_channels = params.get(&format!("{prefix}.proj.weight"))?.shape[0];
        Ok(Self {
            in_channels,
            block_width,
            growth,
            rrdb_blocks,
            up_channels,
            hr_channels,
            out_channels,
        })
    }
}

pub fn stages_for_factor(factor: usize) -> Result<usize> {
    match factor {
        4 => Ok(2),
        8 => Ok(3),
        16 => Ok(4),
        _ => Err(Error::InvalidArgument(format!(
            "unsupported super-resolution factor {factor}; expected 4, 8 or 16"
        ))),
    }
}

fn load_conv(params: &NetParams, name: &str, modulated: bool) -> Result<ConvLayerParams> {
    let w = params.get(&format!("{name}.weight"))?;
    if w.shape.len() != 4 || w.shape[2] != w.shape[3] {
        return Err(Error::ModelFormat(format!(
            "`{name}.weight` must be (out, in, k, k), got {:?}",
            w.shape
        )));
    }
    let b = params.expect(&format!("{name}.bias"), &[w.shape[0]])?;
    ConvLayerParams::new(
        w.shape[0],
        w.shape[1],
        w.shape[2],
        w.data.clone(),
        b.data.clone(),
        modulated,
    )
}

/// Per modulated layer scaling vectors, keyed `fg.up.0`, `bg.proj`, ...
#[derive(Debug, Clone, PartialEq)]
pub struct StyleVector {
    pub layers: Vec<(String, Vec<f32>)>,
}

impl StyleVector {
    pub fn get(&self, key: &str) -> Result<&[f32]> {
        self.layers
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::MissingWeights(format!("style for {key}")))
    }
}

/// Latent -> shared style trunk (leaky-ReLU MLP) -> per-layer affine heads.
pub fn map_style(latent: &LatentCode, params: &NetParams) -> Result<StyleVector> {
    let mut act = latent.values.clone();
    let mut i = 0;
    while params.contains(&format!("{MAPPING_PREFIX}.{i}.weight")) {
        let w = params.get(&format!("{MAPPING_PREFIX}.{i}.weight"))?;
        let layer = DenseRef::load(params, &format!("{MAPPING_PREFIX}.{i}"), Some(act.len()), w.shape[0])
            .map_err(|e| match e {
                Error::ModelFormat(m) if i == 0 => {
                    Error::ModelFormat(format!("latent dimension mismatch: {m}"))
                }
                other => other,
            })?;
        act = layer.forward(&act);
        act.iter_mut().for_each(|v| *v = leaky_relu(*v, LEAKY_SLOPE));
        i += 1;
    }
    if i == 0 {
        return Err(Error::MissingWeights(format!("{MAPPING_PREFIX}.0.weight")));
    }
    let mut layers = Vec::new();
    for (tag, prefix) in [("fg", FG_PREFIX), ("bg", BG_PREFIX)] {
        if !params.contains(&format!("{prefix}.conv_first.weight")) {
            continue;
        }
        let arch = SrArch::infer(params, prefix)?;
        for (name, in_ch) in arch.modulated_layers() {
            let head = DenseRef::load(params, &format!("{prefix}.style.{name}"), Some(act.len()), in_ch)?;
            layers.push((format!("{tag}.{name}"), head.forward(&act)));
        }
    }
    Ok(StyleVector { layers })
}

/// One residual dense block: five convolutions over the running concatenation.
fn dense_block(x: &FeatureMap, convs: &[ConvLayerParams]) -> Result<FeatureMap> {
    let mut parts: Vec<FeatureMap> = vec![x.clone()];
    for (ci, conv) in convs.iter().enumerate() {
        let refs: Vec<&FeatureMap> = parts.iter().collect();
        let cat = FeatureMap::concat(&refs);
        let mut y = conv_layer(&cat, conv)?;
        if ci + 1 < convs.len() {
            y.map_inplace(|v| leaky_relu(v, LEAKY_SLOPE));
            parts.push(y);
        } else {
            if y.channels != x.channels {
                return Err(Error::ModelFormat(format!(
                    "dense block output has {} channels, input {}",
                    y.channels, x.channels
                )));
            }
            y.data
                .iter_mut()
                .zip(&x.data)
                .for_each(|(o, i)| *o = *o * RESIDUAL_SCALE + i);
            return Ok(y);
        }
    }
    Ok(x.clone())
}

/// Residual-in-residual dense block `{prefix}` (e.g. `sr.fg.rrdb.3`).
///
/// Three dense blocks in sequence, then `out * 0.2 + input`.
pub fn rrdb_forward(input: &FeatureMap, params: &NetParams, prefix: &str) -> Result<FeatureMap> {
    let mut x = input.clone();
    for d in 0..DENSE_BLOCKS_PER_RRDB {
        let convs = (0..CONVS_PER_DENSE_BLOCK)
            .map(|c| load_conv(params, &format!("{prefix}.rdb.{d}.conv.{c}"), false))
            .collect::<Result<Vec<_>>>()?;
        if convs[0].in_channels != input.channels {
            return Err(Error::ModelFormat(format!(
                "RRDB `{prefix}` expects {} channels, got {}",
                convs[0].in_channels, input.channels
            )));
        }
        x = dense_block(&x, &convs)?;
    }
    x.data
        .iter_mut()
        .zip(&input.data)
        .for_each(|(o, i)| *o = *o * RESIDUAL_SCALE + i);
    Ok(x)
}

/// A super-resolution network with all convolution weights resolved and the
/// modulated layers already demodulated for one style.
pub struct SrNetwork<'a> {
    pub arch: SrArch,
    params: &'a NetParams,
    prefix: String,
    conv_first: ConvLayerParams,
    trunk_conv: ConvLayerParams,
    /// `(layer, demodulated weights)` for up stages, hr_conv and proj.
    modulated: Vec<(ConvLayerParams, Vec<f32>)>,
}

impl<'a> SrNetwork<'a> {
    pub fn new(params: &'a NetParams, prefix: &str, tag: &str, style: &StyleVector) -> Result<Self> {
        let arch = SrArch::infer(params, prefix)?;
        let conv_first = load_conv(params, &format!("{prefix}.conv_first"), false)?;
        let trunk_conv = load_conv(params, &format!("{prefix}.trunk_conv"), false)?;
        let mut modulated = Vec::new();
        for (name, in_ch) in arch.modulated_layers() {
            let layer = load_conv(params, &format!("{prefix}.{name}"), true)?;
            if layer.in_channels != in_ch {
                return Err(Error::ModelFormat(format!(
                    "`{prefix}.{name}` has {} input channels, expected {in_ch}",
                    layer.in_channels
                )));
            }
            let w = modulate_weights(&layer, style.get(&format!("{tag}.{name}"))?)?;
            modulated.push((layer, w));
        }
        Ok(Self {
            arch,
            params,
            prefix: prefix.to_string(),
            conv_first,
            trunk_conv,
            modulated,
        })
    }

    pub fn forward(&self, lr: &FeatureMap) -> Result<FeatureMap> {
        let fea = conv_layer(lr, &self.conv_first)?;
        let mut trunk = fea.clone();
        for b in 0..self.arch.rrdb_blocks {
            trunk = rrdb_forward(&trunk, self.params, &format!("{}.rrdb.{b}", self.prefix))?;
        }
        let trunk = conv_layer(&trunk, &self.trunk_conv)?;
        let mut x = fea;
        x.data.iter_mut().zip(&trunk.data).for_each(|(a, t)| *a += t);

        let n_up = self.arch.up_channels.len();
        for (layer, w) in &self.modulated[..n_up] {
            let y = conv2d(&x, w, &layer.bias, layer.out_channels, layer.kernel);
            x = pixel_shuffle(&y, 2)?;
            x.map_inplace(|v| leaky_relu(v, LEAKY_SLOPE));
        }
        let (hr, w) = &self.modulated[n_up];
        x = conv2d(&x, w, &hr.bias, hr.out_channels, hr.kernel);
        x.map_inplace(|v| leaky_relu(v, LEAKY_SLOPE));
        let (proj, w) = &self.modulated[n_up + 1];
        let mut out = conv2d(&x, w, &proj.bias, proj.out_channels, proj.kernel);
        out.map_inplace(sigmoid_f32);
        Ok(out)
    }
}

/// `(H, W, C)` texel rows of one surface -> `(C, H, W)`.
pub fn hwc_to_chw(src: &[f32], h: usize, w: usize, c: usize) -> FeatureMap {
    let mut data = vec![0.0f32; c * h * w];
    for (p, texel) in src.chunks_exact(c).enumerate() {
        for (ch, v) in texel.iter().enumerate() {
            data[ch * h * w + p] = *v;
        }
    }
    FeatureMap {
        channels: c,
        height: h,
        width: w,
        data,
    }
}

pub fn chw_to_hwc(map: &FeatureMap, out: &mut [f32]) {
    let (c, h, w) = map.shape();
    for p in 0..h * w {
        for ch in 0..c {
            out[p * c + ch] = map.data[ch * h * w + p];
        }
    }
}

/// Upsamples every surface map by `factor`, returning radiance-only maps.
pub fn superresolve(
    latent: &LatentCode,
    lr: &MapStack,
    params: &NetParams,
    factor: usize,
) -> Result<MapStack> {
    stages_for_factor(factor)?;
    let style = map_style(latent, params)?;
    let fg = SrNetwork::new(params, FG_PREFIX, "fg", &style)?;
    let bg = SrNetwork::new(params, BG_PREFIX, "bg", &style)?;
    for net in [&fg, &bg] {
        if net.arch.factor() != factor {
            return Err(Error::ModelFormat(format!(
                "network `{}` upsamples by {}, requested {factor}",
                net.prefix,
                net.arch.factor()
            )));
        }
        if net.arch.in_channels != lr.channels {
            return Err(Error::ModelFormat(format!(
                "network `{}` expects {} input channels, maps have {}",
                net.prefix, net.arch.in_channels, lr.channels
            )));
        }
        if net.arch.out_channels != 4 {
            return Err(Error::ModelFormat(format!(
                "network `{}` must project to 4 channels, has {}",
                net.prefix, net.arch.out_channels
            )));
        }
    }
    let (h, w) = (lr.height * factor, lr.width * factor);
    let mut hr = MapStack::zeros(lr.meta.clone(), h, w, 4);
    let len = hr.surface_len();
    hr.data
        .par_chunks_mut(len)
        .enumerate()
        .try_for_each(|(i, out)| -> Result<()> {
            let input = hwc_to_chw(lr.surface(i), lr.height, lr.width, lr.channels);
            let net = if lr.meta[i].is_background { &bg } else { &fg };
            let y = net.forward(&input)?;
            chw_to_hwc(&y, out);
            Ok(())
        })?;
    Ok(hr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridding::{SurfaceMeta, Warp};
    use crate::model::{gen_test_model, latent_from_seed, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny(factor: usize) -> (NetParams, LatentCode, ModelConfig) {
        let cfg = ModelConfig::tiny(factor).unwrap();
        (gen_test_model(5, &cfg), latent_from_seed(5, cfg.radiance.d_z), cfg)
    }

    fn random_stack(n: usize, h: usize, c: usize, seed: u64) -> MapStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let meta = (0..n)
            .map(|i| SurfaceMeta {
                half_width: if i + 1 == n { 3.0 } else { 1.0 },
                is_background: i + 1 == n,
                warp: if i + 1 == n { Warp::BgTrans } else { Warp::Linear },
            })
            .collect();
        let data = (0..n * h * h * c).map(|_| rng.random_range(0.0..1.0)).collect();
        MapStack::new(meta, h, h, c, data).unwrap()
    }

    #[test]
    fn rrdb_with_zero_weights_scales_input() {
        let (mut p, _, _) = tiny(4);
        for name in p.names_with_prefix("sr.fg.rrdb.0.").map(str::to_string).collect::<Vec<_>>() {
            p.get_mut(&name).unwrap().data.fill(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = FeatureMap::new(8, 5, 6, (0..240).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y = rrdb_forward(&x, &p, "sr.fg.rrdb.0").unwrap();
        // Every dense block is an identity; the outer residual adds 0.2 * x.
        for (a, b) in y.data.iter().zip(&x.data) {
            assert!((a - 1.2 * b).abs() < 1e-6);
        }
    }

    #[test]
    fn rrdb_preserves_shape_and_is_deterministic() {
        let (p, _, _) = tiny(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = FeatureMap::new(8, 7, 3, (0..168).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let a = rrdb_forward(&x, &p, "sr.fg.rrdb.0").unwrap();
        assert_eq!(a.shape(), x.shape());
        assert_eq!(a, rrdb_forward(&x, &p, "sr.fg.rrdb.0").unwrap());
        let err = rrdb_forward(&FeatureMap::zeros(3, 2, 2), &p, "sr.fg.rrdb.0").unwrap_err();
        assert!(matches!(err, Error::ModelFormat(_)));
    }

    #[test]
    fn zero_trunk_conv_makes_trunk_a_pure_skip() {
        let (mut p, _, _) = tiny(4);
        for n in ["sr.fg.trunk_conv.weight", "sr.fg.trunk_conv.bias"] {
            p.get_mut(n).unwrap().data.fill(0.0);
        }
        let first = load_conv(&p, "sr.fg.conv_first", false).unwrap();
        let x = hwc_to_chw(random_stack(2, 4, 8, 3).surface(0), 4, 4, 8);
        let style = map_style(&LatentCode::zeros(8), &p).unwrap();
        let net = SrNetwork::new(&p, FG_PREFIX, "fg", &style).unwrap();
        let fea = conv_layer(&x, &first).unwrap();
        let mut trunk = fea.clone();
        for b in 0..net.arch.rrdb_blocks {
            trunk = rrdb_forward(&trunk, &p, &format!("sr.fg.rrdb.{b}")).unwrap();
        }
        let t = conv_layer(&trunk, &load_conv(&p, "sr.fg.trunk_conv", false).unwrap()).unwrap();
        assert!(t.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn style_from_zero_weights_is_bias() {
        let (mut p, _, _) = tiny(4);
        for name in p
            .iter()
            .map(|(n, _)| n.to_string())
            .filter(|n| n.starts_with("sr.mapping.") || n.contains(".style."))
            .collect::<Vec<_>>()
        {
            if name.ends_with(".weight") {
                p.get_mut(&name).unwrap().data.fill(0.0);
            }
        }
        p.get_mut("sr.fg.style.proj.bias").unwrap().data.fill(0.7);
        let s = map_style(&latent_from_seed(4, 8), &p).unwrap();
        assert!(s.get("fg.proj").unwrap().iter().all(|v| *v == 0.7));
        assert!(s.get("bg.up.0").unwrap().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn style_depends_on_latent_deterministically() {
        let (p, z, _) = tiny(4);
        let a = map_style(&z, &p).unwrap();
        assert_eq!(a, map_style(&z, &p).unwrap());
        assert_ne!(a, map_style(&latent_from_seed(77, 8), &p).unwrap());
        // one entry per modulated layer in both networks: 2 up + hr + proj
        assert_eq!(a.layers.len(), 8);
    }

    #[test]
    fn superresolve_shapes_and_determinism() {
        let (p, z, _) = tiny(4);
        let lr = random_stack(3, 6, 8, 9);
        let hr = superresolve(&z, &lr, &p, 4).unwrap();
        assert_eq!(hr.shape(), [3, 24, 24, 4]);
        assert!(hr.data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(hr, superresolve(&z, &lr, &p, 4).unwrap());
        assert!(matches!(superresolve(&z, &lr, &p, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(superresolve(&z, &lr, &p, 8), Err(Error::ModelFormat(_))));
        let wrong = random_stack(2, 6, 5, 1);
        assert!(superresolve(&z, &wrong, &p, 4).is_err());
    }

    #[test]
    fn foreground_maps_are_processed_independently() {
        let (p, z, _) = tiny(4);
        let lr = random_stack(4, 5, 8, 21);
        let hr = superresolve(&z, &lr, &p, 4).unwrap();
        // swap foreground surfaces 0 and 2
        let mut swapped = lr.clone();
        let n = lr.surface_len();
        swapped.data[..n].copy_from_slice(lr.surface(2));
        swapped.data[2 * n..3 * n].copy_from_slice(lr.surface(0));
        let hr2 = superresolve(&z, &swapped, &p, 4).unwrap();
        assert_eq!(hr2.surface(0), hr.surface(2));
        assert_eq!(hr2.surface(2), hr.surface(0));
        assert_eq!(hr2.surface(1), hr.surface(1));
        assert_eq!(hr2.surface(3), hr.surface(3));
    }

    #[test]
    fn background_net_has_half_width() {
        let cfg = ModelConfig::standard(16).unwrap();
        assert_eq!(cfg.sr_background.block_width, 32);
        assert_eq!(cfg.sr_background.up_channels, vec![32, 32, 16, 8]);
        assert_eq!(cfg.sr_foreground.up_channels, vec![64, 64, 32, 16]);
        assert_eq!(SrArch::foreground(36, 8).unwrap().up_channels, vec![64, 64, 32]);
        assert_eq!(SrArch::foreground(36, 4).unwrap().up_channels, vec![64, 64]);
    }

    #[test]
    fn layout_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src: Vec<f32> = (0..5 * 3 * 7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = hwc_to_chw(&src, 5, 3, 7);
        let mut back = vec![0.0; src.len()];
        chw_to_hwc(&m, &mut back);
        assert_eq!(back, src);
    }
}
