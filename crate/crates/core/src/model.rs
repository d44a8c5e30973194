//! Procedural, seeded stand-in weights for every network in the engine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::geometry::MANIFOLD_PREFIX;
use crate::params::{NetParams, Tensor};
use crate::radiance::{LatentCode, RadianceArch, PREFIX as RADIANCE};
use crate::superres::{
    SrArch, BG_PREFIX, CONVS_PER_DENSE_BLOCK, DENSE_BLOCKS_PER_RRDB, FG_PREFIX, KERNEL,
    MAPPING_PREFIX,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub radiance: RadianceArch,
    pub sr_foreground: SrArch,
    pub sr_background: SrArch,
    pub style_hidden: usize,
    pub style_layers: usize,
    /// Hidden widths of an MLP scalar field, if one should be generated.
    pub manifold_hidden: Option<Vec<usize>>,
}

impl ModelConfig {
    /// Full-size networks for the given super-resolution factor.
    pub fn standard(factor: usize) -> Result<Self> {
        let radiance = RadianceArch::default();
        let fg = SrArch::foreground(4 + radiance.d_f, factor)?;
        let bg = fg.halved();
        Ok(Self {
            radiance,
            sr_foreground: fg,
            sr_background: bg,
            style_hidden: 256,
            style_layers: 3,
            manifold_hidden: None,
        })
    }

    /// Narrow networks with the same topology, for fast tests.
    pub fn tiny(factor: usize) -> Result<Self> {
        let radiance = RadianceArch {
            d_z: 8,
            hidden: 16,
            trunk_layers: 4,
            d_f: 4,
            feature_taps: vec![1, 3],
            mapping_hidden: 16,
            mapping_layers: 3,
        };
        let mut fg = SrArch::foreground(4 + radiance.d_f, factor)?;
        fg.block_width = 8;
        fg.growth = 4;
        fg.rrdb_blocks = 1;
        fg.up_channels = fg.up_channels.iter().map(|c| c / 8).collect();
        fg.hr_channels = 4;
        let bg = fg.halved();
        Ok(Self {
            radiance,
            sr_foreground: fg,
            sr_background: bg,
            style_hidden: 16,
            style_layers: 3,
            manifold_hidden: None,
        })
    }
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn uniform(&mut self, shape: Vec<usize>, bound: f32) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.rng.random_range(-bound..=bound)).collect();
        Tensor { shape, data }
    }

    fn normal(&mut self, shape: Vec<usize>, std: f32) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let v: f32 = StandardNormal.sample(&mut self.rng);
                v * std
            })
            .collect();
        Tensor { shape, data }
    }

    fn dense(&mut self, p: &mut NetParams, name: &str, inp: usize, out: usize, bound: f32) {
        p.insert(format!("{name}.weight"), self.uniform(vec![out, inp], bound));
        p.insert(format!("{name}.bias"), self.uniform(vec![out], bound));
    }

    fn conv(&mut self, p: &mut NetParams, name: &str, inp: usize, out: usize, scale: f32) {
        let fan_in = (inp * KERNEL * KERNEL) as f32;
        let bound = scale * (6.0 / fan_in).sqrt();
        p.insert(
            format!("{name}.weight"),
            self.uniform(vec![out, inp, KERNEL, KERNEL], bound),
        );
        p.insert(format!("{name}.bias"), Tensor::zeros(vec![out]));
    }
}

/// Seeded random weights for the radiance network, both super-resolution
/// networks and the style MLP. Same seed and config give bitwise-equal params.
pub fn gen_test_model(seed: u64, cfg: &ModelConfig) -> NetParams {
    let mut init = Init {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut p = NetParams::new();
    gen_radiance(&mut init, &mut p, &cfg.radiance);
    gen_style(&mut init, &mut p, cfg);
    gen_sr(&mut init, &mut p, FG_PREFIX, &cfg.sr_foreground, cfg.style_hidden);
    gen_sr(&mut init, &mut p, BG_PREFIX, &cfg.sr_background, cfg.style_hidden);
    if let Some(hidden) = &cfg.manifold_hidden {
        let mut widths = vec![3];
        widths.extend(hidden);
        widths.push(1);
        for (i, w) in widths.windows(2).enumerate() {
            let bound = (1.0 / w[0] as f32).sqrt();
            init.dense(&mut p, &format!("{MANIFOLD_PREFIX}.{i}"), w[0], w[1], bound);
        }
    }
    p
}

fn gen_radiance(init: &mut Init, p: &mut NetParams, a: &RadianceArch) {
    let h = a.hidden;
    let mut inp = a.d_z;
    for i in 0..a.mapping_layers {
        let bound = (6.0 / inp as f32).sqrt() * 0.5;
        init.dense(p, &format!("{RADIANCE}.mapping.{i}"), inp, a.mapping_hidden, bound);
        inp = a.mapping_hidden;
    }
    // The output layer carries the frequency scale: freq ~ 30 + 15 * N(0, small).
    let n = a.film_layers() * h;
    let mut w = init.uniform(vec![2 * n, inp], 0.25 * (1.0 / inp as f32).sqrt());
    for v in w.data[..n * inp].iter_mut() {
        *v *= 15.0;
    }
    let mut b = Tensor::zeros(vec![2 * n]);
    b.data[..n].fill(30.0);
    p.insert(format!("{RADIANCE}.mapping.out.weight"), w);
    p.insert(format!("{RADIANCE}.mapping.out.bias"), b);

    for i in 0..a.trunk_layers {
        let (inp, bound) = if i == 0 {
            (3, 1.0 / 3.0)
        } else {
            (h, (6.0 / h as f32).sqrt() / 25.0)
        };
        init.dense(p, &format!("{RADIANCE}.film.{i}"), inp, h, bound);
    }
    let lin = (1.0 / h as f32).sqrt();
    init.dense(p, &format!("{RADIANCE}.sigma"), h, 1, lin);
    init.dense(
        p,
        &format!("{RADIANCE}.color_film"),
        h + 3,
        h,
        (6.0 / (h + 3) as f32).sqrt() / 25.0,
    );
    init.dense(p, &format!("{RADIANCE}.color"), h, 3, lin);
    for k in 0..a.feature_taps.len() {
        init.dense(p, &format!("{RADIANCE}.feature.{k}"), h, a.d_f, lin);
    }
    p.insert(
        format!("{RADIANCE}.feature_taps"),
        Tensor {
            shape: vec![a.feature_taps.len()],
            data: a.feature_taps.iter().map(|&t| t as f32).collect(),
        },
    );
}

fn gen_style(init: &mut Init, p: &mut NetParams, cfg: &ModelConfig) {
    let mut inp = cfg.radiance.d_z;
    for i in 0..cfg.style_layers {
        let bound = (6.0 / inp as f32).sqrt() * 0.5;
        init.dense(p, &format!("{MAPPING_PREFIX}.{i}"), inp, cfg.style_hidden, bound);
        inp = cfg.style_hidden;
    }
}

fn gen_sr(init: &mut Init, p: &mut NetParams, prefix: &str, a: &SrArch, style_dim: usize) {
    init.conv(p, &format!("{prefix}.conv_first"), a.in_channels, a.block_width, 1.0);
    for b in 0..a.rrdb_blocks {
        for d in 0..DENSE_BLOCKS_PER_RRDB {
            for c in 0..CONVS_PER_DENSE_BLOCK {
                let inp = a.block_width + c * a.growth;
                let out = if c + 1 == CONVS_PER_DENSE_BLOCK {
                    a.block_width
                } else {
                    a.growth
                };
                init.conv(p, &format!("{prefix}.rrdb.{b}.rdb.{d}.conv.{c}"), inp, out, 0.1);
            }
        }
    }
    init.conv(p, &format!("{prefix}.trunk_conv"), a.block_width, a.block_width, 0.1);
    let mut c = a.block_width;
    for (s, &out) in a.up_channels.iter().enumerate() {
        modulated_conv(init, p, &format!("{prefix}.up.{s}"), c, 4 * out);
        c = out;
    }
    modulated_conv(init, p, &format!("{prefix}.hr_conv"), c, a.hr_channels);
    modulated_conv(init, p, &format!("{prefix}.proj"), a.hr_channels, a.out_channels);
    for (name, in_ch) in a.modulated_layers() {
        let name = format!("{prefix}.style.{name}");
        let bound = (1.0 / style_dim as f32).sqrt();
        p.insert(
            format!("{name}.weight"),
            init.uniform(vec![in_ch, style_dim], bound),
        );
        // Scales start around one.
        p.insert(format!("{name}.bias"), Tensor::filled(vec![in_ch], 1.0));
    }
}

fn modulated_conv(init: &mut Init, p: &mut NetParams, name: &str, inp: usize, out: usize) {
    p.insert(
        format!("{name}.weight"),
        init.normal(vec![out, inp, KERNEL, KERNEL], 1.0),
    );
    p.insert(format!("{name}.bias"), Tensor::zeros(vec![out]));
}

/// Standard-normal latent code drawn from `seed`.
pub fn latent_from_seed(seed: u64, d_z: usize) -> LatentCode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_1A7E_u64);
    LatentCode {
        values: (0..d_z)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect(),
    }
}
