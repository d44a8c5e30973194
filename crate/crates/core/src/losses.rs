//! Training objectives as forward computations on supplied scores, plus the
//! image metrics used for audits.

use crate::error::{Error, Result};
use crate::gridding::MapStack;
use crate::render::Image;

pub const DEFAULT_R1_WEIGHT: f64 = 10.0;
pub const PSNR_CAP_DB: f64 = 99.0;
const CATMULL_ROM_A: f64 = -0.5;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Discriminator outputs for one batch, with the squared gradient norms of
/// the real scores for the R1 penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePack {
    pub fake_scores: Vec<f64>,
    pub real_scores: Vec<f64>,
    pub real_grad_sqnorms: Vec<f64>,
    pub lambda: f64,
}

impl ScorePack {
    pub fn new(fake_scores: Vec<f64>, real_scores: Vec<f64>, real_grad_sqnorms: Vec<f64>) -> Self {
        Self {
            fake_scores,
            real_scores,
            real_grad_sqnorms,
            lambda: DEFAULT_R1_WEIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fake_scores.is_empty() || self.real_scores.is_empty() {
            return Err(Error::InvalidArgument("score lists must not be empty".into()));
        }
        if self.real_grad_sqnorms.len() != self.real_scores.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gradient norms for {} real scores",
                self.real_grad_sqnorms.len(),
                self.real_scores.len()
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("R1 weight must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

/// Non-saturating GAN loss with R1 regularization:
/// `mean f(fake) + mean(f(-real) + λ |∇|²)`.
pub fn adversarial_loss(scores: &ScorePack) -> Result<f64> {
    scores.validate()?;
    let fake = mean(scores.fake_scores.iter().map(|&s| softplus(s)));
    let real = mean(
        scores
            .real_scores
            .iter()
            .zip(&scores.real_grad_sqnorms)
            .map(|(&s, &g)| softplus(-s) + scores.lambda * g),
    );
    Ok(fake + real)
}

/// `mean f(fake) + mean f(-real)`.
pub fn patch_adversarial_loss(fake_patch_scores: &[f64], real_patch_scores: &[f64]) -> Result<f64> {
    if fake_patch_scores.is_empty() || real_patch_scores.is_empty() {
        return Err(Error::InvalidArgument("score lists must not be empty".into()));
    }
    Ok(mean(fake_patch_scores.iter().map(|&s| softplus(s))) + mean(real_patch_scores.iter().map(|&s| softplus(-s))))
}

/// Pose estimates (yaw, pitch, roll in radians) against their targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PosePairs {
    pub predicted: Vec<[f64; 3]>,
    pub targets: Vec<[f64; 3]>,
}

/// Pose pairs for generated images (target: the rendering pose) and for
/// real images (target: the estimated dataset pose).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PosePack {
    pub generated: PosePairs,
    pub real: PosePairs,
}

/// Sum over the two branches of the mean squared pose distance. An empty
/// branch contributes nothing.
pub fn pose_loss(poses: &PosePack) -> Result<f64> {
    let mut total = 0.0;
    for branch in [&poses.generated, &poses.real] {
        if branch.predicted.len() != branch.targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} predicted poses for {} targets",
                branch.predicted.len(),
                branch.targets.len()
            )));
        }
        if branch.predicted.is_empty() {
            continue;
        }
        total += mean(
            branch
                .predicted
                .iter()
                .zip(&branch.targets)
                .map(|(p, t)| (0..3).map(|k| (p[k] - t[k]).powi(2)).sum::<f64>()),
        );
    }
    Ok(total)
}

fn cubic(x: f64) -> f64 {
    let a = CATMULL_ROM_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Mirror index into `0..n` without repeating the edge sample.
fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    (if m < n as i64 { m } else { period - m }) as usize
}

/// Normalized taps `(source index, weight)` of every output sample along one
/// axis. The kernel is widened by `factor` so it also low-passes.
pub fn bicubic_taps(n_in: usize, factor: usize) -> Vec<Vec<(usize, f64)>> {
    let s = factor as f64;
    (0..n_in / factor)
        .map(|o| {
            let center = (o as f64 + 0.5) * s - 0.5;
            let lo = (center - 2.0 * s).floor() as i64;
            let hi = (center + 2.0 * s).ceil() as i64;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            for i in lo..=hi {
                let w = cubic((i as f64 - center) / s);
                if w != 0.0 {
                    let src = reflect(i, n_in);
                    match taps.iter_mut().find(|(j, _)| *j == src) {
                        Some(t) => t.1 += w,
                        None => taps.push((src, w)),
                    }
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Separable Catmull-Rom downsampling of an `H x W x C` buffer by an integer
/// factor that divides both sides. Output pixel `o` is centered on the input
/// block it covers; borders are mirrored.
pub fn bicubic_downsample(data: &[f32], height: usize, width: usize, channels: usize, factor: usize) -> Result<Vec<f32>> {
    if factor == 0 || height % factor != 0 || width % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "factor {factor} must divide {height}x{width}"
        )));
    }
    if data.len() != height * width * channels {
        return Err(Error::InvalidArgument(format!(
            "buffer of {} values is not {height}x{width}x{channels}",
            data.len()
        )));
    }
    if factor == 1 {
        return Ok(data.to_vec());
    }
    let (oh, ow) = (height / factor, width / factor);
    let (tx, ty) = (bicubic_taps(width, factor), bicubic_taps(height, factor));
    // horizontal pass into f64
    let mut mid = vec![0.0f64; height * ow * channels];
    for r in 0..height {
        for (o, taps) in tx.iter().enumerate() {
            let out = &mut mid[(r * ow + o) * channels..(r * ow + o + 1) * channels];
            for &(src, w) in taps {
                let px = &data[(r * width + src) * channels..(r * width + src + 1) * channels];
                for (v, &p) in out.iter_mut().zip(px) {
                    *v += w * p as f64;
                }
            }
        }
    }
    let mut out = vec![0.0f32; oh * ow * channels];
    for (o, taps) in ty.iter().enumerate() {
        for c in 0..ow * channels {
            let v: f64 = taps.iter().map(|&(src, w)| w * mid[src * ow * channels + c]).sum();
            out[o * ow * channels + c] = v as f32;
        }
    }
    Ok(out)
}

pub fn downsample_image(img: &Image, factor: usize) -> Result<Image> {
    let data = bicubic_downsample(&img.data, img.height, img.width, 3, factor)?;
    Image::new(img.height / factor, img.width / factor, data)
}

/// Downsamples every surface map of the stack.
pub fn downsample_maps(maps: &MapStack, factor: usize) -> Result<MapStack> {
    let mut data = Vec::with_capacity(maps.data.len() / (factor * factor).max(1));
    for i in 0..maps.len() {
        data.extend(bicubic_downsample(maps.surface(i), maps.height, maps.width, maps.channels, factor)?);
    }
    MapStack::new(maps.meta.clone(), maps.height / factor, maps.width / factor, maps.channels, data)
}

fn mse(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>() / a.len() as f64
}

/// Weights of the image and map terms of [`consistency_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyWeights {
    pub image: f64,
    pub maps: f64,
}

impl Default for ConsistencyWeights {
    fn default() -> Self {
        Self { image: 1.0, maps: 1.0 }
    }
}

/// `w_img |Γ(I_hr) - I_lr|² + w_map |Γ(R_hr) - R_lr|²` with Γ the bicubic
/// downsampler and both terms mean squared errors. The low-resolution maps
/// may carry extra feature channels; only the high-resolution channels are
/// compared.
pub fn consistency_loss(
    hr_image: &Image,
    lr_image: &Image,
    hr_maps: &MapStack,
    lr_maps: &MapStack,
    factor: usize,
    weights: ConsistencyWeights,
) -> Result<f64> {
    let down = downsample_image(hr_image, factor)?;
    if (down.height, down.width) != (lr_image.height, lr_image.width) {
        return Err(Error::InvalidArgument(format!(
            "downsampled image is {}x{}, low-resolution image {}x{}",
            down.height, down.width, lr_image.height, lr_image.width
        )));
    }
    let image_term = mse(&down.data, &lr_image.data);

    let down = downsample_maps(hr_maps, factor)?;
    if down.len() != lr_maps.len()
        || (down.height, down.width) != (lr_maps.height, lr_maps.width)
        || lr_maps.channels < down.channels
    {
        return Err(Error::InvalidArgument(format!(
            "downsampled maps are {:?}, low-resolution maps {:?}",
            down.shape(),
            lr_maps.shape()
        )));
    }
    let (c, lc) = (down.channels, lr_maps.channels);
    let lr: Vec<f32> = lr_maps.data.chunks_exact(lc).flat_map(|px| px[..c].iter().copied()).collect();
    let map_term = mse(&down.data, &lr);
    Ok(weights.image * image_term + weights.maps * map_term)
}

fn check_same_size(a: &Image, b: &Image) -> Result<()> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(Error::InvalidArgument(format!(
            "images differ in size: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio for peak value 1, capped at 99 dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_same_size(a, b)?;
    let m = mse(&a.data, &b.data);
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * m.log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Separable valid-mode filtering of one channel plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut mid = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            mid[r * ow + c] = k.iter().enumerate().map(|(i, kv)| kv * plane[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = k.iter().enumerate().map(|(i, kv)| kv * mid[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity over all channels with an 11x11 Gaussian
/// window (σ = 1.5), dynamic range 1 and the usual constants.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_same_size(a, b)?;
    if a.height < SSIM_WINDOW || a.width < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}"
        )));
    }
    let (h, w) = (a.height, a.width);
    let k = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..3 {
        let x: Vec<f64> = a.data.iter().skip(ch).step_by(3).map(|v| *v as f64).collect();
        let y: Vec<f64> = b.data.iter().skip(ch).step_by(3).map(|v| *v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, h, w, &k));
        for i in 0..mx.len() {
            let (vx, vy, cxy) = (sxx[i] - mx[i] * mx[i], syy[i] - my[i] * my[i], sxy[i] - mx[i] * my[i]);
            let num = (2.0 * mx[i] * my[i] + SSIM_C1) * (2.0 * cxy + SSIM_C2);
            let den = (mx[i] * mx[i] + my[i] * my[i] + SSIM_C1) * (vx + vy + SSIM_C2);
            total += num / den;
        }
        count += mx.len();
    }
    Ok(total / count as f64)
}
