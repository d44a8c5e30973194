use crate::error::{Error, Result};

/// Channel-major `(C, H, W)` feature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::InvalidArgument(format!(
                "feature map ({channels}, {height}, {width}) needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Stacks maps of equal spatial size along the channel axis.
    pub fn concat(parts: &[&FeatureMap]) -> FeatureMap {
        let (h, w) = (parts[0].height, parts[0].width);
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(channels * h * w);
        for p in parts {
            assert_eq!((p.height, p.width), (h, w), "concat needs equal spatial sizes");
            data.extend_from_slice(&p.data);
        }
        FeatureMap {
            channels,
            height: h,
            width: w,
            data,
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f32) -> f32) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }
}

/// Dense convolution weights `(out, in, k, k)` with a per-output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub modulated: bool,
}

impl ConvLayerParams {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
        modulated: bool,
    ) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel size {kernel} must be odd")));
        }
        if weight.len() != out_channels * in_channels * kernel * kernel || bias.len() != out_channels
        {
            return Err(Error::ModelFormat(format!(
                "conv ({out_channels}, {in_channels}, {kernel}, {kernel}) got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel,
            weight,
            bias,
            modulated,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

/// Output pixels per im2col band; bounds scratch memory on large maps.
const BAND_PIXELS: usize = 1 << 14;

/// Stride-1 convolution with zero padding `k / 2`, computed as im2col bands
/// multiplied against the `(out, in * k * k)` weight matrix.
pub fn conv2d(input: &FeatureMap, weight: &[f32], bias: &[f32], out_channels: usize, kernel: usize) -> FeatureMap {
    let (ci, h, w) = input.shape();
    let kk = kernel * kernel;
    let cols = ci * kk;
    assert_eq!(weight.len(), out_channels * cols, "conv weight size mismatch");
    assert_eq!(bias.len(), out_channels, "conv bias size mismatch");
    let hw = h * w;
    let mut out = vec![0.0f32; out_channels * hw];
    for (o, b) in bias.iter().enumerate() {
        out[o * hw..(o + 1) * hw].fill(*b);
    }
    let rows_per_band = (BAND_PIXELS / w.max(1)).max(1);
    let pad = (kernel / 2) as isize;
    let mut scratch = Vec::new();
    let mut y0 = 0;
    while y0 < h {
        let y1 = (y0 + rows_per_band).min(h);
        let npix = (y1 - y0) * w;
        scratch.clear();
        scratch.resize(cols * npix, 0.0);
        // scratch row r = (c, ky, kx), column = pixel in band
        for c in 0..ci {
            let src = input.plane(c);
            for ky in 0..kernel {
                for kx in 0..kernel {
                    let r = (c * kernel + ky) * kernel + kx;
                    let dst = &mut scratch[r * npix..(r + 1) * npix];
                    let dx = kx as isize - pad;
                    let dy = ky as isize - pad;
                    for y in y0..y1 {
                        let sy = y as isize + dy;
                        let drow = &mut dst[(y - y0) * w..(y - y0 + 1) * w];
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                        let xs = (-dx).max(0) as usize;
                        let xe = (w as isize - dx.max(0)).max(0) as usize;
                        if xs < xe {
                            let s0 = (xs as isize + dx) as usize;
                            drow[xs..xe].copy_from_slice(&srow[s0..s0 + (xe - xs)]);
                        }
                    }
                }
            }
        }
        // SAFETY: `weight` is (out, cols) row-major, `scratch` is (cols, npix)
        // row-major, and the destination is the (out, npix) window starting at
        // pixel y0*w inside `out` whose row stride is hw.
        unsafe {
            matrixmultiply::sgemm(
                out_channels,
                cols,
                npix,
                1.0,
                weight.as_ptr(),
                cols as isize,
                1,
                scratch.as_ptr(),
                npix as isize,
                1,
                1.0,
                out.as_mut_ptr().add(y0 * w),
                hw as isize,
                1,
            );
        }
        y0 = y1;
    }
    FeatureMap {
        channels: out_channels,
        height: h,
        width: w,
        data: out,
    }
}

pub fn conv_layer(input: &FeatureMap, layer: &ConvLayerParams) -> Result<FeatureMap> {
    if input.channels != layer.in_channels {
        return Err(Error::ModelFormat(format!(
            "conv expects {} input channels, got {}",
            layer.in_channels, input.channels
        )));
    }
    Ok(conv2d(input, &layer.weight, &layer.bias, layer.out_channels, layer.kernel))
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::FeatureMap;

    /// Direct four-loop convolution in f64, zero padding, stride 1.
    pub fn naive_conv(
        input: &FeatureMap,
        weight: &[f32],
        bias: &[f32],
        out_channels: usize,
        k: usize,
    ) -> Vec<f64> {
        let (ci, h, w) = input.shape();
        let pad = (k / 2) as isize;
        let mut out = vec![0.0f64; out_channels * h * w];
        for o in 0..out_channels {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[o] as f64;
                    for c in 0..ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - pad;
                                let sx = x as isize + kx as isize - pad;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                let v = input.data[(c * h + sy as usize) * w + sx as usize] as f64;
                                let wt = weight[((o * ci + c) * k + ky) * k + kx] as f64;
                                acc += v * wt;
                            }
                        }
                    }
                    out[(o * h + y) * w + x] = acc;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
        let data = (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureMap::new(c, h, w, data).unwrap()
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(ci, co, h, w, k) in &[(3, 5, 8, 8, 3), (1, 1, 1, 1, 3), (4, 2, 5, 9, 1), (2, 3, 7, 4, 5)] {
            let input = random_map(&mut rng, ci, h, w);
            let weight: Vec<f32> = (0..co * ci * k * k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let bias: Vec<f32> = (0..co).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = conv2d(&input, &weight, &bias, co, k);
            let slow = oracle::naive_conv(&input, &weight, &bias, co, k);
            for (a, b) in fast.data.iter().zip(&slow) {
                assert!((*a as f64 - b).abs() < 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn banding_does_not_change_results() {
        // Wide enough that the image spans several bands.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = random_map(&mut rng, 2, 300, 128);
        let weight: Vec<f32> = (0..3 * 2 * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias = vec![0.1, 0.2, 0.3];
        let fast = conv2d(&input, &weight, &bias, 3, 3);
        let slow = oracle::naive_conv(&input, &weight, &bias, 3, 3);
        let max_err = fast
            .data
            .iter()
            .zip(&slow)
            .map(|(a, b)| (*a as f64 - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-5, "max err {max_err}");
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(ConvLayerParams::new(1, 1, 2, vec![0.0; 4], vec![0.0], false).is_err());
    }

    #[test]
    fn channel_mismatch_is_model_format_error() {
        let layer = ConvLayerParams::new(1, 2, 3, vec![0.0; 18], vec![0.0], false).unwrap();
        let err = conv_layer(&FeatureMap::zeros(3, 2, 2), &layer).unwrap_err();
        assert!(matches!(err, Error::ModelFormat(_)));
    }
}
