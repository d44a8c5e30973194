use crate::error::{Error, Result};

use super::conv::ConvLayerParams;

/// Demodulation epsilon added under the square root.
pub const DEMOD_EPS: f64 = 1e-8;

/// Scales each input channel's weights by `style[i]`, then normalizes every
/// output channel to unit L2 norm over (input channel, kernel tap).
pub fn modulate_weights(layer: &ConvLayerParams, style: &[f32]) -> Result<Vec<f32>> {
    if style.len() != layer.in_channels {
        return Err(Error::InvalidArgument(format!(
            "style has {} entries, layer has {} input channels",
            style.len(),
            layer.in_channels
        )));
    }
    let kk = layer.kernel * layer.kernel;
    let per_out = layer.in_channels * kk;
    let mut out = vec![0.0f32; layer.weight.len()];
    for (dst, src) in out
        .chunks_exact_mut(per_out)
        .zip(layer.weight.chunks_exact(per_out))
    {
        let sq: f64 = src
            .chunks_exact(kk)
            .zip(style)
            .map(|(taps, &s)| {
                let s = s as f64;
                taps.iter().map(|&w| (s * w as f64).powi(2)).sum::<f64>()
            })
            .sum();
        let inv = 1.0 / (sq + DEMOD_EPS).sqrt();
        for ((d, taps), &s) in dst.chunks_exact_mut(kk).zip(src.chunks_exact(kk)).zip(style) {
            for (dv, &w) in d.iter_mut().zip(taps) {
                *dv = (s as f64 * w as f64 * inv) as f32;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(out: usize, inp: usize, k: usize, w: Vec<f32>) -> ConvLayerParams {
        ConvLayerParams::new(out, inp, k, w, vec![0.0; out], true).unwrap()
    }

    #[test]
    fn three_four_five() {
        // Two input channels, 1x1 kernel: w = [3, 4], s = 2 -> [6, 8] / 10.
        let l = layer(1, 2, 1, vec![3.0, 4.0]);
        let w = modulate_weights(&l, &[2.0, 2.0]).unwrap();
        assert!((w[0] - 0.6).abs() < 1e-6);
        assert!((w[1] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn unit_norm_weights_are_fixed_points() {
        let l = layer(2, 1, 1, vec![1.0, -1.0]);
        let w = modulate_weights(&l, &[1.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-7 && (w[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn uniform_style_scale_cancels() {
        let weights: Vec<f32> = (0..2 * 3 * 9).map(|i| ((i * 7 % 11) as f32 - 5.0) / 5.0).collect();
        let l = layer(2, 3, 3, weights);
        let a = modulate_weights(&l, &[0.5, 1.5, -2.0]).unwrap();
        let b = modulate_weights(&l, &[1.5, 4.5, -6.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-5 * x.abs().max(1e-3));
        }
    }

    #[test]
    fn style_length_checked() {
        let l = layer(1, 2, 1, vec![3.0, 4.0]);
        assert!(matches!(modulate_weights(&l, &[1.0]), Err(Error::InvalidArgument(_))));
    }
}
