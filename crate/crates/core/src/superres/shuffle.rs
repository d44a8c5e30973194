use crate::error::{Error, Result};

use super::conv::FeatureMap;

/// Depth-to-space: `out(c, r*y + dy, r*x + dx) = in(c*r*r + dy*r + dx, y, x)`.
pub fn pixel_shuffle(input: &FeatureMap, r: usize) -> Result<FeatureMap> {
    if r == 0 || input.channels % (r * r) != 0 {
        return Err(Error::InvalidArgument(format!(
            "pixel shuffle by {r} needs channels divisible by {}, got {}",
            r * r,
            input.channels
        )));
    }
    let (c_in, h, w) = input.shape();
    let c_out = c_in / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![0.0f32; c_in * h * w];
    for c in 0..c_out {
        for dy in 0..r {
            for dx in 0..r {
                let src = input.plane(c * r * r + dy * r + dx);
                for y in 0..h {
                    let orow = &mut out[(c * oh + r * y + dy) * ow..][..ow];
                    let srow = &src[y * w..(y + 1) * w];
                    for (x, v) in srow.iter().enumerate() {
                        orow[r * x + dx] = *v;
                    }
                }
            }
        }
    }
    FeatureMap::new(c_out, oh, ow, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_for_factor_one() {
        let m = FeatureMap::new(2, 2, 2, (0..8).map(|v| v as f32).collect()).unwrap();
        assert_eq!(pixel_shuffle(&m, 1).unwrap(), m);
    }

    #[test]
    fn four_channels_to_two_by_two() {
        let m = FeatureMap::new(4, 1, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = pixel_shuffle(&m, 2).unwrap();
        assert_eq!(s.shape(), (1, 2, 2));
        assert_eq!(s.data, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn shape_arithmetic() {
        let s = pixel_shuffle(&FeatureMap::zeros(16, 8, 8), 2).unwrap();
        assert_eq!(s.shape(), (4, 16, 16));
        assert!(pixel_shuffle(&FeatureMap::zeros(6, 2, 2), 2).is_err());
    }

    proptest! {
        #[test]
        fn shuffle_permutes_values(c in 1usize..4, h in 1usize..6, w in 1usize..6, r in 1usize..4) {
            let n = c * r * r * h * w;
            let m = FeatureMap::new(c * r * r, h, w, (0..n).map(|v| v as f32).collect()).unwrap();
            let s = pixel_shuffle(&m, r).unwrap();
            let mut vals = s.data.clone();
            vals.sort_by(f32::total_cmp);
            prop_assert_eq!(vals, m.data.clone());
            // index-mapping oracle
            for ch in 0..c {
                for y in 0..h * r {
                    for x in 0..w * r {
                        let src = (ch * r * r + (y % r) * r + (x % r), y / r, x / r);
                        let expect = m.data[(src.0 * h + src.1) * w + src.2];
                        prop_assert_eq!(s.data[(ch * h * r + y) * w * r + x], expect);
                    }
                }
            }
        }
    }
}
