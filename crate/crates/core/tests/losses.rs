use gramhd::gridding::{MapStack, SurfaceMeta, Warp};
use gramhd::losses::*;
use gramhd::render::Image;

const LN2: f64 = std::f64::consts::LN_2;

fn naive_softplus(x: f64) -> f64 {
    (1.0 + x.exp()).ln()
}

// Catmull-Rom kernel written out from its piecewise definition.
fn keys(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        1.5 * x.powi(3) - 2.5 * x.powi(2) + 1.0
    } else if x < 2.0 {
        -0.5 * x.powi(3) + 2.5 * x.powi(2) - 4.0 * x + 2.0
    } else {
        0.0
    }
}

fn mirror(mut i: i64, n: i64) -> usize {
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Direct 2D evaluation: every output pixel sums its whole square footprint.
fn oracle_downsample(data: &[f32], h: usize, w: usize, c: usize, s: usize) -> Vec<f32> {
    let (oh, ow) = (h / s, w / s);
    let sf = s as f64;
    let mut out = vec![0.0f32; oh * ow * c];
    for orow in 0..oh {
        for ocol in 0..ow {
            let cy = (orow as f64 + 0.5) * sf - 0.5;
            let cx = (ocol as f64 + 0.5) * sf - 0.5;
            let mut acc = vec![0.0f64; c];
            let mut norm = 0.0;
            for y in (cy - 2.0 * sf).floor() as i64..=(cy + 2.0 * sf).ceil() as i64 {
                for x in (cx - 2.0 * sf).floor() as i64..=(cx + 2.0 * sf).ceil() as i64 {
                    let wgt = keys((y as f64 - cy) / sf) * keys((x as f64 - cx) / sf);
                    if wgt == 0.0 {
                        continue;
                    }
                    norm += wgt;
                    let (sy, sx) = (mirror(y, h as i64), mirror(x, w as i64));
                    for k in 0..c {
                        acc[k] += wgt * data[(sy * w + sx) * c + k] as f64;
                    }
                }
            }
            for k in 0..c {
                out[(orow * ow + ocol) * c + k] = (acc[k] / norm) as f32;
            }
        }
    }
    out
}

fn pseudo_random(n: usize, seed: u32) -> Vec<f32> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            (s >> 8) as f32 / (1u32 << 24) as f32
        })
        .collect()
}

fn meta(n: usize) -> Vec<SurfaceMeta> {
    (0..n)
        .map(|i| SurfaceMeta {
            half_width: 1.0,
            is_background: i + 1 == n,
            warp: if i + 1 == n { Warp::BgTrans } else { Warp::Linear },
        })
        .collect()
}

#[test]
fn softplus_examples() {
    assert!((softplus(0.0) - LN2).abs() < 1e-12);
    assert!((softplus(100.0) - 100.0).abs() < 1e-9);
    assert!(softplus(1000.0).is_finite());
    for x in [-30.0, -3.2, -0.1, 0.0, 0.7, 5.0, 30.0] {
        assert!((softplus(x) - softplus(-x) - x).abs() < 1e-9);
        assert!((softplus(x) - naive_softplus(x)).abs() < 1e-12);
    }
}

#[test]
fn adversarial_loss_examples() {
    let zero = ScorePack::new(vec![0.0; 4], vec![0.0; 3], vec![0.0; 3]);
    assert!((adversarial_loss(&zero).unwrap() - 2.0 * LN2).abs() < 1e-12);

    let fake = vec![0.3, -1.2, 2.0];
    let real = vec![1.5, -0.4];
    let grads = vec![0.25, 1.5];
    let oracle = |lambda: f64| {
        fake.iter().map(|&s| naive_softplus(s)).sum::<f64>() / 3.0
            + real.iter().zip(&grads).map(|(&s, &g)| naive_softplus(-s) + lambda * g).sum::<f64>() / 2.0
    };
    for lambda in [0.0, 1.0, DEFAULT_R1_WEIGHT] {
        let pack = ScorePack {
            lambda,
            ..ScorePack::new(fake.clone(), real.clone(), grads.clone())
        };
        assert!((adversarial_loss(&pack).unwrap() - oracle(lambda)).abs() < 1e-12);
    }

    let at = |lambda: f64| {
        adversarial_loss(&ScorePack {
            lambda,
            ..ScorePack::new(fake.clone(), real.clone(), grads.clone())
        })
        .unwrap()
    };
    let base = at(0.0);
    assert!(((at(4.0) - base) - 2.0 * (at(2.0) - base)).abs() < 1e-12);
    assert_eq!(base, patch_adversarial_loss(&fake, &real).unwrap());
}

#[test]
fn adversarial_loss_rejects_bad_packs() {
    assert!(adversarial_loss(&ScorePack::new(vec![], vec![0.0], vec![0.0])).is_err());
    assert!(adversarial_loss(&ScorePack::new(vec![0.0], vec![0.0], vec![])).is_err());
    let neg = ScorePack {
        lambda: -1.0,
        ..ScorePack::new(vec![0.0], vec![0.0], vec![0.0])
    };
    assert!(adversarial_loss(&neg).is_err());
}

#[test]
fn patch_loss_examples() {
    assert!((patch_adversarial_loss(&[0.0; 5], &[0.0; 2]).unwrap() - 2.0 * LN2).abs() < 1e-12);
    let mut prev = f64::NEG_INFINITY;
    for f in [-3.0, -1.0, 0.0, 0.5, 4.0] {
        let v = patch_adversarial_loss(&[f, 0.2], &[0.1]).unwrap();
        assert!(v > prev);
        prev = v;
    }
}

#[test]
fn pose_loss_examples() {
    let p = [[0.1, -0.2, 0.0], [0.3, 0.05, 0.0]];
    let same = PosePack {
        generated: PosePairs {
            predicted: p.to_vec(),
            targets: p.to_vec(),
        },
        real: PosePairs {
            predicted: p.to_vec(),
            targets: p.to_vec(),
        },
    };
    assert_eq!(pose_loss(&same).unwrap(), 0.0);

    let unit = PosePack {
        generated: PosePairs {
            predicted: vec![[1.0, 0.0, 0.0]],
            targets: vec![[0.0, 0.0, 0.0]],
        },
        real: PosePairs::default(),
    };
    assert!((pose_loss(&unit).unwrap() - 1.0).abs() < 1e-12);

    let a = PosePairs {
        predicted: vec![[0.2, 0.4, -0.1], [1.0, -1.0, 0.5]],
        targets: vec![[0.0, 0.1, 0.3], [0.7, -0.2, 0.1]],
    };
    let swapped = PosePairs {
        predicted: a.targets.clone(),
        targets: a.predicted.clone(),
    };
    let fwd = pose_loss(&PosePack {
        generated: a.clone(),
        real: a.clone(),
    })
    .unwrap();
    let back = pose_loss(&PosePack {
        generated: swapped.clone(),
        real: swapped,
    })
    .unwrap();
    assert_eq!(fwd, back);
    let by_hand = ((0.04 + 0.09 + 0.16) + (0.09 + 0.64 + 0.16)) / 2.0 * 2.0;
    assert!((fwd - by_hand).abs() < 1e-12);

    let mismatched = PosePack {
        generated: PosePairs {
            predicted: vec![[0.0; 3]],
            targets: vec![],
        },
        real: PosePairs::default(),
    };
    assert!(pose_loss(&mismatched).is_err());
}

#[test]
fn bicubic_matches_direct_evaluation() {
    for (h, w, c, s) in [(16, 16, 3, 2), (24, 12, 2, 4), (9, 15, 1, 3), (32, 32, 4, 8)] {
        let data = pseudo_random(h * w * c, (h * 31 + w * 7 + s) as u32);
        let got = bicubic_downsample(&data, h, w, c, s).unwrap();
        let want = oracle_downsample(&data, h, w, c, s);
        assert_eq!(got.len(), want.len());
        for (g, o) in got.iter().zip(&want) {
            assert!((g - o).abs() < 1e-6, "{h}x{w}x{c} /{s}: {g} vs {o}");
        }
    }
}

#[test]
fn bicubic_examples() {
    let constant = vec![0.375f32; 32 * 32 * 3];
    assert!(bicubic_downsample(&constant, 32, 32, 3, 4).unwrap().iter().all(|&v| v == 0.375));

    let data = pseudo_random(10 * 12 * 2, 5);
    assert_eq!(bicubic_downsample(&data, 10, 12, 2, 1).unwrap(), data);

    for weights in bicubic_taps(64, 4) {
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    // cubic reproduces linears wherever the footprint stays inside the image
    let (h, w, s) = (64, 64, 4);
    let ramp: Vec<f32> = (0..h * w).map(|i| (0.01 * (i % w) as f64 + 0.003 * (i / w) as f64) as f32).collect();
    let out = bicubic_downsample(&ramp, h, w, 1, s).unwrap();
    let ow = w / s;
    for r in 2..h / s - 2 {
        for c in 2..ow - 2 {
            let x = (c as f64 + 0.5) * s as f64 - 0.5;
            let y = (r as f64 + 0.5) * s as f64 - 0.5;
            assert!((out[r * ow + c] as f64 - (0.01 * x + 0.003 * y)).abs() < 1e-6);
        }
    }
}

fn exact_pair(factor: usize) -> (Image, Image, MapStack, MapStack) {
    let (h, w) = (8 * factor, 8 * factor);
    let hr_img = Image::new(h, w, pseudo_random(h * w * 3, 11)).unwrap();
    let lr_img = downsample_image(&hr_img, factor).unwrap();
    let hr_maps = MapStack::new(meta(3), h, w, 4, pseudo_random(3 * h * w * 4, 12)).unwrap();
    let lr_maps = downsample_maps(&hr_maps, factor).unwrap();
    (hr_img, lr_img, hr_maps, lr_maps)
}

#[test]
fn consistency_loss_examples() {
    let w = ConsistencyWeights::default();
    let (hi, li, hm, lm) = exact_pair(4);
    assert_eq!(consistency_loss(&hi, &li, &hm, &lm, 4, w).unwrap(), 0.0);

    let delta = 0.05f32;
    let shifted = Image::new(hi.height, hi.width, hi.data.iter().map(|v| v + delta).collect()).unwrap();
    let loss = consistency_loss(&shifted, &li, &hm, &lm, 4, w).unwrap();
    assert!((loss - (delta as f64).powi(2)).abs() < 1e-6);

    let mut bumped = hm.clone();
    bumped.data.iter_mut().for_each(|v| *v -= 0.1);
    let map_only = consistency_loss(&hi, &li, &bumped, &lm, 4, w).unwrap();
    let both = consistency_loss(&shifted, &li, &bumped, &lm, 4, w).unwrap();
    assert!((both - (loss + map_only)).abs() < 1e-9);

    let image_only = ConsistencyWeights { image: 1.0, maps: 0.0 };
    assert!((consistency_loss(&shifted, &li, &bumped, &lm, 4, image_only).unwrap() - loss).abs() < 1e-12);
}

#[test]
fn consistency_loss_ignores_extra_lr_feature_channels() {
    let (hi, li, hm, lm) = exact_pair(2);
    let mut data = Vec::new();
    for px in lm.data.chunks_exact(4) {
        data.extend_from_slice(px);
        data.extend_from_slice(&[9.0, -9.0]);
    }
    let wide = MapStack::new(lm.meta.clone(), lm.height, lm.width, 6, data).unwrap();
    assert_eq!(consistency_loss(&hi, &li, &hm, &wide, 2, ConsistencyWeights::default()).unwrap(), 0.0);
}

#[test]
fn psnr_and_ssim() {
    let a = Image::new(16, 16, pseudo_random(16 * 16 * 3, 1)).unwrap();
    assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);

    let b = Image::new(16, 16, a.data.iter().map(|v| v + 0.1).collect()).unwrap();
    assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-4);

    let noise = Image::new(16, 16, pseudo_random(16 * 16 * 3, 2)).unwrap();
    let s = ssim(&a, &noise).unwrap();
    assert!(s < 0.5 && s > -1.0);
    assert!(ssim(&Image::zeros(8, 8), &Image::zeros(8, 8)).is_err());
    assert!(psnr(&a, &Image::zeros(8, 8)).is_err());
}
