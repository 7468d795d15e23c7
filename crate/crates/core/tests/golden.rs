//! Forward passes against straight nested-loop re-implementations.

use facepolicy_core::denoiser::{sinusoidal_step_embedding, DenoiserConfig, DenoiserParams};
use facepolicy_core::features::{EncoderConfig, EncoderParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn randomize(values: &mut [f64], rng: &mut ChaCha8Rng) {
    for v in values {
        *v = rng.random_range(-0.5..0.5);
    }
}

fn naive_visual(p: &EncoderParams, verts: &[f64]) -> Vec<f64> {
    let (c, k, d) = (p.config.channels, p.config.kernel, p.config.feature_dim);
    let v = verts.len() / 3;
    let mut h = vec![vec![0.0; c]; v];
    for i in 0..v {
        for o in 0..c {
            let mut s = p.vis_in_b.value[o];
            for j in 0..3 {
                s += p.vis_in_w.value[o * 3 + j] * verts[i * 3 + j];
            }
            h[i][o] = silu(s);
        }
    }
    let pad = (k / 2) as isize;
    let mut pooled = vec![f64::NEG_INFINITY; c];
    for i in 0..v {
        for o in 0..c {
            let mut s = p.vis_conv_b.value[o];
            for ci in 0..c {
                for t in 0..k {
                    let src = i as isize + t as isize - pad;
                    if src >= 0 && (src as usize) < v {
                        s += p.vis_conv_w.value[(o * c + ci) * k + t] * h[src as usize][ci];
                    }
                }
            }
            pooled[o] = pooled[o].max(silu(s));
        }
    }
    (0..d)
        .map(|o| p.vis_out_b.value[o] + (0..c).map(|i| p.vis_out_w.value[o * c + i] * pooled[i]).sum::<f64>())
        .collect()
}

fn naive_audio(p: &EncoderParams, bands: &[f64]) -> Vec<f64> {
    let f = bands.len();
    (0..p.config.feature_dim)
        .map(|o| p.audio_b.value[o] + (0..f).map(|i| p.audio_w.value[o * f + i] * bands[i]).sum::<f64>())
        .collect()
}

#[test]
fn encoder_matches_loops() {
    let cfg = EncoderConfig {
        channels: 8,
        kernel: 3,
        feature_dim: 10,
        bands: 5,
    };
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = EncoderParams::init(cfg, &mut rng).unwrap();
        randomize(&mut p.audio_b.value, &mut rng);
        let verts: Vec<f64> = (0..2 * 12 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let audio: Vec<f64> = (0..2 * 5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let fused = p.fuse_observation(&verts, &audio, 2).unwrap();
        let mut expected = Vec::new();
        for f in 0..2 {
            expected.extend(naive_visual(&p, &verts[f * 36..(f + 1) * 36]));
            expected.extend(naive_audio(&p, &audio[f * 5..(f + 1) * 5]));
        }
        assert_eq!(fused.len(), expected.len());
        for (a, b) in fused.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn fused_layout() {
    let cfg = EncoderConfig::default();
    let p = EncoderParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let verts: Vec<f64> = (0..2 * 10 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let audio: Vec<f64> = (0..2 * 26).map(|_| rng.random_range(-1.0..1.0)).collect();
    let one = p.fuse_observation(&verts[..30], &audio[..26], 1).unwrap();
    assert_eq!(one.len(), 1024);
    let two = p.fuse_observation(&verts, &audio, 2).unwrap();
    assert_eq!(two.len(), 2048);
    assert_eq!(&two[..1024], &one[..]);
    let mut sv = verts[30..].to_vec();
    sv.extend_from_slice(&verts[..30]);
    let mut sa = audio[26..].to_vec();
    sa.extend_from_slice(&audio[..26]);
    let swapped = p.fuse_observation(&sv, &sa, 2).unwrap();
    assert_eq!(&swapped[..1024], &two[1024..]);
    assert_eq!(&swapped[1024..], &two[..1024]);
}

fn naive_denoiser(p: &DenoiserParams, x: &[f64], k: usize, cond: &[f64]) -> Vec<f64> {
    let c = p.config;
    let (hz, a, d, kk) = (c.horizon, c.action_dim, c.hidden, c.kernel);
    let mut film = cond.to_vec();
    film.extend(sinusoidal_step_embedding(k, c.step_dim).unwrap());
    let e = film.len();
    let mut h = vec![vec![0.0; d]; hz];
    for t in 0..hz {
        for o in 0..d {
            let mut s = p.in_b.value[o] + p.pos.value[t * d + o];
            for i in 0..a {
                s += p.in_w.value[o * a + i] * x[t * a + i];
            }
            h[t][o] = s;
        }
    }
    let pad = (kk / 2) as isize;
    for b in &p.blocks {
        let mut scale = vec![0.0; d];
        let mut shift = vec![0.0; d];
        for o in 0..d {
            scale[o] = b.scale_b.value[o];
            shift[o] = b.shift_b.value[o];
            for i in 0..e {
                scale[o] += b.scale_w.value[o * e + i] * film[i];
                shift[o] += b.shift_w.value[o * e + i] * film[i];
            }
        }
        let mut next = h.clone();
        for t in 0..hz {
            for o in 0..d {
                let mut z = b.conv_b.value[o];
                for ci in 0..d {
                    for j in 0..kk {
                        let src = t as isize + j as isize - pad;
                        if src >= 0 && (src as usize) < hz {
                            z += b.conv_w.value[(o * d + ci) * kk + j] * h[src as usize][ci];
                        }
                    }
                }
                next[t][o] += silu(scale[o] * z + shift[o]);
            }
        }
        h = next;
    }
    let mut y = vec![0.0; hz * a];
    for t in 0..hz {
        for o in 0..a {
            y[t * a + o] = p.out_b.value[o] + (0..d).map(|i| p.out_w.value[o * d + i] * h[t][i]).sum::<f64>();
        }
    }
    y
}

#[test]
fn denoiser_matches_loops() {
    let cfg = DenoiserConfig {
        horizon: 4,
        action_dim: 18,
        cond_dim: 7,
        hidden: 16,
        kernel: 3,
        step_dim: 8,
        blocks: 2,
    };
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = DenoiserParams::init(cfg, &mut rng).unwrap();
        randomize(&mut p.out_w.value, &mut rng);
        randomize(&mut p.out_b.value, &mut rng);
        let x: Vec<f64> = (0..cfg.window_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cond: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = rng.random_range(1..=100);
        let fast = p.forward(&x, k, &cond).unwrap();
        let slow = naive_denoiser(&p, &x, k, &cond);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn step_embeddings_are_distinct() {
    let embs: Vec<Vec<f64>> = (0..=100).map(|k| sinusoidal_step_embedding(k, 64).unwrap()).collect();
    for i in 0..embs.len() {
        for j in i + 1..embs.len() {
            let dist: f64 = embs[i].iter().zip(&embs[j]).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(dist > 1e-6, "k={i} and k={j} collide");
        }
    }
}
