//! Analytic gradients against central finite differences (h = 1e-4, f64).

use facepolicy_core::denoiser::{DenoiserConfig, DenoiserParams};
use facepolicy_core::diffusion::{gaussian, training_loss, PredictionMode};
use facepolicy_core::features::{EncoderConfig, EncoderParams, FilterBankConfig};
use facepolicy_core::nn::Param;
use facepolicy_core::policy::{DenoiserShape, Policy, PolicyConfig};
use facepolicy_core::sampler::{SamplerConfig, TrainingSample};
use facepolicy_core::training::accumulate_window;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

/// Relative error with a floor so that gradients which are zero up to
/// rounding do not divide by nothing.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Perturbs every entry of the parameter returned by `pick` and compares.
fn check_all<T>(
    model: &mut T,
    count: usize,
    pick: impl Fn(&mut T, usize) -> &mut Param,
    loss: impl Fn(&T) -> f64,
    analytic: &[Vec<f64>],
) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, grads) in analytic.iter().enumerate().take(count) {
        let name = pick(model, i).name.clone();
        for j in 0..grads.len() {
            let orig = pick(model, i).value[j];
            pick(model, i).value[j] = orig + H;
            let up = loss(model);
            pick(model, i).value[j] = orig - H;
            let down = loss(model);
            pick(model, i).value[j] = orig;
            let numeric = (up - down) / (2.0 * H);
            let e = rel_err(grads[j], numeric);
            assert!(e < TOL, "{name}[{j}]: analytic {} numeric {numeric}", grads[j]);
            worst = worst.max(e);
        }
    }
    worst
}

#[test]
fn denoiser_parameters_and_conditioning() {
    let cfg = DenoiserConfig {
        horizon: 4,
        action_dim: 18,
        cond_dim: 16,
        hidden: 16,
        kernel: 3,
        step_dim: 8,
        blocks: 2,
    };
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = DenoiserParams::init(cfg, &mut rng).unwrap();
        // the zero-initialised output layer would hide everything upstream
        p.out_w.value = uniform(&mut rng, p.out_w.len(), 0.3);
        p.out_b.value = uniform(&mut rng, p.out_b.len(), 0.3);
        let x = uniform(&mut rng, cfg.window_len(), 1.0);
        let cond = uniform(&mut rng, cfg.cond_dim, 1.0);
        let r = uniform(&mut rng, cfg.window_len(), 1.0);
        let k = rng.random_range(1..=100);

        let (_, cache) = p.forward_cached(&x, k, &cond).unwrap();
        let d_cond = p.backward(&r, Some(&cache)).unwrap();
        let analytic: Vec<Vec<f64>> = p.params().iter().map(|q| q.grad.clone()).collect();
        let n = analytic.len();
        let loss = |q: &DenoiserParams| dot(&r, &q.forward(&x, k, &cond).unwrap());
        check_all(
            &mut p,
            n,
            |q, i| q.params_mut().into_iter().nth(i).unwrap(),
            loss,
            &analytic,
        );

        for j in 0..cond.len() {
            let mut c = cond.clone();
            c[j] += H;
            let up = dot(&r, &p.forward(&x, k, &c).unwrap());
            c[j] -= 2.0 * H;
            let down = dot(&r, &p.forward(&x, k, &c).unwrap());
            let e = rel_err(d_cond[j], (up - down) / (2.0 * H));
            assert!(e < TOL, "cond[{j}]");
        }
    }
}

#[test]
fn encoder_parameters() {
    let cfg = EncoderConfig {
        channels: 8,
        kernel: 3,
        feature_dim: 10,
        bands: 5,
    };
    for seed in 10..13 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = EncoderParams::init(cfg, &mut rng).unwrap();
        p.audio_b.value = uniform(&mut rng, 10, 0.3);
        let verts = uniform(&mut rng, 2 * 12 * 3, 1.0);
        let audio = uniform(&mut rng, 2 * 5, 2.0);
        let r = uniform(&mut rng, 2 * cfg.frame_dim(), 1.0);

        let (_, cache) = p.fuse_observation_cached(&verts, &audio, 2).unwrap();
        p.fuse_backward(&r, &cache).unwrap();
        let analytic: Vec<Vec<f64>> = p.params().iter().map(|q| q.grad.clone()).collect();
        let loss = |q: &EncoderParams| dot(&r, &q.fuse_observation(&verts, &audio, 2).unwrap());
        check_all(
            &mut p,
            8,
            |q, i| q.params_mut().into_iter().nth(i).unwrap(),
            loss,
            &analytic,
        );
    }
}

fn tiny_policy(seed: u64, mode: PredictionMode) -> (Policy, TrainingSample) {
    let config = PolicyConfig {
        vertices: 4,
        sampler: SamplerConfig::default(),
        filterbank: FilterBankConfig {
            bands: 6,
            ..FilterBankConfig::default()
        },
        encoder: EncoderConfig {
            channels: 4,
            kernel: 3,
            feature_dim: 6,
            bands: 6,
        },
        denoiser: DenoiserShape {
            hidden: 8,
            kernel: 3,
            step_dim: 4,
            blocks: 2,
        },
        mode,
        init_seed: seed,
        ..PolicyConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let sample = TrainingSample {
        obs_vertices: uniform(&mut rng, 2 * 12, 1.0),
        obs_audio: uniform(&mut rng, 2 * 6, 5.0),
        target: uniform(&mut rng, 4 * 12, 0.1),
    };
    let mut policy = Policy::new(config).unwrap();
    policy.fit_data(std::slice::from_ref(&sample));
    policy.denoiser.out_w.value = uniform(&mut rng, policy.denoiser.out_w.len(), 0.3);
    (policy, sample)
}

#[test]
fn training_loss_through_encoder_and_denoiser() {
    for (seed, mode) in [
        (0, PredictionMode::Sample),
        (1, PredictionMode::Epsilon),
        (2, PredictionMode::Sample),
    ] {
        let (mut policy, sample) = tiny_policy(seed, mode);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<f64> = gaussian(&mut rng, 48);
        let k = 37;
        policy.zero_grad();
        let loss0 = accumulate_window(&mut policy, &sample, k, &eps, 1.0).unwrap();
        let analytic: Vec<Vec<f64>> = policy.params().iter().map(|q| q.grad.clone()).collect();
        let loss = |p: &Policy| {
            let a0 = p.normalizer.actions_in(&sample.target);
            let cond = p.condition(&sample.obs_vertices, &sample.obs_audio).unwrap();
            training_loss(&a0, &cond, k, &eps, &p.net(), p.config.mode, &p.schedule)
                .unwrap()
                .0
        };
        assert!((loss(&policy) - loss0).abs() < 1e-14);
        let n = analytic.len();
        check_all(
            &mut policy,
            n,
            |p, i| p.params_mut().into_iter().nth(i).unwrap(),
            loss,
            &analytic,
        );
    }
}
