//! Training loop: windows are drawn uniformly with replacement, their target
//! actions are noised at a uniformly drawn step, and all encoder and
//! denoiser weights are updated with AdamW.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffusion::{forward_noise, gaussian, mse_with_grad, training_target};
use crate::policy::Policy;
use crate::sampler::TrainingSample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Stop after this many optimizer steps in total, if set.
    pub max_steps: Option<u64>,
    /// Decay of the weight average used for inference; 0 disables it.
    /// Early steps use the smaller `(1 + t) / (10 + t)`.
    pub ema_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 1,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
            seed: 0,
            max_steps: None,
            ema_decay: 0.995,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs >= 1
            && self.batch_size >= 1
            && self.learning_rate >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.ema_decay);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid training configuration".into()))
        }
    }
}

/// One AdamW update with bias correction at step `t` (1-based).
pub fn optimizer_step(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], cfg: &TrainConfig, t: u64) {
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for (((p, g), m), v) in param.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * *p);
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub step: u64,
    pub epoch: usize,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
    ema: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(policy: &Policy, seed: u64) -> Self {
        Self {
            step: 0,
            epoch: 0,
            moments: policy
                .params()
                .iter()
                .map(|p| (vec![0.0; p.len()], vec![0.0; p.len()]))
                .collect(),
            ema: policy.params().iter().map(|p| p.value.clone()).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Averaged weights, or the live ones when averaging is disabled.
    pub fn averaged(&self, policy: &Policy) -> Policy {
        let mut out = policy.clone();
        if !self.ema.is_empty() {
            for (p, e) in out.params_mut().into_iter().zip(&self.ema) {
                p.value.copy_from_slice(e);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: usize,
    pub mean_loss: f64,
}

/// Forward and backward pass for one window; gradients are added to the
/// policy's buffers with weight `grad_weight`. Returns the loss.
pub fn accumulate_window(
    policy: &mut Policy,
    sample: &TrainingSample,
    k: usize,
    eps: &[f64],
    grad_weight: f64,
) -> Result<f64> {
    let a0 = policy.normalizer.actions_in(&sample.target);
    let noisy = forward_noise(&a0, k, eps, &policy.schedule)?;
    let (cond, fuse_cache) = policy.condition_cached(&sample.obs_vertices, &sample.obs_audio)?;
    let (pred, cache) = policy.denoiser.forward_cached(&noisy, k, &cond)?;
    let (loss, mut grad) = mse_with_grad(&pred, training_target(policy.config.mode, &a0, eps))?;
    if grad_weight != 1.0 {
        grad.iter_mut().for_each(|g| *g *= grad_weight);
    }
    let d_cond = policy.denoiser.backward(&grad, Some(&cache))?;
    policy.encoder.fuse_backward(&d_cond, &fuse_cache)?;
    Ok(loss)
}

/// Applies one optimizer update from the accumulated gradients and clears them.
pub fn apply_update(policy: &mut Policy, cfg: &TrainConfig, state: &mut TrainState) {
    state.step += 1;
    let t = state.step as f64;
    let decay = cfg.ema_decay.min((1.0 + t) / (10.0 + t));
    if cfg.ema_decay == 0.0 {
        state.ema.clear();
    }
    let mut ema = state.ema.iter_mut();
    for (p, (m, v)) in policy.params_mut().into_iter().zip(state.moments.iter_mut()) {
        optimizer_step(&mut p.value, &p.grad, m, v, cfg, state.step);
        p.zero_grad();
        if let Some(e) = ema.next() {
            for (e, x) in e.iter_mut().zip(&p.value) {
                *e += (1.0 - decay) * (x - *e);
            }
        }
    }
}

/// One epoch of `samples.len()` windows drawn with replacement.
pub fn train_epoch(
    policy: &mut Policy,
    samples: &[TrainingSample],
    cfg: &TrainConfig,
    state: &mut TrainState,
    on_step: &mut dyn FnMut(StepRecord),
) -> Result<EpochSummary> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("no training windows".into()));
    }
    let window_len = policy.config.denoiser_config().window_len();
    let steps = samples.len().div_ceil(cfg.batch_size);
    let mut total = 0.0;
    let mut taken = 0;
    policy.zero_grad();
    for _ in 0..steps {
        if cfg.max_steps.is_some_and(|max| state.step >= max) {
            break;
        }
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch_size {
            let window = state.rng.random_range(0..samples.len());
            let k = state.rng.random_range(1..=policy.schedule.steps());
            let eps = gaussian(&mut state.rng, window_len);
            let loss = accumulate_window(policy, &samples[window], k, &eps, 1.0 / cfg.batch_size as f64)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: state.step + 1,
                    window,
                });
            }
            batch_loss += loss / cfg.batch_size as f64;
        }
        apply_update(policy, cfg, state);
        total += batch_loss;
        taken += 1;
        on_step(StepRecord {
            epoch: state.epoch,
            step: state.step,
            loss: batch_loss,
        });
    }
    let summary = EpochSummary {
        epoch: state.epoch,
        steps: taken,
        mean_loss: if taken > 0 { total / taken as f64 } else { f64::NAN },
    };
    state.epoch += 1;
    Ok(summary)
}

/// Runs `cfg.epochs` epochs (or until `cfg.max_steps`) from a fresh state,
/// then replaces the weights with their running average.
pub fn train(
    policy: &mut Policy,
    samples: &[TrainingSample],
    cfg: &TrainConfig,
    on_step: &mut dyn FnMut(StepRecord),
) -> Result<Vec<EpochSummary>> {
    let mut state = TrainState::new(policy, cfg.seed);
    let mut out = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let summary = train_epoch(policy, samples, cfg, &mut state, on_step)?;
        if summary.steps == 0 {
            break;
        }
        out.push(summary);
    }
    *policy = state.averaged(policy);
    Ok(out)
}
