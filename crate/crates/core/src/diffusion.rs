//! Noise schedule, forward noising, DDPM and DDIM reverse steps, and the
//! denoising objective.
//!
//! Diffusion steps are numbered `1..=K`; step 0 is the clean sample, so
//! `alpha_bar(0) = 1`.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// What the denoiser outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PredictionMode {
    /// The injected noise.
    Epsilon,
    /// The clean action window.
    #[default]
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub inference_steps: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            beta_start: 1e-4,
            beta_end: 0.02,
            inference_steps: 10,
        }
    }
}

/// Linear beta schedule with its derived coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sqrt_alpha_bar: Vec<f64>,
    sqrt_one_minus_alpha_bar: Vec<f64>,
    posterior_sigma: Vec<f64>,
}

pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::Config("schedule needs at least one step".into()));
    }
    if !(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0) {
        return Err(Error::Config(format!(
            "need 0 < beta_start < beta_end < 1, got {beta_start} and {beta_end}"
        )));
    }
    let beta: Vec<f64> = if steps == 1 {
        alloc::vec![beta_start]
    } else {
        (0..steps)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for a in &alpha {
        acc *= a;
        alpha_bar.push(acc);
    }
    let posterior_sigma = (0..steps)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                (beta[i] * (1.0 - alpha_bar[i - 1]) / (1.0 - alpha_bar[i])).sqrt()
            }
        })
        .collect();
    Ok(NoiseSchedule {
        sqrt_alpha_bar: alpha_bar.iter().map(|a| a.sqrt()).collect(),
        sqrt_one_minus_alpha_bar: alpha_bar.iter().map(|a| (1.0 - a).sqrt()).collect(),
        beta,
        alpha,
        alpha_bar,
        posterior_sigma,
    })
}

impl NoiseSchedule {
    pub fn from_config(cfg: &ScheduleConfig) -> Result<Self> {
        make_schedule(cfg.steps, cfg.beta_start, cfg.beta_end)
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    fn check(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.steps() {
            return Err(Error::Index(format!("diffusion step {k} outside 1..={}", self.steps())));
        }
        Ok(k - 1)
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.beta[k - 1]
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha[k - 1]
    }

    pub fn alpha_bar(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.alpha_bar[k - 1]
        }
    }

    pub fn sqrt_alpha_bar(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.sqrt_alpha_bar[k - 1]
        }
    }

    pub fn sqrt_one_minus_alpha_bar(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.sqrt_one_minus_alpha_bar[k - 1]
        }
    }

    /// Standard deviation of the reverse-step noise; zero at `k = 1`.
    pub fn posterior_sigma(&self, k: usize) -> f64 {
        self.posterior_sigma[k - 1]
    }

    /// `count` evenly spaced steps from `K` down, e.g. `100, 90, ..., 10`.
    pub fn inference_steps(&self, count: usize) -> Result<Vec<usize>> {
        let k = self.steps();
        if count == 0 || count > k {
            return Err(Error::Config(format!(
                "inference steps must be in 1..={k}, got {count}"
            )));
        }
        Ok((1..=count).rev().map(|i| (i * k + count / 2) / count).collect())
    }
}

/// Anything that can play the role of the noise/sample predictor.
pub trait Denoise {
    fn mode(&self) -> PredictionMode;

    fn predict(&self, noisy: &[f64], k: usize, cond: &[f64]) -> Result<Vec<f64>>;
}

/// `a_k = sqrt(alpha_bar_k) a_0 + sqrt(1 - alpha_bar_k) eps`.
pub fn forward_noise(a0: &[f64], k: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check(k)?;
    if eps.len() != a0.len() {
        return Err(Error::shape("noise", a0.len(), eps.len()));
    }
    let (s, n) = (sched.sqrt_alpha_bar(k), sched.sqrt_one_minus_alpha_bar(k));
    Ok(a0.iter().zip(eps).map(|(a, e)| s * a + n * e).collect())
}

/// Draws a standard normal vector of length `len`.
pub fn gaussian<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

fn implied_eps(noisy: &[f64], a0: &[f64], k: usize, sched: &NoiseSchedule) -> Vec<f64> {
    let (s, n) = (sched.sqrt_alpha_bar(k), sched.sqrt_one_minus_alpha_bar(k));
    noisy.iter().zip(a0).map(|(x, a)| (x - s * a) / n).collect()
}

fn implied_sample(noisy: &[f64], eps: &[f64], k: usize, sched: &NoiseSchedule) -> Vec<f64> {
    let (s, n) = (sched.sqrt_alpha_bar(k), sched.sqrt_one_minus_alpha_bar(k));
    noisy.iter().zip(eps).map(|(x, e)| (x - n * e) / s).collect()
}

/// Network output at step `k` as the pair `(eps_hat, a0_hat)`.
pub fn predict_both<N: Denoise + ?Sized>(
    net: &N,
    noisy: &[f64],
    k: usize,
    cond: &[f64],
    sched: &NoiseSchedule,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let out = net.predict(noisy, k, cond)?;
    if out.len() != noisy.len() {
        return Err(Error::shape("prediction", noisy.len(), out.len()));
    }
    Ok(match net.mode() {
        PredictionMode::Epsilon => {
            let a0 = implied_sample(noisy, &out, k, sched);
            (out, a0)
        }
        PredictionMode::Sample => (implied_eps(noisy, &out, k, sched), out),
    })
}

/// One ancestral step `k -> k-1`:
/// `a_{k-1} = (a_k - beta_k / sqrt(1 - alpha_bar_k) eps_hat) / sqrt(alpha_k) + sigma_k z`.
///
/// Passing `rng = None` sets `sigma` to zero.
pub fn ddpm_reverse_step<N: Denoise + ?Sized>(
    noisy: &[f64],
    k: usize,
    cond: &[f64],
    net: &N,
    sched: &NoiseSchedule,
    rng: Option<&mut dyn RngCore>,
) -> Result<Vec<f64>> {
    sched.check(k)?;
    let (eps, _) = predict_both(net, noisy, k, cond, sched)?;
    let scale = 1.0 / sched.alpha(k).sqrt();
    let gamma = sched.beta(k) / sched.sqrt_one_minus_alpha_bar(k);
    let mut out: Vec<f64> = noisy.iter().zip(&eps).map(|(x, e)| scale * (x - gamma * e)).collect();
    let sigma = sched.posterior_sigma(k);
    if let Some(rng) = rng {
        if sigma > 0.0 {
            for o in &mut out {
                let z: f64 = StandardNormal.sample(&mut *rng);
                *o += sigma * z;
            }
        }
    }
    Ok(out)
}

/// Deterministic DDIM step `k -> k_prev` (eta = 0); `k_prev = 0` returns `a0_hat`.
pub fn ddim_step<N: Denoise + ?Sized>(
    noisy: &[f64],
    k: usize,
    k_prev: usize,
    cond: &[f64],
    net: &N,
    sched: &NoiseSchedule,
) -> Result<Vec<f64>> {
    sched.check(k)?;
    if k_prev >= k {
        return Err(Error::Index(format!("DDIM step must decrease, got {k} -> {k_prev}")));
    }
    let (eps, a0) = predict_both(net, noisy, k, cond, sched)?;
    if k_prev == 0 {
        return Ok(a0);
    }
    let (s, n) = (sched.sqrt_alpha_bar(k_prev), sched.sqrt_one_minus_alpha_bar(k_prev));
    Ok(a0.iter().zip(&eps).map(|(a, e)| s * a + n * e).collect())
}

/// Runs DDIM through `steps` (descending) and finally to 0.
pub fn ddim_sample<N: Denoise + ?Sized>(
    start: Vec<f64>,
    steps: &[usize],
    cond: &[f64],
    net: &N,
    sched: &NoiseSchedule,
) -> Result<Vec<f64>> {
    let mut x = start;
    for (i, &k) in steps.iter().enumerate() {
        let k_prev = steps.get(i + 1).copied().unwrap_or(0);
        x = ddim_step(&x, k, k_prev, cond, net, sched)?;
    }
    Ok(x)
}

/// Regression target for a prediction mode.
pub fn training_target<'a>(mode: PredictionMode, a0: &'a [f64], eps: &'a [f64]) -> &'a [f64] {
    match mode {
        PredictionMode::Epsilon => eps,
        PredictionMode::Sample => a0,
    }
}

/// Mean squared error and its gradient `2 (pred - target) / numel`.
pub fn mse_with_grad(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape("prediction", target.len(), pred.len()));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let r = p - t;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Denoising loss of `net` on one window at step `k` with noise `eps`.
pub fn training_loss<N: Denoise + ?Sized>(
    a0: &[f64],
    cond: &[f64],
    k: usize,
    eps: &[f64],
    net: &N,
    mode: PredictionMode,
    sched: &NoiseSchedule,
) -> Result<(f64, Vec<f64>)> {
    let noisy = forward_noise(a0, k, eps, sched)?;
    let pred = net.predict(&noisy, k, cond)?;
    mse_with_grad(&pred, training_target(mode, a0, eps))
}
