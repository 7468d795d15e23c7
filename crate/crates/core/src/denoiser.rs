//! Conditional denoiser over action windows.
//!
//! Each frame of the noisy window is projected to `hidden` channels and
//! offset by a learned per-position embedding, passed
//! through residual temporal-convolution blocks whose activations are
//! modulated per channel (`scale * z + shift`) by affine maps of the
//! conditioning vector joined with a sinusoidal step embedding, and projected
//! back to `V * 3`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;
use rand::Rng;

use crate::diffusion::{Denoise, PredictionMode};
use crate::nn::{self, silu, silu_grad, Param};
use crate::{Error, Result};

/// Interleaved `sin(k f_i), cos(k f_i)` with `f_i` geometric from 1 down to 1e-4.
pub fn sinusoidal_step_embedding(k: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Config(format!("step embedding width must be even, got {dim}")));
    }
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = if half == 1 {
            1.0
        } else {
            10.0.powf(-4.0 * i as f64 / (half - 1) as f64)
        };
        let phase = k as f64 * freq;
        out.push(phase.sin());
        out.push(phase.cos());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenoiserConfig {
    pub horizon: usize,
    /// `V * 3`
    pub action_dim: usize,
    pub cond_dim: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub step_dim: usize,
    pub blocks: usize,
}

impl DenoiserConfig {
    pub fn new(horizon: usize, action_dim: usize, cond_dim: usize) -> Self {
        Self {
            horizon,
            action_dim,
            cond_dim,
            hidden: 128,
            kernel: 3,
            step_dim: 64,
            blocks: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.action_dim == 0 || self.hidden == 0 || self.blocks == 0 {
            return Err(Error::Config("denoiser sizes must be positive".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "denoiser kernel must be odd, got {}",
                self.kernel
            )));
        }
        if self.step_dim == 0 || !self.step_dim.is_multiple_of(2) {
            return Err(Error::Config("step embedding width must be even".into()));
        }
        Ok(())
    }

    /// Width of the FiLM input: conditioning plus step embedding.
    pub fn film_dim(&self) -> usize {
        self.cond_dim + self.step_dim
    }

    pub fn window_len(&self) -> usize {
        self.horizon * self.action_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilmBlock {
    pub conv_w: Param,
    pub conv_b: Param,
    pub scale_w: Param,
    pub scale_b: Param,
    pub shift_w: Param,
    pub shift_b: Param,
}

impl FilmBlock {
    fn zeros(i: usize, cfg: &DenoiserConfig) -> Self {
        let (d, e, k) = (cfg.hidden, cfg.film_dim(), cfg.kernel);
        Self {
            conv_w: Param::zeros(format!("denoiser.block{i}.conv.w"), &[d, d, k]),
            conv_b: Param::zeros(format!("denoiser.block{i}.conv.b"), &[d]),
            scale_w: Param::zeros(format!("denoiser.block{i}.scale.w"), &[d, e]),
            scale_b: Param::zeros(format!("denoiser.block{i}.scale.b"), &[d]),
            shift_w: Param::zeros(format!("denoiser.block{i}.shift.w"), &[d, e]),
            shift_b: Param::zeros(format!("denoiser.block{i}.shift.b"), &[d]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub config: DenoiserConfig,
    pub in_w: Param,
    pub in_b: Param,
    /// Added to each window position after the input projection; the FiLM
    /// maps are shared across positions.
    pub pos: Param,
    pub blocks: Vec<FilmBlock>,
    pub out_w: Param,
    pub out_b: Param,
}

/// Activations saved by [`DenoiserParams::forward_cached`].
#[derive(Debug, Clone)]
pub struct DenoiserCache {
    input: Vec<f64>,
    film_in: Vec<f64>,
    /// Input of each block, then the final hidden state.
    hidden: Vec<Vec<f64>>,
    conv: Vec<Vec<f64>>,
    scale: Vec<Vec<f64>>,
    modulated: Vec<Vec<f64>>,
}

impl DenoiserParams {
    pub fn zeros(config: DenoiserConfig) -> Result<Self> {
        config.validate()?;
        let (d, a) = (config.hidden, config.action_dim);
        Ok(Self {
            in_w: Param::zeros("denoiser.in.w", &[d, a]),
            in_b: Param::zeros("denoiser.in.b", &[d]),
            pos: Param::zeros("denoiser.pos", &[config.horizon, d]),
            blocks: (0..config.blocks).map(|i| FilmBlock::zeros(i, &config)).collect(),
            out_w: Param::zeros("denoiser.out.w", &[a, d]),
            out_b: Param::zeros("denoiser.out.b", &[a]),
            config,
        })
    }

    /// Fan-in uniform weights with the FiLM scale bias at one. The output
    /// projection starts at zero so the untrained net predicts nothing rather
    /// than noise; this speeds up early training considerably.
    pub fn init<R: Rng + ?Sized>(config: DenoiserConfig, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let bound = |n: usize| 1.0 / (n as f64).sqrt();
        let (d, a, e, k) = (config.hidden, config.action_dim, config.film_dim(), config.kernel);
        fill(&mut p.in_w, bound(a), rng);
        fill(&mut p.in_b, bound(a), rng);
        fill(&mut p.pos, bound(a), rng);
        for b in &mut p.blocks {
            fill(&mut b.conv_w, bound(d * k), rng);
            fill(&mut b.conv_b, bound(d * k), rng);
            fill(&mut b.scale_w, bound(e), rng);
            b.scale_b.value.fill(1.0);
            fill(&mut b.shift_w, bound(e), rng);
        }
        Ok(p)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.in_w, &self.in_b, &self.pos];
        for b in &self.blocks {
            out.extend([&b.conv_w, &b.conv_b, &b.scale_w, &b.scale_b, &b.shift_w, &b.shift_b]);
        }
        out.extend([&self.out_w, &self.out_b]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.in_w, &mut self.in_b, &mut self.pos];
        for b in &mut self.blocks {
            out.extend([
                &mut b.conv_w,
                &mut b.conv_b,
                &mut b.scale_w,
                &mut b.scale_b,
                &mut b.shift_w,
                &mut b.shift_b,
            ]);
        }
        out.extend([&mut self.out_w, &mut self.out_b]);
        out
    }

    pub fn forward(&self, noisy: &[f64], k: usize, cond: &[f64]) -> Result<Vec<f64>> {
        self.forward_cached(noisy, k, cond).map(|(y, _)| y)
    }

    pub fn forward_cached(&self, noisy: &[f64], k: usize, cond: &[f64]) -> Result<(Vec<f64>, DenoiserCache)> {
        let cfg = &self.config;
        if noisy.len() != cfg.window_len() {
            return Err(Error::shape("noisy action window", cfg.window_len(), noisy.len()));
        }
        if cond.len() != cfg.cond_dim {
            return Err(Error::shape("conditioning vector", cfg.cond_dim, cond.len()));
        }
        let (d, a) = (cfg.hidden, cfg.action_dim);
        let mut film_in = Vec::with_capacity(cfg.film_dim());
        film_in.extend_from_slice(cond);
        film_in.extend(sinusoidal_step_embedding(k, cfg.step_dim)?);

        let mut h = vec![0.0; cfg.horizon * d];
        for (x, out) in noisy.chunks_exact(a).zip(h.chunks_exact_mut(d)) {
            nn::affine(&self.in_w.value, &self.in_b.value, x, out);
        }
        h.iter_mut().zip(&self.pos.value).for_each(|(x, p)| *x += p);

        let mut cache = DenoiserCache {
            input: noisy.to_vec(),
            film_in,
            hidden: Vec::with_capacity(cfg.blocks + 1),
            conv: Vec::with_capacity(cfg.blocks),
            scale: Vec::with_capacity(cfg.blocks),
            modulated: Vec::with_capacity(cfg.blocks),
        };
        for b in &self.blocks {
            let mut z = vec![0.0; h.len()];
            nn::conv1d(&h, d, &b.conv_w.value, &b.conv_b.value, cfg.kernel, &mut z);
            let mut scale = vec![0.0; d];
            let mut shift = vec![0.0; d];
            nn::affine(&b.scale_w.value, &b.scale_b.value, &cache.film_in, &mut scale);
            nn::affine(&b.shift_w.value, &b.shift_b.value, &cache.film_in, &mut shift);
            let mut m = vec![0.0; h.len()];
            for (m_row, z_row) in m.chunks_exact_mut(d).zip(z.chunks_exact(d)) {
                for c in 0..d {
                    m_row[c] = scale[c] * z_row[c] + shift[c];
                }
            }
            let next: Vec<f64> = h.iter().zip(&m).map(|(x, &u)| x + silu(u)).collect();
            cache.hidden.push(core::mem::replace(&mut h, next));
            cache.conv.push(z);
            cache.scale.push(scale);
            cache.modulated.push(m);
        }

        let mut y = vec![0.0; noisy.len()];
        for (hr, out) in h.chunks_exact(d).zip(y.chunks_exact_mut(a)) {
            nn::affine(&self.out_w.value, &self.out_b.value, hr, out);
        }
        cache.hidden.push(h);
        Ok((y, cache))
    }

    /// Accumulates parameter gradients for upstream gradient `d_out` and
    /// returns the gradient with respect to the conditioning vector.
    pub fn backward(&mut self, d_out: &[f64], cache: Option<&DenoiserCache>) -> Result<Vec<f64>> {
        let cache = cache.ok_or(Error::MissingCache)?;
        let cfg = self.config;
        if d_out.len() != cfg.window_len() {
            return Err(Error::shape("output gradient", cfg.window_len(), d_out.len()));
        }
        let (d, a) = (cfg.hidden, cfg.action_dim);
        let last = &cache.hidden[cfg.blocks];
        let mut d_h = vec![0.0; last.len()];
        for ((g, hr), dh) in d_out
            .chunks_exact(a)
            .zip(last.chunks_exact(d))
            .zip(d_h.chunks_exact_mut(d))
        {
            nn::affine_backward(
                &self.out_w.value,
                hr,
                g,
                &mut self.out_w.grad,
                &mut self.out_b.grad,
                Some(dh),
            );
        }

        let mut d_film = vec![0.0; cfg.film_dim()];
        for (i, b) in self.blocks.iter_mut().enumerate().rev() {
            let (h_in, z, scale, m) = (&cache.hidden[i], &cache.conv[i], &cache.scale[i], &cache.modulated[i]);
            let d_m: Vec<f64> = d_h.iter().zip(m).map(|(g, &u)| g * silu_grad(u)).collect();
            let mut d_scale = vec![0.0; d];
            let mut d_shift = vec![0.0; d];
            let mut d_z = vec![0.0; z.len()];
            for ((dm_row, z_row), dz_row) in d_m.chunks_exact(d).zip(z.chunks_exact(d)).zip(d_z.chunks_exact_mut(d)) {
                for c in 0..d {
                    d_scale[c] += dm_row[c] * z_row[c];
                    d_shift[c] += dm_row[c];
                    dz_row[c] = dm_row[c] * scale[c];
                }
            }
            nn::affine_backward(
                &b.scale_w.value,
                &cache.film_in,
                &d_scale,
                &mut b.scale_w.grad,
                &mut b.scale_b.grad,
                Some(&mut d_film),
            );
            nn::affine_backward(
                &b.shift_w.value,
                &cache.film_in,
                &d_shift,
                &mut b.shift_w.grad,
                &mut b.shift_b.grad,
                Some(&mut d_film),
            );
            // residual path keeps d_h; the conv path adds to it
            nn::conv1d_backward(
                h_in,
                d,
                &b.conv_w.value,
                cfg.kernel,
                &d_z,
                &mut b.conv_w.grad,
                &mut b.conv_b.grad,
                Some(&mut d_h),
            );
        }

        self.pos.grad.iter_mut().zip(&d_h).for_each(|(p, g)| *p += g);
        for (x, g) in cache.input.chunks_exact(a).zip(d_h.chunks_exact(d)) {
            nn::affine_backward(&self.in_w.value, x, g, &mut self.in_w.grad, &mut self.in_b.grad, None);
        }
        d_film.truncate(cfg.cond_dim);
        Ok(d_film)
    }
}

fn fill<R: Rng + ?Sized>(p: &mut Param, bound: f64, rng: &mut R) {
    for w in &mut p.value {
        *w = rng.random_range(-bound..=bound);
    }
}

/// Denoiser parameters bound to the mode their output is read in.
#[derive(Debug, Clone, Copy)]
pub struct DenoiserNet<'a> {
    pub params: &'a DenoiserParams,
    pub mode: PredictionMode,
}

impl Denoise for DenoiserNet<'_> {
    fn mode(&self) -> PredictionMode {
        self.mode
    }

    fn predict(&self, noisy: &[f64], k: usize, cond: &[f64]) -> Result<Vec<f64>> {
        self.params.forward(noisy, k, cond)
    }
}
