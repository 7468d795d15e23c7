//! Perception: per-frame audio filter-bank features and the observation
//! encoders that turn vertices and audio into a conditioning vector.
//!
//! Each observed frame contributes a 512-wide visual feature and a 512-wide
//! audio feature; the two are concatenated per frame and frames are laid out
//! in time order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;
use rand::Rng;

use crate::fft::power_spectrum;
use crate::nn::{self, silu, silu_grad, Param};
use crate::{Error, Result};

/// Mono audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

impl AudioTrack {
    pub fn new(sample_rate: u32, samples: Vec<f32>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Audio(format!("non-finite sample at {i}")));
        }
        Ok(Self { sample_rate, samples })
    }

    /// Sample range `[lo, hi)` covered by video frame `n` at `fps`.
    pub fn frame_range(&self, fps: f64, n: usize) -> (usize, usize) {
        let per_frame = self.sample_rate as f64 / fps;
        let lo = (n as f64 * per_frame).floor() as usize;
        let hi = ((n + 1) as f64 * per_frame).floor() as usize;
        (lo, hi)
    }

    /// Number of whole video frames the track covers.
    pub fn frames_covered(&self, fps: f64) -> usize {
        (self.samples.len() as f64 * fps / self.sample_rate as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FilterBankConfig {
    pub bands: usize,
    pub f_min: f64,
    /// Upper edge in Hz; `None` means the Nyquist frequency.
    pub f_max: Option<f64>,
    /// Smallest FFT size; frames are zero-padded up to a power of two.
    pub min_fft: usize,
    pub floor: f64,
}

impl Default for FilterBankConfig {
    fn default() -> Self {
        Self {
            bands: 26,
            f_min: 0.0,
            f_max: None,
            min_fft: 256,
            floor: 1e-10,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10.0.powf(m / 2595.0) - 1.0)
}

impl FilterBankConfig {
    /// `bands + 2` mel-spaced edge frequencies; band `b` peaks at edge `b + 1`.
    pub fn edges(&self, sample_rate: u32) -> Vec<f64> {
        let f_max = self.f_max.unwrap_or(sample_rate as f64 / 2.0);
        let (lo, hi) = (hz_to_mel(self.f_min), hz_to_mel(f_max));
        (0..self.bands + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (self.bands + 1) as f64))
            .collect()
    }

    pub fn center(&self, sample_rate: u32, band: usize) -> f64 {
        self.edges(sample_rate)[band + 1]
    }
}

fn triangle(f: f64, lo: f64, mid: f64, hi: f64) -> f64 {
    if f <= lo || f >= hi {
        0.0
    } else if f <= mid {
        (f - lo) / (mid - lo)
    } else {
        (hi - f) / (hi - mid)
    }
}

/// Log filter-bank energies of video frame `n` (0-based).
///
/// The frame's samples are Hann-windowed, zero-padded to a power of two and
/// their power spectrum is pooled by mel-spaced triangles. Samples past the
/// end of the track read as zero.
pub fn frame_audio_features(track: &AudioTrack, fps: f64, n: usize, cfg: &FilterBankConfig) -> Result<Vec<f64>> {
    if track.samples.is_empty() {
        return Err(Error::Audio("empty track".into()));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Audio(format!("fps must be positive, got {fps}")));
    }
    let (lo, hi) = track.frame_range(fps, n);
    let len = (hi - lo).max(1);
    let n_fft = len.next_power_of_two().max(cfg.min_fft.next_power_of_two());
    let mut frame = vec![0.0; n_fft];
    for (i, out) in frame.iter_mut().take(len).enumerate() {
        let s = track.samples.get(lo + i).copied().unwrap_or(0.0) as f64;
        let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos();
        *out = s * hann;
    }
    let power = power_spectrum(&frame);
    let edges = cfg.edges(track.sample_rate);
    let bin_hz = track.sample_rate as f64 / n_fft as f64;
    Ok((0..cfg.bands)
        .map(|b| {
            let energy: f64 = power
                .iter()
                .enumerate()
                .map(|(j, p)| triangle(j as f64 * bin_hz, edges[b], edges[b + 1], edges[b + 2]) * p)
                .sum();
            energy.max(cfg.floor).ln()
        })
        .collect())
}

/// Per-frame audio features for a whole sequence, `[frames][bands]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatures {
    num_bands: usize,
    data: Vec<f64>,
}

impl AudioFeatures {
    pub fn new(num_bands: usize, data: Vec<f64>) -> Result<Self> {
        if num_bands == 0 || !data.len().is_multiple_of(num_bands) {
            return Err(Error::shape("audio features", num_bands.max(1), data.len()));
        }
        Ok(Self { num_bands, data })
    }

    pub fn compute(track: &AudioTrack, fps: f64, frames: usize, cfg: &FilterBankConfig) -> Result<Self> {
        let mut data = Vec::with_capacity(frames * cfg.bands);
        for n in 0..frames {
            data.extend(frame_audio_features(track, fps, n, cfg)?);
        }
        Self::new(cfg.bands, data)
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.num_bands
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        &self.data[n * self.num_bands..(n + 1) * self.num_bands]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EncoderConfig {
    pub channels: usize,
    pub kernel: usize,
    pub feature_dim: usize,
    pub bands: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            channels: 64,
            kernel: 3,
            feature_dim: 512,
            bands: 26,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.feature_dim == 0 || self.bands == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "encoder kernel must be odd, got {}",
                self.kernel
            )));
        }
        Ok(())
    }

    /// Width of one fused frame (visual + audio).
    pub fn frame_dim(&self) -> usize {
        2 * self.feature_dim
    }
}

/// Visual encoder (per-vertex linear, conv over vertices, max pool,
/// projection) and the audio projection.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub vis_in_w: Param,
    pub vis_in_b: Param,
    pub vis_conv_w: Param,
    pub vis_conv_b: Param,
    pub vis_out_w: Param,
    pub vis_out_b: Param,
    pub audio_w: Param,
    pub audio_b: Param,
}

/// Activations of one visual forward pass.
#[derive(Debug, Clone)]
pub struct VisualCache {
    vertices: Vec<f64>,
    pre_in: Vec<f64>,
    hidden: Vec<f64>,
    pre_conv: Vec<f64>,
    argmax: Vec<usize>,
    pooled: Vec<f64>,
}

/// Activations of one [`EncoderParams::fuse_observation`] pass.
#[derive(Debug, Clone)]
pub struct FuseCache {
    visual: Vec<VisualCache>,
    audio: Vec<Vec<f64>>,
}

impl EncoderParams {
    pub fn zeros(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let EncoderConfig {
            channels: c,
            kernel: k,
            feature_dim: d,
            bands: f,
        } = config;
        Ok(Self {
            config,
            vis_in_w: Param::zeros("encoder.visual.in.w", &[c, 3]),
            vis_in_b: Param::zeros("encoder.visual.in.b", &[c]),
            vis_conv_w: Param::zeros("encoder.visual.conv.w", &[c, c, k]),
            vis_conv_b: Param::zeros("encoder.visual.conv.b", &[c]),
            vis_out_w: Param::zeros("encoder.visual.out.w", &[d, c]),
            vis_out_b: Param::zeros("encoder.visual.out.b", &[d]),
            audio_w: Param::zeros("encoder.audio.w", &[d, f]),
            audio_b: Param::zeros("encoder.audio.b", &[d]),
        })
    }

    /// Uniform fan-in initialisation; inputs are expected to be standardised.
    pub fn init<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let EncoderConfig {
            channels: c,
            kernel: k,
            feature_dim: d,
            bands: f,
        } = config;
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        Ok(Self {
            config,
            vis_in_w: Param::uniform("encoder.visual.in.w", &[c, 3], fan(3), rng),
            vis_in_b: Param::uniform("encoder.visual.in.b", &[c], fan(3), rng),
            vis_conv_w: Param::uniform("encoder.visual.conv.w", &[c, c, k], fan(c * k), rng),
            vis_conv_b: Param::uniform("encoder.visual.conv.b", &[c], fan(c * k), rng),
            vis_out_w: Param::uniform("encoder.visual.out.w", &[d, c], fan(c), rng),
            vis_out_b: Param::uniform("encoder.visual.out.b", &[d], fan(c), rng),
            audio_w: Param::uniform("encoder.audio.w", &[d, f], fan(f), rng),
            audio_b: Param::zeros("encoder.audio.b", &[d]),
        })
    }

    pub fn params(&self) -> [&Param; 8] {
        [
            &self.vis_in_w,
            &self.vis_in_b,
            &self.vis_conv_w,
            &self.vis_conv_b,
            &self.vis_out_w,
            &self.vis_out_b,
            &self.audio_w,
            &self.audio_b,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 8] {
        [
            &mut self.vis_in_w,
            &mut self.vis_in_b,
            &mut self.vis_conv_w,
            &mut self.vis_conv_b,
            &mut self.vis_out_w,
            &mut self.vis_out_b,
            &mut self.audio_w,
            &mut self.audio_b,
        ]
    }

    pub fn encode_visual(&self, vertices: &[f64]) -> Result<Vec<f64>> {
        self.encode_visual_cached(vertices).map(|(out, _)| out)
    }

    pub fn encode_visual_cached(&self, vertices: &[f64]) -> Result<(Vec<f64>, VisualCache)> {
        if vertices.is_empty() || !vertices.len().is_multiple_of(3) {
            return Err(Error::shape("visual input", vertices.len() / 3 * 3 + 3, vertices.len()));
        }
        let c = self.config.channels;
        let v = vertices.len() / 3;
        let mut pre_in = vec![0.0; v * c];
        for (p, out) in vertices.chunks_exact(3).zip(pre_in.chunks_exact_mut(c)) {
            nn::affine(&self.vis_in_w.value, &self.vis_in_b.value, p, out);
        }
        let hidden: Vec<f64> = pre_in.iter().map(|&x| silu(x)).collect();
        let mut pre_conv = vec![0.0; v * c];
        nn::conv1d(
            &hidden,
            c,
            &self.vis_conv_w.value,
            &self.vis_conv_b.value,
            self.config.kernel,
            &mut pre_conv,
        );
        let mut argmax = vec![0; c];
        let mut pooled = vec![f64::NEG_INFINITY; c];
        for (vi, row) in pre_conv.chunks_exact(c).enumerate() {
            for (o, &u) in row.iter().enumerate() {
                let a = silu(u);
                if a > pooled[o] {
                    pooled[o] = a;
                    argmax[o] = vi;
                }
            }
        }
        let mut out = vec![0.0; self.config.feature_dim];
        nn::affine(&self.vis_out_w.value, &self.vis_out_b.value, &pooled, &mut out);
        Ok((
            out,
            VisualCache {
                vertices: vertices.to_vec(),
                pre_in,
                hidden,
                pre_conv,
                argmax,
                pooled,
            },
        ))
    }

    fn visual_backward(&mut self, d_out: &[f64], cache: &VisualCache) {
        let c = self.config.channels;
        let mut d_pooled = vec![0.0; c];
        nn::affine_backward(
            &self.vis_out_w.value,
            &cache.pooled,
            d_out,
            &mut self.vis_out_w.grad,
            &mut self.vis_out_b.grad,
            Some(&mut d_pooled),
        );
        let mut d_pre_conv = vec![0.0; cache.pre_conv.len()];
        for (o, (&vi, g)) in cache.argmax.iter().zip(&d_pooled).enumerate() {
            d_pre_conv[vi * c + o] = g * silu_grad(cache.pre_conv[vi * c + o]);
        }
        let mut d_hidden = vec![0.0; cache.hidden.len()];
        nn::conv1d_backward(
            &cache.hidden,
            c,
            &self.vis_conv_w.value,
            self.config.kernel,
            &d_pre_conv,
            &mut self.vis_conv_w.grad,
            &mut self.vis_conv_b.grad,
            Some(&mut d_hidden),
        );
        for ((p, d_h), pre) in cache
            .vertices
            .chunks_exact(3)
            .zip(d_hidden.chunks_exact(c))
            .zip(cache.pre_in.chunks_exact(c))
        {
            let d_pre: Vec<f64> = d_h.iter().zip(pre).map(|(d, &u)| d * silu_grad(u)).collect();
            nn::affine_backward(
                &self.vis_in_w.value,
                p,
                &d_pre,
                &mut self.vis_in_w.grad,
                &mut self.vis_in_b.grad,
                None,
            );
        }
    }

    pub fn encode_audio(&self, bands: &[f64]) -> Result<Vec<f64>> {
        if bands.len() != self.config.bands {
            return Err(Error::shape("audio bands", self.config.bands, bands.len()));
        }
        let mut out = vec![0.0; self.config.feature_dim];
        nn::affine(&self.audio_w.value, &self.audio_b.value, bands, &mut out);
        Ok(out)
    }

    /// Conditioning vector `[n_obs][visual | audio]` for one observation.
    pub fn fuse_observation(&self, obs_vertices: &[f64], obs_audio: &[f64], n_obs: usize) -> Result<Vec<f64>> {
        self.fuse_observation_cached(obs_vertices, obs_audio, n_obs)
            .map(|(out, _)| out)
    }

    pub fn fuse_observation_cached(
        &self,
        obs_vertices: &[f64],
        obs_audio: &[f64],
        n_obs: usize,
    ) -> Result<(Vec<f64>, FuseCache)> {
        let bands = self.config.bands;
        if n_obs == 0 || !obs_vertices.len().is_multiple_of(n_obs) {
            return Err(Error::shape("observed vertex frames", n_obs, obs_vertices.len()));
        }
        if obs_audio.len() != n_obs * bands {
            return Err(Error::shape("observed audio frames", n_obs * bands, obs_audio.len()));
        }
        let frame_len = obs_vertices.len() / n_obs;
        let mut out = Vec::with_capacity(n_obs * self.config.frame_dim());
        let mut cache = FuseCache {
            visual: Vec::with_capacity(n_obs),
            audio: Vec::with_capacity(n_obs),
        };
        for (verts, audio) in obs_vertices.chunks_exact(frame_len).zip(obs_audio.chunks_exact(bands)) {
            let (vis, vc) = self.encode_visual_cached(verts)?;
            out.extend(vis);
            out.extend(self.encode_audio(audio)?);
            cache.visual.push(vc);
            cache.audio.push(audio.to_vec());
        }
        Ok((out, cache))
    }

    /// Accumulates encoder gradients from the gradient of the conditioning vector.
    pub fn fuse_backward(&mut self, d_cond: &[f64], cache: &FuseCache) -> Result<()> {
        let d = self.config.feature_dim;
        let frame_dim = self.config.frame_dim();
        if d_cond.len() != cache.visual.len() * frame_dim {
            return Err(Error::shape(
                "conditioning gradient",
                cache.visual.len() * frame_dim,
                d_cond.len(),
            ));
        }
        for ((g, vc), audio) in d_cond.chunks_exact(frame_dim).zip(&cache.visual).zip(&cache.audio) {
            self.visual_backward(&g[..d], vc);
            nn::affine_backward(
                &self.audio_w.value,
                audio,
                &g[d..],
                &mut self.audio_w.grad,
                &mut self.audio_b.grad,
                None,
            );
        }
        Ok(())
    }
}
