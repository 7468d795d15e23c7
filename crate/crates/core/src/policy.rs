//! The trainable policy: observation encoders, denoiser and noise schedule
//! bundled with the configuration that fixes all their shapes.

use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::denoiser::{DenoiserConfig, DenoiserNet, DenoiserParams};
use crate::diffusion::{NoiseSchedule, PredictionMode, ScheduleConfig};
use crate::features::{EncoderConfig, EncoderParams, FilterBankConfig, FuseCache};
use crate::nn::Param;
use crate::sampler::{SamplerConfig, TrainingSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DenoiserShape {
    pub hidden: usize,
    pub kernel: usize,
    pub step_dim: usize,
    pub blocks: usize,
}

impl Default for DenoiserShape {
    fn default() -> Self {
        Self {
            hidden: 128,
            kernel: 3,
            step_dim: 64,
            blocks: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PolicyConfig {
    pub vertices: usize,
    pub sampler: SamplerConfig,
    pub filterbank: FilterBankConfig,
    pub encoder: EncoderConfig,
    pub denoiser: DenoiserShape,
    pub schedule: ScheduleConfig,
    pub mode: PredictionMode,
    /// Floor on fitted spreads and action scales, relative to their group mean.
    pub norm_floor: f64,
    /// Seeds the initial weights.
    pub init_seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            vertices: 50,
            sampler: SamplerConfig::default(),
            filterbank: FilterBankConfig::default(),
            encoder: EncoderConfig::default(),
            denoiser: DenoiserShape::default(),
            schedule: ScheduleConfig::default(),
            mode: PredictionMode::Sample,
            norm_floor: 1.0,
            init_seed: 0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.encoder.validate()?;
        if self.vertices == 0 {
            return Err(Error::Config("vertex count must be positive".into()));
        }
        if self.encoder.bands != self.filterbank.bands {
            return Err(Error::Config("encoder and filter bank disagree on band count".into()));
        }
        if !(self.norm_floor > 0.0 && self.norm_floor <= 1.0) {
            return Err(Error::Config("normalisation floor must be in (0, 1]".into()));
        }
        self.denoiser_config().validate()?;
        NoiseSchedule::from_config(&self.schedule)?.inference_steps(self.schedule.inference_steps)?;
        Ok(())
    }

    pub fn cond_dim(&self) -> usize {
        self.sampler.n_obs * self.encoder.frame_dim()
    }

    pub fn denoiser_config(&self) -> DenoiserConfig {
        DenoiserConfig {
            horizon: self.sampler.horizon,
            action_dim: self.vertices * 3,
            cond_dim: self.cond_dim(),
            hidden: self.denoiser.hidden,
            kernel: self.denoiser.kernel,
            step_dim: self.denoiser.step_dim,
            blocks: self.denoiser.blocks,
        }
    }
}

/// Fixed affine maps fitted on the training windows and stored with the
/// policy.
///
/// An observation window of frames `r_0 .. r_m` is presented to the encoder
/// as the standardised steps `r_{j+1} - r_j` followed by the standardised
/// latest frame. Consecutive frames are nearly equal, so without this the
/// motion the actions depend on hides in a direction of tiny variance.
/// Actions are divided by their largest magnitude before diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub vertex_mean: Param,
    pub vertex_std: Param,
    pub vertex_step: Param,
    pub audio_mean: Param,
    pub audio_std: Param,
    pub audio_step: Param,
    pub action_scale: Param,
}

fn floor_relative(values: &mut [f64], rel: f64) {
    let avg = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let floor = if avg > 0.0 { rel * avg } else { 1.0 };
    for x in values {
        *x = x.max(floor);
    }
}

/// Level mean/std over every frame and root-mean-square step between
/// consecutive frames of a window.
fn fit_group<'a>(
    windows: impl Iterator<Item = &'a [f64]>,
    mean: &mut Param,
    std: &mut Param,
    step: &mut Param,
    rel: f64,
) {
    let dim = mean.len();
    let mut sum = alloc::vec![0.0; dim];
    let mut sq = alloc::vec![0.0; dim];
    let mut step_sq = alloc::vec![0.0; dim];
    let (mut frames, mut steps) = (0usize, 0usize);
    for w in windows {
        let rows: Vec<&[f64]> = w.chunks_exact(dim).collect();
        for r in &rows {
            for i in 0..dim {
                sum[i] += r[i];
                sq[i] += r[i] * r[i];
            }
            frames += 1;
        }
        for pair in rows.windows(2) {
            for i in 0..dim {
                step_sq[i] += (pair[1][i] - pair[0][i]).powi(2);
            }
            steps += 1;
        }
    }
    if frames > 0 {
        for i in 0..dim {
            let m = sum[i] / frames as f64;
            mean.value[i] = m;
            std.value[i] = (sq[i] / frames as f64 - m * m).max(0.0).sqrt();
        }
        floor_relative(&mut std.value, rel);
    }
    if steps > 0 {
        for i in 0..dim {
            step.value[i] = (step_sq[i] / steps as f64).sqrt();
        }
        floor_relative(&mut step.value, rel);
    }
}

fn transform(values: &[f64], mean: &Param, std: &Param, step: &Param) -> Vec<f64> {
    let dim = mean.len();
    let rows: Vec<&[f64]> = values.chunks_exact(dim).collect();
    let mut out = Vec::with_capacity(values.len());
    for pair in rows.windows(2) {
        out.extend((0..dim).map(|i| (pair[1][i] - pair[0][i]) / step.value[i]));
    }
    if let Some(last) = rows.last() {
        out.extend((0..dim).map(|i| (last[i] - mean.value[i]) / std.value[i]));
    }
    out
}

impl Normalizer {
    /// Standardisation with zero means and unit spreads.
    pub fn identity(frame_len: usize, bands: usize) -> Self {
        Self {
            vertex_mean: Param::zeros("normalizer.vertex.mean", &[frame_len]),
            vertex_std: Param::filled("normalizer.vertex.std", &[frame_len], 1.0),
            vertex_step: Param::filled("normalizer.vertex.step", &[frame_len], 1.0),
            audio_mean: Param::zeros("normalizer.audio.mean", &[bands]),
            audio_std: Param::filled("normalizer.audio.std", &[bands], 1.0),
            audio_step: Param::filled("normalizer.audio.step", &[bands], 1.0),
            action_scale: Param::filled("normalizer.action.scale", &[1], 1.0),
        }
    }

    /// Fits every statistic to the training windows. Each spread is clamped
    /// from below to `rel` times the mean of its group, so static coordinates
    /// are not blown up.
    pub fn fit(samples: &[TrainingSample], frame_len: usize, bands: usize, rel: f64) -> Self {
        let mut out = Self::identity(frame_len, bands);
        fit_group(
            samples.iter().map(|s| &s.obs_vertices[..]),
            &mut out.vertex_mean,
            &mut out.vertex_std,
            &mut out.vertex_step,
            rel,
        );
        fit_group(
            samples.iter().map(|s| &s.obs_audio[..]),
            &mut out.audio_mean,
            &mut out.audio_std,
            &mut out.audio_step,
            rel,
        );
        let max = samples
            .iter()
            .flat_map(|s| s.target.iter())
            .fold(0.0f64, |m, a| m.max(a.abs()));
        if max > 0.0 {
            out.action_scale.value[0] = max;
        }
        out
    }

    pub fn params(&self) -> [&Param; 7] {
        [
            &self.vertex_mean,
            &self.vertex_std,
            &self.vertex_step,
            &self.audio_mean,
            &self.audio_std,
            &self.audio_step,
            &self.action_scale,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 7] {
        [
            &mut self.vertex_mean,
            &mut self.vertex_std,
            &mut self.vertex_step,
            &mut self.audio_mean,
            &mut self.audio_std,
            &mut self.audio_step,
            &mut self.action_scale,
        ]
    }

    /// Observed vertex frames, flattened, to encoder input.
    pub fn vertices(&self, values: &[f64]) -> Vec<f64> {
        transform(values, &self.vertex_mean, &self.vertex_std, &self.vertex_step)
    }

    /// Observed filter-bank frames, flattened, to encoder input.
    pub fn audio(&self, values: &[f64]) -> Vec<f64> {
        transform(values, &self.audio_mean, &self.audio_std, &self.audio_step)
    }

    /// Raw actions to diffusion space.
    pub fn actions_in(&self, values: &[f64]) -> Vec<f64> {
        let scale = self.action_scale.value[0];
        values.iter().map(|a| a / scale).collect()
    }

    /// Diffusion-space actions back to raw units, in place.
    pub fn actions_out(&self, values: &mut [f64]) {
        let scale = self.action_scale.value[0];
        values.iter_mut().for_each(|a| *a *= scale);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub config: PolicyConfig,
    pub normalizer: Normalizer,
    pub encoder: EncoderParams,
    pub denoiser: DenoiserParams,
    pub schedule: NoiseSchedule,
}

impl Policy {
    /// Randomly initialised policy seeded by `config.init_seed`, with an
    /// identity normalizer.
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let encoder = EncoderParams::init(config.encoder, &mut rng)?;
        let denoiser = DenoiserParams::init(config.denoiser_config(), &mut rng)?;
        Ok(Self {
            normalizer: Normalizer::identity(config.vertices * 3, config.encoder.bands),
            schedule: NoiseSchedule::from_config(&config.schedule)?,
            config,
            encoder,
            denoiser,
        })
    }

    pub fn zeros(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            normalizer: Normalizer::identity(config.vertices * 3, config.encoder.bands),
            encoder: EncoderParams::zeros(config.encoder)?,
            denoiser: DenoiserParams::zeros(config.denoiser_config())?,
            schedule: NoiseSchedule::from_config(&config.schedule)?,
            config,
        })
    }

    /// Fits the normalizer to the training windows.
    pub fn fit_data(&mut self, samples: &[TrainingSample]) {
        self.normalizer = Normalizer::fit(
            samples,
            self.config.vertices * 3,
            self.config.encoder.bands,
            self.config.norm_floor,
        );
    }

    /// Trainable weights, in a fixed order.
    pub fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self.encoder.params().into_iter().collect();
        out.extend(self.denoiser.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.encoder.params_mut().into_iter().collect();
        out.extend(self.denoiser.params_mut());
        out
    }

    /// Every stored tensor: normalizer statistics, then trainable weights.
    pub fn tensors(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self.normalizer.params().into_iter().collect();
        out.extend(self.params());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.normalizer.params_mut().into_iter().collect();
        out.extend(self.encoder.params_mut());
        out.extend(self.denoiser.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn net(&self) -> DenoiserNet<'_> {
        DenoiserNet {
            params: &self.denoiser,
            mode: self.config.mode,
        }
    }

    /// Conditioning vector for raw observation slices.
    pub fn condition(&self, obs_vertices: &[f64], obs_audio: &[f64]) -> Result<Vec<f64>> {
        self.condition_cached(obs_vertices, obs_audio).map(|(c, _)| c)
    }

    pub fn condition_cached(&self, obs_vertices: &[f64], obs_audio: &[f64]) -> Result<(Vec<f64>, FuseCache)> {
        let frame_len = self.config.vertices * 3;
        let bands = self.config.encoder.bands;
        let n_obs = self.config.sampler.n_obs;
        if obs_vertices.len() != n_obs * frame_len {
            return Err(Error::shape("observed vertices", n_obs * frame_len, obs_vertices.len()));
        }
        if obs_audio.len() != n_obs * bands {
            return Err(Error::shape("observed audio", n_obs * bands, obs_audio.len()));
        }
        self.encoder.fuse_observation_cached(
            &self.normalizer.vertices(obs_vertices),
            &self.normalizer.audio(obs_audio),
            n_obs,
        )
    }
}
