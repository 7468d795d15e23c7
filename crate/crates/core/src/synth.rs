//! Procedural talking "faces" with audio-driven mouth motion.
//!
//! The template is a grid on the front unit hemisphere (y up, z towards the
//! viewer). Audio is a few sinusoidal carriers under a slow amplitude
//! envelope. Vertices below the vertical midpoint move along their normal in
//! proportion to the envelope; vertices above it drift on an independent
//! slow oscillation.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::AudioTrack;
use crate::geom::{FaceTemplate, VertexSequence};
use crate::metrics::vertical_extent;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SynthConfig {
    pub seed: u64,
    pub vertices: usize,
    pub frames: usize,
    pub fps: f64,
    pub sample_rate: u32,
    /// Peak mouth displacement at full envelope.
    pub mouth_gain: f64,
    /// Peak upper-face displacement.
    pub upper_amplitude: f64,
    /// Multiplies the envelope that drives the mouth; 0 freezes it.
    pub envelope_gain: f64,
    /// Smallest sequence length accepted (the sampler horizon).
    pub min_frames: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            vertices: 50,
            frames: 60,
            fps: 60.0,
            sample_rate: 16_000,
            mouth_gain: 0.08,
            upper_amplitude: 0.02,
            envelope_gain: 1.0,
            min_frames: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub template: FaceTemplate,
    pub sequence: VertexSequence,
    pub audio: AudioTrack,
    /// Envelope at each frame's centre time.
    pub envelope: Vec<f64>,
}

struct Envelope {
    freqs: [f64; 2],
    phases: [f64; 2],
}

impl Envelope {
    fn at(&self, t: f64) -> f64 {
        let s = 0.6 * (2.0 * PI * self.freqs[0] * t + self.phases[0]).sin()
            + 0.4 * (2.0 * PI * self.freqs[1] * t + self.phases[1]).sin();
        0.1 + 0.9 * (0.5 + 0.5 * s)
    }
}

fn hemisphere(vertices: usize) -> Vec<[f64; 3]> {
    let cols = (vertices as f64).sqrt().ceil() as usize;
    let rows = vertices.div_ceil(cols);
    let spread = |i: usize, n: usize| {
        if n <= 1 {
            0.0
        } else {
            0.4 * PI * (2.0 * i as f64 / (n - 1) as f64 - 1.0)
        }
    };
    (0..vertices)
        .map(|i| {
            let (elev, azim) = (spread(i / cols, rows), spread(i % cols, cols));
            [
                (elev.cos() * azim.sin()) as f32 as f64,
                elev.sin() as f32 as f64,
                (elev.cos() * azim.cos()) as f32 as f64,
            ]
        })
        .collect()
}

pub fn make_synthetic(cfg: &SynthConfig) -> Result<Synthetic> {
    if cfg.vertices < 8 {
        return Err(Error::Config(format!("need at least 8 vertices, got {}", cfg.vertices)));
    }
    if cfg.frames < cfg.min_frames.max(1) {
        return Err(Error::Config(format!(
            "need at least {} frames, got {}",
            cfg.min_frames, cfg.frames
        )));
    }
    if !(cfg.fps.is_finite() && cfg.fps > 0.0) || cfg.sample_rate == 0 {
        return Err(Error::Config("fps and sample rate must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let envelope = Envelope {
        freqs: [rng.random_range(1.5..3.5), rng.random_range(0.5..1.5)],
        phases: [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)],
    };
    let carriers: Vec<(f64, f64, f64)> = (0..rng.random_range(2..=4))
        .map(|_| {
            (
                rng.random_range(150.0..3000.0),
                rng.random_range(0.3..1.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let amp_total: f64 = carriers.iter().map(|c| c.1).sum();
    let upper_freq = rng.random_range(0.3..0.8);
    let upper_phase = rng.random_range(0.0..2.0 * PI);

    let template = FaceTemplate::new(hemisphere(cfg.vertices))?;
    let (lo, hi) = vertical_extent(&template);
    let mid = 0.5 * (lo + hi);

    let num_samples = (cfg.frames as f64 * cfg.sample_rate as f64 / cfg.fps).ceil() as usize;
    let samples = (0..num_samples)
        .map(|i| {
            let t = i as f64 / cfg.sample_rate as f64;
            let carrier: f64 = carriers.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum();
            (0.9 * envelope.at(t) * carrier / amp_total) as f32
        })
        .collect();

    let mut data = Vec::with_capacity(cfg.frames * cfg.vertices * 3);
    let mut env_track = Vec::with_capacity(cfg.frames);
    for n in 0..cfg.frames {
        let t = (n as f64 + 0.5) / cfg.fps;
        let e = envelope.at(t);
        env_track.push(e);
        for p in template.vertices() {
            let offset = if p[1] < mid {
                let weight = (mid - p[1]) / (mid - lo);
                cfg.mouth_gain * weight * cfg.envelope_gain * e
            } else {
                cfg.upper_amplitude * (2.0 * PI * upper_freq * t + upper_phase + 2.0 * p[0]).sin()
            };
            data.extend(p.iter().map(|c| (c * (1.0 + offset)) as f32 as f64));
        }
    }

    Ok(Synthetic {
        sequence: VertexSequence::new(cfg.vertices, cfg.fps, data)?,
        audio: AudioTrack::new(cfg.sample_rate, samples)?,
        template,
        envelope: env_track,
    })
}
