//! Fixed-horizon windows over long sequences.
//!
//! A window covers `horizon` contiguous frames. Its first `n_obs` frames are
//! the observation, and all `horizon` frames carry action targets. During
//! rollout only the `n_act` actions right after the observation are
//! committed before the next window is planned.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::features::AudioFeatures;
use crate::geom::{ActionSequence, VertexSequence};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SamplerConfig {
    pub horizon: usize,
    pub n_obs: usize,
    pub n_act: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            horizon: 4,
            n_obs: 2,
            n_act: 2,
        }
    }
}

impl SamplerConfig {
    /// Committed positions `n_obs..n_obs + n_act` must fit inside the window.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.n_obs == 0 || self.n_act == 0 {
            return Err(Error::Config(format!(
                "horizon, n_obs and n_act must be positive (got {}, {}, {})",
                self.horizon, self.n_obs, self.n_act
            )));
        }
        if self.n_obs + self.n_act > self.horizon {
            return Err(Error::Config(format!(
                "n_obs + n_act = {} exceeds horizon {}",
                self.n_obs + self.n_act,
                self.horizon
            )));
        }
        Ok(())
    }
}

/// A training window; `start` is the 0-based index of its first frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub horizon: usize,
    pub n_obs: usize,
}

impl Window {
    pub fn obs_frames(&self) -> Range<usize> {
        self.start..self.start + self.n_obs
    }

    pub fn action_frames(&self) -> Range<usize> {
        self.start..self.start + self.horizon
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowBuffer {
    pub source: usize,
    pub windows: Vec<Window>,
}

/// Every window that fits entirely inside `num_frames` frames, in start order.
pub fn enumerate_windows(num_frames: usize, cfg: &SamplerConfig) -> Result<WindowBuffer> {
    cfg.validate()?;
    let count = (num_frames + 1).saturating_sub(cfg.horizon);
    let windows = (0..count)
        .map(|start| Window {
            start,
            horizon: cfg.horizon,
            n_obs: cfg.n_obs,
        })
        .collect();
    Ok(WindowBuffer { source: 0, windows })
}

/// Observation and target slices for one window, flattened frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// `n_obs * V * 3`
    pub obs_vertices: Vec<f64>,
    /// `n_obs * F`
    pub obs_audio: Vec<f64>,
    /// `horizon * V * 3`
    pub target: Vec<f64>,
}

pub fn slice_window(
    x: &VertexSequence,
    a: &ActionSequence,
    audio: &AudioFeatures,
    w: &Window,
) -> Result<TrainingSample> {
    let n = x.num_frames();
    if a.num_frames() != n || audio.num_frames() < n {
        return Err(Error::shape(
            "aligned frames",
            n,
            a.num_frames().min(audio.num_frames()),
        ));
    }
    if a.num_vertices() != x.num_vertices() {
        return Err(Error::shape("action vertices", x.num_vertices(), a.num_vertices()));
    }
    if w.n_obs > w.horizon || w.start + w.horizon > n {
        return Err(Error::Index(format!(
            "window [{}, {}) outside sequence of {} frames",
            w.start,
            w.start + w.horizon,
            n
        )));
    }
    let mut sample = TrainingSample {
        obs_vertices: Vec::with_capacity(w.n_obs * x.frame_len()),
        obs_audio: Vec::with_capacity(w.n_obs * audio.num_bands()),
        target: Vec::with_capacity(w.horizon * x.frame_len()),
    };
    for f in w.obs_frames() {
        sample.obs_vertices.extend_from_slice(x.frame(f));
        sample.obs_audio.extend_from_slice(audio.frame(f));
    }
    for f in w.action_frames() {
        sample.target.extend_from_slice(a.frame(f));
    }
    Ok(sample)
}

/// Actions of `x` sliced at every window that fits the sequence.
pub fn collect_samples(x: &VertexSequence, audio: &AudioFeatures, cfg: &SamplerConfig) -> Result<Vec<TrainingSample>> {
    let a = crate::geom::compute_actions(x)?;
    enumerate_windows(x.num_frames(), cfg)?
        .windows
        .iter()
        .map(|w| slice_window(x, &a, audio, w))
        .collect()
}

/// One planning step of a rollout.
///
/// `start` is the frame index of the window's first slot and may be negative
/// during warm start, in which case slots before frame 0 repeat frame 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolloutStep {
    pub start: isize,
    pub committed: Range<usize>,
    pub warm_start: bool,
}

impl RolloutStep {
    /// Frame shown in observation slot `slot`, clamped to the first frame.
    pub fn obs_frame(&self, slot: usize) -> usize {
        (self.start + slot as isize).max(0) as usize
    }

    /// Position of frame `frame` inside the window.
    pub fn position(&self, frame: usize) -> usize {
        (frame as isize - self.start) as usize
    }
}

/// Planning steps for generating `num_frames` frames from a known first frame.
///
/// Warm-start steps fill frames `1..n_obs`; regular steps start at frame 0
/// and advance by `n_act`, committing `n_act` frames after their observation.
/// Every frame after the first is committed exactly once.
pub fn rollout_schedule(num_frames: usize, cfg: &SamplerConfig) -> Result<Vec<RolloutStep>> {
    cfg.validate()?;
    let (n_obs, n_act) = (cfg.n_obs as isize, cfg.n_act as isize);
    let n = num_frames as isize;
    let mut steps = Vec::new();

    let warm_end = n_obs.min(n);
    let mut start = 1 - n_obs;
    while start + n_obs < warm_end {
        let first = start + n_obs;
        steps.push(RolloutStep {
            start,
            committed: first as usize..(first + n_act).min(warm_end) as usize,
            warm_start: true,
        });
        start += n_act;
    }

    let mut start = 0;
    while start + n_obs < n {
        let first = start + n_obs;
        steps.push(RolloutStep {
            start,
            committed: first as usize..(first + n_act).min(n) as usize,
            warm_start: false,
        });
        start += n_act;
    }
    Ok(steps)
}
