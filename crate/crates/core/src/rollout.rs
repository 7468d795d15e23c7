//! Closed-loop generation: windows are denoised in the order given by
//! [`rollout_schedule`], each conditioned on already generated vertices and
//! the audio of its observation frames, and the committed actions are
//! integrated from the first frame.

use alloc::format;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffusion::{ddim_sample, gaussian};
use crate::features::{AudioFeatures, AudioTrack};
use crate::geom::{integrate_actions, ActionSequence, FaceTemplate, VertexSequence};
use crate::policy::Policy;
use crate::sampler::rollout_schedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GenerateConfig<'a> {
    pub frames: usize,
    pub fps: f64,
    pub seed: u64,
    /// Observe these vertices instead of the generated ones.
    pub teacher: Option<&'a VertexSequence>,
}

pub fn generate(
    policy: &Policy,
    template: &FaceTemplate,
    first_frame: &[f64],
    track: &AudioTrack,
    cfg: &GenerateConfig<'_>,
) -> Result<VertexSequence> {
    let pcfg = &policy.config;
    let v = pcfg.vertices;
    if template.num_vertices() != v {
        return Err(Error::shape("template vertices", v, template.num_vertices()));
    }
    if first_frame.len() != v * 3 {
        return Err(Error::shape("first frame", v * 3, first_frame.len()));
    }
    if cfg.frames == 0 {
        return Err(Error::Config("cannot generate zero frames".into()));
    }
    let covered = track.frames_covered(cfg.fps);
    if covered < cfg.frames {
        return Err(Error::Audio(format!(
            "audio covers {covered} frames, {} requested",
            cfg.frames
        )));
    }
    if let Some(t) = cfg.teacher {
        if t.num_vertices() != v || t.num_frames() < cfg.frames {
            return Err(Error::shape("teacher frames", cfg.frames, t.num_frames()));
        }
    }

    let audio = AudioFeatures::compute(track, cfg.fps, cfg.frames, &pcfg.filterbank)?;
    let steps = policy.schedule.inference_steps(pcfg.schedule.inference_steps)?;
    let window_len = pcfg.denoiser_config().window_len();
    let frame_len = v * 3;
    let net = policy.net();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut actions = ActionSequence::zeros(v, cfg.frames);
    let mut positions: Vec<f64> = Vec::with_capacity(cfg.frames * frame_len);
    positions.extend_from_slice(first_frame);

    for step in rollout_schedule(cfg.frames, &pcfg.sampler)? {
        let mut obs_vertices = Vec::with_capacity(pcfg.sampler.n_obs * frame_len);
        let mut obs_audio = Vec::with_capacity(pcfg.sampler.n_obs * audio.num_bands());
        for slot in 0..pcfg.sampler.n_obs {
            let f = step.obs_frame(slot);
            match cfg.teacher {
                Some(t) => obs_vertices.extend_from_slice(t.frame(f)),
                None => obs_vertices.extend_from_slice(&positions[f * frame_len..(f + 1) * frame_len]),
            }
            obs_audio.extend_from_slice(audio.frame(f));
        }
        let cond = policy.condition(&obs_vertices, &obs_audio)?;
        let start = gaussian(&mut rng, window_len);
        let window = ddim_sample(start, &steps, &cond, &net, &policy.schedule)?;
        for f in step.committed.clone() {
            let pos = step.position(f);
            let src = &window[pos * frame_len..(pos + 1) * frame_len];
            let dst = actions.frame_mut(f);
            dst.copy_from_slice(src);
            policy.normalizer.actions_out(dst);
            for i in 0..frame_len {
                let prev = positions[(f - 1) * frame_len + i];
                positions.push(prev + actions.frame(f)[i]);
            }
        }
    }
    integrate_actions(&actions, first_frame, cfg.fps)
}
