//! Training and generation runs over files.

use std::path::PathBuf;
use std::time::Instant;

use facepolicy_core::rollout::{generate, GenerateConfig};
use facepolicy_core::training::{train_epoch, EpochSummary, TrainState};
use facepolicy_core::{Policy, VertexSequence};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::RunConfig;
use crate::dataset::{windows, Dataset, Loaded, Split};
use crate::error::{Error, Result};
use crate::format::{read_animation, read_audio, write_animation, Animation};

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub step: u64,
    pub loss: f64,
    /// Seconds since training started.
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochSummary>,
    pub windows: usize,
    pub sequences: usize,
}

/// Loads the training split and fixes data-dependent settings in `cfg`
/// (the vertex count comes from the files).
pub fn load_training_data(cfg: &mut RunConfig) -> Result<Vec<Loaded>> {
    let data = Dataset::open(&cfg.manifest)?;
    let items = data
        .entries(Split::Train)
        .map(|e| data.load(e))
        .collect::<Result<Vec<_>>>()?;
    let Some(first) = items.first() else {
        return Err(Error::Invalid(format!(
            "{}: no training entries",
            cfg.manifest.display()
        )));
    };
    let v = first.animation.sequence.num_vertices();
    if let Some(bad) = items.iter().find(|i| i.animation.sequence.num_vertices() != v) {
        return Err(Error::Invalid(format!(
            "{} has {} vertices, {} has {v}",
            bad.entry.name,
            bad.animation.sequence.num_vertices(),
            first.entry.name
        )));
    }
    cfg.policy.vertices = v;
    Ok(items)
}

/// Trains from scratch on `items`, writes the log and the checkpoint of
/// averaged weights.
pub fn train_run(cfg: &RunConfig, items: &[Loaded]) -> Result<TrainReport> {
    cfg.train.validate()?;
    let samples = windows(items, &cfg.policy.sampler, &cfg.policy.filterbank)?;
    let mut policy = Policy::new(cfg.policy.clone())?;
    policy.fit_data(&samples);
    let mut state = TrainState::new(&policy, cfg.train.seed);

    let mut log = Vec::new();
    let started = Instant::now();
    let mut epochs = Vec::new();
    for _ in 0..cfg.train.epochs {
        let summary = train_epoch(&mut policy, &samples, &cfg.train, &mut state, &mut |r| {
            let rec = LogRecord {
                epoch: r.epoch,
                step: r.step,
                loss: r.loss,
                wall_time: started.elapsed().as_secs_f64(),
            };
            serde_json::to_writer(&mut log, &rec).expect("log record serializes");
            log.push(b'\n');
        })?;
        if summary.steps == 0 {
            break;
        }
        epochs.push(summary);
    }
    let policy = state.averaged(&policy);
    crate::error::write_file(&cfg.log, &log)?;
    save_checkpoint(&cfg.checkpoint, &policy, &cfg.train)?;
    Ok(TrainReport {
        epochs,
        windows: samples.len(),
        sequences: items.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub checkpoint: PathBuf,
    pub audio: PathBuf,
    /// FANIM whose template and first frame anchor the output.
    pub template: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    /// Defaults to the frames covered by the audio.
    pub frames: Option<usize>,
    /// Observe the template file's frames instead of generated ones.
    pub teacher_forced: bool,
}

pub fn generate_run(req: &GenerateRequest) -> Result<Animation> {
    let (policy, _) = load_checkpoint(&req.checkpoint)?;
    let track = read_audio(&req.audio)?;
    let anchor = read_animation(&req.template)?;
    let fps = anchor.sequence.fps();
    let mut frames = req.frames.unwrap_or_else(|| track.frames_covered(fps));
    if req.teacher_forced && req.frames.is_none() {
        frames = frames.min(anchor.sequence.num_frames());
    }
    let teacher: Option<&VertexSequence> = req.teacher_forced.then_some(&anchor.sequence);
    let out = generate(
        &policy,
        &anchor.template,
        anchor.sequence.frame(0),
        &track,
        &GenerateConfig {
            frames,
            fps,
            seed: req.seed,
            teacher,
        },
    )?;
    let anim = Animation::new(anchor.template, out)?;
    write_animation(&req.out, &anim)?;
    Ok(anim)
}

/// Writes `value` as one JSON line prefixed by `label`.
pub fn print_resolved<T: Serialize>(out: &mut impl std::io::Write, label: &str, value: &T) -> std::io::Result<()> {
    writeln!(
        out,
        "resolved {label}: {}",
        serde_json::to_string(value).map_err(std::io::Error::other)?
    )
}
