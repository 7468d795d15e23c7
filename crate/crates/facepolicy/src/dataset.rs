//! Synthetic datasets on disk: FANIM + FAUD pairs and a JSON manifest.

use std::path::{Path, PathBuf};

use facepolicy_core::features::{AudioFeatures, AudioTrack, FilterBankConfig};
use facepolicy_core::sampler::{collect_samples, SamplerConfig, TrainingSample};
use facepolicy_core::synth::{make_synthetic, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read_json, write_json, Error, Result};
use crate::format::{read_animation, read_audio, write_animation, write_audio, Animation};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    /// Paths are relative to the manifest's directory.
    pub animation: String,
    pub audio: String,
    pub seed: u64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub synth: SynthConfig,
    pub entries: Vec<Entry>,
}

/// Train/val/test sizes in the ratio 8:2:2, rounded, test takes the rest.
pub fn split_counts(count: usize) -> [usize; 3] {
    let train = (count * 8 + 6) / 12;
    let val = ((count * 2 + 6) / 12).min(count - train);
    [train, val, count - train - val]
}

/// Distinct per-sequence seeds derived from the dataset seed.
pub fn sub_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// Writes `count` synthetic sequences to `out` and returns the manifest.
/// `base.seed` is the dataset seed.
pub fn make_dataset(base: &SynthConfig, count: usize, out: &Path) -> Result<Manifest> {
    if count == 0 {
        return Err(Error::Invalid("count must be positive".into()));
    }
    let [train, val, _] = split_counts(count);
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let seed = sub_seed(base.seed, i);
        let s = make_synthetic(&SynthConfig { seed, ..*base })?;
        let name = format!("seq_{i:03}");
        let entry = Entry {
            animation: format!("{name}.fanim"),
            audio: format!("{name}.faud"),
            name,
            seed,
            split: if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            },
        };
        write_animation(&out.join(&entry.animation), &Animation::new(s.template, s.sequence)?)?;
        write_audio(&out.join(&entry.audio), &s.audio)?;
        entries.push(entry);
    }
    let manifest = Manifest {
        seed: base.seed,
        synth: *base,
        entries,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

pub struct Loaded {
    pub entry: Entry,
    pub animation: Animation,
    pub audio: AudioTrack,
}

impl Dataset {
    pub fn open(manifest: &Path) -> Result<Self> {
        Ok(Self {
            root: manifest.parent().unwrap_or(Path::new(".")).to_path_buf(),
            manifest: read_json(manifest)?,
        })
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &Entry> {
        self.manifest.entries.iter().filter(move |e| e.split == split)
    }

    pub fn load(&self, entry: &Entry) -> Result<Loaded> {
        Ok(Loaded {
            entry: entry.clone(),
            animation: read_animation(&self.root.join(&entry.animation))?,
            audio: read_audio(&self.root.join(&entry.audio))?,
        })
    }
}

/// Training windows from every sequence in `items`, in order.
pub fn windows(items: &[Loaded], sampler: &SamplerConfig, bank: &FilterBankConfig) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for item in items {
        let seq = &item.animation.sequence;
        let audio = AudioFeatures::compute(&item.audio, seq.fps(), seq.num_frames(), bank)
            .map_err(|e| Error::Invalid(format!("{}: {e}", item.entry.name)))?;
        out.extend(collect_samples(seq, &audio, sampler)?);
    }
    Ok(out)
}
