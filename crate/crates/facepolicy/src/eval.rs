//! Directory evaluation: FANIM files are paired by name.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use facepolicy_core::metrics::{fdd, mve, RegionMask};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::read_animation;

/// Reported alongside raw values so that tables line up with published ones.
pub const MVE_UNIT: f64 = 1e-3;
pub const FDD_UNIT: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mve: f64,
    pub fdd: f64,
    pub mve_scaled: f64,
    pub fdd_scaled: f64,
}

impl Scores {
    fn new(mve: f64, fdd: f64) -> Self {
        Self {
            mve,
            fdd,
            mve_scaled: mve / MVE_UNIT,
            fdd_scaled: fdd / FDD_UNIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub frames: usize,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub convention: String,
    /// Number of masked vertices, or null when the upper-face default was used.
    pub mask_size: Option<usize>,
    pub sequences: Vec<Row>,
    pub mean: Option<Scores>,
    /// Files present in only one of the directories, prefixed by side.
    pub unpaired: Vec<String>,
}

const CONVENTION: &str = "MVE: mean Euclidean vertex error. FDD: mean over masked vertices of \
population std over frames of |x - template|, pred minus gt. Scaled values: MVE / 1e-3, FDD / 1e-5.";

fn fanim_names(dir: &Path) -> Result<BTreeSet<String>> {
    let rd = std::fs::read_dir(dir).map_err(|error| Error::Io {
        path: dir.to_path_buf(),
        error,
    })?;
    let mut out = BTreeSet::new();
    for entry in rd {
        let entry = entry.map_err(|error| Error::Io {
            path: dir.to_path_buf(),
            error,
        })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".fanim") {
            out.insert(name);
        }
    }
    Ok(out)
}

/// Scores every file name present in both directories. FDD uses the ground
/// truth's template and either `mask` or the template's upper face.
pub fn evaluate_dirs(pred: &Path, gt: &Path, mask: Option<&[usize]>) -> Result<EvalTable> {
    let (p, g) = (fanim_names(pred)?, fanim_names(gt)?);
    let mut unpaired: Vec<String> = p.difference(&g).map(|n| format!("pred/{n}")).collect();
    unpaired.extend(g.difference(&p).map(|n| format!("gt/{n}")));
    let mut sequences = Vec::new();
    for name in p.intersection(&g) {
        let a = read_animation(&pred.join(name))?;
        let b = read_animation(&gt.join(name))?;
        let region = match mask {
            Some(m) => RegionMask::new("mask", m.to_vec(), b.template.num_vertices())?,
            None => RegionMask::upper_face(&b.template),
        };
        let wrap = |e: facepolicy_core::Error| Error::Invalid(format!("{name}: {e}"));
        let m = mve(&a.sequence, &b.sequence).map_err(wrap)?;
        let f = fdd(&a.sequence, &b.sequence, &b.template, &region).map_err(wrap)?;
        sequences.push(Row {
            name: name.trim_end_matches(".fanim").to_string(),
            frames: b.sequence.num_frames(),
            scores: Scores::new(m, f),
        });
    }
    let mean = (!sequences.is_empty()).then(|| {
        let n = sequences.len() as f64;
        Scores::new(
            sequences.iter().map(|r| r.scores.mve).sum::<f64>() / n,
            sequences.iter().map(|r| r.scores.fdd).sum::<f64>() / n,
        )
    });
    Ok(EvalTable {
        convention: CONVENTION.into(),
        mask_size: mask.map(<[usize]>::len),
        sequences,
        mean,
        unpaired,
    })
}

/// Aligned plain-text rendering of a table.
pub fn render(table: &EvalTable) -> String {
    let mut s = String::new();
    let width = table.sequences.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
    let _ = writeln!(
        s,
        "{:<width$}  {:>7}  {:>14}  {:>14}  {:>12}  {:>12}",
        "sequence", "frames", "MVE", "FDD", "MVE x1e-3", "FDD x1e-5"
    );
    let mut line = |name: &str, frames: String, sc: &Scores| {
        let _ = writeln!(
            s,
            "{name:<width$}  {frames:>7}  {:>14.6e}  {:>14.6e}  {:>12.4}  {:>12.4}",
            sc.mve, sc.fdd, sc.mve_scaled, sc.fdd_scaled
        );
    };
    for r in &table.sequences {
        line(&r.name, r.frames.to_string(), &r.scores);
    }
    if let Some(m) = &table.mean {
        line("mean", String::new(), m);
    }
    for u in &table.unpaired {
        let _ = writeln!(s, "unpaired: {u}");
    }
    s
}
