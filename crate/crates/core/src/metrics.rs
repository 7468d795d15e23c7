//! Mean Vertex Error and Facial Dynamics Deviation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

use crate::geom::{FaceTemplate, VertexSequence};
use crate::{Error, Result};

/// Vertex subset used by [`fdd`]; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    pub name: String,
    indices: Vec<usize>,
}

impl RegionMask {
    pub fn new(name: impl Into<String>, indices: Vec<usize>, num_vertices: usize) -> Result<Self> {
        let mut seen = alloc::vec![false; num_vertices];
        for &i in &indices {
            if i >= num_vertices {
                return Err(Error::Index(format!("mask vertex {i} outside 0..{num_vertices}")));
            }
            if core::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("mask vertex {i} listed twice")));
            }
        }
        Ok(Self {
            name: name.into(),
            indices,
        })
    }

    /// Vertices strictly above the midpoint of the template's vertical (y) extent.
    pub fn upper_face(template: &FaceTemplate) -> Self {
        let (lo, hi) = vertical_extent(template);
        let mid = 0.5 * (lo + hi);
        let indices = template
            .vertices()
            .iter()
            .enumerate()
            .filter(|(_, p)| p[1] > mid)
            .map(|(i, _)| i)
            .collect();
        Self {
            name: "upper_face".into(),
            indices,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

pub(crate) fn vertical_extent(template: &FaceTemplate) -> (f64, f64) {
    template
        .vertices()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[1]), hi.max(p[1]))
        })
}

fn same_shape(pred: &VertexSequence, gt: &VertexSequence) -> Result<()> {
    if pred.num_vertices() != gt.num_vertices() {
        return Err(Error::shape("vertices", gt.num_vertices(), pred.num_vertices()));
    }
    if pred.num_frames() != gt.num_frames() {
        return Err(Error::shape("frames", gt.num_frames(), pred.num_frames()));
    }
    Ok(())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean over frames and vertices of the Euclidean vertex error.
pub fn mve(pred: &VertexSequence, gt: &VertexSequence) -> Result<f64> {
    same_shape(pred, gt)?;
    let total: f64 = pred
        .data()
        .chunks_exact(3)
        .zip(gt.data().chunks_exact(3))
        .map(|(p, g)| distance(p, g))
        .sum();
    Ok(total / (pred.num_frames() * pred.num_vertices()) as f64)
}

/// Population standard deviation over time of `|x[n][v] - template[v]|`.
fn dynamics(x: &VertexSequence, template: &FaceTemplate, v: usize) -> f64 {
    let t = &template.vertices()[v];
    let n = x.num_frames() as f64;
    let mags: Vec<f64> = (0..x.num_frames()).map(|f| distance(&x.vertex(f, v), t)).collect();
    let mean = mags.iter().sum::<f64>() / n;
    (mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n).sqrt()
}

/// Mean over masked vertices of `dyn(pred, v) - dyn(gt, v)`.
pub fn fdd(pred: &VertexSequence, gt: &VertexSequence, template: &FaceTemplate, mask: &RegionMask) -> Result<f64> {
    same_shape(pred, gt)?;
    if template.num_vertices() != gt.num_vertices() {
        return Err(Error::shape(
            "template vertices",
            gt.num_vertices(),
            template.num_vertices(),
        ));
    }
    if mask.indices.is_empty() {
        return Err(Error::Config(format!("mask '{}' is empty", mask.name)));
    }
    if let Some(&i) = mask.indices.iter().find(|&&i| i >= gt.num_vertices()) {
        return Err(Error::Index(format!(
            "mask vertex {i} outside 0..{}",
            gt.num_vertices()
        )));
    }
    let total: f64 = mask
        .indices
        .iter()
        .map(|&v| dynamics(pred, template, v) - dynamics(gt, template, v))
        .sum();
    Ok(total / mask.indices.len() as f64)
}
