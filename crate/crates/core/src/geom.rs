//! Mesh sequences, per-frame actions and trajectory integration.
//!
//! Frames are indexed from 0. An action sequence has the same shape as the
//! vertex sequence it came from; action 0 is always the zero frame, so that
//! integrating from the first frame reproduces the sequence exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Rest-pose mesh the animation is expressed against.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTemplate {
    vertices: Vec<[f64; 3]>,
}

impl FaceTemplate {
    pub fn new(vertices: Vec<[f64; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Config("template needs at least one vertex".into()));
        }
        for (v, p) in vertices.iter().enumerate() {
            if let Some(axis) = p.iter().position(|c| !c.is_finite()) {
                return Err(Error::NonFinite {
                    frame: 0,
                    vertex: v,
                    axis,
                });
            }
        }
        Ok(Self { vertices })
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(3) {
            return Err(Error::shape("template coordinates", flat.len() / 3 * 3, flat.len()));
        }
        Self::new(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    /// Coordinates laid out as `x0 y0 z0 x1 y1 z1 ...`.
    pub fn flat(&self) -> Vec<f64> {
        self.vertices.iter().flatten().copied().collect()
    }
}

/// `N` frames of `V` vertices, stored frame-major as `N * V * 3` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSequence {
    num_vertices: usize,
    fps: f64,
    data: Vec<f64>,
}

impl VertexSequence {
    /// Checks only the layout; use [`validate_sequence`] for content checks.
    pub fn new(num_vertices: usize, fps: f64, data: Vec<f64>) -> Result<Self> {
        if num_vertices == 0 {
            return Err(Error::Config("sequence needs at least one vertex".into()));
        }
        let frame_len = num_vertices * 3;
        if data.is_empty() || !data.len().is_multiple_of(frame_len) {
            let frames = (data.len() / frame_len).max(1);
            return Err(Error::shape("sequence coordinates", frames * frame_len, data.len()));
        }
        Ok(Self {
            num_vertices,
            fps,
            data,
        })
    }

    /// A sequence holding `frames` copies of one frame.
    pub fn constant(frame: &[f64], frames: usize, fps: f64) -> Result<Self> {
        let mut data = Vec::with_capacity(frame.len() * frames);
        for _ in 0..frames {
            data.extend_from_slice(frame);
        }
        Self::new(frame.len() / 3, fps, data)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.frame_len()
    }

    pub fn frame_len(&self) -> usize {
        self.num_vertices * 3
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let len = self.frame_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn vertex(&self, n: usize, v: usize) -> [f64; 3] {
        let f = self.frame(n);
        [f[3 * v], f[3 * v + 1], f[3 * v + 2]]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Elementwise map over every coordinate, keeping the shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            num_vertices: self.num_vertices,
            fps: self.fps,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Per-frame vertex displacements, same layout as [`VertexSequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSequence {
    num_vertices: usize,
    data: Vec<f64>,
}

impl ActionSequence {
    pub fn new(num_vertices: usize, data: Vec<f64>) -> Result<Self> {
        let frame_len = num_vertices * 3;
        if num_vertices == 0 || data.is_empty() || !data.len().is_multiple_of(frame_len) {
            return Err(Error::shape("action coordinates", frame_len.max(3), data.len()));
        }
        Ok(Self { num_vertices, data })
    }

    pub fn zeros(num_vertices: usize, frames: usize) -> Self {
        Self {
            num_vertices,
            data: vec![0.0; num_vertices * 3 * frames.max(1)],
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / (self.num_vertices * 3)
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let len = self.num_vertices * 3;
        &self.data[n * len..(n + 1) * len]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.num_vertices * 3;
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

fn first_non_finite(data: &[f64], num_vertices: usize) -> Option<(usize, usize, usize)> {
    let i = data.iter().position(|c| !c.is_finite())?;
    let frame_len = num_vertices * 3;
    Some((i / frame_len, (i % frame_len) / 3, i % 3))
}

/// Splits a sequence into frame-to-frame deltas: `a[0] = 0`, `a[n] = x[n] - x[n-1]`.
pub fn compute_actions(x: &VertexSequence) -> Result<ActionSequence> {
    if let Some((frame, vertex, axis)) = first_non_finite(&x.data, x.num_vertices) {
        return Err(Error::NonFinite { frame, vertex, axis });
    }
    let len = x.frame_len();
    let mut data = vec![0.0; x.data.len()];
    for n in 1..x.num_frames() {
        let (prev, cur) = (x.frame(n - 1), x.frame(n));
        for ((out, &c), &p) in data[n * len..(n + 1) * len].iter_mut().zip(cur).zip(prev) {
            *out = c - p;
        }
    }
    Ok(ActionSequence {
        num_vertices: x.num_vertices,
        data,
    })
}

/// Rebuilds vertex positions as `x[n] = x1 + sum_{i<=n} a[i]`, summing in order.
pub fn integrate_actions(a: &ActionSequence, x1: &[f64], fps: f64) -> Result<VertexSequence> {
    let len = a.num_vertices * 3;
    if x1.len() != len {
        return Err(Error::shape("first frame", len, x1.len()));
    }
    if let Some((frame, vertex, axis)) = first_non_finite(&a.data, a.num_vertices) {
        return Err(Error::NonFinite { frame, vertex, axis });
    }
    let mut data = Vec::with_capacity(a.data.len());
    let mut current = x1.to_vec();
    for n in 0..a.num_frames() {
        for (c, d) in current.iter_mut().zip(a.frame(n)) {
            *c += d;
        }
        data.extend_from_slice(&current);
    }
    VertexSequence::new(a.num_vertices, fps, data)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { frame: usize, vertex: usize, axis: usize },
    Fps(f64),
    VertexCount { expected: usize, got: usize },
}

/// Outcome of [`validate_sequence`]; empty means the sequence is well formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

pub fn validate_sequence(x: &VertexSequence, template: Option<&FaceTemplate>) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Some(t) = template {
        if t.num_vertices() != x.num_vertices {
            report.violations.push(Violation::VertexCount {
                expected: t.num_vertices(),
                got: x.num_vertices,
            });
        }
    }
    if let Some((frame, vertex, axis)) = first_non_finite(&x.data, x.num_vertices) {
        report.violations.push(Violation::NonFinite { frame, vertex, axis });
    }
    if !(x.fps.is_finite() && x.fps > 0.0) {
        report.violations.push(Violation::Fps(x.fps));
    }
    report
}
