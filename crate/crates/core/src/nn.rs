//! Trainable parameter storage and the handful of layer primitives shared by
//! the encoders and the denoiser.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;
use rand::Rng;

/// A named weight tensor with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            value: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], value: f64) -> Self {
        let mut p = Self::zeros(name, shape);
        p.value.fill(value);
        p
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(name: impl Into<String>, shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(name, shape);
        for w in &mut p.value {
            *w = rng.random_range(-bound..=bound);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// `out = w * x + b` with `w` row-major `[out.len()][x.len()]`.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n).zip(b)) {
        *o = bias + dot(row, x);
    }
}

/// Accumulates `dw += dy ⊗ x`, `db += dy` and, when given, `dx += wᵀ dy`.
pub(crate) fn affine_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n = x.len();
    for ((g, row), bias) in dy.iter().zip(dw.chunks_exact_mut(n)).zip(db.iter_mut()) {
        if *g == 0.0 {
            continue;
        }
        *bias += g;
        for (r, xi) in row.iter_mut().zip(x) {
            *r += g * xi;
        }
    }
    if let Some(dx) = dx {
        for (g, row) in dy.iter().zip(w.chunks_exact(n)) {
            if *g == 0.0 {
                continue;
            }
            for (d, wi) in dx.iter_mut().zip(row) {
                *d += g * wi;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Same-padded 1-D convolution over `len` positions.
///
/// `input` is `[len][c_in]`, `w` is `[c_out][c_in][kernel]`, output is
/// `[len][c_out]`. Positions outside the sequence read as zero.
pub(crate) fn conv1d(input: &[f64], c_in: usize, w: &[f64], b: &[f64], kernel: usize, out: &mut [f64]) {
    let c_out = b.len();
    let len = input.len() / c_in;
    let pad = kernel / 2;
    for l in 0..len {
        let row = &mut out[l * c_out..(l + 1) * c_out];
        row.copy_from_slice(b);
        for j in 0..kernel {
            let Some(src) = (l + j).checked_sub(pad).filter(|&s| s < len) else {
                continue;
            };
            let x = &input[src * c_in..(src + 1) * c_in];
            for (o, r) in row.iter_mut().enumerate() {
                let taps = &w[o * c_in * kernel..(o + 1) * c_in * kernel];
                let mut acc = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    acc += taps[i * kernel + j] * xi;
                }
                *r += acc;
            }
        }
    }
}

/// Gradient accumulation for [`conv1d`]. Zero entries of `d_out` are skipped.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_backward(
    input: &[f64],
    c_in: usize,
    w: &[f64],
    kernel: usize,
    d_out: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut d_in: Option<&mut [f64]>,
) {
    let c_out = db.len();
    let len = input.len() / c_in;
    let pad = kernel / 2;
    for l in 0..len {
        for o in 0..c_out {
            let g = d_out[l * c_out + o];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            for j in 0..kernel {
                let Some(src) = (l + j).checked_sub(pad).filter(|&s| s < len) else {
                    continue;
                };
                let x = &input[src * c_in..(src + 1) * c_in];
                let base = o * c_in * kernel;
                for (i, xi) in x.iter().enumerate() {
                    dw[base + i * kernel + j] += g * xi;
                }
                if let Some(d_in) = d_in.as_deref_mut() {
                    let dx = &mut d_in[src * c_in..(src + 1) * c_in];
                    for (i, d) in dx.iter_mut().enumerate() {
                        *d += g * w[base + i * kernel + j];
                    }
                }
            }
        }
    }
}
