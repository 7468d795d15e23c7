//! Diffusion-policy core for speech-driven 3D facial motion prediction.
//!
//! A face animation is split into per-frame vertex displacements ("actions").
//! A conditional denoiser learns to recover short windows of actions from
//! Gaussian noise, conditioned on the vertex and audio features of the
//! frames preceding the window. At inference time windows are denoised one
//! after another in a receding-horizon loop and the committed actions are
//! integrated back into vertex positions.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, dataset
//! tooling and the command line live in the `facepolicy` crate.
#![no_std]

extern crate alloc;

pub mod denoiser;
pub mod diffusion;
mod error;
pub mod features;
mod fft;
pub mod geom;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod rollout;
pub mod sampler;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use geom::{ActionSequence, FaceTemplate, VertexSequence};
pub use policy::{Policy, PolicyConfig};
