use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value at frame {frame}, vertex {vertex}, axis {axis}")]
    NonFinite { frame: usize, vertex: usize, axis: usize },
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid audio: {0}")]
    Audio(String),
    #[error("non-finite loss at step {step} (window {window})")]
    NonFiniteLoss { step: u64, window: usize },
    #[error("backward called without a cached forward pass")]
    MissingCache,
}

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape { what, expected, got }
    }
}
