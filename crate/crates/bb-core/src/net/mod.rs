//! Minimal differentiable-computation core: tensors, a reverse-mode tape,
//! parameter stores with Adam, MLPs, gated attention, and checkpoints.

pub mod attention;
pub mod checkpoint;
pub mod mlp;
pub mod store;
pub mod tape;
pub mod tensor;

pub use attention::{AttentionPolicyNet, GatedAttentionBlock, GatedAttentionConfig};
pub use checkpoint::{load_into_store, read_checkpoint, save_checkpoint, CheckpointHeader};
pub use mlp::{Activation, HeadKind, Mlp, NetConfig, LOG_STD_INIT, LOG_STD_MAX, LOG_STD_MIN};
pub use store::{AdamConfig, ParamStore};
pub use tape::{attention_kernel, AttentionSpec, Gradients, NodeId, Tape};
pub use tensor::{matmul, matmul_into, matmul_tn, Tensor};

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum NetError {
    ShapeMismatch { what: &'static str, expected: (usize, usize), got: (usize, usize) },
    NonScalarLoss { rows: usize, cols: usize },
    NonFiniteGradient { tensor: String },
    HeadSplit { embed_dim: usize, heads: usize },
    CheckpointFormat(String),
    Io(String),
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch { what, expected, got } => write!(
                f,
                "{what}: expected [{}x{}], got [{}x{}]",
                expected.0, expected.1, got.0, got.1
            ),
            Self::NonScalarLoss { rows, cols } => {
                write!(f, "backward requires a scalar output, got [{rows}x{cols}]")
            }
            Self::NonFiniteGradient { tensor } => {
                write!(f, "non-finite gradient for tensor {tensor}")
            }
            Self::HeadSplit { embed_dim, heads } => {
                write!(f, "embedding dim {embed_dim} not divisible by {heads} heads")
            }
            Self::CheckpointFormat(msg) => write!(f, "bad checkpoint: {msg}"),
            Self::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for NetError {}
