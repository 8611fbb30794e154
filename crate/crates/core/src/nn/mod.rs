//! Minimal feedforward network engine.
//!
//! Networks are stacks of dense layers operating on row-major batches
//! (`n × width` matrices, one sample per row). Training uses an explicit
//! [`Tape`] that records the activations of a forward pass so that
//! [`Network::backward`] can compute exact reverse-mode gradients.

mod activation;
mod io;
mod layer;
mod network;
mod optimizer;

pub use activation::Activation;
pub use io::{load_network, read_network, save_network, write_network, FORMAT_VERSION, MAGIC};
pub use layer::{DenseLayer, LayerGradients};
pub use network::{Gradients, Network, Tape};
pub use optimizer::{Optimizer, OptimizerKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    /// Layer widths do not chain, or an input has the wrong width.
    #[error("dimension mismatch at layer {layer}: expected width {expected}, found {found}")]
    Dimension {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("malformed parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
