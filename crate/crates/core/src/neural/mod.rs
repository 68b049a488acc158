//! Dense feed-forward networks with hand-written backpropagation.

mod checkpoint;
mod network;
mod optimizer;

pub use checkpoint::Checkpoint;
pub use network::{
    copy_into_target, Activation, Architecture, DenseLayer, DenseNetwork, ForwardCache, Gradients, LayerGradient,
};
pub use optimizer::{Adam, AdamConfig};
