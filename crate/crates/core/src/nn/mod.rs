//! From-scratch convolutional network: layers, model assembly, training.
//!
//! The stack is the fixed image-classifier shape used throughout the
//! pipeline: repeated Conv(3x3, same) -> LeakyReLU(0.1) -> MaxPool(2x2, ceil)
//! blocks, then Flatten -> Dense -> LeakyReLU -> Dense to class logits.
//! Everything is f64: the training loop is validated by central-difference
//! gradient checks at 1e-4 relative tolerance, which single precision cannot
//! meet. Activations use HWC layout (channel innermost) so the hot loops run
//! over contiguous weight rows.
//!
//! Training is deterministic for a given seed and example order: batches are
//! accumulated example-sequentially, shuffles come from a counter-based
//! ChaCha stream, and no threading is involved.

mod layers;
mod model;
mod train;

pub use layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, leaky_relu_backward,
    leaky_relu_forward, maxpool2x2_backward, maxpool2x2_forward, softmax,
    softmax_cross_entropy,
};
pub use model::{Cnn, ForwardCache, LayerInfo, ModelConfig};
pub use train::{
    stratified_val_split, train, AdamState, EarlyStopping, TrainConfig, TrainExample,
    TrainReport,
};
