//! A small differentiable segmentation network with manual forward and
//! backward passes, duplicated as student and teacher during training.

mod checkpoint;
mod model;
pub mod ops;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{
    ema_update, ema_update_params, softmax_probabilities, Architecture, ForwardCache, SegModel,
};
pub use tensor::{Gradients, NamedTensor, ParamSet, Tensor};
