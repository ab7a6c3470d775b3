//! The self-training engine: pseudo-labeling, label mixing, the weighted
//! two-term loss, AdamW with a warm-up + polynomial schedule,
//! augmentation, test-time augmentation and the training loop.

mod augment;
mod config;
mod loss;
mod optim;
mod pseudo;
mod trainer;

pub use augment::{
    gaussian_blur, sample_augment, tta_infer, AugmentParams, GeoTransform, MAX_SHIFT,
};
pub use config::TrainConfig;
pub use loss::{class_weights_from_frequencies, loss_seg, LossBreakdown};
pub use optim::{lr_at, optimizer_step, AdamWState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use pseudo::{generate_pseudo_labels, mix_labels, MixedTarget};
pub use trainer::{
    train, validate_miou, Dataset, IterationLog, TrainOutput, TrainSample, ValSample,
};
