//! Vision Transformer encoder with a CLS-token classification head.

mod config;
mod data;
mod forward;
mod model;
mod train;

pub use config::VitConfig;
pub use data::{load_image_dir, synthetic_dataset, synthetic_for, Dataset, Image, SYNTHETIC_CLASSES};
pub use forward::{gelu, gelu_grad, patchify, softmax, ForwardOutput, Trace, LN_EPS};
pub use model::{ParamLayout, TensorSpec, VitModel, INIT_STDDEV};
pub use train::{accuracy, argmax, loss_and_grads, pairwise_sum, train_local, Adam, TrainConfig, TrainReport};
