//! Conditional denoising generator: model, training recipe, and sampling.

mod model;
mod sample;
mod train;

pub use model::{alpha_bar, mse_loss, noise_image, GeneratorConfig, ToyGenerator};
pub use sample::{generate_from_caption, generate_image};
pub use train::{
    encoding_gradient_probe, load_generator, loss_curve_csv, preload_split, save_generator,
    train_generator, LossPoint, SplitTensors, TrainConfig,
};
