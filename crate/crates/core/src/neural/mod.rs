//! Pre-activated residual detector.
//!
//! An input dense layer, batch norm and ReLU feed `L` residual blocks. Each
//! block runs dense, batch norm and ReLU, then dropout, a second
//! L2-regularised dense/norm/ReLU stage, two dense/norm stages, and adds its
//! input back before a final ReLU. The output layer reads the pre-activated
//! input plus the sum of every block output and emits one sigmoid
//! probability per device.
//!
//! Gradients are written out by hand; [`gradient_check`] compares them with
//! central differences.

mod checkpoint;
mod gradcheck;
mod layers;
mod network;
mod optim;
mod train;

pub use crate::analysis::{detect, Detection};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradcheck::{gradient_check, GradCheckReport, REL_ERROR_FLOOR};
pub use layers::{BatchNorm, Dense, NormCache};
pub use network::{
    bce_l2_loss, bce_loss, Forward, ForwardTrace, Gradients, Layout, Mode, MudNetwork, NetworkConfig, ResidualBlock,
    BCE_CLIP,
};
pub use optim::{Adam, AdamConfig};
pub use train::{predict_dataset, train, train_resume, train_with, EpochLog, TrainConfig, TrainingLog};
