//! Shared-weight embedding network, Siamese loss, gradients, RMSprop
//! training and model files.

mod config;
mod io;
mod loss;
mod net;
mod objective;
mod optim;
mod train;

pub use config::{param_count, Layout, NetConfig, CONV_SIDE, KERNEL, POOL_SIDE};
pub use io::{decode_model, encode_model, load_model, save_model};
pub use loss::{lp_distance, lp_distance_grad, siamese_loss, siamese_loss_dd, softmax_xent};
pub use net::{Mode, SiameseModel};
pub use objective::{class_loss_grad, pair_loss, pair_loss_grad};
pub use optim::{OptimizerState, RmsProp};
pub use train::{train, train_classifier, train_pairs, write_loss_log, EpochLog, TrainOptions, TrainOutcome};
