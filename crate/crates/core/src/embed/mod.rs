//! Shallow embedding models, losses, the optimizer and the training loop.

mod adam;
mod fairwalk;
mod io;
mod loss;
mod model;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use fairwalk::fairwalk_positive_sampler;
pub use io::{read_embeddings, write_embeddings, EmbeddingMeta};
pub use loss::{bce_edge_loss, bpr_loss, sigmoid, softplus};
pub use model::{EmbeddingModel, ModelKind};
pub use train::{
    train, EpochRecord, Objective, ObjectiveValue, Regime, Resample, TrainConfig, TrainLog,
    TrainOutcome, Trainer,
};
