//! Conditional GAN that learns Bloch-simulated fingerprints as a function of
//! tissue (and sequence) parameters, and synthesizes dictionaries from it.

mod condition;
mod loss;
mod model;
mod synth;
mod train;

pub use condition::{sequence_descriptor, ConditionMap, DESCRIPTOR_BINS};
pub use loss::{
    clamp_prob, d_loss, d_loss_from_probs, d_loss_grad, g_loss, g_loss_from_parts, g_loss_grad,
    Batch, PROB_CLAMP,
};
pub use model::{GanModel, GAN_FILE_VERSION, HIDDEN_LAYERS, HIDDEN_WIDTH};
pub use synth::{
    fingerprint_rmse, per_atom_relative_errors, relative_rmse_percent, synthesize, SynthTiming,
    ZPolicy,
};
pub use train::{
    curves_to_csv, learning_curves, train, validate_lambda, CurvePoint, History, HistoryRow,
    LambdaRow, LambdaTable, TrainConfig, DEFAULT_LAMBDA_GRID,
};
