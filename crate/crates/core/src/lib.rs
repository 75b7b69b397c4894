//! Linear fractal autoencoders for unsupervised feature selection.
//!
//! The model is a linear autoencoder with a one-to-one (diagonal) scoring
//! layer and a top-k masked sub-path: the full path learns which features
//! carry information, the masked path forces the k selected features to
//! reconstruct the data on their own, and an L1 penalty keeps the scores
//! sparse. Training is plain Adam with a non-negativity projection on the
//! scores.
//!
//! The crate provides:
//! - dense matrix kernels and a seeded RNG ([`matrix`], [`rng`]),
//! - the model objectives and exact gradients ([`model`], [`hfae`]),
//! - an Adam training loop with validation checkpointing ([`train`]),
//! - dataset loading, normalization, splitting, and synthesis ([`data`]),
//! - evaluation via a linear reconstruction decoder and extremely
//!   randomized trees ([`eval`]),
//! - checkpoint/report serialization ([`checkpoint`]) and the `fae` CLI
//!   ([`cli`]).

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
mod gram;
pub mod hfae;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod train;

pub use data::{
    load_csv, load_idx, normalize_minmax, split, split_counts, synth_blocks, write_csv, Dataset,
    Imputer, LabelColumn, Provenance, Scaler, ScalerKind, SplitSpec,
};
pub use checkpoint::{
    append_metrics_row, load_checkpoint, save_checkpoint, write_groups_csv, write_selection_csv,
    Checkpoint, MetricsRow,
};
pub use error::{FaeError, Result};
pub use eval::{
    accuracy, fit_extra_trees, fit_linear_decoder, predict, recon_error, ExtraTreesModel,
    ExtraTreesParams, LinearDecoder, MaxFeatures,
};
pub use hfae::{
    hfae_gradients, hfae_objective, hierarchical_masks, HfaeBreakdown, HierarchicalSelection,
    HierarchyParams,
};
pub use matrix::{lstsq, Matrix};
pub use model::{
    fae_gradients, fae_objective, forward, iae_gradients, iae_objective, topk_mask, BatchPolicy,
    EncoderDecoder, FeatureWeights, Gradients, Hyperparams, L1Mode, LossNorm, Method,
    ObjectiveBreakdown, SelectionResult,
};
pub use rng::{uniform_init, xavier_normal, SeededRng, RNG_ALGORITHM};
pub use train::{
    train_ae, train_fae, train_hfae, train_iae, train_model, AdamParams, AdamState,
    CheckpointPolicy, EpochRecord, RunMetadata, TrainOptions, TrainOutcome, TrainReport,
    TrainedModel,
};
