//! Checkpoint and report artifacts.
//!
//! A checkpoint is a versioned JSON container (format `fae-checkpoint`,
//! version 1) storing the method, all hyperparameters, the scoring weights,
//! the encoder/decoder matrices, and the RNG metadata needed to replay the
//! run. Floats serialize in shortest round-trip form, so save -> load is
//! exact and identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FaeError, Result};
use crate::hfae::{HierarchicalSelection, HierarchyParams};
use crate::matrix::Matrix;
use crate::model::{EncoderDecoder, FeatureWeights, Hyperparams, Method, SelectionResult};
use crate::rng::RNG_ALGORITHM;
use crate::train::TrainedModel;

pub const CHECKPOINT_FORMAT: &str = "fae-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RngMetadata {
    pub seed: u64,
    pub algorithm: String,
}

/// On-disk checkpoint layout. Field names and meanings are stable across
/// releases; `version` gates any future layout change.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub m: usize,
    pub d: usize,
    pub k: usize,
    pub hyperparams: Hyperparams,
    pub hierarchy: Option<HierarchyParams>,
    pub rng: RngMetadata,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub w: Vec<f64>,
    pub enc: Matrix,
    pub dec: Matrix,
}

impl Checkpoint {
    pub fn from_model(model: &TrainedModel) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            method: model.method,
            m: model.weights.len(),
            d: model.hyperparams.d,
            k: model.hyperparams.k,
            hyperparams: model.hyperparams.clone(),
            hierarchy: model.hierarchy.clone(),
            rng: RngMetadata {
                seed: model.hyperparams.seed,
                algorithm: RNG_ALGORITHM.into(),
            },
            best_epoch: model.best_epoch,
            epochs_run: model.epochs_run,
            w: model.weights.as_slice().to_vec(),
            enc: model.encoder_decoder.enc().clone(),
            dec: model.encoder_decoder.dec().clone(),
        }
    }

    pub fn into_model(self) -> Result<TrainedModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(FaeError::Checkpoint(format!(
                "not a fae checkpoint (format '{}')",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(FaeError::Checkpoint(format!(
                "unsupported checkpoint version {} (supported: {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if self.w.len() != self.m || self.enc.rows() != self.m || self.dec.cols() != self.m {
            return Err(FaeError::Checkpoint(format!(
                "inconsistent shapes: m={}, w has {}, encoder {}x{}, decoder {}x{}",
                self.m,
                self.w.len(),
                self.enc.rows(),
                self.enc.cols(),
                self.dec.rows(),
                self.dec.cols()
            )));
        }
        Ok(TrainedModel {
            method: self.method,
            hyperparams: self.hyperparams,
            hierarchy: self.hierarchy,
            weights: FeatureWeights::new(self.w)?,
            encoder_decoder: EncoderDecoder::new(self.enc, self.dec)?,
            best_epoch: self.best_epoch,
            epochs_run: self.epochs_run,
        })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &TrainedModel) -> Result<()> {
    let ckpt = Checkpoint::from_model(model);
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &ckpt)
        .map_err(|e| FaeError::Checkpoint(format!("serialize: {e}")))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let file = File::open(path.as_ref())?;
    let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| FaeError::Checkpoint(format!("parse {}: {e}", path.as_ref().display())))?;
    ckpt.into_model()
}

/// Selection CSV: `rank,feature,weight`, descending weight.
pub fn write_selection_csv(path: impl AsRef<Path>, sel: &SelectionResult) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path.as_ref())
        .map_err(|e| FaeError::Checkpoint(format!("selection csv: {e}")))?;
    wtr.write_record(["rank", "feature", "weight"])
        .map_err(|e| FaeError::Checkpoint(format!("selection csv: {e}")))?;
    for (rank, (&idx, &w)) in sel.indices.iter().zip(&sel.weights).enumerate() {
        wtr.write_record(&[rank.to_string(), idx.to_string(), format!("{w:.17e}")])
            .map_err(|e| FaeError::Checkpoint(format!("selection csv: {e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Hierarchical selection CSV: `group,feature,weight`, groups in order.
pub fn write_groups_csv(path: impl AsRef<Path>, sel: &HierarchicalSelection) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path.as_ref())
        .map_err(|e| FaeError::Checkpoint(format!("groups csv: {e}")))?;
    wtr.write_record(["group", "feature", "weight"])
        .map_err(|e| FaeError::Checkpoint(format!("groups csv: {e}")))?;
    for (g, group) in sel.groups.iter().enumerate() {
        for (&idx, &w) in group.indices.iter().zip(&group.weights) {
            wtr.write_record(&[(g + 1).to_string(), idx.to_string(), format!("{w:.17e}")])
                .map_err(|e| FaeError::Checkpoint(format!("groups csv: {e}")))?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One evaluation row appended to a metrics CSV
/// (`dataset,method,k,seed,recon_mse,accuracy`); the header is written when
/// the file is new. Accuracy is empty for unlabeled datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub dataset: String,
    pub method: String,
    pub k: usize,
    pub seed: u64,
    pub recon_mse: f64,
    pub accuracy: Option<f64>,
}

pub fn append_metrics_row(path: impl AsRef<Path>, row: &MetricsRow) -> Result<()> {
    if !row.recon_mse.is_finite() || row.accuracy.is_some_and(|a| !a.is_finite()) {
        return Err(FaeError::Numerical(format!(
            "refusing to write non-finite metrics: recon {}, accuracy {:?}",
            row.recon_mse, row.accuracy
        )));
    }
    let path = path.as_ref();
    let new = !path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    if new {
        wtr.write_record(["dataset", "method", "k", "seed", "recon_mse", "accuracy"])
            .map_err(|e| FaeError::Checkpoint(format!("metrics csv: {e}")))?;
    }
    wtr.write_record(&[
        row.dataset.clone(),
        row.method.clone(),
        row.k.to_string(),
        row.seed.to_string(),
        format!("{:.17e}", row.recon_mse),
        row.accuracy.map(|a| format!("{a:.17e}")).unwrap_or_default(),
    ])
    .map_err(|e| FaeError::Checkpoint(format!("metrics csv: {e}")))?;
    wtr.flush()?;
    Ok(())
}
