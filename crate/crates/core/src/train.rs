//! Adam-based training loop shared by all four models, with non-negativity
//! projection on the scoring weights, per-epoch validation, best-checkpoint
//! tracking, a divergence guard, and deterministic replay from `(seed,
//! batch policy)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{FaeError, Result};
use crate::gram::{self, GramCache, TermSpec};
use crate::hfae::{hierarchical_masks, HierarchicalSelection, HierarchyParams};
use crate::matrix::Matrix;
use crate::model::{
    accumulate_recon_term, add_l1_grad, l1_grad_coeff, l1_value, recon_loss_raw,
    recon_norm_factor, topk_mask, BatchPolicy, EncoderDecoder, FeatureWeights, Gradients,
    Hyperparams, Method, SelectionResult,
};
use crate::rng::{uniform_init, SeededRng, RNG_ALGORITHM};

/// Initialization interval for the feature-scoring weights.
pub const W_INIT_LO: f64 = 0.999999;
pub const W_INIT_HI: f64 = 0.9999999;

/// Full-batch runs switch to the Gram backend when the feature count keeps
/// `X^T X` small enough to cache.
const GRAM_MAX_FEATURES: usize = 4096;

/// Substream id for mini-batch shuffling (independent of the init draws).
const BATCH_STREAM: u64 = 1;

/// Adam moment-decay configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First/second moment accumulators for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    cfg: AdamParams,
}

impl AdamState {
    pub fn new(len: usize, cfg: AdamParams) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            cfg,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `theta` in place.
    pub fn adam_step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(FaeError::dim(
                "adam_step",
                format!(
                    "state holds {} entries, got {} params and {} grads",
                    self.m.len(),
                    theta.len(),
                    grad.len()
                ),
            ));
        }
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
        }
        if let Some(bad) = theta.iter().find(|v| !v.is_finite()) {
            let gmax = grad.iter().map(|v| v.abs()).fold(0.0, f64::max);
            return Err(FaeError::Numerical(format!(
                "non-finite parameter {bad} after Adam step t={} (max |grad| {gmax:.3e}, lr {lr})",
                self.t
            )));
        }
        Ok(())
    }
}

/// Which parameters a finished run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckpointPolicy {
    /// Parameters from the epoch with minimal validation total (default).
    BestValidation,
    /// Parameters after the last epoch.
    FinalEpoch,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub checkpoint: CheckpointPolicy,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            checkpoint: CheckpointPolicy::BestValidation,
        }
    }
}

/// Everything needed to replay a run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub method: Method,
    pub hyperparams: Hyperparams,
    pub hierarchy: Option<HierarchyParams>,
    pub adam: AdamParams,
    pub rng_algorithm: String,
    pub backend: String,
    pub thread_count: usize,
    pub checkpoint_policy: CheckpointPolicy,
    pub n_train: usize,
    pub n_val: usize,
    pub m: usize,
    pub crate_version: String,
}

/// Per-epoch loss record. `terms` follows the report's `term_names`; for
/// mini-batch runs the training losses are measured on the full split after
/// the epoch's updates, for full-batch runs at the parameters the epoch's
/// gradient was taken at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub terms: Vec<f64>,
    pub l1: f64,
    pub total: f64,
    pub val_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub term_names: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub wall_secs: f64,
    pub metadata: RunMetadata,
}

impl TrainReport {
    /// Writes the loss curve as CSV:
    /// `epoch,<term names...>,l1,total,val_total`.
    pub fn write_loss_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["epoch".to_string()];
        header.extend(self.term_names.iter().cloned());
        header.extend(["l1", "total", "val_total"].map(String::from));
        wtr.write_record(&header)
            .map_err(|e| FaeError::Checkpoint(format!("loss csv: {e}")))?;
        for rec in &self.epochs {
            let mut row = vec![rec.epoch.to_string()];
            row.extend(rec.terms.iter().map(|v| format!("{v:.17e}")));
            row.push(format!("{:.17e}", rec.l1));
            row.push(format!("{:.17e}", rec.total));
            row.push(format!("{:.17e}", rec.val_total));
            wtr.write_record(&row)
                .map_err(|e| FaeError::Checkpoint(format!("loss csv: {e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A trained model: parameters plus the configuration that produced them.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub method: Method,
    pub hyperparams: Hyperparams,
    pub hierarchy: Option<HierarchyParams>,
    pub weights: FeatureWeights,
    pub encoder_decoder: EncoderDecoder,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
}

impl TrainedModel {
    /// The selected feature subset: top-k of the scores, or the union of
    /// the hierarchy's groups for hierarchical models.
    pub fn selection(&self) -> Result<SelectionResult> {
        match (&self.method, &self.hierarchy) {
            (Method::Hfae, Some(hier)) => Ok(hierarchical_masks(
                &self.weights,
                self.hyperparams.k,
                hier.h,
            )?
            .union_selection()),
            _ => topk_mask(&self.weights, self.hyperparams.k),
        }
    }

    /// The disjoint feature groups of a hierarchical model.
    pub fn hierarchical_selection(&self) -> Result<Option<HierarchicalSelection>> {
        match (&self.method, &self.hierarchy) {
            (Method::Hfae, Some(hier)) => Ok(Some(hierarchical_masks(
                &self.weights,
                self.hyperparams.k,
                hier.h,
            )?)),
            _ => Ok(None),
        }
    }
}

pub struct TrainOutcome {
    pub model: TrainedModel,
    pub report: TrainReport,
}

// ---------------------------------------------------------------------------
// objective composition per method

struct MethodSpec<'a> {
    method: Method,
    hp: &'a Hyperparams,
    hier: Option<&'a HierarchyParams>,
}

impl<'a> MethodSpec<'a> {
    fn new(method: Method, hp: &'a Hyperparams, hier: Option<&'a HierarchyParams>) -> Result<Self> {
        match (method, hier) {
            (Method::Hfae, None) => Err(FaeError::InvalidArgument(
                "hfae training requires hierarchy parameters".into(),
            )),
            (Method::Hfae, Some(_)) | (_, None) => Ok(MethodSpec { method, hp, hier }),
            (_, Some(_)) => Err(FaeError::InvalidArgument(format!(
                "hierarchy parameters only apply to hfae, not {method}"
            ))),
        }
    }

    fn updates_w(&self) -> bool {
        self.method != Method::Ae
    }

    /// Coefficient of the L1 term on `w`.
    fn l1_coeff(&self) -> f64 {
        match self.method {
            Method::Ae => 0.0,
            Method::Iae => self.hp.lambda1,
            Method::Fae => self.hp.lambda2,
            Method::Hfae => self.hier.expect("validated").lambda0,
        }
    }

    /// Coefficients of the reconstruction terms (full path first).
    fn recon_coeffs(&self) -> Vec<f64> {
        match self.method {
            Method::Ae | Method::Iae => vec![1.0],
            Method::Fae => vec![1.0, self.hp.lambda1],
            Method::Hfae => {
                let mut c = vec![1.0];
                c.extend(&self.hier.expect("validated").lambdas);
                c
            }
        }
    }

    /// Masked-term selections recomputed from the current `w`.
    fn selections(&self, w: &FeatureWeights) -> Result<Vec<Vec<usize>>> {
        match self.method {
            Method::Ae | Method::Iae => Ok(vec![]),
            Method::Fae => Ok(vec![topk_mask(w, self.hp.k)?.indices]),
            Method::Hfae => Ok(hierarchical_masks(w, self.hp.k, self.hier.expect("validated").h)?
                .groups
                .into_iter()
                .map(|g| g.indices)
                .collect()),
        }
    }

    fn term_names(&self) -> Vec<String> {
        match self.method {
            Method::Ae | Method::Iae => vec!["full_recon".into()],
            Method::Fae => vec!["full_recon".into(), "selected_recon".into()],
            Method::Hfae => {
                let mut names = vec!["full_recon".into()];
                for i in 1..=self.hier.expect("validated").h {
                    names.push(format!("group{i}_recon"));
                }
                names
            }
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        self.hp.validate(m)?;
        if let Some(hier) = self.hier {
            hier.validate(self.hp.k, m)?;
        }
        Ok(())
    }
}

fn term_specs<'a>(coeffs: &'a [f64], selections: &'a [Vec<usize>]) -> Vec<TermSpec<'a>> {
    let mut terms = vec![TermSpec {
        coeff: coeffs[0],
        selected: None,
    }];
    for (sel, &coeff) in selections.iter().zip(&coeffs[1..]) {
        terms.push(TermSpec {
            coeff,
            selected: Some(sel),
        });
    }
    terms
}

// ---------------------------------------------------------------------------
// loss/gradient backends

enum LossBackend {
    /// Precomputed `X^T X` per split; per-step cost scales with `m^2 d`.
    Gram { train: GramCache, val: GramCache },
    /// Per-sample products; used for mini-batches and very wide data.
    Direct,
}

impl LossBackend {
    fn name(&self) -> &'static str {
        match self {
            LossBackend::Gram { .. } => "gram",
            LossBackend::Direct => "direct",
        }
    }

    /// Raw per-term losses and the gradient of the weighted sum, on the
    /// training split.
    fn train_losses_and_grads(
        &self,
        x: &Matrix,
        w: &FeatureWeights,
        ed: &EncoderDecoder,
        coeffs: &[f64],
        selections: &[Vec<usize>],
        nf: f64,
    ) -> Result<(Vec<f64>, Gradients)> {
        match self {
            LossBackend::Gram { train, .. } => {
                let terms = term_specs(coeffs, selections);
                Ok(gram::term_losses_and_grads(
                    train,
                    w.as_slice(),
                    ed,
                    &terms,
                    nf,
                ))
            }
            LossBackend::Direct => direct_losses_and_grads(x, w, ed, coeffs, selections, nf),
        }
    }

    /// Raw per-term losses on the validation split.
    fn val_losses(
        &self,
        x: &Matrix,
        w: &FeatureWeights,
        ed: &EncoderDecoder,
        selections: &[Vec<usize>],
        n_terms: usize,
    ) -> Result<Vec<f64>> {
        match self {
            LossBackend::Gram { val, .. } => {
                let coeffs = vec![1.0; n_terms];
                let terms = term_specs(&coeffs, selections);
                Ok(gram::term_losses(val, w.as_slice(), ed, &terms))
            }
            LossBackend::Direct => direct_losses(x, w, ed, selections, n_terms),
        }
    }
}

fn masked(w: &[f64], sel: &[usize]) -> Vec<f64> {
    let mut w_eff = vec![0.0; w.len()];
    for &i in sel {
        w_eff[i] = w[i];
    }
    w_eff
}

fn direct_losses(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    selections: &[Vec<usize>],
    n_terms: usize,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(n_terms);
    losses.push(recon_loss_raw(x, w.as_slice(), ed)?);
    for sel in selections {
        losses.push(recon_loss_raw(x, &masked(w.as_slice(), sel), ed)?);
    }
    Ok(losses)
}

fn direct_losses_and_grads(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    coeffs: &[f64],
    selections: &[Vec<usize>],
    nf: f64,
) -> Result<(Vec<f64>, Gradients)> {
    let mut grads = Gradients::zeros(x.cols(), ed.latent_dim());
    let mut losses = Vec::with_capacity(coeffs.len());
    losses.push(accumulate_recon_term(
        x,
        w.as_slice(),
        None,
        ed,
        coeffs[0] * nf,
        &mut grads,
    )?);
    for (sel, &coeff) in selections.iter().zip(&coeffs[1..]) {
        if coeff == 0.0 {
            // Loss still reported; no gradient flows.
            losses.push(recon_loss_raw(x, &masked(w.as_slice(), sel), ed)?);
        } else {
            losses.push(accumulate_recon_term(
                x,
                w.as_slice(),
                Some(sel),
                ed,
                coeff * nf,
                &mut grads,
            )?);
        }
    }
    Ok((losses, grads))
}

// ---------------------------------------------------------------------------
// the training loop

/// Trains `method` on `train`, checkpointing on `val`. Initialization draws
/// come from `SeededRng::new(hp.seed)` in a fixed order (scoring weights,
/// then encoder, then decoder); mini-batch shuffling uses an independent
/// derived substream, so `(seed, batch policy)` determines every output.
pub fn train_model(
    method: Method,
    train: &Matrix,
    val: &Matrix,
    hp: &Hyperparams,
    hier: Option<&HierarchyParams>,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    let spec = MethodSpec::new(method, hp, hier)?;
    let m = train.cols();
    if val.cols() != m {
        return Err(FaeError::dim(
            "train_model",
            format!("train has {m} features, validation has {}", val.cols()),
        ));
    }
    spec.validate(m)?;
    if !train.is_finite() || !val.is_finite() {
        return Err(FaeError::Numerical(
            "training data contains non-finite values; impute missing values first".into(),
        ));
    }

    // Parameter initialization. AE keeps the scoring layer frozen at ones
    // and consumes no uniform draws.
    let mut rng = SeededRng::new(hp.seed);
    let mut w = if spec.updates_w() {
        FeatureWeights::new(uniform_init(m, W_INIT_LO, W_INIT_HI, &mut rng)?)?
    } else {
        FeatureWeights::ones(m)
    };
    let mut ed = EncoderDecoder::xavier(m, hp.d, &mut rng)?;

    let backend = match hp.batch {
        BatchPolicy::Full if m <= GRAM_MAX_FEATURES => LossBackend::Gram {
            train: GramCache::new(train),
            val: GramCache::new(val),
        },
        _ => LossBackend::Direct,
    };

    let metadata = RunMetadata {
        method,
        hyperparams: hp.clone(),
        hierarchy: hier.cloned(),
        adam: AdamParams::default(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        backend: backend.name().to_string(),
        thread_count: 1,
        checkpoint_policy: opts.checkpoint,
        n_train: train.rows(),
        n_val: val.rows(),
        m,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };

    let coeffs = spec.recon_coeffs();
    let l1_coeff = spec.l1_coeff();
    let l1_gc = l1_grad_coeff(hp.l1_mode, m);
    let nf_train = recon_norm_factor(hp.loss_norm, train.rows(), m);
    let nf_val = recon_norm_factor(hp.loss_norm, val.rows(), m);

    let mut opt_w = AdamState::new(m, metadata.adam);
    let mut opt_enc = AdamState::new(m * hp.d, metadata.adam);
    let mut opt_dec = AdamState::new(hp.d * m, metadata.adam);

    let mut epochs = Vec::with_capacity(hp.epochs);
    let mut best: Option<(f64, usize, FeatureWeights, EncoderDecoder)> = None;
    let mut initial_total: Option<f64> = None;

    let total_of = |losses: &[f64], nf: f64, l1: f64| -> f64 {
        coeffs
            .iter()
            .zip(losses)
            .map(|(c, l)| c * l * nf)
            .sum::<f64>()
            + l1_coeff * l1
    };

    for epoch in 0..hp.epochs {
        // Gradient steps for this epoch; reported train losses come either
        // from the full-batch gradient evaluation or, for mini-batches,
        // from a post-epoch pass.
        let (train_losses, l1_now) = match hp.batch {
            BatchPolicy::Full => {
                let selections = spec.selections(&w)?;
                let (raw, mut grads) =
                    backend.train_losses_and_grads(train, &w, &ed, &coeffs, &selections, nf_train)?;
                if spec.updates_w() && l1_coeff != 0.0 {
                    add_l1_grad(w.as_slice(), l1_coeff * l1_gc, &mut grads.w);
                }
                if !grads.is_finite() {
                    return Err(FaeError::Numerical(format!(
                        "non-finite gradient at epoch {epoch}"
                    )));
                }
                let l1_now = l1_value(w.as_slice(), hp.l1_mode);
                if spec.updates_w() {
                    opt_w.adam_step(w.as_mut_slice(), &grads.w, hp.lr)?;
                    w.project_nonneg();
                }
                opt_enc.adam_step(ed.enc.data_mut(), grads.enc.data(), hp.lr)?;
                opt_dec.adam_step(ed.dec.data_mut(), grads.dec.data(), hp.lr)?;
                (raw, l1_now)
            }
            BatchPolicy::Mini(batch_size) => {
                let mut order: Vec<usize> = (0..train.rows()).collect();
                let mut batch_rng = SeededRng::new(hp.seed).derive(BATCH_STREAM);
                // One derived stream per epoch keeps replay independent of
                // restart points.
                let mut epoch_rng = batch_rng.derive(epoch as u64);
                epoch_rng.shuffle(&mut order);
                batch_rng = epoch_rng;
                let _ = &mut batch_rng;
                for chunk in order.chunks(batch_size) {
                    let xb = train.select_rows(chunk)?;
                    let nf_b = recon_norm_factor(hp.loss_norm, xb.rows(), m);
                    let selections = spec.selections(&w)?;
                    let (_, mut grads) =
                        direct_losses_and_grads(&xb, &w, &ed, &coeffs, &selections, nf_b)?;
                    if spec.updates_w() && l1_coeff != 0.0 {
                        add_l1_grad(w.as_slice(), l1_coeff * l1_gc, &mut grads.w);
                    }
                    if !grads.is_finite() {
                        return Err(FaeError::Numerical(format!(
                            "non-finite gradient at epoch {epoch}"
                        )));
                    }
                    if spec.updates_w() {
                        opt_w.adam_step(w.as_mut_slice(), &grads.w, hp.lr)?;
                        w.project_nonneg();
                    }
                    opt_enc.adam_step(ed.enc.data_mut(), grads.enc.data(), hp.lr)?;
                    opt_dec.adam_step(ed.dec.data_mut(), grads.dec.data(), hp.lr)?;
                }
                let selections = spec.selections(&w)?;
                let raw = direct_losses(train, &w, &ed, &selections, coeffs.len())?;
                (raw, l1_value(w.as_slice(), hp.l1_mode))
            }
        };

        let total = total_of(&train_losses, nf_train, l1_now);
        if !total.is_finite() {
            return Err(FaeError::Numerical(format!(
                "non-finite training total at epoch {epoch}"
            )));
        }
        let initial = *initial_total.get_or_insert(total);
        let limit = 1e6 * initial.max(f64::MIN_POSITIVE);
        if total > limit {
            return Err(FaeError::Diverged {
                epoch,
                total,
                initial,
                limit,
            });
        }

        // Validation at the updated parameters; masks recomputed from the
        // updated scores.
        let val_selections = spec.selections(&w)?;
        let val_raw = backend.val_losses(val, &w, &ed, &val_selections, coeffs.len())?;
        let val_total = total_of(&val_raw, nf_val, l1_value(w.as_slice(), hp.l1_mode));
        if !val_total.is_finite() {
            return Err(FaeError::Numerical(format!(
                "non-finite validation total at epoch {epoch}"
            )));
        }

        if best.as_ref().map_or(true, |(b, ..)| val_total < *b) {
            best = Some((val_total, epoch, w.clone(), ed.clone()));
        }

        epochs.push(EpochRecord {
            epoch,
            terms: train_losses.iter().map(|l| l * nf_train).collect(),
            l1: l1_now,
            total,
            val_total,
        });
    }

    let best_epoch = best.as_ref().map(|(_, e, ..)| *e);
    let (weights, encoder_decoder) = match (opts.checkpoint, best) {
        (CheckpointPolicy::BestValidation, Some((_, _, bw, bed))) => (bw, bed),
        _ => (w, ed),
    };

    let report = TrainReport {
        term_names: spec.term_names(),
        epochs,
        best_epoch,
        wall_secs: started.elapsed().as_secs_f64(),
        metadata,
    };
    Ok(TrainOutcome {
        model: TrainedModel {
            method,
            hyperparams: hp.clone(),
            hierarchy: hier.cloned(),
            weights,
            encoder_decoder,
            best_epoch,
            epochs_run: hp.epochs,
        },
        report,
    })
}

/// Trains a fractal autoencoder.
pub fn train_fae(
    train: &Matrix,
    val: &Matrix,
    hp: &Hyperparams,
) -> Result<(FeatureWeights, EncoderDecoder, TrainReport)> {
    let out = train_model(Method::Fae, train, val, hp, None, &TrainOptions::default())?;
    Ok((
        out.model.weights,
        out.model.encoder_decoder,
        out.report,
    ))
}

/// Trains the IAE ablation (no masked sub-path; `lambda1` weighs the L1
/// term).
pub fn train_iae(
    train: &Matrix,
    val: &Matrix,
    hp: &Hyperparams,
) -> Result<(FeatureWeights, EncoderDecoder, TrainReport)> {
    let out = train_model(Method::Iae, train, val, hp, None, &TrainOptions::default())?;
    Ok((
        out.model.weights,
        out.model.encoder_decoder,
        out.report,
    ))
}

/// Trains a plain linear autoencoder (scoring layer frozen at ones).
pub fn train_ae(
    train: &Matrix,
    val: &Matrix,
    hp: &Hyperparams,
) -> Result<(EncoderDecoder, TrainReport)> {
    let out = train_model(Method::Ae, train, val, hp, None, &TrainOptions::default())?;
    Ok((out.model.encoder_decoder, out.report))
}

/// Trains an `h`-group hierarchical FAE and returns the disjoint groups
/// alongside the parameters.
pub fn train_hfae(
    train: &Matrix,
    val: &Matrix,
    hp: &Hyperparams,
    hier: &HierarchyParams,
) -> Result<(
    FeatureWeights,
    EncoderDecoder,
    HierarchicalSelection,
    TrainReport,
)> {
    let out = train_model(
        Method::Hfae,
        train,
        val,
        hp,
        Some(hier),
        &TrainOptions::default(),
    )?;
    let selection = hierarchical_masks(&out.model.weights, hp.k, hier.h)?;
    Ok((
        out.model.weights,
        out.model.encoder_decoder,
        selection,
        out.report,
    ))
}
