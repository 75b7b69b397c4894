//! Model definitions: the feature-scoring layer, the linear encoder/decoder
//! pair, objectives for the plain autoencoder, the scored autoencoder (IAE),
//! and the fractal autoencoder (FAE), plus exact analytic gradients.
//!
//! All reconstruction paths are compositions of linear maps:
//! `X -> X Diag(w) -> (X Diag(w)) W_E -> ((X Diag(w)) W_E) W_D`,
//! where `w` may first be passed through the top-k masking operator that
//! keeps its `k` largest entries and zeroes the rest.

use serde::{Deserialize, Serialize};

use crate::error::{FaeError, Result};
use crate::matrix::{gemm, gemm_into, Matrix};

/// Non-negative per-feature importance scores (the diagonal of the scoring
/// layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeights {
    w: Vec<f64>,
}

impl FeatureWeights {
    /// Wraps a weight vector, rejecting non-finite entries.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(FaeError::InvalidArgument(
                "feature weights must be non-empty".into(),
            ));
        }
        if let Some(v) = w.iter().find(|v| !v.is_finite()) {
            return Err(FaeError::Numerical(format!(
                "non-finite feature weight {v}"
            )));
        }
        Ok(FeatureWeights { w })
    }

    pub fn ones(m: usize) -> Self {
        FeatureWeights { w: vec![1.0; m] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.w
    }

    /// Clamps every entry to `max(w_j, 0)`, enforcing the non-negativity
    /// constraint on the scoring layer.
    pub fn project_nonneg(&mut self) {
        for v in &mut self.w {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    pub fn min(&self) -> f64 {
        self.w.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Linear encoder (`m x d`) and decoder (`d x m`) weights. No bias terms:
/// both maps are pure matrix products.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDecoder {
    pub(crate) enc: Matrix,
    pub(crate) dec: Matrix,
}

impl EncoderDecoder {
    pub fn new(enc: Matrix, dec: Matrix) -> Result<Self> {
        if enc.cols() != dec.rows() || enc.rows() != dec.cols() {
            return Err(FaeError::dim(
                "EncoderDecoder::new",
                format!(
                    "encoder {}x{} incompatible with decoder {}x{}",
                    enc.rows(),
                    enc.cols(),
                    dec.rows(),
                    dec.cols()
                ),
            ));
        }
        Ok(EncoderDecoder { enc, dec })
    }

    /// Xavier-normal initialized pair for `m` features and latent dimension
    /// `d`.
    pub fn xavier(m: usize, d: usize, rng: &mut crate::rng::SeededRng) -> Result<Self> {
        let enc = crate::rng::xavier_normal(m, d, rng)?;
        let dec = crate::rng::xavier_normal(d, m, rng)?;
        EncoderDecoder::new(enc, dec)
    }

    pub fn num_features(&self) -> usize {
        self.enc.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.enc.cols()
    }

    pub fn enc(&self) -> &Matrix {
        &self.enc
    }

    pub fn dec(&self) -> &Matrix {
        &self.dec
    }
}

/// Normalization applied to the L1 term on `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum L1Mode {
    /// `(1/m) * sum_j w_j` — dimension-independent, the default.
    Mean,
    /// `sum_j w_j`.
    Sum,
}

/// Normalization applied to the reconstruction terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossNorm {
    /// Squared Frobenius norm divided by `n*m` (per-element mean square),
    /// the default; keeps the balancing coefficients transferable across
    /// dataset sizes.
    Mean,
    /// Raw squared Frobenius norm.
    Frobenius,
}

/// Mini-batching policy for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchPolicy {
    /// One gradient step per epoch over the whole training split.
    Full,
    /// Seeded shuffle each epoch, steps over batches of the given size.
    Mini(usize),
}

/// Which model a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain linear autoencoder (scoring layer frozen at all-ones).
    Ae,
    /// Scored autoencoder with L1 sparsity, no selected-subset term.
    Iae,
    /// Fractal autoencoder: IAE plus the top-k masked reconstruction term.
    Fae,
    /// Hierarchical FAE with `h` disjoint top-k groups.
    Hfae,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Ae => "ae",
            Method::Iae => "iae",
            Method::Fae => "fae",
            Method::Hfae => "hfae",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = FaeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ae" => Ok(Method::Ae),
            "iae" => Ok(Method::Iae),
            "fae" => Ok(Method::Fae),
            "hfae" => Ok(Method::Hfae),
            other => Err(FaeError::InvalidArgument(format!(
                "unknown method '{other}' (expected ae, iae, fae, or hfae)"
            ))),
        }
    }
}

/// Training hyperparameters.
///
/// `lambda1` weighs the masked reconstruction term of FAE; for IAE it is the
/// coefficient of the L1 term instead (IAE has no masked term). `lambda2`
/// weighs FAE's L1 term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Number of selected features.
    pub k: usize,
    /// Latent dimension of the encoder/decoder (defaults to `k`).
    pub d: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: BatchPolicy,
    pub seed: u64,
    pub l1_mode: L1Mode,
    pub loss_norm: LossNorm,
}

impl Hyperparams {
    /// Defaults used throughout: `d = k`, `lambda1 = 2`, `lambda2 = 0.1`,
    /// `lr = 0.001`, `epochs = 1000`, full-batch, mean-normalized L1 and
    /// reconstruction losses.
    pub fn new(k: usize) -> Self {
        Hyperparams {
            k,
            d: k,
            lambda1: 2.0,
            lambda2: 0.1,
            lr: 0.001,
            epochs: 1000,
            batch: BatchPolicy::Full,
            seed: 0,
            l1_mode: L1Mode::Mean,
            loss_norm: LossNorm::Mean,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 || self.k > m {
            return Err(FaeError::InvalidArgument(format!(
                "k must satisfy 1 <= k <= m, got k={} with m={m}",
                self.k
            )));
        }
        if self.d == 0 {
            return Err(FaeError::InvalidArgument("latent dim d must be >= 1".into()));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(FaeError::InvalidArgument(
                "lambda coefficients must be non-negative".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(FaeError::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if let BatchPolicy::Mini(b) = self.batch {
            if b == 0 {
                return Err(FaeError::InvalidArgument("batch size must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// The selected feature subset: indices ordered by descending weight (ties
/// broken toward the lower index) with the matching weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl SelectionResult {
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    /// Boolean membership mask over `m` features.
    pub fn mask_flags(&self, m: usize) -> Vec<bool> {
        let mut mask = vec![false; m];
        for &i in &self.indices {
            mask[i] = true;
        }
        mask
    }
}

/// Keeps the `k` largest entries of `w` (ties broken by lower index) and
/// reports them in descending-weight order.
pub fn topk_mask(w: &FeatureWeights, k: usize) -> Result<SelectionResult> {
    topk_mask_slice(w.as_slice(), k)
}

pub(crate) fn topk_mask_slice(w: &[f64], k: usize) -> Result<SelectionResult> {
    let m = w.len();
    if k == 0 || k > m {
        return Err(FaeError::InvalidArgument(format!(
            "top-k selection requires 1 <= k <= m, got k={k} with m={m}"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order.truncate(k);
    let weights = order.iter().map(|&i| w[i]).collect();
    Ok(SelectionResult {
        indices: order,
        weights,
    })
}

/// One reconstruction pass: `X Diag(w ⊙ mask) W_E W_D`. With `mask` absent
/// every feature passes through (the full, unmasked path).
pub fn forward(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    mask: Option<&[bool]>,
) -> Result<Matrix> {
    check_shapes("forward", x, w.as_slice(), ed)?;
    if let Some(mask) = mask {
        if mask.len() != w.len() {
            return Err(FaeError::dim(
                "forward",
                format!("mask length {} for {} features", mask.len(), w.len()),
            ));
        }
    }
    let w_eff: Vec<f64> = match mask {
        None => w.as_slice().to_vec(),
        Some(mask) => w
            .as_slice()
            .iter()
            .zip(mask)
            .map(|(&v, &keep)| if keep { v } else { 0.0 })
            .collect(),
    };
    let a = x.scale_cols(&w_eff)?;
    let z = a.matmul(&ed.enc)?;
    z.matmul(&ed.dec)
}

/// Per-term decomposition of an objective value.
///
/// `total == full_recon + lambda1 * selected_recon + lambda2 * l1` holds by
/// construction for FAE; for IAE `selected_recon` is 0 and `lambda1`
/// multiplies the L1 term; for AE only `full_recon` contributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub full_recon: f64,
    pub selected_recon: f64,
    pub l1: f64,
    pub total: f64,
}

/// Gradients of an objective with respect to `(w, W_E, W_D)`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w: Vec<f64>,
    pub enc: Matrix,
    pub dec: Matrix,
}

impl Gradients {
    pub fn zeros(m: usize, d: usize) -> Self {
        Gradients {
            w: vec![0.0; m],
            enc: Matrix::zeros(m, d),
            dec: Matrix::zeros(d, m),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite()) && self.enc.is_finite() && self.dec.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        let mw = self.w.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let me = self.enc.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
        let md = self.dec.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
        mw.max(me).max(md)
    }
}

pub(crate) fn check_shapes(
    op: &'static str,
    x: &Matrix,
    w: &[f64],
    ed: &EncoderDecoder,
) -> Result<()> {
    let m = x.cols();
    if w.len() != m || ed.enc.rows() != m || ed.dec.cols() != m {
        return Err(FaeError::dim(
            op,
            format!(
                "x has {m} features, w has {}, encoder {}x{}, decoder {}x{}",
                w.len(),
                ed.enc.rows(),
                ed.enc.cols(),
                ed.dec.rows(),
                ed.dec.cols()
            ),
        ));
    }
    Ok(())
}

pub(crate) fn recon_norm_factor(norm: LossNorm, n: usize, m: usize) -> f64 {
    match norm {
        LossNorm::Mean => 1.0 / (n as f64 * m as f64),
        LossNorm::Frobenius => 1.0,
    }
}

pub(crate) fn l1_value(w: &[f64], mode: L1Mode) -> f64 {
    let s: f64 = w.iter().sum();
    match mode {
        L1Mode::Mean => s / w.len() as f64,
        L1Mode::Sum => s,
    }
}

pub(crate) fn l1_grad_coeff(mode: L1Mode, m: usize) -> f64 {
    match mode {
        L1Mode::Mean => 1.0 / m as f64,
        L1Mode::Sum => 1.0,
    }
}

fn masked_weights(w: &[f64], mask: &[bool]) -> Vec<f64> {
    w.iter()
        .zip(mask)
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect()
}

pub(crate) fn recon_loss_raw(x: &Matrix, w_eff: &[f64], ed: &EncoderDecoder) -> Result<f64> {
    let a = x.scale_cols(w_eff)?;
    let z = a.matmul(&ed.enc)?;
    let recon = z.matmul(&ed.dec)?;
    Ok(recon.sub(x)?.frob_sq())
}

/// FAE objective (full-path reconstruction + `lambda1` masked-path
/// reconstruction + `lambda2` L1 on `w`). The top-k mask is recomputed from
/// the current `w`.
pub fn fae_objective(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
) -> Result<ObjectiveBreakdown> {
    let sel = topk_mask(w, hp.k)?;
    fae_objective_frozen(x, w, ed, hp, &sel.mask_flags(w.len()))
}

/// FAE objective with an explicitly supplied mask. Used by finite-difference
/// checks, which must hold the mask fixed while perturbing `w`.
pub fn fae_objective_frozen(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
    mask: &[bool],
) -> Result<ObjectiveBreakdown> {
    check_shapes("fae_objective", x, w.as_slice(), ed)?;
    hp.validate(x.cols())?;
    let nf = recon_norm_factor(hp.loss_norm, x.rows(), x.cols());
    let full_recon = recon_loss_raw(x, w.as_slice(), ed)? * nf;
    let selected_recon = recon_loss_raw(x, &masked_weights(w.as_slice(), mask), ed)? * nf;
    let l1 = l1_value(w.as_slice(), hp.l1_mode);
    let total = full_recon + hp.lambda1 * selected_recon + hp.lambda2 * l1;
    if !total.is_finite() {
        return Err(FaeError::Numerical(format!(
            "non-finite objective: full {full_recon}, selected {selected_recon}, l1 {l1}"
        )));
    }
    Ok(ObjectiveBreakdown {
        full_recon,
        selected_recon,
        l1,
        total,
    })
}

/// IAE objective: full-path reconstruction + `lambda1` L1 on `w`. Equals the
/// FAE objective with its masked term dropped and the L1 coefficient taken
/// from `lambda1`.
pub fn iae_objective(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
) -> Result<ObjectiveBreakdown> {
    check_shapes("iae_objective", x, w.as_slice(), ed)?;
    hp.validate(x.cols())?;
    let nf = recon_norm_factor(hp.loss_norm, x.rows(), x.cols());
    let full_recon = recon_loss_raw(x, w.as_slice(), ed)? * nf;
    let l1 = l1_value(w.as_slice(), hp.l1_mode);
    let total = full_recon + hp.lambda1 * l1;
    if !total.is_finite() {
        return Err(FaeError::Numerical(format!(
            "non-finite objective: full {full_recon}, l1 {l1}"
        )));
    }
    Ok(ObjectiveBreakdown {
        full_recon,
        selected_recon: 0.0,
        l1,
        total,
    })
}

/// Plain linear autoencoder objective: reconstruction through the
/// encoder/decoder only (`w` frozen at all-ones, no regularization).
pub fn ae_objective(x: &Matrix, ed: &EncoderDecoder, norm: LossNorm) -> Result<f64> {
    let w = FeatureWeights::ones(x.cols());
    check_shapes("ae_objective", x, w.as_slice(), ed)?;
    let nf = recon_norm_factor(norm, x.rows(), x.cols());
    let loss = recon_loss_raw(x, w.as_slice(), ed)? * nf;
    if !loss.is_finite() {
        return Err(FaeError::Numerical(format!("non-finite AE loss {loss}")));
    }
    Ok(loss)
}

/// Accumulates the gradients of one reconstruction term
/// `coef * ||X Diag(w_eff) W_E W_D - X||^2` into `out`, where `coef` folds in
/// the term's balancing coefficient and the loss normalization. When
/// `selected` is given, `w_eff` is `w` restricted to those indices and only
/// they receive `w`-gradient; the term's raw (unscaled, uncoefficiented)
/// loss is returned either way.
pub(crate) fn accumulate_recon_term(
    x: &Matrix,
    w: &[f64],
    selected: Option<&[usize]>,
    ed: &EncoderDecoder,
    coef: f64,
    out: &mut Gradients,
) -> Result<f64> {
    let n = x.rows();
    let d = ed.latent_dim();

    match selected {
        None => {
            let a = x.scale_cols(w)?; // n x m
            let z = a.matmul(&ed.enc)?; // n x d
            let recon = z.matmul(&ed.dec)?; // n x m
            let r = recon.sub(x)?;
            let loss_raw = r.frob_sq();

            // dL/dW_D = 2 Z^T R
            gemm_into(2.0 * coef, &z, true, &r, false, 1.0, &mut out.dec);
            // G1 = R W_D^T, then dL/dW_E = 2 A^T G1
            let g1 = gemm(&r, false, &ed.dec, true); // n x d
            gemm_into(2.0 * coef, &a, true, &g1, false, 1.0, &mut out.enc);
            // dL/dw_j = 2 sum_i X[i,j] * (G1 W_E^T)[i,j]
            let b = gemm(&g1, false, &ed.enc, true); // n x m
            for i in 0..n {
                let xr = x.row(i);
                let br = b.row(i);
                for (gw, (xv, bv)) in out.w.iter_mut().zip(xr.iter().zip(br)) {
                    *gw += 2.0 * coef * xv * bv;
                }
            }
            Ok(loss_raw)
        }
        Some(sel) => {
            // Only the selected columns of X Diag(w_eff) are nonzero, so the
            // first products run on gathered k-column views.
            let x_sel = x.select_cols(sel)?; // n x k
            let w_sel: Vec<f64> = sel.iter().map(|&j| w[j]).collect();
            let a_sel = x_sel.scale_cols(&w_sel)?; // n x k
            let enc_sel = ed.enc.select_rows(sel)?; // k x d
            let z = a_sel.matmul(&enc_sel)?; // n x d
            let recon = z.matmul(&ed.dec)?; // n x m
            let r = recon.sub(x)?;
            let loss_raw = r.frob_sq();

            gemm_into(2.0 * coef, &z, true, &r, false, 1.0, &mut out.dec);
            let g1 = gemm(&r, false, &ed.dec, true); // n x d
            let enc_grad_sel = gemm(&a_sel, true, &g1, false); // k x d
            for (row, &j) in sel.iter().enumerate() {
                let dst = out.enc.row_mut(j);
                for (gv, sv) in dst.iter_mut().zip(enc_grad_sel.row(row)) {
                    *gv += 2.0 * coef * sv;
                }
            }
            let b_sel = gemm(&g1, false, &enc_sel, true); // n x k
            for i in 0..n {
                let xr = x_sel.row(i);
                let br = b_sel.row(i);
                for ((&j, &xv), &bv) in sel.iter().zip(xr).zip(br) {
                    out.w[j] += 2.0 * coef * xv * bv;
                }
            }
            let _ = d;
            Ok(loss_raw)
        }
    }
}

pub(crate) fn add_l1_grad(w: &[f64], coeff: f64, out: &mut [f64]) {
    // Subgradient 0 at w_j = 0 so projected-out features stay dead.
    for (g, &v) in out.iter_mut().zip(w) {
        if v > 0.0 {
            *g += coeff;
        }
    }
}

/// Exact gradients of [`fae_objective`]. The top-k mask is recomputed from
/// the current `w`; entries outside the mask receive no gradient from the
/// masked term (the exact subgradient away from ties).
pub fn fae_gradients(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
) -> Result<Gradients> {
    let sel = topk_mask(w, hp.k)?;
    fae_gradients_frozen(x, w, ed, hp, &sel.indices)
}

/// [`fae_gradients`] with the masked term's selection fixed to `selected`.
pub fn fae_gradients_frozen(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
    selected: &[usize],
) -> Result<Gradients> {
    check_shapes("fae_gradients", x, w.as_slice(), ed)?;
    hp.validate(x.cols())?;
    let (n, m) = (x.rows(), x.cols());
    let nf = recon_norm_factor(hp.loss_norm, n, m);
    let mut out = Gradients::zeros(m, ed.latent_dim());

    accumulate_recon_term(x, w.as_slice(), None, ed, nf, &mut out)?;
    if hp.lambda1 != 0.0 {
        accumulate_recon_term(
            x,
            w.as_slice(),
            Some(selected),
            ed,
            hp.lambda1 * nf,
            &mut out,
        )?;
    }
    add_l1_grad(
        w.as_slice(),
        hp.lambda2 * l1_grad_coeff(hp.l1_mode, m),
        &mut out.w,
    );

    if !out.is_finite() {
        return Err(FaeError::Numerical("non-finite gradient".into()));
    }
    Ok(out)
}

/// Exact gradients of [`iae_objective`]: the full-path term plus the L1
/// subgradient weighted by `lambda1`.
pub fn iae_gradients(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
) -> Result<Gradients> {
    check_shapes("iae_gradients", x, w.as_slice(), ed)?;
    hp.validate(x.cols())?;
    let (n, m) = (x.rows(), x.cols());
    let nf = recon_norm_factor(hp.loss_norm, n, m);
    let mut out = Gradients::zeros(m, ed.latent_dim());
    accumulate_recon_term(x, w.as_slice(), None, ed, nf, &mut out)?;
    add_l1_grad(
        w.as_slice(),
        hp.lambda1 * l1_grad_coeff(hp.l1_mode, m),
        &mut out.w,
    );
    if !out.is_finite() {
        return Err(FaeError::Numerical("non-finite gradient".into()));
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_support {
    //! Finite-difference oracles shared by gradient tests.

    use super::*;

    /// Central finite differences of `f` at `point`.
    pub fn finite_diff(f: impl Fn(&[f64]) -> f64, point: &[f64], step: f64) -> Vec<f64> {
        let mut grads = Vec::with_capacity(point.len());
        let mut p = point.to_vec();
        for i in 0..point.len() {
            p[i] = point[i] + step;
            let fp = f(&p);
            p[i] = point[i] - step;
            let fm = f(&p);
            p[i] = point[i];
            grads.push((fp - fm) / (2.0 * step));
        }
        grads
    }

    /// Max relative error between analytic and numeric gradients, scaled by
    /// the larger gradient magnitude (floored to dodge 0/0).
    pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
        let scale = analytic
            .iter()
            .chain(numeric)
            .map(|v| v.abs())
            .fold(1e-8, f64::max);
        analytic
            .iter()
            .zip(numeric)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Flattens `(w, enc, dec)` into one parameter vector.
    pub fn flatten(w: &FeatureWeights, ed: &EncoderDecoder) -> Vec<f64> {
        let mut v = w.as_slice().to_vec();
        v.extend_from_slice(ed.enc().data());
        v.extend_from_slice(ed.dec().data());
        v
    }

    /// Rebuilds `(w, enc, dec)` from a flattened vector.
    pub fn unflatten(v: &[f64], m: usize, d: usize) -> (FeatureWeights, EncoderDecoder) {
        let w = FeatureWeights::new(v[..m].to_vec()).unwrap();
        let enc = Matrix::from_vec(m, d, v[m..m + m * d].to_vec()).unwrap();
        let dec = Matrix::from_vec(d, m, v[m + m * d..].to_vec()).unwrap();
        (w, EncoderDecoder::new(enc, dec).unwrap())
    }

    pub fn random_instance(
        seed: u64,
        n: usize,
        m: usize,
        d: usize,
    ) -> (Matrix, FeatureWeights, EncoderDecoder) {
        let mut rng = crate::rng::SeededRng::new(seed);
        let x = Matrix::from_vec(
            n,
            m,
            (0..n * m).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap();
        // Strictly positive weights: keeps the L1 subgradient unambiguous
        // and the top-k selection tie-free.
        let w = FeatureWeights::new(
            (0..m).map(|_| rng.uniform(0.2, 1.0)).collect(),
        )
        .unwrap();
        let ed = EncoderDecoder::xavier(m, d, &mut rng).unwrap();
        (x, w, ed)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn topk_basic_and_ordering() {
        let w = FeatureWeights::new(vec![0.3, 0.1, 0.5]).unwrap();
        let sel = topk_mask(&w, 2).unwrap();
        assert_eq!(sel.indices, vec![2, 0]);
        assert_eq!(sel.weights, vec![0.5, 0.3]);
    }

    #[test]
    fn topk_breaks_ties_by_lower_index() {
        let w = FeatureWeights::new(vec![0.4, 0.4, 0.4]).unwrap();
        let sel = topk_mask(&w, 2).unwrap();
        assert_eq!(sel.indices, vec![0, 1]);
    }

    #[test]
    fn topk_matches_full_sort_oracle() {
        let mut rng = SeededRng::new(8);
        let w: Vec<f64> = (0..100).map(|_| rng.uniform01()).collect();
        let sel = topk_mask_slice(&w, 10).unwrap();

        let mut order: Vec<usize> = (0..w.len()).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
        let expect: std::collections::BTreeSet<usize> = order[..10].iter().cloned().collect();
        let got: std::collections::BTreeSet<usize> = sel.indices.iter().cloned().collect();
        assert_eq!(got, expect);
        // Reported weights are non-increasing.
        assert!(sel.weights.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn topk_rejects_oversized_k() {
        let w = FeatureWeights::new(vec![1.0, 2.0]).unwrap();
        assert!(topk_mask(&w, 3).is_err());
        assert!(topk_mask(&w, 0).is_err());
    }

    #[test]
    fn forward_zero_weights_gives_zero() {
        let (x, _, ed) = random_instance(1, 4, 5, 3);
        let w0 = FeatureWeights::new(vec![0.0; 5]).unwrap();
        let y = forward(&x, &w0, &ed, None).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_identity_pipeline_reproduces_input() {
        let (x, _, _) = random_instance(2, 6, 4, 4);
        let w = FeatureWeights::ones(4);
        let ed = EncoderDecoder::new(Matrix::identity(4), Matrix::identity(4)).unwrap();
        let y = forward(&x, &w, &ed, None).unwrap();
        let diff = y.sub(&x).unwrap().frob_sq();
        assert!(diff <= 1e-24);
    }

    #[test]
    fn forward_matches_explicit_four_factor_product() {
        let (x, w, ed) = random_instance(3, 5, 7, 3);
        let sel = topk_mask(&w, 4).unwrap();
        let mask = sel.mask_flags(7);
        let got = forward(&x, &w, &ed, Some(&mask)).unwrap();

        // Independent composition through plain matmuls on Diag(w ⊙ mask).
        let mut diag = Matrix::zeros(7, 7);
        for j in 0..7 {
            if mask[j] {
                diag.set(j, j, w.as_slice()[j]);
            }
        }
        let expect = x
            .matmul(&diag)
            .unwrap()
            .matmul(ed.enc())
            .unwrap()
            .matmul(ed.dec())
            .unwrap();
        let diff = got.sub(&expect).unwrap().frob_sq();
        assert!(diff <= 1e-20, "forward disagrees with composition: {diff:e}");
    }

    #[test]
    fn full_mask_equals_no_mask_exactly() {
        let (x, w, ed) = random_instance(4, 5, 6, 2);
        let all = vec![true; 6];
        let a = forward(&x, &w, &ed, None).unwrap();
        let b = forward(&x, &w, &ed, Some(&all)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fae_objective_zero_weights() {
        let (x, _, ed) = random_instance(5, 6, 5, 3);
        let hp = Hyperparams::new(2);
        let w0 = FeatureWeights::new(vec![0.0; 5]).unwrap();
        let b = fae_objective(&x, &w0, &ed, &hp).unwrap();
        let msq = x.frob_sq() / (6.0 * 5.0);
        assert!((b.full_recon - msq).abs() < 1e-12);
        assert!((b.selected_recon - msq).abs() < 1e-12);
        assert_eq!(b.l1, 0.0);
        assert!((b.total - (1.0 + hp.lambda1) * msq).abs() < 1e-12);
    }

    #[test]
    fn fae_objective_identity_pipeline_leaves_only_l1() {
        let (x, _, _) = random_instance(6, 5, 4, 4);
        let w = FeatureWeights::ones(4);
        let ed = EncoderDecoder::new(Matrix::identity(4), Matrix::identity(4)).unwrap();
        let mut hp = Hyperparams::new(4); // k = m: mask keeps everything
        hp.d = 4;
        let b = fae_objective(&x, &w, &ed, &hp).unwrap();
        assert!(b.full_recon <= 1e-24);
        assert!(b.selected_recon <= 1e-24);
        assert!((b.l1 - 1.0).abs() < 1e-15); // mean of all-ones
        assert!((b.total - hp.lambda2).abs() < 1e-12);
    }

    #[test]
    fn fae_objective_matches_term_by_term_composition() {
        let (x, w, ed) = random_instance(7, 8, 9, 4);
        let mut hp = Hyperparams::new(3);
        hp.d = 4;
        let b = fae_objective(&x, &w, &ed, &hp).unwrap();

        let sel = topk_mask(&w, 3).unwrap();
        let mask = sel.mask_flags(9);
        let nf = 1.0 / (8.0 * 9.0);
        let full = forward(&x, &w, &ed, None).unwrap().sub(&x).unwrap().frob_sq() * nf;
        let masked = forward(&x, &w, &ed, Some(&mask))
            .unwrap()
            .sub(&x)
            .unwrap()
            .frob_sq()
            * nf;
        let l1 = w.as_slice().iter().sum::<f64>() / 9.0;
        assert!((b.full_recon - full).abs() < 1e-14);
        assert!((b.selected_recon - masked).abs() < 1e-14);
        assert!((b.l1 - l1).abs() < 1e-14);
        assert!((b.total - (full + hp.lambda1 * masked + hp.lambda2 * l1)).abs() < 1e-14);
    }

    #[test]
    fn iae_objective_special_cases() {
        let (x, w, ed) = random_instance(9, 6, 7, 3);
        let mut hp = Hyperparams::new(3);
        hp.d = 3;
        hp.lambda1 = 0.7;

        // w = 0 leaves only the data norm.
        let w0 = FeatureWeights::new(vec![0.0; 7]).unwrap();
        let b0 = iae_objective(&x, &w0, &ed, &hp).unwrap();
        assert!((b0.total - x.frob_sq() / 42.0).abs() < 1e-12);

        // IAE == FAE with (lambda1 -> 0, lambda2 -> IAE's lambda1).
        let iae = iae_objective(&x, &w, &ed, &hp).unwrap();
        let mut fae_hp = hp.clone();
        fae_hp.lambda1 = 0.0;
        fae_hp.lambda2 = hp.lambda1;
        let fae = fae_objective(&x, &w, &ed, &fae_hp).unwrap();
        assert!((iae.total - fae.total).abs() < 1e-15);
    }

    #[test]
    fn objective_invariant_under_feature_permutation() {
        let (x, w, ed) = random_instance(10, 7, 6, 3);
        let mut hp = Hyperparams::new(2);
        hp.d = 3;
        let base = fae_objective(&x, &w, &ed, &hp).unwrap();

        // Reordering features permutes X's columns, w, the encoder's rows,
        // and the decoder's columns (the reconstruction target order).
        let perm = [3usize, 0, 5, 1, 4, 2];
        let xp = x.select_cols(&perm).unwrap();
        let wp = FeatureWeights::new(perm.iter().map(|&j| w.as_slice()[j]).collect()).unwrap();
        let encp = ed.enc().select_rows(&perm).unwrap();
        let decp = ed.dec().select_cols(&perm).unwrap();
        let edp = EncoderDecoder::new(encp, decp).unwrap();
        let permuted = fae_objective(&xp, &wp, &edp, &hp).unwrap();
        assert!(
            (base.total - permuted.total).abs() < 1e-12,
            "{} vs {}",
            base.total,
            permuted.total
        );
    }

    #[test]
    fn project_nonneg_clamps_and_is_idempotent() {
        let mut w = FeatureWeights::new(vec![-1.0, 0.0, 2.0]).unwrap();
        w.project_nonneg();
        assert_eq!(w.as_slice(), &[0.0, 0.0, 2.0]);
        let before = w.clone();
        w.project_nonneg();
        assert_eq!(w, before);
    }

    #[test]
    fn gradients_vanish_at_identity_pipeline_minimum() {
        // Identity pipeline with k = m reconstructs exactly; with lambda2 = 0
        // the objective sits at a global minimum, so all gradients vanish.
        let (x, _, _) = random_instance(11, 8, 5, 5);
        let w = FeatureWeights::ones(5);
        let ed = EncoderDecoder::new(Matrix::identity(5), Matrix::identity(5)).unwrap();
        let mut hp = Hyperparams::new(5);
        hp.d = 5;
        hp.lambda2 = 0.0;
        let g = fae_gradients(&x, &w, &ed, &hp).unwrap();
        assert!(g.max_abs() <= 1e-10, "max grad {:.3e}", g.max_abs());
    }

    #[test]
    fn fae_gradients_match_finite_differences() {
        for seed in 0..5u64 {
            let (n, m, d, k) = (6, 7, 3, 3);
            let (x, w, ed) = random_instance(100 + seed, n, m, d);
            let mut hp = Hyperparams::new(k);
            hp.d = d;

            let sel = topk_mask(&w, k).unwrap();
            let mask = sel.mask_flags(m);
            let analytic = fae_gradients_frozen(&x, &w, &ed, &hp, &sel.indices).unwrap();
            let mut flat_analytic = analytic.w.clone();
            flat_analytic.extend_from_slice(analytic.enc.data());
            flat_analytic.extend_from_slice(analytic.dec.data());

            let point = flatten(&w, &ed);
            let numeric = finite_diff(
                |p| {
                    let (w2, ed2) = unflatten(p, m, d);
                    fae_objective_frozen(&x, &w2, &ed2, &hp, &mask)
                        .unwrap()
                        .total
                },
                &point,
                1e-5,
            );
            let err = max_rel_error(&flat_analytic, &numeric);
            assert!(err <= 1e-5, "seed {seed}: rel error {err:.3e}");
        }
    }

    #[test]
    fn zero_lambda_gradients_reduce_to_plain_ae() {
        // With lambda1 = lambda2 = 0 and w = 1, the enc/dec gradients are the
        // plain linear-AE gradients; check against a dedicated AE oracle.
        let (n, m, d) = (5, 6, 3);
        let (x, _, ed) = random_instance(55, n, m, d);
        let w = FeatureWeights::ones(m);
        let mut hp = Hyperparams::new(2);
        hp.d = d;
        hp.lambda1 = 0.0;
        hp.lambda2 = 0.0;
        let analytic = fae_gradients(&x, &w, &ed, &hp).unwrap();

        let mut point = ed.enc().data().to_vec();
        point.extend_from_slice(ed.dec().data());
        let numeric = finite_diff(
            |p| {
                let enc = Matrix::from_vec(m, d, p[..m * d].to_vec()).unwrap();
                let dec = Matrix::from_vec(d, m, p[m * d..].to_vec()).unwrap();
                let ed2 = EncoderDecoder::new(enc, dec).unwrap();
                ae_objective(&x, &ed2, LossNorm::Mean).unwrap()
            },
            &point,
            1e-5,
        );
        let mut flat = analytic.enc.data().to_vec();
        flat.extend_from_slice(analytic.dec.data());
        let err = max_rel_error(&flat, &numeric);
        assert!(err <= 1e-5, "rel error {err:.3e}");
    }

    #[test]
    fn iae_gradients_match_finite_differences() {
        let (n, m, d) = (6, 8, 4);
        let (x, w, ed) = random_instance(77, n, m, d);
        let mut hp = Hyperparams::new(3);
        hp.d = d;
        hp.lambda1 = 0.5;
        let analytic = iae_gradients(&x, &w, &ed, &hp).unwrap();
        let mut flat = analytic.w.clone();
        flat.extend_from_slice(analytic.enc.data());
        flat.extend_from_slice(analytic.dec.data());

        let numeric = finite_diff(
            |p| {
                let (w2, ed2) = unflatten(p, m, d);
                iae_objective(&x, &w2, &ed2, &hp).unwrap().total
            },
            &flatten(&w, &ed),
            1e-5,
        );
        let err = max_rel_error(&flat, &numeric);
        assert!(err <= 1e-5, "rel error {err:.3e}");
    }

    #[test]
    fn method_round_trips_through_strings() {
        for (s, m) in [
            ("ae", Method::Ae),
            ("iae", Method::Iae),
            ("fae", Method::Fae),
            ("hfae", Method::Hfae),
        ] {
            assert_eq!(s.parse::<Method>().unwrap(), m);
            assert_eq!(m.to_string(), s);
        }
        assert!("cae".parse::<Method>().is_err());
    }
}
