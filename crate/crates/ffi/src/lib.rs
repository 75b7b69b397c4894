//! C ABI for the fae feature-selection library.
//!
//! All heap-backed objects cross the boundary as opaque handles
//! (`FaeDataset`, `FaeModel`); every constructor has a matching `*_free`.
//! Functions return a [`FaeStatus`] code; on failure a thread-local message
//! is retrievable with [`fae_last_error_message`] until the next failing
//! call on the same thread. The generated header lands in
//! `include/fae.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fae_core::data::Dataset;
use fae_core::error::FaeError;
use fae_core::eval::{accuracy, fit_extra_trees, fit_linear_decoder, predict, recon_error, ExtraTreesParams};
use fae_core::hfae::HierarchyParams;
use fae_core::matrix::Matrix;
use fae_core::model::{BatchPolicy, Hyperparams, L1Mode, LossNorm, Method};
use fae_core::train::{train_model, CheckpointPolicy, TrainOptions, TrainedModel};
use fae_core::{load_checkpoint, load_csv, load_idx, save_checkpoint, LabelColumn};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericalError = 4,
    IoError = 5,
    ParseError = 6,
    Diverged = 7,
    Utf8Error = 8,
    InternalError = 9,
}

/// Model family selector for [`fae_train`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaeMethod {
    Ae = 0,
    Iae = 1,
    Fae = 2,
}

/// L1 normalization on the scoring weights.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaeL1Mode {
    Mean = 0,
    Sum = 1,
}

/// Training configuration; obtain defaults from
/// [`fae_train_config_default`] and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FaeTrainConfig {
    pub method: FaeMethod,
    /// Number of selected features.
    pub k: usize,
    /// Latent dimension; 0 means "use k".
    pub d: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Mini-batch size; 0 means full-batch.
    pub batch: usize,
    pub seed: u64,
    pub l1_mode: FaeL1Mode,
    /// Nonzero: return final-epoch parameters instead of the best
    /// validation checkpoint.
    pub use_final_epoch: i32,
}

/// Opaque dataset handle.
pub struct FaeDataset(Dataset);

/// Opaque trained-model handle.
pub struct FaeModel(TrainedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &FaeError) -> FaeStatus {
    match err {
        FaeError::DimensionMismatch { .. } => FaeStatus::DimensionMismatch,
        FaeError::InvalidArgument(_) => FaeStatus::InvalidArgument,
        FaeError::Numerical(_) => FaeStatus::NumericalError,
        FaeError::Diverged { .. } => FaeStatus::Diverged,
        FaeError::Parse { .. } => FaeStatus::ParseError,
        FaeError::Checkpoint(_) => FaeStatus::ParseError,
        FaeError::Io(_) => FaeStatus::IoError,
    }
}

fn fail(err: FaeError) -> FaeStatus {
    let status = status_of(&err);
    set_last_error(err.to_string());
    status
}

/// Runs `body` with panics converted to `InternalError`.
fn guarded(body: impl FnOnce() -> FaeStatus) -> FaeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            FaeStatus::InternalError
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, FaeStatus> {
    if ptr.is_null() {
        set_last_error("null string argument".into());
        return Err(FaeStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8".into());
        FaeStatus::Utf8Error
    })
}

macro_rules! non_null {
    ($ptr:expr, $what:literal) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => {
                set_last_error(concat!("null ", $what).into());
                return FaeStatus::NullPointer;
            }
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fae_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message of the last error on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fae_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Default configuration for `k` selected features: `d = k`, `lambda1 = 2`,
/// `lambda2 = 0.1`, `lr = 0.001`, 1000 full-batch epochs, mean L1, best
/// validation checkpoint.
#[no_mangle]
pub extern "C" fn fae_train_config_default(k: usize) -> FaeTrainConfig {
    FaeTrainConfig {
        method: FaeMethod::Fae,
        k,
        d: 0,
        lambda1: 2.0,
        lambda2: 0.1,
        lr: 0.001,
        epochs: 1000,
        batch: 0,
        seed: 0,
        l1_mode: FaeL1Mode::Mean,
        use_final_epoch: 0,
    }
}

/// Builds a dataset from a dense row-major `rows x cols` array. `labels`
/// may be NULL; when given it must hold `rows` entries. The data is copied.
///
/// # Safety
/// `values` must point to `rows * cols` readable doubles and `labels`, if
/// non-NULL, to `rows` readable uint32 values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fae_dataset_from_dense(
    rows: usize,
    cols: usize,
    values: *const f64,
    labels: *const u32,
    out: *mut *mut FaeDataset,
) -> FaeStatus {
    guarded(|| {
        if out.is_null() || values.is_null() {
            set_last_error("null values or out pointer".into());
            return FaeStatus::NullPointer;
        }
        let data = unsafe { std::slice::from_raw_parts(values, rows * cols) }.to_vec();
        let x = match Matrix::from_vec(rows, cols, data) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        let mut ds = Dataset::from_matrix(x, "ffi:dense");
        if !labels.is_null() {
            ds.labels = Some(unsafe { std::slice::from_raw_parts(labels, rows) }.to_vec());
        }
        unsafe { *out = Box::into_raw(Box::new(FaeDataset(ds))) };
        FaeStatus::Ok
    })
}

/// Loads a delimited numeric file. `label_column` is a 0-based column
/// index, or -1 for no labels.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fae_dataset_load_csv(
    path: *const c_char,
    has_header: i32,
    label_column: i64,
    out: *mut *mut FaeDataset,
) -> FaeStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        let label = if label_column < 0 {
            LabelColumn::None
        } else {
            LabelColumn::Index(label_column as usize)
        };
        match load_csv(path, has_header != 0, &label) {
            Ok(ds) => {
                unsafe { *out = Box::into_raw(Box::new(FaeDataset(ds))) };
                FaeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Loads IDX images (and labels when `labels_path` is non-NULL); `.gz`
/// files are detected by magic bytes.
///
/// # Safety
/// `images_path` must be a valid NUL-terminated string; `labels_path` may
/// be NULL; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fae_dataset_load_idx(
    images_path: *const c_char,
    labels_path: *const c_char,
    out: *mut *mut FaeDataset,
) -> FaeStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let images = match unsafe { cstr_arg(images_path) } {
            Ok(p) => p.to_string(),
            Err(s) => return s,
        };
        let labels = if labels_path.is_null() {
            None
        } else {
            match unsafe { cstr_arg(labels_path) } {
                Ok(p) => Some(p.to_string()),
                Err(s) => return s,
            }
        };
        match load_idx(&images, labels.as_deref().map(Path::new)) {
            Ok(ds) => {
                unsafe { *out = Box::into_raw(Box::new(FaeDataset(ds))) };
                FaeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn fae_dataset_rows(ds: *const FaeDataset) -> usize {
    unsafe { ds.as_ref() }.map_or(0, |d| d.0.n())
}

/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn fae_dataset_cols(ds: *const FaeDataset) -> usize {
    unsafe { ds.as_ref() }.map_or(0, |d| d.0.m())
}

/// 1 when the dataset carries labels.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn fae_dataset_has_labels(ds: *const FaeDataset) -> i32 {
    unsafe { ds.as_ref() }.map_or(0, |d| i32::from(d.0.labels.is_some()))
}

/// # Safety
/// `ds` must be a pointer from a `fae_dataset_*` constructor, not yet
/// freed; NULL is allowed.
#[no_mangle]
pub unsafe extern "C" fn fae_dataset_free(ds: *mut FaeDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

fn hyperparams_of(cfg: &FaeTrainConfig) -> Hyperparams {
    Hyperparams {
        k: cfg.k,
        d: if cfg.d == 0 { cfg.k } else { cfg.d },
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        lr: cfg.lr,
        epochs: cfg.epochs,
        batch: if cfg.batch == 0 {
            BatchPolicy::Full
        } else {
            BatchPolicy::Mini(cfg.batch)
        },
        seed: cfg.seed,
        l1_mode: match cfg.l1_mode {
            FaeL1Mode::Mean => L1Mode::Mean,
            FaeL1Mode::Sum => L1Mode::Sum,
        },
        loss_norm: LossNorm::Mean,
    }
}

fn options_of(cfg: &FaeTrainConfig) -> TrainOptions {
    TrainOptions {
        checkpoint: if cfg.use_final_epoch != 0 {
            CheckpointPolicy::FinalEpoch
        } else {
            CheckpointPolicy::BestValidation
        },
    }
}

fn run_training(
    train: &FaeDataset,
    val: Option<&FaeDataset>,
    method: Method,
    cfg: &FaeTrainConfig,
    hier: Option<&HierarchyParams>,
    out: *mut *mut FaeModel,
) -> FaeStatus {
    let hp = hyperparams_of(cfg);
    let val_x = val.map_or(&train.0.x, |v| &v.0.x);
    match train_model(method, &train.0.x, val_x, &hp, hier, &options_of(cfg)) {
        Ok(outcome) => {
            unsafe { *out = Box::into_raw(Box::new(FaeModel(outcome.model))) };
            FaeStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Trains AE, IAE, or FAE on `train`, checkpointing against `val` (`val`
/// may be NULL to validate on the training data).
///
/// # Safety
/// `train` must be a live dataset handle, `val` a live handle or NULL,
/// `cfg` readable, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fae_train(
    train: *const FaeDataset,
    val: *const FaeDataset,
    cfg: *const FaeTrainConfig,
    out: *mut *mut FaeModel,
) -> FaeStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let train = non_null!(train, "train dataset");
        let cfg = non_null!(cfg, "config");
        let val = unsafe { val.as_ref() };
        let method = match cfg.method {
            FaeMethod::Ae => Method::Ae,
            FaeMethod::Iae => Method::Iae,
            FaeMethod::Fae => Method::Fae,
        };
        run_training(train, val, method, cfg, None, out)
    })
}

/// Trains an h-group hierarchical FAE. `lambdas` holds `h + 1` values:
/// the L1 coefficient first, then one reconstruction coefficient per
/// group. `cfg.method`, `cfg.lambda1`, and `cfg.lambda2` are ignored.
///
/// # Safety
/// As [`fae_train`]; additionally `lambdas` must point to `h + 1` readable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn fae_train_hfae(
    train: *const FaeDataset,
    val: *const FaeDataset,
    cfg: *const FaeTrainConfig,
    h: usize,
    lambdas: *const f64,
    out: *mut *mut FaeModel,
) -> FaeStatus {
    guarded(|| {
        if out.is_null() || lambdas.is_null() {
            set_last_error("null lambdas or out pointer".into());
            return FaeStatus::NullPointer;
        }
        let train = non_null!(train, "train dataset");
        let cfg = non_null!(cfg, "config");
        if h == 0 {
            set_last_error("h must be >= 1".into());
            return FaeStatus::InvalidArgument;
        }
        let val = unsafe { val.as_ref() };
        let ls = unsafe { std::slice::from_raw_parts(lambdas, h + 1) };
        let hier = HierarchyParams {
            h,
            lambda0: ls[0],
            lambdas: ls[1..].to_vec(),
        };
        run_training(train, val, Method::Hfae, cfg, Some(&hier), out)
    })
}

/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fae_model_num_features(model: *const FaeModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.weights.len())
}

/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fae_model_k(model: *const FaeModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.hyperparams.k)
}

/// Number of hierarchy groups (1 for non-hierarchical models).
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fae_model_num_groups(model: *const FaeModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| {
        m.0.hierarchy.as_ref().map_or(1, |h| h.h)
    })
}

/// Length of the full selection (`k`, or `h*k` for hierarchies).
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fae_model_selection_len(model: *const FaeModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| {
        m.0.hierarchy.as_ref().map_or(m.0.hyperparams.k, |h| h.h * m.0.hyperparams.k)
    })
}

/// Writes the selected feature indices (descending importance; for
/// hierarchies the groups concatenate in order) into `out`, which must
/// hold `fae_model_selection_len` entries.
///
/// # Safety
/// `model` must be a live model handle and `out` writable for `len`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn fae_model_selected_indices(
    model: *const FaeModel,
    out: *mut usize,
    len: usize,
) -> FaeStatus {
    guarded(|| {
        let m = non_null!(model, "model");
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let sel = match m.0.selection() {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        if len < sel.indices.len() {
            set_last_error(format!(
                "buffer of {len} for {} selected indices",
                sel.indices.len()
            ));
            return FaeStatus::InvalidArgument;
        }
        let dst = unsafe { std::slice::from_raw_parts_mut(out, sel.indices.len()) };
        dst.copy_from_slice(&sel.indices);
        FaeStatus::Ok
    })
}

/// Writes group `group` (0-based) of a hierarchical model into `out`
/// (`k` entries).
///
/// # Safety
/// As [`fae_model_selected_indices`].
#[no_mangle]
pub unsafe extern "C" fn fae_model_group_indices(
    model: *const FaeModel,
    group: usize,
    out: *mut usize,
    len: usize,
) -> FaeStatus {
    guarded(|| {
        let m = non_null!(model, "model");
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let groups = match m.0.hierarchical_selection() {
            Ok(Some(g)) => g,
            Ok(None) => {
                set_last_error("model has no hierarchy".into());
                return FaeStatus::InvalidArgument;
            }
            Err(e) => return fail(e),
        };
        let Some(g) = groups.groups.get(group) else {
            set_last_error(format!(
                "group {group} out of range for {} groups",
                groups.groups.len()
            ));
            return FaeStatus::InvalidArgument;
        };
        if len < g.indices.len() {
            set_last_error(format!("buffer of {len} for {} indices", g.indices.len()));
            return FaeStatus::InvalidArgument;
        }
        let dst = unsafe { std::slice::from_raw_parts_mut(out, g.indices.len()) };
        dst.copy_from_slice(&g.indices);
        FaeStatus::Ok
    })
}

/// Copies the per-feature importance scores into `out` (`m` entries).
///
/// # Safety
/// `model` must be a live model handle and `out` writable for `len`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn fae_model_feature_weights(
    model: *const FaeModel,
    out: *mut f64,
    len: usize,
) -> FaeStatus {
    guarded(|| {
        let m = non_null!(model, "model");
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let w = m.0.weights.as_slice();
        if len < w.len() {
            set_last_error(format!("buffer of {len} for {} weights", w.len()));
            return FaeStatus::InvalidArgument;
        }
        let dst = unsafe { std::slice::from_raw_parts_mut(out, w.len()) };
        dst.copy_from_slice(w);
        FaeStatus::Ok
    })
}

/// Saves the model as a versioned JSON checkpoint.
///
/// # Safety
/// `model` must be a live model handle and `path` a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn fae_model_save(
    model: *const FaeModel,
    path: *const c_char,
) -> FaeStatus {
    guarded(|| {
        let m = non_null!(model, "model");
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_checkpoint(path, &m.0) {
            Ok(()) => FaeStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Loads a checkpoint written by [`fae_model_save`] (or the CLI).
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fae_model_load(
    path: *const c_char,
    out: *mut *mut FaeModel,
) -> FaeStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_checkpoint(path) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(FaeModel(model))) };
                FaeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must be a pointer from a training or load call, not yet freed;
/// NULL is allowed.
#[no_mangle]
pub unsafe extern "C" fn fae_model_free(model: *mut FaeModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Linear-reconstruction MSE of the model's selection: a least-squares
/// decoder is fitted on `train` and evaluated on `test`.
///
/// # Safety
/// `model`, `train`, and `test` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fae_eval_reconstruction(
    model: *const FaeModel,
    train: *const FaeDataset,
    test: *const FaeDataset,
    out: *mut f64,
) -> FaeStatus {
    guarded(|| {
        let m = non_null!(model, "model");
        let train = non_null!(train, "train dataset");
        let test = non_null!(test, "test dataset");
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let result = m.0.selection().and_then(|sel| {
            let dec = fit_linear_decoder(&train.0.x, &sel)?;
            recon_error(&test.0.x, &sel, &dec)
        });
        match result {
            Ok(v) => {
                unsafe { *out = v };
                FaeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Extra-trees classification accuracy on the model's selected features;
/// both datasets must carry labels.
///
/// # Safety
/// As [`fae_eval_reconstruction`].
#[no_mangle]
pub unsafe extern "C" fn fae_eval_accuracy(
    model: *const FaeModel,
    train: *const FaeDataset,
    test: *const FaeDataset,
    n_trees: usize,
    tree_seed: u64,
    out: *mut f64,
) -> FaeStatus {
    guarded(|| {
        let m = non_null!(model, "model");
        let train = non_null!(train, "train dataset");
        let test = non_null!(test, "test dataset");
        if out.is_null() {
            set_last_error("null out pointer".into());
            return FaeStatus::NullPointer;
        }
        let (Some(train_y), Some(test_y)) = (&train.0.labels, &test.0.labels) else {
            set_last_error("accuracy evaluation needs labeled datasets".into());
            return FaeStatus::InvalidArgument;
        };
        let result = m.0.selection().and_then(|sel| {
            let mut params = ExtraTreesParams::new(tree_seed);
            params.n_trees = n_trees;
            let tr = train.0.x.select_cols(&sel.indices)?;
            let te = test.0.x.select_cols(&sel.indices)?;
            let forest = fit_extra_trees(&tr, train_y, &params)?;
            accuracy(&predict(&forest, &te)?, test_y)
        });
        match result {
            Ok(v) => {
                unsafe { *out = v };
                FaeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
