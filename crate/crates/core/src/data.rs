//! Dataset ingestion (CSV and IDX), train-fitted normalization, seeded
//! splitting, mean imputation, and a block-structured synthetic generator
//! with known ground truth.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FaeError, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// Where a dataset came from and what was done to it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub transforms: Vec<String>,
}

/// A sample-by-feature matrix with optional labels and feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Option<Vec<u32>>,
    pub feature_names: Option<Vec<String>>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn from_matrix(x: Matrix, source: impl Into<String>) -> Self {
        Dataset {
            x,
            labels: None,
            feature_names: None,
            provenance: Provenance {
                source: source.into(),
                transforms: vec![],
            },
        }
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Number of features.
    pub fn m(&self) -> usize {
        self.x.cols()
    }

    pub fn has_missing(&self) -> bool {
        self.x.data().iter().any(|v| v.is_nan())
    }

    fn with_rows(&self, idx: &[usize], note: String) -> Result<Dataset> {
        let mut out = Dataset {
            x: self.x.select_rows(idx)?,
            labels: match &self.labels {
                Some(l) => Some(idx.iter().map(|&i| l[i]).collect()),
                None => None,
            },
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        };
        out.provenance.transforms.push(note);
        Ok(out)
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelColumn {
    None,
    Index(usize),
    Name(String),
}

/// Parses a delimited numeric file. Header row is optional; empty cells are
/// read as missing values (NaN) to be imputed later; any other non-numeric
/// cell is a parse error. Labels are extracted from the named or indexed
/// column and must be non-negative integers.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| FaeError::Parse {
            path: path_str.clone(),
            line: 0,
            message: e.to_string(),
        })?;

    let header: Option<Vec<String>> = if has_header {
        Some(
            rdr.headers()
                .map_err(|e| FaeError::Parse {
                    path: path_str.clone(),
                    line: 1,
                    message: e.to_string(),
                })?
                .iter()
                .map(String::from)
                .collect(),
        )
    } else {
        None
    };

    let label_idx: Option<usize> = match label {
        LabelColumn::None => None,
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Name(name) => {
            let header = header.as_ref().ok_or_else(|| {
                FaeError::InvalidArgument(format!(
                    "label column '{name}' requires a header row"
                ))
            })?;
            Some(header.iter().position(|h| h == name).ok_or_else(|| {
                FaeError::InvalidArgument(format!("label column '{name}' not found in header"))
            })?)
        }
    };

    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (ri, record) in rdr.records().enumerate() {
        let line = ri + 1 + usize::from(has_header);
        let record = record.map_err(|e| FaeError::Parse {
            path: path_str.clone(),
            line,
            message: e.to_string(),
        })?;
        let w = record.len();
        match width {
            None => {
                if let Some(li) = label_idx {
                    if li >= w {
                        return Err(FaeError::InvalidArgument(format!(
                            "label column index {li} out of range for {w} columns"
                        )));
                    }
                }
                width = Some(w);
            }
            Some(prev) if prev != w => {
                return Err(FaeError::Parse {
                    path: path_str.clone(),
                    line,
                    message: format!("ragged row: {w} fields, expected {prev}"),
                });
            }
            _ => {}
        }
        for (ci, cell) in record.iter().enumerate() {
            if Some(ci) == label_idx {
                let lab: u32 = cell.trim().parse().map_err(|_| FaeError::Parse {
                    path: path_str.clone(),
                    line,
                    message: format!("label '{cell}' is not a non-negative integer"),
                })?;
                labels.push(lab);
            } else {
                let cell = cell.trim();
                if cell.is_empty() {
                    values.push(f64::NAN);
                } else {
                    let v: f64 = cell.parse().map_err(|_| FaeError::Parse {
                        path: path_str.clone(),
                        line,
                        message: format!("cell '{cell}' (column {ci}) is not numeric"),
                    })?;
                    values.push(v);
                }
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(FaeError::Parse {
            path: path_str,
            line: 0,
            message: "empty file".into(),
        });
    }
    let m = width.unwrap() - usize::from(label_idx.is_some());
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, name)| name)
            .collect()
    });
    let has_missing = values.iter().any(|v| v.is_nan());
    let mut provenance = Provenance {
        source: path_str,
        transforms: vec![],
    };
    if has_missing {
        provenance
            .transforms
            .push("missing cells read as NaN (impute before training)".into());
    }
    Ok(Dataset {
        x: Matrix::from_vec(rows, m, values)?,
        labels: if label_idx.is_some() { Some(labels) } else { None },
        feature_names,
        provenance,
    })
}

/// Writes a dataset as CSV. A header row is emitted when feature names are
/// present; labels, if any, go to a trailing `label` column. Floats use the
/// shortest round-trip representation, so write -> read is lossless.
pub fn write_csv(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path.as_ref())
        .map_err(|e| FaeError::Checkpoint(format!("csv write: {e}")))?;
    if let Some(names) = &d.feature_names {
        let mut header = names.clone();
        if d.labels.is_some() {
            header.push("label".into());
        }
        wtr.write_record(&header)
            .map_err(|e| FaeError::Checkpoint(format!("csv write: {e}")))?;
    }
    for i in 0..d.n() {
        let mut row: Vec<String> = d.x.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(labels) = &d.labels {
            row.push(labels[i].to_string());
        }
        wtr.write_record(&row)
            .map_err(|e| FaeError::Checkpoint(format!("csv write: {e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| FaeError::Parse {
                path: path.display().to_string(),
                line: 0,
                message: format!("gzip: {e}"),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> ByteCursor<'a> {
    fn u32_be(&mut self) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(FaeError::Parse {
                path: self.path.into(),
                line: 0,
                message: format!("truncated header at byte {}", self.pos),
            });
        }
        let b = &self.bytes[self.pos..self.pos + 4];
        self.pos += 4;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(FaeError::Parse {
                path: self.path.into(),
                line: 0,
                message: format!(
                    "truncated payload: need {len} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }
}

/// Loads an IDX image file (and optionally its label file), both possibly
/// gzipped. Images flatten row-major to `rows*cols` features scaled to
/// `[0, 1]` by 255.
pub fn load_idx(images: impl AsRef<Path>, labels: Option<&Path>) -> Result<Dataset> {
    let images = images.as_ref();
    let img_path = images.display().to_string();
    let bytes = read_file_maybe_gz(images)?;
    let mut cur = ByteCursor {
        bytes: &bytes,
        pos: 0,
        path: &img_path,
    };
    let magic = cur.u32_be()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(FaeError::Parse {
            path: img_path,
            line: 0,
            message: format!("bad images magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        });
    }
    let n = cur.u32_be()? as usize;
    let rows = cur.u32_be()? as usize;
    let cols = cur.u32_be()? as usize;
    let m = rows * cols;
    let px = cur.take(n * m)?;
    let values: Vec<f64> = px.iter().map(|&b| b as f64 / 255.0).collect();

    let labels = match labels {
        None => None,
        Some(lp) => {
            let lab_path = lp.display().to_string();
            let lbytes = read_file_maybe_gz(lp)?;
            let mut lcur = ByteCursor {
                bytes: &lbytes,
                pos: 0,
                path: &lab_path,
            };
            let lmagic = lcur.u32_be()?;
            if lmagic != IDX_LABELS_MAGIC {
                return Err(FaeError::Parse {
                    path: lab_path,
                    line: 0,
                    message: format!(
                        "bad labels magic 0x{lmagic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
                    ),
                });
            }
            let ln = lcur.u32_be()? as usize;
            if ln != n {
                return Err(FaeError::Parse {
                    path: lab_path,
                    line: 0,
                    message: format!("{ln} labels for {n} images"),
                });
            }
            Some(lcur.take(ln)?.iter().map(|&b| b as u32).collect())
        }
    };

    Ok(Dataset {
        x: Matrix::from_vec(n, m, values)?,
        labels,
        feature_names: None,
        provenance: Provenance {
            source: img_path,
            transforms: vec!["pixels scaled to [0,1] by 255".into()],
        },
    })
}

/// Split ratios (summing to 1) and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.72,
            val: 0.08,
            test: 0.20,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..SplitSpec::default()
        }
    }
}

/// Seeded shuffle followed by a contiguous partition. Validation and test
/// sizes are floored; the remainder goes to train.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    if !(spec.train > 0.0 && spec.val > 0.0 && spec.test > 0.0) {
        return Err(FaeError::InvalidArgument(
            "split ratios must all be positive".into(),
        ));
    }
    let sum = spec.train + spec.val + spec.test;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(FaeError::InvalidArgument(format!(
            "split ratios must sum to 1, got {sum}"
        )));
    }
    let n = d.n();
    let n_val = (n as f64 * spec.val).floor() as usize;
    let n_test = (n as f64 * spec.test).floor() as usize;
    let n_train = n - n_val - n_test;
    if n_val == 0 || n_test == 0 || n_train == 0 {
        return Err(FaeError::InvalidArgument(format!(
            "{n} samples is too small for a {}/{}/{} split",
            spec.train, spec.val, spec.test
        )));
    }
    split_counts(d, n_train, n_val, n_test, spec.seed)
}

/// Seeded shuffle, then the first `n_train + n_val + n_test` shuffled rows
/// are partitioned contiguously (rows beyond the total are dropped, which
/// is how fixed-size subsample protocols are expressed).
pub fn split_counts(
    d: &Dataset,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let total = n_train + n_val + n_test;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(FaeError::InvalidArgument(
            "every split must be non-empty".into(),
        ));
    }
    if total > d.n() {
        return Err(FaeError::InvalidArgument(format!(
            "split sizes {n_train}+{n_val}+{n_test} exceed {} samples",
            d.n()
        )));
    }
    let mut idx: Vec<usize> = (0..d.n()).collect();
    SeededRng::new(seed).shuffle(&mut idx);
    let train = d.with_rows(
        &idx[..n_train],
        format!("split train {n_train}/{} (seed {seed})", d.n()),
    )?;
    let val = d.with_rows(
        &idx[n_train..n_train + n_val],
        format!("split val {n_val}/{} (seed {seed})", d.n()),
    )?;
    let test = d.with_rows(
        &idx[n_train + n_val..total],
        format!("split test {n_test}/{} (seed {seed})", d.n()),
    )?;
    Ok((train, val, test))
}

/// Normalization flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    MinMax,
    ZScore,
}

/// Per-feature statistics fitted on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub kind: ScalerKind,
    /// (min, max) for min-max, (mean, std) for z-score.
    stats: Vec<(f64, f64)>,
}

impl Scaler {
    pub fn fit(kind: ScalerKind, train: &Matrix) -> Scaler {
        let m = train.cols();
        let n = train.rows() as f64;
        let mut stats = Vec::with_capacity(m);
        for j in 0..m {
            match kind {
                ScalerKind::MinMax => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for i in 0..train.rows() {
                        let v = train.get(i, j);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    stats.push((lo, hi));
                }
                ScalerKind::ZScore => {
                    let mut mean = 0.0;
                    for i in 0..train.rows() {
                        mean += train.get(i, j);
                    }
                    mean /= n;
                    let mut var = 0.0;
                    for i in 0..train.rows() {
                        let dv = train.get(i, j) - mean;
                        var += dv * dv;
                    }
                    stats.push((mean, (var / n).sqrt()));
                }
            }
        }
        Scaler { kind, stats }
    }

    /// Applies the fitted transform; constant features map to 0.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.stats.len() {
            return Err(FaeError::dim(
                "Scaler::transform",
                format!("{} features, scaler fitted on {}", x.cols(), self.stats.len()),
            ));
        }
        let mut out = x.clone();
        for i in 0..x.rows() {
            let row = out.row_mut(i);
            for (v, &(a, b)) in row.iter_mut().zip(&self.stats) {
                *v = match self.kind {
                    ScalerKind::MinMax => {
                        let range = b - a;
                        if range > 0.0 {
                            (*v - a) / range
                        } else {
                            0.0
                        }
                    }
                    ScalerKind::ZScore => {
                        if b > 0.0 {
                            (*v - a) / b
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
        Ok(out)
    }

    pub fn describe(&self) -> String {
        match self.kind {
            ScalerKind::MinMax => "minmax scaled (train-fitted)".into(),
            ScalerKind::ZScore => "z-score scaled (train-fitted)".into(),
        }
    }

    /// Fits on the first dataset's matrix and transforms all three in
    /// place, recording the transform in each provenance.
    pub fn fit_transform_splits(
        kind: ScalerKind,
        train: &mut Dataset,
        val: &mut Dataset,
        test: &mut Dataset,
    ) -> Result<Scaler> {
        let scaler = Scaler::fit(kind, &train.x);
        for part in [&mut *train, &mut *val, &mut *test] {
            part.x = scaler.transform(&part.x)?;
            part.provenance.transforms.push(scaler.describe());
        }
        Ok(scaler)
    }
}

/// Min-max normalizes a standalone dataset against its own statistics.
pub fn normalize_minmax(d: &Dataset) -> Result<Dataset> {
    let scaler = Scaler::fit(ScalerKind::MinMax, &d.x);
    let mut out = d.clone();
    out.x = scaler.transform(&d.x)?;
    out.provenance.transforms.push("minmax scaled (self-fitted)".into());
    Ok(out)
}

/// Replaces missing values (NaN) with per-feature means fitted on the
/// training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    means: Vec<f64>,
}

impl Imputer {
    pub fn fit(train: &Matrix) -> Imputer {
        let m = train.cols();
        let mut means = vec![0.0; m];
        for j in 0..m {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in 0..train.rows() {
                let v = train.get(i, j);
                if !v.is_nan() {
                    sum += v;
                    count += 1;
                }
            }
            means[j] = if count > 0 { sum / count as f64 } else { 0.0 };
        }
        Imputer { means }
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(FaeError::dim(
                "Imputer::transform",
                format!("{} features, imputer fitted on {}", x.cols(), self.means.len()),
            ));
        }
        let mut out = x.clone();
        for i in 0..x.rows() {
            let row = out.row_mut(i);
            for (v, &mean) in row.iter_mut().zip(&self.means) {
                if v.is_nan() {
                    *v = mean;
                }
            }
        }
        Ok(out)
    }

    /// Fits on train and fills all three splits, recording provenance.
    pub fn fit_transform_splits(
        train: &mut Dataset,
        val: &mut Dataset,
        test: &mut Dataset,
    ) -> Result<Imputer> {
        let imp = Imputer::fit(&train.x);
        for part in [&mut *train, &mut *val, &mut *test] {
            part.x = imp.transform(&part.x)?;
            part.provenance
                .transforms
                .push("missing values imputed with train-split feature means".into());
        }
        Ok(imp)
    }
}

/// Synthetic data with known selection ground truth: features come in
/// `blocks` groups that share one uniform latent signal per sample plus
/// i.i.d. Gaussian noise, so the optimal diverse selection takes exactly
/// one feature per block. Features are block-major: feature `j` belongs to
/// block `j / per_block`.
pub fn synth_blocks(
    n: usize,
    blocks: usize,
    per_block: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || blocks == 0 || per_block == 0 {
        return Err(FaeError::InvalidArgument(
            "synth_blocks needs positive n, blocks, per_block".into(),
        ));
    }
    if noise_std < 0.0 {
        return Err(FaeError::InvalidArgument(
            "noise_std must be non-negative".into(),
        ));
    }
    let m = blocks * per_block;
    let mut rng = SeededRng::new(seed);
    let mut data = vec![0.0; n * m];
    for i in 0..n {
        for b in 0..blocks {
            let latent = rng.uniform01();
            for p in 0..per_block {
                let noise = if noise_std > 0.0 {
                    rng.normal(noise_std)
                } else {
                    0.0
                };
                data[i * m + b * per_block + p] = latent + noise;
            }
        }
    }
    Ok(Dataset {
        x: Matrix::from_vec(n, m, data)?,
        labels: None,
        feature_names: None,
        provenance: Provenance {
            source: format!(
                "synth_blocks(n={n}, blocks={blocks}, per_block={per_block}, noise_std={noise_std}, seed={seed})"
            ),
            transforms: vec![],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmpfile(content: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn csv_basic_parse() {
        let f = tmpfile(b"1,2\n3,4\n");
        let d = load_csv(f.path(), false, &LabelColumn::None).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.m(), 2);
        assert_eq!(d.x.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(d.labels.is_none());
    }

    #[test]
    fn csv_label_extraction_drops_column() {
        let f = tmpfile(b"a,b,label\n1,2,0\n3,4,1\n");
        let d = load_csv(f.path(), true, &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(d.m(), 2);
        assert_eq!(d.labels, Some(vec![0, 1]));
        assert_eq!(d.feature_names, Some(vec!["a".into(), "b".into()]));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let f = tmpfile(b"1,2\n3,oops\n");
        match load_csv(f.path(), false, &LabelColumn::None) {
            Err(FaeError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let ragged = tmpfile(b"1,2\n3\n");
        assert!(matches!(
            load_csv(ragged.path(), false, &LabelColumn::None),
            Err(FaeError::Parse { .. })
        ));
        let empty = tmpfile(b"");
        assert!(matches!(
            load_csv(empty.path(), false, &LabelColumn::None),
            Err(FaeError::Parse { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let mut rng = SeededRng::new(33);
        let x = Matrix::from_vec(
            7,
            4,
            (0..28).map(|_| rng.uniform(-5.0, 5.0)).collect(),
        )
        .unwrap();
        let mut d = Dataset::from_matrix(x, "test");
        d.labels = Some((0..7).map(|i| (i % 3) as u32).collect());
        d.feature_names = Some((0..4).map(|j| format!("f{j}")).collect());

        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(f.path(), &d).unwrap();
        let back = load_csv(f.path(), true, &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(back.x.data(), d.x.data());
        assert_eq!(back.labels, d.labels);
        assert_eq!(back.feature_names, d.feature_names);
    }

    fn idx_bytes(images: &[[u8; 4]], rows: u32, cols: u32) -> Vec<u8> {
        // tiny 2x2 images for header tests
        let mut b = vec![];
        b.extend(0x0803u32.to_be_bytes());
        b.extend((images.len() as u32).to_be_bytes());
        b.extend(rows.to_be_bytes());
        b.extend(cols.to_be_bytes());
        for img in images {
            b.extend(img);
        }
        b
    }

    #[test]
    fn idx_zero_image_and_dims() {
        let mut b = vec![];
        b.extend(0x0803u32.to_be_bytes());
        b.extend(1u32.to_be_bytes());
        b.extend(28u32.to_be_bytes());
        b.extend(28u32.to_be_bytes());
        b.extend(std::iter::repeat(0u8).take(784));
        let f = tmpfile(&b);
        let d = load_idx(f.path(), None).unwrap();
        assert_eq!(d.n(), 1);
        assert_eq!(d.m(), 784);
        assert!(d.x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn idx_pixel_positions_match_reference_decoder() {
        // Feature index of pixel (r, c) must be 28r + c; verified against an
        // independent byte-offset decoder on 10 deterministic images.
        let mut b = vec![];
        b.extend(0x0803u32.to_be_bytes());
        b.extend(10u32.to_be_bytes());
        b.extend(28u32.to_be_bytes());
        b.extend(28u32.to_be_bytes());
        let mut payload = Vec::with_capacity(10 * 784);
        for i in 0..10u32 {
            for p in 0..784u32 {
                payload.push(((i * 7 + p * 13) % 251) as u8);
            }
        }
        b.extend(&payload);
        let f = tmpfile(&b);
        let d = load_idx(f.path(), None).unwrap();
        for i in 0..10 {
            for r in 0..28 {
                for c in 0..28 {
                    // independent decoder: direct byte offset into payload
                    let byte = payload[i * 784 + r * 28 + c];
                    assert_eq!(d.x.get(i, 28 * r + c), byte as f64 / 255.0);
                }
            }
        }
    }

    #[test]
    fn idx_rejects_bad_magic_and_mismatched_labels() {
        let imgs = idx_bytes(&[[0, 1, 2, 3]], 2, 2);
        let mut bad = imgs.clone();
        bad[3] = 0x01;
        let f = tmpfile(&bad);
        assert!(matches!(
            load_idx(f.path(), None),
            Err(FaeError::Parse { .. })
        ));

        let fi = tmpfile(&imgs);
        let mut lab = vec![];
        lab.extend(0x0801u32.to_be_bytes());
        lab.extend(2u32.to_be_bytes()); // 2 labels for 1 image
        lab.extend([0u8, 1]);
        let fl = tmpfile(&lab);
        assert!(matches!(
            load_idx(fi.path(), Some(fl.path())),
            Err(FaeError::Parse { .. })
        ));
    }

    #[test]
    fn idx_gzip_round_trip() {
        let imgs = idx_bytes(&[[10, 20, 30, 40], [50, 60, 70, 80]], 2, 2);
        let mut enc =
            flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&imgs).unwrap();
        let gz = enc.finish().unwrap();
        let f = tmpfile(&gz);
        let d = load_idx(f.path(), None).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.x.get(1, 3), 80.0 / 255.0);
    }

    #[test]
    fn split_default_ratio_sizes() {
        let x = Matrix::from_vec(100, 2, (0..200).map(|v| v as f64).collect()).unwrap();
        let d = Dataset::from_matrix(x, "t");
        let (tr, va, te) = split(&d, &SplitSpec::default()).unwrap();
        assert_eq!((tr.n(), va.n(), te.n()), (72, 8, 20));
    }

    #[test]
    fn split_is_seed_deterministic_and_a_partition() {
        let n = 57;
        let x = Matrix::from_vec(n, 1, (0..n).map(|v| v as f64).collect()).unwrap();
        let d = Dataset::from_matrix(x, "t");
        let spec = SplitSpec::with_seed(9);
        let (a1, b1, c1) = split(&d, &spec).unwrap();
        let (a2, b2, c2) = split(&d, &spec).unwrap();
        assert_eq!(a1.x.data(), a2.x.data());
        assert_eq!(b1.x.data(), b2.x.data());
        assert_eq!(c1.x.data(), c2.x.data());

        let mut seen: Vec<usize> = a1
            .x
            .data()
            .iter()
            .chain(b1.x.data())
            .chain(c1.x.data())
            .map(|&v| v as usize)
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_tiny_datasets() {
        let x = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let d = Dataset::from_matrix(x, "t");
        assert!(split(&d, &SplitSpec::default()).is_err());
    }

    #[test]
    fn minmax_normalization_examples() {
        let x = Matrix::from_vec(3, 2, vec![0.0, 7.0, 5.0, 7.0, 10.0, 7.0]).unwrap();
        let scaler = Scaler::fit(ScalerKind::MinMax, &x);
        let y = scaler.transform(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.5, 0.0, 1.0, 0.0]); // constant -> 0
    }

    #[test]
    fn zscore_standardizes_and_zeroes_constants() {
        let x = Matrix::from_vec(4, 2, vec![1.0, 3.0, 2.0, 3.0, 3.0, 3.0, 4.0, 3.0]).unwrap();
        let scaler = Scaler::fit(ScalerKind::ZScore, &x);
        let y = scaler.transform(&x).unwrap();
        let col: Vec<f64> = (0..4).map(|i| y.get(i, 0)).collect();
        let mean: f64 = col.iter().sum::<f64>() / 4.0;
        let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert!((0..4).all(|i| y.get(i, 1) == 0.0));
    }

    #[test]
    fn train_fitted_scaler_covers_unit_interval_on_train() {
        let mut rng = SeededRng::new(5);
        let x = Matrix::from_vec(
            20,
            3,
            (0..60).map(|_| rng.uniform(-4.0, 9.0)).collect(),
        )
        .unwrap();
        let scaler = Scaler::fit(ScalerKind::MinMax, &x);
        let y = scaler.transform(&x).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..20).map(|i| y.get(i, j)).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_never_peeks_at_other_splits() {
        // Values outside the train range land outside [0,1]; the scaler
        // must not rescale to the test split's own range.
        let train = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let test = Matrix::from_vec(2, 1, vec![-1.0, 3.0]).unwrap();
        let scaler = Scaler::fit(ScalerKind::MinMax, &train);
        let y = scaler.transform(&test).unwrap();
        assert_eq!(y.data(), &[-1.0, 3.0]);
    }

    #[test]
    fn imputer_uses_train_means() {
        let train = Matrix::from_vec(3, 1, vec![1.0, f64::NAN, 3.0]).unwrap();
        let imp = Imputer::fit(&train);
        let filled = imp.transform(&train).unwrap();
        assert_eq!(filled.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn synth_blocks_zero_noise_duplicates_within_block() {
        let d = synth_blocks(10, 3, 4, 0.0, 7).unwrap();
        for i in 0..10 {
            for b in 0..3 {
                let base = d.x.get(i, b * 4);
                for p in 1..4 {
                    assert_eq!(d.x.get(i, b * 4 + p), base);
                }
            }
        }
        // exactly `blocks` distinct columns
        let mut distinct: Vec<Vec<u64>> = vec![];
        for j in 0..12 {
            let col: Vec<u64> = (0..10).map(|i| d.x.get(i, j).to_bits()).collect();
            if !distinct.contains(&col) {
                distinct.push(col);
            }
        }
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn synth_single_block_is_rank_one_plus_noise() {
        let d = synth_blocks(50, 1, 5, 0.0, 3).unwrap();
        // with zero noise all columns equal the latent: rank one
        for i in 0..50 {
            let v = d.x.get(i, 0);
            assert!((1..5).all(|j| d.x.get(i, j) == v));
        }
    }
}
