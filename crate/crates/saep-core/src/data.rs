//! Dataset ingestion and preparation: IDX image files, CSV tables, synthetic
//! two-class generators, label-pair binarization, and deterministic splits.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A supervised sample: `m` feature rows with integer labels.
///
/// Image sources are normalized to `[0, 1]`; all features must be finite and
/// labels must lie in `[0, n_classes)` with at least two classes.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<u32>,
    n_classes: usize,
    name: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<u32>,
        n_classes: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        let m = features.nrows();
        if m == 0 {
            return Err(Error::Argument("dataset must contain at least one instance".into()));
        }
        if labels.len() != m {
            return Err(Error::Argument(format!(
                "label count {} does not match instance count {m}",
                labels.len()
            )));
        }
        if n_classes < 2 {
            return Err(Error::Argument(format!(
                "dataset must have at least 2 classes, got {n_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::Argument(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("features must be finite".into()));
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            name: name.into(),
        })
    }

    /// Number of instances.
    pub fn m(&self) -> usize {
        self.features.nrows()
    }

    /// Feature dimension.
    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Splits off the first `m_train` instances as a training set and the
    /// remainder as a test set.
    pub fn split_at(&self, m_train: usize) -> Result<(Dataset, Dataset)> {
        if m_train == 0 || m_train >= self.m() {
            return Err(Error::Argument(format!(
                "split point {m_train} must be inside (0, {})",
                self.m()
            )));
        }
        let head: Vec<usize> = (0..m_train).collect();
        let tail: Vec<usize> = (m_train..self.m()).collect();
        Ok((self.subset(&head, "train")?, self.subset(&tail, "test")?))
    }

    fn subset(&self, indices: &[usize], suffix: &str) -> Result<Dataset> {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(
            features,
            labels,
            self.n_classes,
            format!("{}/{suffix}", self.name),
        )
    }
}

/// Deterministic shuffle split: a seeded permutation is drawn, the first
/// `round(m · test_fraction)` instances (clamped so neither side is empty)
/// become the test set.
pub fn split_train_test(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if data.m() < 2 {
        return Err(Error::Argument("cannot split a single-instance dataset".into()));
    }
    let mut indices: Vec<usize> = (0..data.m()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_test = ((data.m() as f64 * test_fraction).round() as usize).clamp(1, data.m() - 1);
    let (test_idx, train_idx) = indices.split_at(n_test);
    Ok((
        data.subset(train_idx, "train")?,
        data.subset(test_idx, "test")?,
    ))
}

// ---------------------------------------------------------------------------
// IDX format
// ---------------------------------------------------------------------------

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Byte reader that tracks its offset for format diagnostics.
struct IdxReader<'a> {
    bytes: &'a [u8],
    offset: usize,
    path: &'a str,
}

impl<'a> IdxReader<'a> {
    fn new(bytes: &'a [u8], path: &'a str) -> Self {
        Self { bytes, offset: 0, path }
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_string(),
            offset: self.offset as u64,
            message: message.into(),
        }
    }

    fn read_u32(&mut self) -> Result<u32> {
        if self.offset + 4 > self.bytes.len() {
            return Err(self.fail("truncated header"));
        }
        let v = BigEndian::read_u32(&self.bytes[self.offset..self.offset + 4]);
        self.offset += 4;
        Ok(v)
    }

    fn read_payload(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.offset + len > self.bytes.len() {
            return Err(self.fail(format!(
                "truncated payload: need {len} bytes, {} remain",
                self.bytes.len() - self.offset
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }
}

/// Reads a file fully, transparently gunzipping when the gzip magic bytes
/// are present (detection is by content, not file extension).
fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[..2] == GZIP_MAGIC {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Format {
                path: path.display().to_string(),
                offset: 0,
                message: format!("invalid gzip stream: {e}"),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads an IDX image/label file pair into a dataset.
///
/// Pixels are flattened row-major to `rows·cols` features and scaled by
/// 1/255; labels become the class indices, with `n_classes` set to the
/// largest label plus one.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = read_maybe_gzip(images_path)?;
    let images_name = images_path.display().to_string();
    let mut r = IdxReader::new(&image_bytes, &images_name);
    let magic = r.read_u32()?;
    if magic != IDX_IMAGES_MAGIC {
        let mut err = r;
        err.offset = 0;
        return Err(err.fail(format!(
            "bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x} for an image tensor"
        )));
    }
    let n_images = r.read_u32()? as usize;
    let rows = r.read_u32()? as usize;
    let cols = r.read_u32()? as usize;
    let d = rows * cols;
    if n_images == 0 || d == 0 {
        return Err(r.fail(format!("degenerate image tensor {n_images}x{rows}x{cols}")));
    }
    let pixels = r.read_payload(n_images * d)?;

    let label_bytes = read_maybe_gzip(labels_path)?;
    let labels_name = labels_path.display().to_string();
    let mut r = IdxReader::new(&label_bytes, &labels_name);
    let magic = r.read_u32()?;
    if magic != IDX_LABELS_MAGIC {
        let mut err = r;
        err.offset = 0;
        return Err(err.fail(format!(
            "bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x} for a label vector"
        )));
    }
    let n_labels = r.read_u32()? as usize;
    if n_labels != n_images {
        return Err(Error::Format {
            path: labels_name,
            offset: 4,
            message: format!("label count {n_labels} does not match image count {n_images}"),
        });
    }
    let label_payload = r.read_payload(n_labels)?;

    let mut features = Array2::<f64>::zeros((n_images, d));
    for (i, mut row) in features.axis_iter_mut(Axis(0)).enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = pixels[i * d + j] as f64 / 255.0;
        }
    }
    let labels: Vec<u32> = label_payload.iter().map(|&b| b as u32).collect();
    let n_classes = labels.iter().max().copied().unwrap_or(0) as usize + 1;
    let stem = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Dataset::new(features, labels, n_classes, stem)
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Loads a CSV file with a header row.
///
/// Every column except `label_column` must be numeric; label values are
/// mapped to dense indices by first appearance, and the mapping is recorded
/// in the dataset name.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: display.clone(),
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: display.clone(),
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Parse {
            path: display.clone(),
            row: 0,
            column: label_column.to_string(),
            message: format!("label column {label_column:?} not found in header"),
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    let mut label_map: HashMap<String, u32> = HashMap::new();
    let mut label_order: Vec<String> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row_no = row_idx + 1;
        let record = record.map_err(|e| Error::Parse {
            path: display.clone(),
            row: row_no,
            column: String::new(),
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(feature_names.len());
        for (col_idx, cell) in record.iter().enumerate() {
            if col_idx == label_idx {
                let next = label_map.len() as u32;
                let id = *label_map.entry(cell.to_string()).or_insert_with(|| {
                    label_order.push(cell.to_string());
                    next
                });
                labels.push(id);
            } else {
                let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    path: display.clone(),
                    row: row_no,
                    column: headers.get(col_idx).unwrap_or("?").to_string(),
                    message: format!("expected a numeric feature, got {cell:?}"),
                })?;
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: display,
            row: 0,
            column: String::new(),
            message: "no data rows".into(),
        });
    }
    let d = feature_names.len();
    let mut features = Array2::<f64>::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            features[(i, j)] = v;
        }
    }
    let mapping = label_order
        .iter()
        .enumerate()
        .map(|(i, name)| format!("{name}={i}"))
        .collect::<Vec<_>>()
        .join(",");
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::new(
        features,
        labels,
        label_map.len(),
        format!("{stem}[{mapping}]"),
    )
}

/// Writes a dataset to CSV: feature columns `f0..f{d-1}` followed by a
/// `label` column. Feature values round-trip exactly through [`load_csv`].
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let write_err = |e: csv::Error| Error::Parse {
        path: path.display().to_string(),
        row: 0,
        column: String::new(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(write_err)?;
    let mut header: Vec<String> = (0..data.d()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    writer.write_record(&header).map_err(write_err)?;
    for (row, &label) in data.features.axis_iter(Axis(0)).zip(&data.labels) {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        record.push(label.to_string());
        writer.write_record(&record).map_err(write_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

/// Synthetic two-class dataset families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// Two isotropic Gaussians centered at (−1, 0) and (+1, 0).
    Blobs,
    /// Two interleaved half-circles.
    Moons,
}

/// Generates a deterministic 2-D two-class dataset.
///
/// Classes alternate instance by instance, so any prefix split stays
/// balanced. `noise` is the standard deviation of the added Gaussian jitter
/// (for blobs, the spread around each center).
pub fn make_synthetic(kind: SyntheticKind, m: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if m < 2 {
        return Err(Error::Argument(format!("need at least 2 instances, got {m}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Argument(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::<f64>::zeros((m, 2));
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let label = (i % 2) as u32;
        let (x, y) = match kind {
            SyntheticKind::Blobs => {
                let cx = if label == 0 { -1.0 } else { 1.0 };
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                (cx + noise * nx, noise * ny)
            }
            SyntheticKind::Moons => {
                let t = rng.gen_range(0.0..std::f64::consts::PI);
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                if label == 0 {
                    (t.cos() + noise * nx, t.sin() + noise * ny)
                } else {
                    (1.0 - t.cos() + noise * nx, 0.5 - t.sin() + noise * ny)
                }
            }
        };
        features[(i, 0)] = x;
        features[(i, 1)] = y;
        labels.push(label);
    }
    let kind_name = match kind {
        SyntheticKind::Blobs => "blobs",
        SyntheticKind::Moons => "moons",
    };
    Dataset::new(
        features,
        labels,
        2,
        format!("{kind_name}(m={m},noise={noise},seed={seed})"),
    )
}

/// Restricts a dataset to two classes, relabeling `class_a` → 0 and
/// `class_b` → 1.
pub fn binarize_pair(data: &Dataset, class_a: u32, class_b: u32) -> Result<Dataset> {
    if class_a == class_b {
        return Err(Error::Argument(format!(
            "class pair must be distinct, got ({class_a}, {class_b})"
        )));
    }
    let mut indices = Vec::new();
    let mut labels = Vec::new();
    let mut seen_a = false;
    let mut seen_b = false;
    for (i, &l) in data.labels.iter().enumerate() {
        if l == class_a {
            indices.push(i);
            labels.push(0);
            seen_a = true;
        } else if l == class_b {
            indices.push(i);
            labels.push(1);
            seen_b = true;
        }
    }
    if !seen_a || !seen_b {
        let missing = if seen_a { class_b } else { class_a };
        return Err(Error::Argument(format!(
            "class {missing} not present in dataset {:?}",
            data.name
        )));
    }
    let features = data.features.select(Axis(0), &indices);
    Dataset::new(
        features,
        labels,
        2,
        format!("{}[{class_a}-vs-{class_b}]", data.name),
    )
}
