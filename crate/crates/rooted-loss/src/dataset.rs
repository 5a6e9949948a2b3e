//! Datasets: in-memory feature/label storage, delimited-file loading,
//! train/test splitting, k-fold plans, standardization, a two-arm spiral
//! generator, and one-vs-all task expansion.
//!
//! Binary labels are stored as exactly +-1.0. Multiclass labels are stored
//! as class indices in first-appearance order of the raw label tokens.
//! Every randomized helper takes an explicit seed and uses ChaCha8, so
//! results are reproducible across platforms.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Label storage. Binary classification uses signed unit labels so margin
/// losses can form `y * w.x` directly; multiclass uses dense class indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// Entries are exactly +1.0 or -1.0.
    Binary(Array1<f64>),
    /// `indices[i] < classes`; `classes >= 2`.
    Multiclass { classes: usize, indices: Vec<usize> },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Binary(y) => y.len(),
            Labels::Multiclass { indices, .. } => indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A dense dataset: an (n x d) feature matrix plus labels, with a short
/// name and a free-form provenance string describing where it came from
/// (file path, generator parameters, label mapping, applied transforms).
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Labels,
    name: String,
    provenance: String,
}

impl Dataset {
    /// Builds a binary dataset. Labels must be exactly +-1.0 and features
    /// finite; at least one row and one column are required.
    pub fn binary(features: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        for (i, &y) in labels.iter().enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(Error::LabelMismatch(format!(
                    "binary label at row {i} must be +1 or -1, got {y}"
                )));
            }
        }
        Self::validated(features, Labels::Binary(labels))
    }

    /// Builds a multiclass dataset from class indices.
    pub fn multiclass(features: Array2<f64>, classes: usize, indices: Vec<usize>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        if let Some((i, &c)) = indices.iter().enumerate().find(|(_, &c)| c >= classes) {
            return Err(Error::LabelMismatch(format!(
                "class index {c} at row {i} exceeds class count {classes}"
            )));
        }
        Self::validated(features, Labels::Multiclass { classes, indices })
    }

    fn validated(features: Array2<f64>, labels: Labels) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Empty("dataset has no rows"));
        }
        if features.ncols() == 0 {
            return Err(Error::Empty("dataset has no feature columns"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows vs {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(((i, j), &v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature {v} at row {i}, column {j}"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            name: String::from("unnamed"),
            provenance: String::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// 2 for binary labels, the class count otherwise.
    pub fn num_classes(&self) -> usize {
        match &self.labels {
            Labels::Binary(_) => 2,
            Labels::Multiclass { classes, .. } => *classes,
        }
    }

    /// Signed labels, or `LabelMismatch` for multiclass data.
    pub fn binary_labels(&self) -> Result<&Array1<f64>> {
        match &self.labels {
            Labels::Binary(y) => Ok(y),
            Labels::Multiclass { .. } => Err(Error::LabelMismatch(
                "expected binary labels, found multiclass".into(),
            )),
        }
    }

    /// `(classes, indices)`, or `LabelMismatch` for binary data.
    pub fn class_indices(&self) -> Result<(usize, &[usize])> {
        match &self.labels {
            Labels::Multiclass { classes, indices } => Ok((*classes, indices)),
            Labels::Binary(_) => Err(Error::LabelMismatch(
                "expected multiclass labels, found binary".into(),
            )),
        }
    }

    /// Rows per class, indexed by class (binary: index 0 counts +1).
    pub fn class_counts(&self) -> Vec<usize> {
        match &self.labels {
            Labels::Binary(y) => {
                let pos = y.iter().filter(|&&v| v == 1.0).count();
                vec![pos, y.len() - pos]
            }
            Labels::Multiclass { classes, indices } => {
                let mut counts = vec![0usize; *classes];
                for &c in indices {
                    counts[c] += 1;
                }
                counts
            }
        }
    }

    /// Selects rows by index, preserving order. Duplicates are allowed.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        if idx.is_empty() {
            return Err(Error::Empty("subset selects no rows"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n()) {
            return Err(Error::InvalidParameter(format!(
                "subset index {bad} out of range for {} rows",
                self.n()
            )));
        }
        let features = self.features.select(Axis(0), idx);
        let labels = match &self.labels {
            Labels::Binary(y) => {
                Labels::Binary(Array1::from_iter(idx.iter().map(|&i| y[i])))
            }
            Labels::Multiclass { classes, indices } => Labels::Multiclass {
                classes: *classes,
                indices: idx.iter().map(|&i| indices[i]).collect(),
            },
        };
        Ok(Dataset {
            features,
            labels,
            name: self.name.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// Appends a constant-1 feature column so a linear model gains a bias
    /// term. Apply after standardization, never before.
    pub fn with_bias_column(&self) -> Dataset {
        let n = self.n();
        let mut features = Array2::ones((n, self.dim() + 1));
        features
            .slice_mut(ndarray::s![.., ..self.dim()])
            .assign(&self.features);
        Dataset {
            features,
            labels: self.labels.clone(),
            name: self.name.clone(),
            provenance: format!("{}; bias column appended", self.provenance),
        }
    }

    /// Reinterprets binary labels as a two-class index problem for softmax
    /// losses: +1 becomes class 0, -1 becomes class 1.
    pub fn as_two_class(&self) -> Result<Dataset> {
        let y = self.binary_labels()?;
        let indices = y.iter().map(|&v| if v == 1.0 { 0 } else { 1 }).collect();
        Ok(Dataset {
            features: self.features.clone(),
            labels: Labels::Multiclass { classes: 2, indices },
            name: self.name.clone(),
            provenance: format!("{}; +1 -> class 0, -1 -> class 1", self.provenance),
        })
    }
}

/// Where the label lives in a delimited row. `Index` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelColumn {
    Last,
    Index(usize),
}

/// Parsing options for [`load_delimited`].
#[derive(Debug, Clone)]
pub struct LoadSchema {
    pub delimiter: char,
    pub has_header: bool,
    pub label_column: LabelColumn,
}

impl Default for LoadSchema {
    fn default() -> Self {
        LoadSchema {
            delimiter: ',',
            has_header: false,
            label_column: LabelColumn::Last,
        }
    }
}

/// Loads a delimited text file into a [`Dataset`].
///
/// Fields are trimmed before parsing. Blank lines are skipped. All rows
/// must have the same number of fields; features must parse as finite
/// numbers, and errors carry 1-based line and column positions.
///
/// Labels are raw tokens. Two distinct tokens give a binary dataset: the
/// pairs {1,-1} and {0,1} map canonically (1 -> +1), anything else maps
/// the first-appearing token to +1. Three or more tokens give a multiclass
/// dataset indexed in first-appearance order. A single token is an error.
/// The chosen mapping is recorded in the dataset provenance.
pub fn load_delimited(path: &Path, schema: &LoadSchema) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut expected_fields: Option<usize> = None;
    let mut header_pending = schema.has_header;

    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter).map(str::trim).collect();
        let expected = *expected_fields.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(Error::Parse {
                line: line_no,
                column: 1,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let label_idx = match schema.label_column {
            LabelColumn::Last => expected - 1,
            LabelColumn::Index(i) => {
                if i >= expected {
                    return Err(Error::Parse {
                        line: line_no,
                        column: 1,
                        message: format!("label column {i} out of range for {expected} fields"),
                    });
                }
                i
            }
        };
        if expected < 2 {
            return Err(Error::Parse {
                line: line_no,
                column: 1,
                message: "need at least one feature besides the label".into(),
            });
        }
        let mut features = Vec::with_capacity(expected - 1);
        for (col, field) in fields.iter().enumerate() {
            if col == label_idx {
                raw_labels.push((*field).to_string());
                continue;
            }
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                column: col + 1,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    column: col + 1,
                    message: format!("non-finite feature value {field:?}"),
                });
            }
            features.push(value);
        }
        rows.push(features);
    }

    if rows.is_empty() {
        return Err(Error::Empty("file contains no data rows"));
    }
    let dim = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len() / dim;
    let features = Array2::from_shape_vec((n, dim), flat).expect("consistent row widths");

    // Distinct label tokens in first-appearance order.
    let mut tokens: Vec<String> = Vec::new();
    for t in &raw_labels {
        if !tokens.contains(t) {
            tokens.push(t.clone());
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());

    if tokens.len() < 2 {
        return Err(Error::LabelMismatch(format!(
            "file contains a single label token {:?}",
            tokens.first().map(String::as_str).unwrap_or("")
        )));
    }

    if tokens.len() == 2 {
        let parsed: Vec<Option<f64>> = tokens.iter().map(|t| t.parse().ok()).collect();
        let values: Option<Vec<f64>> = parsed.into_iter().collect();
        // Canonical orientations for numeric label pairs; otherwise the
        // first-appearing token is the positive class.
        let positive = match values.as_deref() {
            Some([a, b])
                if (*a == 1.0 && *b == -1.0)
                    || (*a == -1.0 && *b == 1.0)
                    || (*a == 1.0 && *b == 0.0)
                    || (*a == 0.0 && *b == 1.0) =>
            {
                if *a == 1.0 {
                    0
                } else {
                    1
                }
            }
            _ => 0,
        };
        let labels = Array1::from_iter(raw_labels.iter().map(|t| {
            if *t == tokens[positive] {
                1.0
            } else {
                -1.0
            }
        }));
        let provenance = format!(
            "loaded {} rows from {}; labels {:?} -> +1, {:?} -> -1",
            n,
            path.display(),
            tokens[positive],
            tokens[1 - positive]
        );
        Dataset::binary(features, labels).map(|d| d.with_name(name).with_provenance(provenance))
    } else {
        let indices: Vec<usize> = raw_labels
            .iter()
            .map(|t| tokens.iter().position(|u| u == t).expect("token recorded"))
            .collect();
        let mut mapping = String::new();
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                mapping.push_str(", ");
            }
            let _ = write!(mapping, "{t:?} -> {i}");
        }
        let provenance = format!("loaded {} rows from {}; classes {}", n, path.display(), mapping);
        Dataset::multiclass(features, tokens.len(), indices)
            .map(|d| d.with_name(name).with_provenance(provenance))
    }
}

/// Writes features plus a trailing label column, one row per line, no
/// header. Binary labels are written as `1` / `-1`, multiclass as the
/// class index, so a round trip through [`load_delimited`] reproduces the
/// dataset exactly.
pub fn write_delimited(data: &Dataset, path: &Path, delimiter: char) -> Result<()> {
    let mut out = String::new();
    for (i, row) in data.features().rows().into_iter().enumerate() {
        for v in row.iter() {
            let _ = write!(out, "{v}{delimiter}");
        }
        match data.labels() {
            Labels::Binary(y) => {
                let _ = writeln!(out, "{}", if y[i] == 1.0 { "1" } else { "-1" });
            }
            Labels::Multiclass { indices, .. } => {
                let _ = writeln!(out, "{}", indices[i]);
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Two interleaved spiral arms in the plane with Gaussian jitter.
///
/// Each arm draws `n/2` points: an angle `t` uniform on [0, 3pi], radius
/// `t / 3pi`, position `(r cos(t + arm*pi), r sin(t + arm*pi))` plus
/// `noise` times a standard normal pair. Arm 0 is labeled +1, arm 1 is -1.
/// `n` must be even and positive; `noise` non-negative.
pub fn make_spiral(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "spiral size must be even and positive, got {n}"
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spiral noise must be finite and >= 0, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = 3.0 * std::f64::consts::PI;
    let mut features = Array2::zeros((n, 2));
    let mut labels = Array1::zeros(n);
    for arm in 0..2usize {
        for i in 0..n / 2 {
            let row = arm * (n / 2) + i;
            let t = span * rng.random::<f64>();
            let r = t / span;
            let phase = t + arm as f64 * std::f64::consts::PI;
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            features[[row, 0]] = r * phase.cos() + noise * g1;
            features[[row, 1]] = r * phase.sin() + noise * g2;
            labels[row] = if arm == 0 { 1.0 } else { -1.0 };
        }
    }
    Dataset::binary(features, labels).map(|d| {
        d.with_name("spiral")
            .with_provenance(format!("spiral generator: n={n}, noise={noise}, seed={seed}"))
    })
}

/// Splits rows into train and test by a shuffled index partition.
/// The train side receives `floor(fraction * n)` rows; both sides must end
/// up non-empty.
pub fn train_test_split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction.is_finite() && 0.0 < fraction && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    let n = data.n();
    let n_train = (fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidParameter(format!(
            "fraction {fraction} leaves an empty side for {n} rows"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let train = data.subset(&idx[..n_train])?;
    let test = data.subset(&idx[n_train..])?;
    Ok((train, test))
}

/// Per-column affine transform fitted on training data.
///
/// Uses the population standard deviation (divide by n). Columns with zero
/// variance are flagged in `constant` and passed through untouched by
/// [`Standardizer::transform`].
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(features: &Array2<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Empty("cannot fit a standardizer on no rows"));
        }
        let n = features.nrows() as f64;
        let mean = features.sum_axis(Axis(0)) / n;
        let mut var = Array1::zeros(features.ncols());
        for row in features.rows() {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        var /= n;
        let std = var.mapv(f64::sqrt);
        let constant = std.iter().map(|&s| s == 0.0).collect();
        Ok(Standardizer { mean, std, constant })
    }

    pub fn transform_features(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns vs standardizer fitted on {}",
                features.ncols(),
                self.mean.len()
            )));
        }
        let mut out = features.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                if !self.constant[j] {
                    *v = (*v - self.mean[j]) / self.std[j];
                }
            }
        }
        Ok(out)
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        let features = self.transform_features(data.features())?;
        Ok(Dataset {
            features,
            labels: data.labels().clone(),
            name: data.name().to_string(),
            provenance: format!("{}; standardized", data.provenance()),
        })
    }
}

/// Fits a standardizer on `train` only and applies it to both sides.
/// Test rows use the train statistics, never their own.
pub fn standardize_train_test(
    train: &Dataset,
    test: &Dataset,
) -> Result<(Dataset, Dataset, Standardizer)> {
    let scaler = Standardizer::fit(train.features())?;
    Ok((scaler.transform(train)?, scaler.transform(test)?, scaler))
}

/// One cross-validation fold: row indices for training and validation.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// A full k-fold plan over `n` rows.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub n: usize,
    pub seed: u64,
}

/// Contiguous chunks of a seeded shuffle: fold `i` validates on chunk `i`
/// and trains on the remaining chunks in shuffle order. The first `n % k`
/// folds hold one extra validation row.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "fold count must satisfy 2 <= k <= n, got k={k}, n={n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let base = n / k;
    let rem = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0usize;
    for i in 0..k {
        let size = base + usize::from(i < rem);
        let validation = idx[start..start + size].to_vec();
        let mut train = Vec::with_capacity(n - size);
        train.extend_from_slice(&idx[..start]);
        train.extend_from_slice(&idx[start + size..]);
        folds.push(Fold { train, validation });
        start += size;
    }
    Ok(FoldPlan { folds, n, seed })
}

/// Expands a multiclass dataset (3+ classes) into one binary task per
/// class: rows of class `j` get +1 in task `j`, everything else -1.
/// Task datasets are named `<name>-c<j>`.
pub fn one_vs_all(data: &Dataset) -> Result<Vec<Dataset>> {
    let (classes, indices) = data.class_indices()?;
    if classes < 3 {
        return Err(Error::LabelMismatch(format!(
            "one-vs-all needs at least 3 classes, got {classes}; train the binary task directly"
        )));
    }
    let mut tasks = Vec::with_capacity(classes);
    for j in 0..classes {
        let labels = Array1::from_iter(
            indices
                .iter()
                .map(|&c| if c == j { 1.0 } else { -1.0 }),
        );
        let task = Dataset::binary(data.features().clone(), labels)?
            .with_name(format!("{}-c{}", data.name(), j))
            .with_provenance(format!(
                "{}; one-vs-all task: class {j} -> +1, rest -> -1",
                data.provenance()
            ));
        tasks.push(task);
    }
    Ok(tasks)
}
