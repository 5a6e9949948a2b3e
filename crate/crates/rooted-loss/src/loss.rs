//! Loss families: logistic and rooted logistic on binary margins,
//! cross-entropy, rooted cross-entropy, and focal loss on softmax logits.
//!
//! The rooted families replace a base loss `L` with `m * exp(L / k)` for a
//! root `k > 1` and multiplier `m > 0` (default `m = k`). For the logistic
//! base this is `m * (1 + exp(-z))^(1/k)` on the margin `z = y * w.x`; for
//! cross-entropy it is `m * p_y^(-1/k)` on the true-class probability. As
//! `k` grows, `m * exp(L/k) - m` with `m = k` recovers the base loss, so the
//! rooted family interpolates between an exponential-style loss at small `k`
//! and the base loss at large `k`.
//!
//! All evaluations go through log-space forms (`softplus`, `log_softmax`)
//! so margins and logits of magnitude up to around `1e4` stay finite
//! whenever the result is representable in f64 at all.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Labels};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Numerically stable logistic sigmoid 1 / (1 + exp(-z)).
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        // Avoid exp overflow for very negative z; underflows gracefully to 0.
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softplus log(1 + exp(t)).
///
/// For large positive `t` this is `t` plus a vanishing correction; for large
/// negative `t` it underflows gracefully to 0. Both branches agree to f64
/// precision at the split point.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Which loss to optimize, with its hyperparameters.
///
/// `Logistic` and `Rlo` act on binary margins; the rest act on softmax
/// logits. Construct through the checked constructors; `k` must exceed 1,
/// `m` must be positive, `gamma` must be non-negative, all finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LossSpec {
    Logistic,
    Rlo { k: f64, m: f64 },
    CrossEntropy,
    RootedCe { k: f64, m: f64 },
    Focal { gamma: f64 },
}

impl LossSpec {
    /// Rooted logistic with the default multiplier `m = k`.
    pub fn rlo(k: f64) -> Result<Self> {
        Self::rlo_with_multiplier(k, k)
    }

    pub fn rlo_with_multiplier(k: f64, m: f64) -> Result<Self> {
        let spec = LossSpec::Rlo { k, m };
        spec.validate()?;
        Ok(spec)
    }

    /// Rooted cross-entropy with the default multiplier `m = k`.
    pub fn rooted_ce(k: f64) -> Result<Self> {
        Self::rooted_ce_with_multiplier(k, k)
    }

    pub fn rooted_ce_with_multiplier(k: f64, m: f64) -> Result<Self> {
        let spec = LossSpec::RootedCe { k, m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn focal(gamma: f64) -> Result<Self> {
        let spec = LossSpec::Focal { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let check_km = |k: f64, m: f64| -> Result<()> {
            if !(k.is_finite() && k > 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "root k must be finite and > 1, got {k}"
                )));
            }
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "multiplier m must be finite and > 0, got {m}"
                )));
            }
            Ok(())
        };
        match *self {
            LossSpec::Logistic | LossSpec::CrossEntropy => Ok(()),
            LossSpec::Rlo { k, m } | LossSpec::RootedCe { k, m } => check_km(k, m),
            LossSpec::Focal { gamma } => {
                if !(gamma.is_finite() && gamma >= 0.0) {
                    Err(Error::InvalidParameter(format!(
                        "focal gamma must be finite and >= 0, got {gamma}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// True for the families evaluated on binary margins `z = y * w.x`.
    pub fn is_margin_family(&self) -> bool {
        matches!(self, LossSpec::Logistic | LossSpec::Rlo { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Logistic => "logistic",
            LossSpec::Rlo { .. } => "rlo",
            LossSpec::CrossEntropy => "ce",
            LossSpec::RootedCe { .. } => "rooted-ce",
            LossSpec::Focal { .. } => "focal",
        }
    }

    /// Per-point loss on a binary margin.
    ///
    /// # Panics
    /// If called on a softmax family.
    pub fn margin_value(&self, z: f64) -> f64 {
        match *self {
            LossSpec::Logistic => logistic_point(z),
            LossSpec::Rlo { k, m } => rlo_point(z, k, m),
            _ => panic!("{} is not a margin loss", self.name()),
        }
    }

    /// Per-point loss on softmax logits with true class `class`.
    ///
    /// # Panics
    /// If called on a margin family.
    pub fn softmax_value(&self, logits: ArrayView1<'_, f64>, class: usize) -> f64 {
        match *self {
            LossSpec::CrossEntropy => ce_point(logits, class),
            LossSpec::RootedCe { k, m } => rooted_ce_point(logits, class, k, m),
            LossSpec::Focal { gamma } => focal_point(logits, class, gamma),
            _ => panic!("{} is not a softmax loss", self.name()),
        }
    }
}

/// Logistic point loss log(1 + exp(-z)).
pub fn logistic_point(z: f64) -> f64 {
    softplus(-z)
}

/// Rooted logistic point loss m * (1 + exp(-z))^(1/k),
/// evaluated as m * exp(softplus(-z) / k).
///
/// Always at least `m` since softplus is non-negative. Returns +inf when the
/// true value exceeds the f64 range (softplus(-z)/k above roughly 709).
pub fn rlo_point(z: f64, k: f64, m: f64) -> f64 {
    m * (softplus(-z) / k).exp()
}

/// log(sum(exp(logits))) with the usual max shift; -inf on empty input.
pub fn log_sum_exp(logits: ArrayView1<'_, f64>) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = logits.iter().map(|&a| (a - max).exp()).sum();
    max + sum.ln()
}

/// Log-probabilities log softmax(logits), shift-invariant and overflow-safe.
pub fn log_softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let lse = log_sum_exp(logits);
    logits.mapv(|a| a - lse)
}

/// Softmax probabilities, computed through [`log_softmax`].
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    log_softmax(logits).mapv(f64::exp)
}

/// Cross-entropy point loss -log p_class.
///
/// # Panics
/// If `class` is out of range for `logits`.
pub fn ce_point(logits: ArrayView1<'_, f64>, class: usize) -> f64 {
    log_sum_exp(logits) - logits[class]
}

/// Rooted cross-entropy point loss m * p_class^(-1/k),
/// evaluated as m * exp(-log p_class / k). Always at least `m`.
pub fn rooted_ce_point(logits: ArrayView1<'_, f64>, class: usize, k: f64, m: f64) -> f64 {
    m * (ce_point(logits, class) / k).exp()
}

/// Focal point loss -(1 - p_class)^gamma * log p_class.
///
/// `1 - p` is computed as `-expm1(log p)` so near-certain predictions keep
/// full precision, and the `p == 1` corner returns exactly 0 for any gamma
/// (including the 0^0 = 1 convention at gamma = 0, where the focal loss
/// reduces to cross-entropy).
pub fn focal_point(logits: ArrayView1<'_, f64>, class: usize, gamma: f64) -> f64 {
    let neg_logp = ce_point(logits, class);
    let one_minus_p = -(-neg_logp).exp_m1();
    one_minus_p.powf(gamma) * neg_logp
}

/// Margins z_i = y_i * w.x_i for a binary dataset.
///
/// # Errors
/// `DimensionMismatch` if `w` does not match the feature dimension,
/// `LabelMismatch` on multiclass labels.
pub fn margins(w: ArrayView1<'_, f64>, data: &Dataset) -> Result<Array1<f64>> {
    if w.len() != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs feature dimension {}",
            w.len(),
            data.dim()
        )));
    }
    let y = data.binary_labels()?;
    Ok(data.features().dot(&w) * y)
}

/// Logits X W^T for a multiclass dataset; rows are points, columns classes.
///
/// # Errors
/// `DimensionMismatch` if `wmat` is not (classes x dim),
/// `LabelMismatch` on binary labels.
pub fn class_logits(wmat: &Array2<f64>, data: &Dataset) -> Result<Array2<f64>> {
    let (classes, _) = data.class_indices()?;
    if wmat.nrows() != classes || wmat.ncols() != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight matrix {}x{} vs {} classes and dimension {}",
            wmat.nrows(),
            wmat.ncols(),
            classes,
            data.dim()
        )));
    }
    Ok(data.features().dot(&wmat.t()))
}

fn mean_margin_loss(w: ArrayView1<'_, f64>, data: &Dataset, point: impl Fn(f64) -> f64) -> Result<f64> {
    let z = margins(w, data)?;
    let values: Vec<f64> = z.iter().map(|&zi| point(zi)).collect();
    Ok(pairwise_sum(&values) / values.len() as f64)
}

/// Mean logistic loss over a binary dataset.
pub fn logistic_loss(w: ArrayView1<'_, f64>, data: &Dataset) -> Result<f64> {
    mean_margin_loss(w, data, logistic_point)
}

/// Mean rooted logistic loss over a binary dataset.
///
/// The mean keeps the plain 1/n normalization regardless of `m`.
pub fn rlo_loss(w: ArrayView1<'_, f64>, data: &Dataset, k: f64, m: f64) -> Result<f64> {
    LossSpec::rlo_with_multiplier(k, m)?;
    mean_margin_loss(w, data, |z| rlo_point(z, k, m))
}

fn mean_softmax_loss(
    wmat: &Array2<f64>,
    data: &Dataset,
    point: impl Fn(ArrayView1<'_, f64>, usize) -> f64,
) -> Result<f64> {
    let logits = class_logits(wmat, data)?;
    let (_, indices) = data.class_indices()?;
    let values: Vec<f64> = logits
        .rows()
        .into_iter()
        .zip(indices.iter())
        .map(|(row, &c)| point(row, c))
        .collect();
    Ok(pairwise_sum(&values) / values.len() as f64)
}

/// Mean cross-entropy over a multiclass dataset.
pub fn ce_loss(wmat: &Array2<f64>, data: &Dataset) -> Result<f64> {
    mean_softmax_loss(wmat, data, ce_point)
}

/// Mean rooted cross-entropy over a multiclass dataset.
pub fn rooted_ce_loss(wmat: &Array2<f64>, data: &Dataset, k: f64, m: f64) -> Result<f64> {
    LossSpec::rooted_ce_with_multiplier(k, m)?;
    mean_softmax_loss(wmat, data, |row, c| rooted_ce_point(row, c, k, m))
}

/// Mean focal loss over a multiclass dataset.
pub fn focal_loss(wmat: &Array2<f64>, data: &Dataset, gamma: f64) -> Result<f64> {
    LossSpec::focal(gamma)?;
    mean_softmax_loss(wmat, data, |row, c| focal_point(row, c, gamma))
}

/// Mean loss for any family, dispatching on the label kind.
///
/// Margin families require binary labels and `w` of length `dim`; softmax
/// families require multiclass labels and `w` of length `classes * dim`
/// holding the class-weight matrix in row-major order.
pub fn mean_loss(spec: &LossSpec, w: ArrayView1<'_, f64>, data: &Dataset) -> Result<f64> {
    match (spec, data.labels()) {
        (LossSpec::Logistic, Labels::Binary(_)) => logistic_loss(w, data),
        (LossSpec::Rlo { k, m }, Labels::Binary(_)) => rlo_loss(w, data, *k, *m),
        (spec, Labels::Multiclass { classes, .. }) if !spec.is_margin_family() => {
            let wmat = weight_matrix(w, *classes, data.dim())?;
            match *spec {
                LossSpec::CrossEntropy => ce_loss(&wmat, data),
                LossSpec::RootedCe { k, m } => rooted_ce_loss(&wmat, data, k, m),
                LossSpec::Focal { gamma } => focal_loss(&wmat, data, gamma),
                _ => unreachable!(),
            }
        }
        (spec, _) => Err(Error::LabelMismatch(format!(
            "{} loss does not apply to these labels",
            spec.name()
        ))),
    }
}

/// Reshapes a flat weight vector into a (classes x dim) matrix.
pub fn weight_matrix(w: ArrayView1<'_, f64>, classes: usize, dim: usize) -> Result<Array2<f64>> {
    if w.len() != classes * dim {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs {classes} classes x dimension {dim}",
            w.len()
        )));
    }
    Ok(Array2::from_shape_vec((classes, dim), w.to_vec()).expect("length checked"))
}
