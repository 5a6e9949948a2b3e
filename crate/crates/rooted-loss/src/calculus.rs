//! Exact first- and second-order calculus for the loss families, plus the
//! conditioning analysis that motivates rooting.
//!
//! Per-point curvature of both margin losses has the form `coeff(z) * x x^T`.
//! The scalar coefficient functions here use the `m = k` normalization of
//! the rooted loss (the default multiplier); batch assembly scales by `m/k`
//! for other multipliers. All coefficients are evaluated in log space
//! (exponentiate last), so they stay accurate far into the saturated
//! regions where naive `exp(-z) / (1+exp(-z))^2` style evaluation would
//! overflow or cancel.
//!
//! The key comparison: dropping the second bracket term of the rooted
//! Hessian coefficient leaves an under-approximation whose ratio against
//! the logistic coefficient is `(1 + exp(-z))^(1 + 1/k) / k` exactly. When
//! that ratio exceeds 1, the rooted loss has provably more curvature at the
//! point than logistic loss, and `k <= 1 + exp(-z)` is a sufficient
//! condition.

use ndarray::{Array1, Array2, ArrayView1};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loss::{
    ce_point, class_logits, log_softmax, margins, sigmoid, softmax, softplus, weight_matrix,
    LossSpec,
};

fn assert_root(k: f64) {
    assert!(k.is_finite() && k > 1.0, "root k must be finite and > 1, got {k}");
}

/// Magnitude of the per-point logistic gradient: the gradient is
/// `-y * coeff * x` with `coeff = 1 - sigmoid(z) = sigmoid(-z)`.
pub fn logistic_grad_coeff(z: f64) -> f64 {
    sigmoid(-z)
}

/// Per-point logistic Hessian coefficient exp(-z) / (1 + exp(-z))^2,
/// equal to sigmoid(z) * (1 - sigmoid(z)), in (0, 1/4].
pub fn lr_hessian_coeff(z: f64) -> f64 {
    (-z - 2.0 * softplus(-z)).exp()
}

/// Magnitude of the per-point rooted logistic gradient at `m = k`:
/// exp(-z) * (1 + exp(-z))^(1/k - 1). Scale by `m/k` for other multipliers.
///
/// # Panics
/// If `k` is not finite and greater than 1.
pub fn rlo_grad_coeff(z: f64, k: f64) -> f64 {
    assert_root(k);
    (-z + (1.0 / k - 1.0) * softplus(-z)).exp()
}

/// Per-point rooted Hessian coefficient at `m = k`:
/// exp(-z) * (1 + exp(-z))^(1/k - 1) * [1/k + (1 - 1/k) * sigmoid(z)].
///
/// Strictly positive for every finite `z` and `k > 1`, which is what makes
/// the rooted loss strictly convex.
pub fn rlo_hessian_coeff(z: f64, k: f64) -> f64 {
    assert_root(k);
    let bracket = 1.0 / k + (1.0 - 1.0 / k) * sigmoid(z);
    (-z + (1.0 / k - 1.0) * softplus(-z)).exp() * bracket
}

/// Under-approximation of [`rlo_hessian_coeff`] keeping only the `1/k`
/// bracket term: (1/k) * exp(-z) * (1 + exp(-z))^(1/k - 1).
pub fn rlo_hessian_under_coeff(z: f64, k: f64) -> f64 {
    assert_root(k);
    (-z + (1.0 / k - 1.0) * softplus(-z)).exp() / k
}

/// Ratio of [`rlo_hessian_under_coeff`] to [`lr_hessian_coeff`]; the
/// exponential factors cancel exactly, leaving
/// (1 + exp(-z))^(1 + 1/k) / k.
pub fn conditioning_ratio(z: f64, k: f64) -> f64 {
    assert_root(k);
    ((1.0 + 1.0 / k) * softplus(-z)).exp() / k
}

/// Sufficient condition for `conditioning_ratio > 1`: `k <= 1 + exp(-z)`,
/// compared in log space as `log k <= softplus(-z)`.
pub fn sufficient_condition(z: f64, k: f64) -> bool {
    assert_root(k);
    k.ln() <= softplus(-z)
}

/// Loss-form variant of the sufficient condition, `k <= exp(l)` where
/// `l = (1 + exp(-z))^(1/k)` is the rooted point loss at `m = 1`.
/// Weaker than [`sufficient_condition`] at small losses; exposed for
/// comparison, the margin form is what the analysis uses.
pub fn sufficient_condition_loss_form(z: f64, k: f64) -> bool {
    assert_root(k);
    k.ln() <= (softplus(-z) / k).exp()
}

/// Legacy simplification of the rooted gradient magnitude,
/// sigmoid(z) * (1 + exp(-z))^(1/k) = (1 + exp(-z))^(1/k - 1).
///
/// This is not the derivative of the rooted loss (it drops the exp(-z)
/// factor, so it shrinks on misclassified points instead of growing).
/// Kept only so the difference can be measured; never used in training.
pub fn variant_grad_coeff(z: f64, k: f64) -> f64 {
    assert_root(k);
    ((1.0 / k - 1.0) * softplus(-z)).exp()
}

/// Legacy simplification of the rooted Hessian coefficient,
/// (1 + exp(-z))^(1/k) * sigmoid(z) * [1 - sigmoid(z) * (1 - 1/k)].
///
/// Agrees with [`rlo_hessian_coeff`] at z = 0 and diverges elsewhere;
/// kept for comparison only.
pub fn variant_hessian_coeff(z: f64, k: f64) -> f64 {
    assert_root(k);
    let s = sigmoid(z);
    ((1.0 / k - 1.0) * softplus(-z)).exp() * (1.0 - s * (1.0 - 1.0 / k))
}

fn margin_grad(
    w: ArrayView1<'_, f64>,
    data: &Dataset,
    coeff: impl Fn(f64) -> f64,
) -> Result<Array1<f64>> {
    let z = margins(w, data)?;
    let y = data.binary_labels()?;
    let n = data.n() as f64;
    // c_i = -y_i * coeff(z_i) / n; grad = X^T c.
    let c = ndarray::Zip::from(&z)
        .and(y)
        .map_collect(|&zi, &yi| -yi * coeff(zi) / n);
    Ok(data.features().t().dot(&c))
}

/// Mean logistic gradient -1/n sum y_i (1 - sigmoid(z_i)) x_i.
pub fn logistic_grad(w: ArrayView1<'_, f64>, data: &Dataset) -> Result<Array1<f64>> {
    margin_grad(w, data, logistic_grad_coeff)
}

/// Mean rooted logistic gradient; per point
/// -(m/k) y exp(-z) (1 + exp(-z))^(1/k - 1) x.
pub fn rlo_grad(w: ArrayView1<'_, f64>, data: &Dataset, k: f64, m: f64) -> Result<Array1<f64>> {
    LossSpec::rlo_with_multiplier(k, m)?;
    margin_grad(w, data, |z| (m / k) * rlo_grad_coeff(z, k))
}

/// Cross-entropy gradient in logit space: softmax(logits) - onehot(class).
pub fn ce_logit_grad(logits: ArrayView1<'_, f64>, class: usize) -> Array1<f64> {
    let mut g = softmax(logits);
    g[class] -= 1.0;
    g
}

/// Rooted cross-entropy gradient in logit space:
/// (m/k) * p_class^(-1/k) * (softmax - onehot).
pub fn rooted_ce_logit_grad(
    logits: ArrayView1<'_, f64>,
    class: usize,
    k: f64,
    m: f64,
) -> Array1<f64> {
    let scale = (m / k) * (ce_point(logits, class) / k).exp();
    let mut g = ce_logit_grad(logits, class);
    g.mapv_inplace(|v| v * scale);
    g
}

/// Focal-loss gradient in logit space:
/// [gamma p (1-p)^(gamma-1) log p - (1-p)^gamma] * (onehot - softmax),
/// with the certain-prediction corner (p = 1) defined by its limit 0.
pub fn focal_logit_grad(logits: ArrayView1<'_, f64>, class: usize, gamma: f64) -> Array1<f64> {
    let lp = -ce_point(logits, class);
    let p = lp.exp();
    let one_minus_p = -lp.exp_m1();
    let q = if one_minus_p == 0.0 {
        0.0
    } else {
        gamma * p * one_minus_p.powf(gamma - 1.0) * lp - one_minus_p.powf(gamma)
    };
    let probs = softmax(logits);
    Array1::from_shape_fn(logits.len(), |j| {
        let onehot = f64::from(j == class);
        q * (onehot - probs[j])
    })
}

fn softmax_weight_grad(
    wmat: &Array2<f64>,
    data: &Dataset,
    logit_grad: impl Fn(ArrayView1<'_, f64>, usize) -> Array1<f64>,
) -> Result<Array2<f64>> {
    let logits = class_logits(wmat, data)?;
    let (classes, indices) = data.class_indices()?;
    let n = data.n() as f64;
    let mut g = Array2::zeros((data.n(), classes));
    for (i, (row, &c)) in logits.rows().into_iter().zip(indices.iter()).enumerate() {
        g.row_mut(i).assign(&(logit_grad(row, c) / n));
    }
    Ok(g.t().dot(data.features()))
}

/// Mean cross-entropy gradient with respect to the class-weight matrix.
pub fn ce_grad(wmat: &Array2<f64>, data: &Dataset) -> Result<Array2<f64>> {
    softmax_weight_grad(wmat, data, ce_logit_grad)
}

/// Mean rooted cross-entropy gradient with respect to the weight matrix.
pub fn rooted_ce_grad(wmat: &Array2<f64>, data: &Dataset, k: f64, m: f64) -> Result<Array2<f64>> {
    LossSpec::rooted_ce_with_multiplier(k, m)?;
    softmax_weight_grad(wmat, data, |row, c| rooted_ce_logit_grad(row, c, k, m))
}

/// Mean focal-loss gradient with respect to the weight matrix.
pub fn focal_grad(wmat: &Array2<f64>, data: &Dataset, gamma: f64) -> Result<Array2<f64>> {
    LossSpec::focal(gamma)?;
    softmax_weight_grad(wmat, data, |row, c| focal_logit_grad(row, c, gamma))
}

/// Mean gradient for any family as a flat vector, matching the parameter
/// layout of [`crate::loss::mean_loss`].
pub fn mean_gradient(spec: &LossSpec, w: ArrayView1<'_, f64>, data: &Dataset) -> Result<Array1<f64>> {
    match *spec {
        LossSpec::Logistic => logistic_grad(w, data),
        LossSpec::Rlo { k, m } => rlo_grad(w, data, k, m),
        _ => {
            let (classes, _) = data.class_indices().map_err(|_| {
                Error::LabelMismatch(format!(
                    "{} loss does not apply to these labels",
                    spec.name()
                ))
            })?;
            let wmat = weight_matrix(w, classes, data.dim())?;
            let g = match *spec {
                LossSpec::CrossEntropy => ce_grad(&wmat, data)?,
                LossSpec::RootedCe { k, m } => rooted_ce_grad(&wmat, data, k, m)?,
                LossSpec::Focal { gamma } => focal_grad(&wmat, data, gamma)?,
                _ => unreachable!(),
            };
            Ok(Array1::from_iter(g.into_iter()))
        }
    }
}

/// A dense mean Hessian `X^T diag(coeff) X / n + lambda I` for a margin
/// loss, with enough context to label reports.
#[derive(Debug, Clone)]
pub struct Hessian {
    pub matrix: Array2<f64>,
    pub spec: LossSpec,
    pub lambda: f64,
}

/// Assembles the exact mean Hessian of a margin loss plus ridge term.
///
/// Rows of X are scaled by sqrt(coeff) and squared, so the result is
/// symmetric positive semidefinite by construction (the coefficients are
/// positive for both families). Softmax families are not supported here.
pub fn assemble_hessian(
    w: ArrayView1<'_, f64>,
    data: &Dataset,
    spec: &LossSpec,
    lambda: f64,
) -> Result<Hessian> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ridge strength must be finite and >= 0, got {lambda}"
        )));
    }
    spec.validate()?;
    let coeff: Box<dyn Fn(f64) -> f64> = match *spec {
        LossSpec::Logistic => Box::new(lr_hessian_coeff),
        LossSpec::Rlo { k, m } => Box::new(move |z| (m / k) * rlo_hessian_coeff(z, k)),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "hessian assembly covers margin losses only, got {}",
                spec.name()
            )))
        }
    };
    let z = margins(w, data)?;
    let n = data.n() as f64;
    let mut scaled = data.features().clone();
    for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
        let s = (coeff(z[i]) / n).sqrt();
        row.mapv_inplace(|v| v * s);
    }
    let mut matrix = scaled.t().dot(&scaled);
    for i in 0..matrix.nrows() {
        matrix[[i, i]] += lambda;
    }
    Ok(Hessian {
        matrix,
        spec: *spec,
        lambda,
    })
}

const MAX_EIG_DIM: usize = 1000;

/// Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi sweeps.
///
/// Deterministic and dependency-free; dimensions are capped at 1000, which
/// covers every dataset this crate targets. Asymmetry beyond `1e-8` times
/// the largest entry is rejected; smaller asymmetry is symmetrized away.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Result<Vec<f64>> {
    let d = a.nrows();
    if d == 0 || a.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            d,
            a.ncols()
        )));
    }
    if d > MAX_EIG_DIM {
        return Err(Error::InvalidParameter(format!(
            "eigensolver capped at {MAX_EIG_DIM} dimensions, got {d}"
        )));
    }
    let scale = a.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let mut max_asymmetry = 0.0f64;
    for p in 0..d {
        for q in p + 1..d {
            max_asymmetry = max_asymmetry.max((a[[p, q]] - a[[q, p]]).abs());
        }
    }
    if max_asymmetry > 1e-8 * scale.max(1e-300) {
        return Err(Error::NotSymmetric { max_asymmetry });
    }
    let mut m = Array2::zeros((d, d));
    for p in 0..d {
        for q in 0..d {
            m[[p, q]] = 0.5 * (a[[p, q]] + a[[q, p]]);
        }
    }
    Ok(jacobi_eigenvalues(m))
}

fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
    let d = a.nrows();
    let fro = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _sweep in 0..64 {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..d {
                for q in p + 1..d {
                    s += a[[p, q]] * a[[p, q]];
                }
            }
            s.sqrt()
        };
        if off <= 1e-14 * fro.max(1e-300) {
            break;
        }
        for p in 0..d.saturating_sub(1) {
            for q in p + 1..d {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                // Smaller-magnitude rotation root; theta^2 overflowing to
                // inf sends t to 0, which is the right limit.
                let t = theta.signum() / (theta.abs() + theta.mul_add(theta, 1.0).sqrt());
                let c = 1.0 / t.mul_add(t, 1.0).sqrt();
                let s = t * c;
                for r in 0..d {
                    let arp = a[[r, p]];
                    let arq = a[[r, q]];
                    a[[r, p]] = c * arp - s * arq;
                    a[[r, q]] = s * arp + c * arq;
                }
                for r in 0..d {
                    let apr = a[[p, r]];
                    let aqr = a[[q, r]];
                    a[[p, r]] = c * apr - s * aqr;
                    a[[q, r]] = s * apr + c * aqr;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..d).map(|i| a[[i, i]]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Largest over smallest eigenvalue of a symmetric matrix, with +inf when
/// the smallest eigenvalue is at or below `1e-12` times the largest
/// (numerically singular or indefinite).
pub fn condition_number(a: &Array2<f64>) -> Result<f64> {
    let eig = symmetric_eigenvalues(a)?;
    let max = *eig.last().expect("non-empty by construction");
    let min = eig[0];
    if max <= 0.0 || min <= 1e-12 * max {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

/// Central-difference gradient of a scalar function, one coordinate at a
/// time: (f(w + h e_i) - f(w - h e_i)) / 2h.
pub fn finite_diff_grad(f: impl Fn(&Array1<f64>) -> f64, w: &Array1<f64>, h: f64) -> Array1<f64> {
    let mut g = Array1::zeros(w.len());
    let mut probe = w.clone();
    for i in 0..w.len() {
        probe[i] = w[i] + h;
        let up = f(&probe);
        probe[i] = w[i] - h;
        let down = f(&probe);
        probe[i] = w[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Central-difference Jacobian of a vector function; column `i` is the
/// difference quotient along coordinate `i`.
pub fn finite_diff_jacobian(
    g: impl Fn(&Array1<f64>) -> Array1<f64>,
    w: &Array1<f64>,
    h: f64,
) -> Array2<f64> {
    let probe_dim = g(w).len();
    let mut jac = Array2::zeros((probe_dim, w.len()));
    let mut probe = w.clone();
    for i in 0..w.len() {
        probe[i] = w[i] + h;
        let up = g(&probe);
        probe[i] = w[i] - h;
        let down = g(&probe);
        probe[i] = w[i];
        let col = (up - down) / (2.0 * h);
        jac.column_mut(i).assign(&col);
    }
    jac
}

/// Per-point curvature comparison between logistic and rooted losses at a
/// fixed parameter vector.
#[derive(Debug, Clone)]
pub struct ConditioningRecord {
    pub index: usize,
    pub z: f64,
    pub coeff_lr: f64,
    pub coeff_rlo: f64,
    pub coeff_rlo_under: f64,
    pub ratio: f64,
    pub sufficient: bool,
}

#[derive(Debug, Clone)]
pub struct ConditioningReport {
    pub k: f64,
    pub records: Vec<ConditioningRecord>,
}

/// Evaluates all five conditioning quantities at each point of a binary
/// dataset, using the `m = k` normalization throughout.
pub fn conditioning_report(
    w: ArrayView1<'_, f64>,
    data: &Dataset,
    k: f64,
) -> Result<ConditioningReport> {
    assert_root(k);
    let z = margins(w, data)?;
    let records = z
        .iter()
        .enumerate()
        .map(|(index, &zi)| ConditioningRecord {
            index,
            z: zi,
            coeff_lr: lr_hessian_coeff(zi),
            coeff_rlo: rlo_hessian_coeff(zi, k),
            coeff_rlo_under: rlo_hessian_under_coeff(zi, k),
            ratio: conditioning_ratio(zi, k),
            sufficient: sufficient_condition(zi, k),
        })
        .collect();
    Ok(ConditioningReport { k, records })
}

impl ConditioningReport {
    /// Fraction of points whose under-approximation ratio exceeds 1.
    pub fn fraction_ratio_above_one(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let hits = self.records.iter().filter(|r| r.ratio > 1.0).count();
        hits as f64 / self.records.len() as f64
    }

    /// Fraction of points satisfying the sufficient condition.
    pub fn fraction_sufficient(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let hits = self.records.iter().filter(|r| r.sufficient).count();
        hits as f64 / self.records.len() as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,z,coeff_lr,coeff_rlo,coeff_rlo_under,ratio,sufficient")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.index, r.z, r.coeff_lr, r.coeff_rlo, r.coeff_rlo_under, r.ratio, r.sufficient
            )?;
        }
        Ok(())
    }
}

/// Log-probability helper shared with model evaluation; re-exported here
/// because curvature diagnostics often want it alongside the coefficients.
pub fn log_probabilities(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    log_softmax(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::loss::{logistic_loss, rlo_loss};
    use crate::numeric::{max_abs_diff, rel_error};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coefficient_reference_values() {
        assert_eq!(lr_hessian_coeff(0.0), 0.25);
        assert!((lr_hessian_coeff(2.0) - 0.104993585403507).abs() < 1e-14);
        assert!((rlo_hessian_coeff(0.0, 2.0) - 0.530330085889911).abs() < 1e-14);
        assert!((rlo_hessian_under_coeff(0.0, 2.0) - 0.353553390593274).abs() < 1e-14);
        assert!((rlo_grad_coeff(2.0, 3.0) - 0.124354530737989).abs() < 1e-14);
        assert!((conditioning_ratio(0.0, 2.0) - std::f64::consts::SQRT_2).abs() < 1e-14);
        assert!((conditioning_ratio(0.0, 3.0) - 0.839947366596582).abs() < 1e-14);
    }

    #[test]
    fn lr_coeff_matches_sigmoid_product() {
        // The textbook product loses digits to cancellation once sigmoid
        // saturates, so it only serves as a reference at moderate margins.
        for &z in &[-8.0, -1.0, 0.0, 0.5, 7.0] {
            let direct = sigmoid(z) * (1.0 - sigmoid(z));
            assert!(rel_error(lr_hessian_coeff(z), direct) < 1e-9, "z={z}");
        }
        // Deep in either tail the coefficient decays like exp(-|z|) and is
        // symmetric in z.
        assert!(rel_error(lr_hessian_coeff(35.0), lr_hessian_coeff(-35.0)) < 1e-12);
        assert!(rel_error(lr_hessian_coeff(35.0), (-35.0f64).exp()) < 1e-12);
    }

    #[test]
    fn coefficients_positive_and_bounded() {
        for i in 0..1000 {
            let z = -30.0 + 0.06 * i as f64;
            assert!(lr_hessian_coeff(z) > 0.0);
            assert!(lr_hessian_coeff(z) <= 0.25);
            for &k in &[1.01, 2.0, 5.0, 100.0, 1e6] {
                assert!(rlo_hessian_coeff(z, k) > 0.0, "z={z}, k={k}");
                let under = rlo_hessian_under_coeff(z, k);
                assert!(under > 0.0 && under < rlo_hessian_coeff(z, k));
            }
        }
    }

    #[test]
    fn ratio_identity_exact_cancellation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..2000 {
            let z = rng.random::<f64>() * 60.0 - 30.0;
            let k = 1.0 + rng.random::<f64>() * 99.0;
            let lhs = conditioning_ratio(z, k) * lr_hessian_coeff(z);
            let rhs = rlo_hessian_under_coeff(z, k);
            assert!(rel_error(lhs, rhs) < 1e-13, "z={z}, k={k}");
        }
    }

    #[test]
    fn sufficient_condition_implies_ratio_above_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut hits = 0;
        for _ in 0..20000 {
            let z = rng.random::<f64>() * 20.0 - 10.0;
            let k = 1.0 + rng.random::<f64>() * 9.0;
            if sufficient_condition(z, k) {
                hits += 1;
                assert!(conditioning_ratio(z, k) > 1.0, "z={z}, k={k}");
            }
        }
        assert!(hits > 100, "sampling never hit the sufficient region");
        // Spot checks at the boundary: k = 2 holds at z = 0, k = 3 does not.
        assert!(sufficient_condition(0.0, 2.0));
        assert!(!sufficient_condition(0.0, 3.0));
        assert!(conditioning_ratio(0.0, 3.0) < 1.0);
    }

    #[test]
    fn loss_form_condition_differs_from_margin_form() {
        // At z = 0, k = 3: margin form fails (3 > 2) but the loss form
        // 3 <= exp(2^(1/3)) = 3.53 holds; the loss form is not sufficient
        // for ratio > 1 there.
        assert!(sufficient_condition_loss_form(0.0, 3.0));
        assert!(!sufficient_condition(0.0, 3.0));
    }

    #[test]
    fn variant_forms_agree_only_at_zero_margin() {
        for &k in &[2.0, 3.0, 10.0] {
            assert!(rel_error(variant_grad_coeff(0.0, k), rlo_grad_coeff(0.0, k)) < 1e-14);
            assert!(rel_error(variant_hessian_coeff(0.0, k), rlo_hessian_coeff(0.0, k)) < 1e-14);
            // Away from zero the legacy forms bend the other way.
            assert!(variant_grad_coeff(-4.0, k) < rlo_grad_coeff(-4.0, k));
            assert!(variant_grad_coeff(4.0, k) > rlo_grad_coeff(4.0, k));
        }
    }

    fn random_binary(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 4.0 - 2.0);
        let labels = Array1::from_shape_fn(n, |_| if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 });
        Dataset::binary(features, labels).unwrap()
    }

    #[test]
    fn margin_gradients_match_finite_differences() {
        let data = random_binary(40, 6, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = Array1::from_shape_fn(6, |_| rng.random::<f64>() - 0.5);
        let h = 1e-6;

        let g = logistic_grad(w.view(), &data).unwrap();
        let fd = finite_diff_grad(|v| logistic_loss(v.view(), &data).unwrap(), &w, h);
        assert!(max_abs_diff(g.view(), fd.view()) < 1e-8);

        let g = rlo_grad(w.view(), &data, 3.0, 3.0).unwrap();
        let fd = finite_diff_grad(|v| rlo_loss(v.view(), &data, 3.0, 3.0).unwrap(), &w, h);
        assert!(max_abs_diff(g.view(), fd.view()) < 1e-7);

        // Non-default multiplier scales the whole gradient.
        let g1 = rlo_grad(w.view(), &data, 3.0, 1.0).unwrap();
        let g3 = rlo_grad(w.view(), &data, 3.0, 3.0).unwrap();
        assert!(max_abs_diff((&g1 * 3.0).view(), g3.view()) < 1e-14);
    }

    #[test]
    fn softmax_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 30;
        let d = 4;
        let c = 3;
        let features = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
        let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let data = Dataset::multiclass(features, c, indices).unwrap();
        let w = Array1::from_shape_fn(c * d, |_| rng.random::<f64>() - 0.5);
        let h = 1e-6;

        for spec in [
            LossSpec::CrossEntropy,
            LossSpec::rooted_ce(4.0).unwrap(),
            LossSpec::focal(2.0).unwrap(),
            LossSpec::focal(0.0).unwrap(),
        ] {
            let g = mean_gradient(&spec, w.view(), &data).unwrap();
            let fd = finite_diff_grad(
                |v| crate::loss::mean_loss(&spec, v.view(), &data).unwrap(),
                &w,
                h,
            );
            assert!(
                max_abs_diff(g.view(), fd.view()) < 1e-7,
                "family {}",
                spec.name()
            );
        }
    }

    #[test]
    fn focal_gamma_zero_equals_ce_gradient() {
        let logits = array![1.0, -0.5, 0.25];
        let a = focal_logit_grad(logits.view(), 2, 0.0);
        let b = ce_logit_grad(logits.view(), 2);
        assert!(max_abs_diff(a.view(), b.view()) < 1e-15);
        // Certain prediction: zero gradient, not NaN, for fractional gamma.
        let sure = array![50.0, 0.0];
        for &g in &[0.5, 1.0, 2.0] {
            let grad = focal_logit_grad(sure.view(), 0, g);
            assert!(grad.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn hessian_matches_finite_difference_jacobian() {
        let data = random_binary(25, 4, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = Array1::from_shape_fn(4, |_| rng.random::<f64>() - 0.5);

        for spec in [LossSpec::Logistic, LossSpec::rlo(3.0).unwrap()] {
            let h = assemble_hessian(w.view(), &data, &spec, 0.0).unwrap();
            let jac = finite_diff_jacobian(
                |v| mean_gradient(&spec, v.view(), &data).unwrap(),
                &w,
                1e-5,
            );
            let diff = (&h.matrix - &jac).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(diff < 1e-6, "family {}: {diff}", spec.name());
        }

        // Ridge shifts the diagonal only.
        let h0 = assemble_hessian(w.view(), &data, &LossSpec::Logistic, 0.0).unwrap();
        let h1 = assemble_hessian(w.view(), &data, &LossSpec::Logistic, 0.5).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = h0.matrix[[i, j]] + if i == j { 0.5 } else { 0.0 };
                assert!((h1.matrix[[i, j]] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jacobi_known_spectra() {
        let eig = symmetric_eigenvalues(&array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);

        let diag = array![[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.5]];
        let eig = symmetric_eigenvalues(&diag).unwrap();
        assert_eq!(eig, vec![-1.0, 0.5, 3.0]);

        // Random symmetric: eigenvalue sum and square-sum match trace forms.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = Array2::from_shape_fn((8, 8), |_| rng.random::<f64>() - 0.5);
        let sym = 0.5 * (&raw + &raw.t());
        let eig = symmetric_eigenvalues(&sym).unwrap();
        let trace: f64 = (0..8).map(|i| sym[[i, i]]).sum();
        let fro2: f64 = sym.iter().map(|v| v * v).sum();
        assert!((eig.iter().sum::<f64>() - trace).abs() < 1e-10);
        assert!((eig.iter().map(|v| v * v).sum::<f64>() - fro2).abs() < 1e-9);
    }

    #[test]
    fn eigensolver_rejects_bad_inputs() {
        assert!(matches!(
            symmetric_eigenvalues(&array![[1.0, 2.0], [0.0, 1.0]]),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(symmetric_eigenvalues(&Array2::zeros((2, 3))).is_err());
        let big = Array2::<f64>::eye(MAX_EIG_DIM + 1);
        assert!(symmetric_eigenvalues(&big).is_err());
    }

    #[test]
    fn condition_number_cases() {
        assert_eq!(condition_number(&Array2::eye(4)).unwrap(), 1.0);
        let a = array![[4.0, 0.0], [0.0, 1.0]];
        assert!((condition_number(&a).unwrap() - 4.0).abs() < 1e-12);
        // Singular and indefinite matrices report +inf.
        let s = array![[1.0, 1.0], [1.0, 1.0]];
        assert_eq!(condition_number(&s).unwrap(), f64::INFINITY);
        let ind = array![[1.0, 0.0], [0.0, -2.0]];
        assert_eq!(condition_number(&ind).unwrap(), f64::INFINITY);
        assert_eq!(condition_number(&Array2::zeros((3, 3))).unwrap(), f64::INFINITY);
    }

    #[test]
    fn assembled_hessians_are_psd() {
        let data = random_binary(30, 5, 44);
        let w = Array1::from_elem(5, 0.3);
        for spec in [LossSpec::Logistic, LossSpec::rlo(2.0).unwrap(), LossSpec::rlo(50.0).unwrap()] {
            let h = assemble_hessian(w.view(), &data, &spec, 0.0).unwrap();
            let eig = symmetric_eigenvalues(&h.matrix).unwrap();
            assert!(eig[0] >= -1e-10, "family {}: min eig {}", spec.name(), eig[0]);
        }
    }

    #[test]
    fn conditioning_report_contents() {
        let data = Dataset::binary(array![[2.0], [-2.0], [-0.1]], array![1.0, 1.0, 1.0]).unwrap();
        let w = array![1.0];
        let report = conditioning_report(w.view(), &data, 2.0).unwrap();
        assert_eq!(report.records.len(), 3);
        // z = -2 is a hard point: ratio above 1 and condition satisfied.
        let hard = &report.records[1];
        assert!(hard.z == -2.0 && hard.ratio > 1.0 && hard.sufficient);
        // z = +2 is easy: k = 2 > 1 + e^{-2}.
        let easy = &report.records[0];
        assert!(!easy.sufficient);
        // Slightly negative margin still clears log(2) of softplus.
        assert!((report.fraction_sufficient() - 2.0 / 3.0).abs() < 1e-15);

        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,z,coeff_lr,coeff_rlo,coeff_rlo_under,ratio,sufficient\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    #[should_panic(expected = "root k")]
    fn scalar_coefficients_panic_below_root_one() {
        rlo_hessian_coeff(0.0, 1.0);
    }
}
