//! Small numeric helpers shared across the crate.

use ndarray::ArrayView1;

/// Sums a slice by recursive halving.
///
/// The reduction tree depends only on the slice length, so permuting the
/// *values* never changes the rounding path, and the error grows like
/// O(log n) rather than O(n) for sequential accumulation. All loss
/// averaging in this crate funnels through here.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        3 => (xs[0] + xs[1]) + xs[2],
        4 => (xs[0] + xs[1]) + (xs[2] + xs[3]),
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Arithmetic mean via [`pairwise_sum`]. Returns NaN on an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Euclidean norm of a vector view.
pub fn l2_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative error |a - b| / max(|a|, |b|, eps), symmetric in its arguments.
///
/// `eps` guards the all-zero case; 1e-300 keeps the guard far below any
/// scale that matters while avoiding 0/0.
pub fn rel_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(1e-300);
    (a - b).abs() / denom
}

/// Largest absolute componentwise difference between two equal-length views.
///
/// Panics if the lengths differ.
pub fn max_abs_diff(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    assert_eq!(a.len(), b.len(), "max_abs_diff: length mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest relative componentwise difference, with denominator
/// max(|a_i|, |b_i|, 1) so that near-zero entries are compared absolutely.
pub fn max_rel_diff(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    assert_eq!(a.len(), b.len(), "max_rel_diff: length mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pairwise_sum_matches_sequential_on_small_inputs() {
        let xs = [1.5, -2.25, 0.75, 4.0, -1.0];
        assert_eq!(pairwise_sum(&xs), 3.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[7.25]), 7.25);
    }

    #[test]
    fn pairwise_sum_is_permutation_stable() {
        // 1e16 + 1 - 1e16 style cancellation: sequential order matters,
        // the pairwise tree over a fixed length gives one answer per multiset
        // up to O(eps * log n) wobble.
        let mut xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 1000) as f64 * 1e-3).collect();
        let s1 = pairwise_sum(&xs);
        xs.reverse();
        let s2 = pairwise_sum(&xs);
        assert!((s1 - s2).abs() <= 1e-12 * s1.abs());
    }

    #[test]
    fn mean_of_constant_is_exact() {
        let xs = vec![0.1; 97];
        assert_eq!(mean(&xs), 0.1);
    }

    #[test]
    fn rel_error_basics() {
        assert_eq!(rel_error(2.0, 2.0), 0.0);
        assert!((rel_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert_eq!(rel_error(0.0, 0.0), 0.0);
    }

    #[test]
    fn norm_and_diffs() {
        let a = array![3.0, 4.0];
        assert_eq!(l2_norm(a.view()), 5.0);
        let b = array![3.0, 4.5];
        assert_eq!(max_abs_diff(a.view(), b.view()), 0.5);
        assert!((max_rel_diff(a.view(), b.view()) - 0.5 / 4.5).abs() < 1e-15);
    }
}
