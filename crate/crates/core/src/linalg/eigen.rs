//! Eigenvalues of symmetric tridiagonal matrices by Sturm-sequence bisection.

use super::tridiag::TridiagonalMatrix;
use crate::error::{Error, Result};

/// Number of eigenvalues strictly below `x`.
///
/// Counts negative pivots of the `LDL^T` factorization of `T - x I`; an
/// exactly zero pivot is nudged to a tiny positive value, which keeps the
/// count consistent with "strictly below".
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..n {
        if i > 0 {
            let e = off[i - 1];
            q = (diag[i] - x) - e * e / q;
        }
        if q == 0.0 {
            q = tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based), bisected to absolute width `tol`.
pub fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize, tol: f64) -> f64 {
    let (mut lo, mut hi) = gershgorin(diag, off);
    let pad = 1e-12 * (hi - lo).abs().max(1.0);
    lo -= pad;
    hi += pad;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_symmetric(m: &TridiagonalMatrix) -> Result<()> {
    if !m.is_symmetric() {
        return Err(Error::Precondition("matrix is not symmetric".into()));
    }
    Ok(())
}

/// All eigenvalues in ascending order.
///
/// Each eigenvalue is isolated by interval splitting on Sturm counts and
/// bisected to `1e-14 * max(||m||, 1)`.
pub fn eig_symmetric_tridiagonal(m: &TridiagonalMatrix) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    Ok(symmetric_tridiagonal_eigenvalues(m.diag(), m.sub()))
}

pub fn symmetric_tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    let (lo, hi) = gershgorin(diag, off);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let tol = 1e-14 * scale;
    let pad = 1e-12 * scale;
    let mut out = vec![0.0; n];
    // Each stack entry: interval (a, b] with counts below a and b.
    let mut stack = vec![(lo - pad, hi + pad, 0usize, n)];
    while let Some((a, b, ca, cb)) = stack.pop() {
        if ca == cb {
            continue;
        }
        if b - a <= tol {
            for slot in &mut out[ca..cb] {
                *slot = 0.5 * (a + b);
            }
            continue;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            for slot in &mut out[ca..cb] {
                *slot = 0.5 * (a + b);
            }
            continue;
        }
        let cm = sturm_count(diag, off, mid);
        stack.push((a, mid, ca, cm));
        stack.push((mid, b, cm, cb));
    }
    out
}

/// Eigenvalues strictly above `threshold`, ascending.
pub fn eigenvalues_above(diag: &[f64], off: &[f64], threshold: f64) -> Vec<f64> {
    let n = diag.len();
    let below = sturm_count(diag, off, threshold);
    let (_, hi) = gershgorin(diag, off);
    let scale = hi.abs().max(threshold.abs()).max(1.0);
    (below..n).map(|k| kth_eigenvalue(diag, off, k, 1e-14 * scale)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn two_by_two() {
        let m = TridiagonalMatrix::symmetric(vec![2.0, 2.0], vec![-1.0]).unwrap();
        let ev = eig_symmetric_tridiagonal(&m).unwrap();
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dirichlet_laplacian_closed_form() {
        let d = 0.1;
        let n = 40;
        let m = TridiagonalMatrix::symmetric(vec![-2.0 * d; n], vec![d; n - 1]).unwrap();
        let ev = eig_symmetric_tridiagonal(&m).unwrap();
        let mut exact: Vec<f64> = (1..=n)
            .map(|k| -2.0 * d * (1.0 - (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos()))
            .collect();
        exact.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-10 * m.norm_inf());
        }
    }

    #[test]
    fn diagonal_matrix() {
        let m = TridiagonalMatrix::symmetric(vec![3.0, -1.0, 2.0, -1.0], vec![0.0; 3]).unwrap();
        let ev = eig_symmetric_tridiagonal(&m).unwrap();
        assert_eq!(ev.len(), 4);
        for (a, b) in ev.iter().zip(&[-1.0, -1.0, 2.0, 3.0]) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn nonsymmetric_is_rejected() {
        let m = TridiagonalMatrix::new(vec![1.0], vec![0.0, 0.0], vec![2.0]).unwrap();
        assert!(eig_symmetric_tridiagonal(&m).is_err());
    }

    proptest! {
        #[test]
        fn interval_counts_match_sturm(
            diag in prop::collection::vec(-3.0f64..3.0, 2..30),
            seed in 0u64..1000,
            a in -4.0f64..4.0,
            w in 0.0f64..3.0,
        ) {
            let n = diag.len();
            let off: Vec<f64> = (0..n - 1).map(|i| (((i as u64 * 31 + seed) % 17) as f64 / 8.0) - 1.0).collect();
            let ev = symmetric_tridiagonal_eigenvalues(&diag, &off);
            prop_assert_eq!(ev.len(), n);
            prop_assert!(ev.windows(2).all(|p| p[0] <= p[1]));
            let b = a + w;
            let in_interval = ev.iter().filter(|&&x| x >= a && x < b).count();
            let sturm = sturm_count(&diag, &off, b) - sturm_count(&diag, &off, a);
            // Agreement up to eigenvalues sitting within bisection tolerance of an endpoint.
            let near = ev.iter().filter(|&&x| (x - a).abs() < 1e-12 || (x - b).abs() < 1e-12).count();
            prop_assert!((in_interval as i64 - sturm as i64).abs() as usize <= near);
            let sum: f64 = ev.iter().sum();
            let trace: f64 = diag.iter().sum();
            prop_assert!((sum - trace).abs() < 1e-9 * (1.0 + trace.abs()));
        }
    }
}
