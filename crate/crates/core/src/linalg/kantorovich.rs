//! Sampled Newton–Kantorovich style root certificate.
//!
//! For `H` with an invertible reference matrix `A = DH(x0)`, a root is unique
//! in the ball `B_rho(x0)` when
//!
//! * `||I - A^{-1} DH(x)|| <= kappa < 1` on the ball, and
//! * `||A^{-1} H(x0)|| <= (1 - kappa) rho`.
//!
//! The first bound is only *estimated* here, by sampling points of the ball.
//! The result is a convergence diagnostic, not a proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::newton::norm_inf;
use super::tridiag::TridiagonalMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_KANTOROVICH_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KantorovichCertificate {
    /// Largest sampled value of `||I - A^{-1} DH(x)||_inf`.
    pub kappa: f64,
    pub rho: f64,
    /// `||A^{-1} H(x0)||_inf`, the first Newton correction.
    pub initial_bound: f64,
    pub holds: bool,
    pub samples: usize,
    /// Always true: kappa comes from sampling, not from verified arithmetic.
    pub sampled: bool,
}

impl KantorovichCertificate {
    /// Bound on `|x* - x0|` implied by the certificate.
    pub fn root_distance_bound(&self) -> f64 {
        self.initial_bound / (1.0 - self.kappa)
    }
}

/// `||I - A^{-1} B||_inf` for tridiagonal `A`, `B` with `A` pre-factored.
fn contraction_norm(lu: &super::tridiag::TridiagonalLu, a: &TridiagonalMatrix, b: &TridiagonalMatrix) -> f64 {
    let n = a.dim();
    // I - A^{-1} B = A^{-1} (A - B); build column by column.
    let mut row_sums = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        for i in j.saturating_sub(1)..(j + 2).min(n) {
            col[i] = a.get(i, j) - b.get(i, j);
        }
        if col.iter().all(|&v| v == 0.0) {
            continue;
        }
        let x = lu.solve(&col);
        for (s, v) in row_sums.iter_mut().zip(&x) {
            *s += v.abs();
        }
    }
    row_sums.into_iter().fold(0.0, f64::max)
}

pub fn kantorovich_check<R, J>(
    residual_fn: R,
    jacobian_fn: J,
    x0: &[f64],
    rho: f64,
    n_samples: usize,
    seed: u64,
) -> Result<KantorovichCertificate>
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> TridiagonalMatrix,
{
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    let a = jacobian_fn(x0);
    let lu = a.factor()?;
    let h0 = residual_fn(x0);
    let initial_bound = norm_inf(&lu.solve(&h0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kappa: f64 = 0.0;
    for _ in 0..n_samples {
        let x: Vec<f64> = x0.iter().map(|v| v + rho * rng.random_range(-1.0..=1.0)).collect();
        kappa = kappa.max(contraction_norm(&lu, &a, &jacobian_fn(&x)));
    }
    let holds = kappa < 1.0 && initial_bound <= (1.0 - kappa) * rho;
    Ok(KantorovichCertificate { kappa, rho, initial_bound, holds, samples: n_samples, sampled: true })
}
