//! Tridiagonal matrices bordered by one row and one column:
//!
//! ```text
//! [ A    b ] [x]   [f]
//! [ c^T  e ] [y] = [g]
//! ```
//!
//! Solved by block elimination plus iterative refinement, which stays
//! accurate when `A` is singular or nearly so (folds) as long as the full
//! matrix is not.

use serde::{Deserialize, Serialize};

use super::tridiag::{TridiagonalLu, TridiagonalMatrix};
use crate::error::{Error, Result};

/// Relative residual accepted after a bordered solve.
pub const BORDERED_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderedSystem {
    pub core: TridiagonalMatrix,
    pub border_col: Vec<f64>,
    pub border_row: Vec<f64>,
    pub corner: f64,
}

impl BorderedSystem {
    pub fn new(core: TridiagonalMatrix, border_col: Vec<f64>, border_row: Vec<f64>, corner: f64) -> Result<Self> {
        let n = core.dim();
        for v in [&border_col, &border_row] {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
        }
        Ok(Self { core, border_col, border_row, corner })
    }

    pub fn dim(&self) -> usize {
        self.core.dim() + 1
    }

    pub fn apply(&self, x: &[f64], y: f64) -> (Vec<f64>, f64) {
        let mut top = self.core.matvec(x);
        for (t, b) in top.iter_mut().zip(&self.border_col) {
            *t += b * y;
        }
        let bottom = dot(&self.border_row, x) + self.corner * y;
        (top, bottom)
    }

    pub fn norm_inf(&self) -> f64 {
        let core_rows = (0..self.core.dim()).map(|i| {
            let mut s = self.core.diag()[i].abs() + self.border_col[i].abs();
            if i > 0 {
                s += self.core.sub()[i - 1].abs();
            }
            if i + 1 < self.core.dim() {
                s += self.core.sup()[i].abs();
            }
            s
        });
        let last = self.border_row.iter().map(|v| v.abs()).sum::<f64>() + self.corner.abs();
        core_rows.fold(last, f64::max)
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.core.dim();
        let mut m = self.core.to_dense();
        for (row, b) in m.iter_mut().zip(&self.border_col) {
            row.push(*b);
        }
        let mut last = self.border_row.clone();
        last.push(self.corner);
        m.push(last);
        debug_assert_eq!(m.len(), n + 1);
        m
    }

    pub fn factor(&self) -> Result<BorderedFactor<'_>> {
        BorderedFactor::new(self)
    }
}

enum Inner {
    Block { lu: TridiagonalLu, w: Vec<f64>, schur: f64 },
    Dense { lu: Vec<Vec<f64>>, perm: Vec<usize>, sign: f64 },
}

/// Reusable factorization of a [`BorderedSystem`].
pub struct BorderedFactor<'a> {
    sys: &'a BorderedSystem,
    inner: Inner,
}

impl<'a> BorderedFactor<'a> {
    fn new(sys: &'a BorderedSystem) -> Result<Self> {
        if let Ok(lu) = sys.core.factor() {
            let scale = sys.core.norm_inf().max(f64::MIN_POSITIVE);
            if lu.min_abs_pivot() > 1e-14 * scale {
                let w = lu.solve(&sys.border_col);
                let schur = sys.corner - dot(&sys.border_row, &w);
                let wn = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                if schur.is_finite() && schur.abs() > 1e-15 * wn * scale.max(1.0) {
                    return Ok(Self { sys, inner: Inner::Block { lu, w, schur } });
                }
            }
        }
        let (lu, perm, sign) = dense_lu(sys.to_dense()).map_err(|_| Error::SingularBordered { schur: 0.0 })?;
        Ok(Self { sys, inner: Inner::Dense { lu, perm, sign } })
    }

    fn raw_solve(&self, f: &[f64], g: f64) -> (Vec<f64>, f64) {
        match &self.inner {
            Inner::Block { lu, w, schur } => {
                let v = lu.solve(f);
                let y = (g - dot(&self.sys.border_row, &v)) / schur;
                let x = v.iter().zip(w).map(|(vi, wi)| vi - y * wi).collect();
                (x, y)
            }
            Inner::Dense { lu, perm, .. } => {
                let mut rhs = f.to_vec();
                rhs.push(g);
                let mut z = dense_solve(lu, perm, &rhs);
                let y = z.pop().unwrap();
                (z, y)
            }
        }
    }

    /// Sign of the determinant of the full bordered matrix.
    pub fn det_sign(&self) -> f64 {
        match &self.inner {
            Inner::Block { lu, schur, .. } => lu.det_sign() * schur.signum(),
            Inner::Dense { sign, .. } => *sign,
        }
    }

    /// Solve with up to three steps of iterative refinement.
    pub fn solve(&self, f: &[f64], g: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.sys.core.dim();
        if f.len() != n {
            return Err(Error::Dimension { expected: n, got: f.len() });
        }
        let (mut x, mut y) = self.raw_solve(f, g);
        let norm = self.sys.norm_inf();
        let rhs_norm = f.iter().fold(g.abs(), |m, v| m.max(v.abs()));
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let (top, bottom) = self.sys.apply(&x, y);
            let rt: Vec<f64> = f.iter().zip(&top).map(|(a, b)| a - b).collect();
            let rb = g - bottom;
            let err = rt.iter().fold(rb.abs(), |m, v| m.max(v.abs()));
            let z_norm = x.iter().fold(y.abs(), |m, v| m.max(v.abs()));
            let denom = norm * z_norm + rhs_norm;
            rel = if denom > 0.0 { err / denom } else { err };
            if !rel.is_finite() {
                break;
            }
            if rel <= 1e-15 {
                break;
            }
            let (dx, dy) = self.raw_solve(&rt, rb);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            y += dy;
        }
        if rel <= BORDERED_RESIDUAL_TOL && x.iter().all(|v| v.is_finite()) && y.is_finite() {
            Ok((x, y))
        } else {
            let schur = match &self.inner {
                Inner::Block { schur, .. } => *schur,
                Inner::Dense { .. } => 0.0,
            };
            Err(Error::SingularBordered { schur })
        }
    }
}

/// Solves the bordered system for right-hand side `(rhs, rhs_corner)`.
pub fn solve_bordered(b: &BorderedSystem, rhs: &[f64], rhs_corner: f64) -> Result<(Vec<f64>, f64)> {
    b.factor()?.solve(rhs, rhs_corner)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

type DenseLu = (Vec<Vec<f64>>, Vec<usize>, f64);

pub(crate) fn dense_lu(mut a: Vec<Vec<f64>>) -> std::result::Result<DenseLu, usize> {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, pv) = (k..n).map(|i| (i, a[i][k].abs())).fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if pv <= 1e-15 * scale {
            return Err(k);
        }
        if p != k {
            a.swap(p, k);
            perm.swap(p, k);
            sign = -sign;
        }
        if a[k][k] < 0.0 {
            sign = -sign;
        }
        let pivot_row = a[k].clone();
        for row in a.iter_mut().skip(k + 1) {
            let factor = row[k] / pivot_row[k];
            if factor != 0.0 {
                row[k] = factor;
                for j in k + 1..n {
                    row[j] -= factor * pivot_row[j];
                }
            } else {
                row[k] = 0.0;
            }
        }
    }
    Ok((a, perm, sign))
}

pub(crate) fn dense_solve(lu: &[Vec<f64>], perm: &[usize], rhs: &[f64]) -> Vec<f64> {
    let n = lu.len();
    let mut x: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
    for i in 0..n {
        for j in 0..i {
            x[i] -= lu[i][j] * x[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] -= lu[i][j] * x[j];
        }
        x[i] /= lu[i][i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_tridiagonal;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_border_reduces_to_core_solve() {
        let core = TridiagonalMatrix::symmetric(vec![3.0, 2.5, 4.0, 3.0], vec![1.0, -0.5, 0.25]).unwrap();
        let sys = BorderedSystem::new(core.clone(), vec![0.0; 4], vec![0.0; 4], 1.0).unwrap();
        let f = vec![1.0, 2.0, -1.0, 0.5];
        let (x, y) = solve_bordered(&sys, &f, 0.0).unwrap();
        let xc = solve_tridiagonal(&core, &f).unwrap();
        for (a, b) in x.iter().zip(&xc) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        assert_eq!(y, 0.0);
    }

    #[test]
    fn singular_core_completed_by_border() {
        // Fold model: A = diag(0, 1, 2) is singular; border along the null direction.
        let core = TridiagonalMatrix::new(vec![0.0, 0.0], vec![0.0, 1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let sys = BorderedSystem::new(core, vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], 0.0).unwrap();
        // Solution (x, y) = ((1, 1, 1), 2): A x + b y = (2, 1, 2), c.x = 1.
        let (x, y) = solve_bordered(&sys, &[2.0, 1.0, 2.0], 1.0).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[2], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn genuinely_singular_system_is_reported() {
        let core = TridiagonalMatrix::new(vec![0.0, 0.0], vec![0.0, 1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let sys = BorderedSystem::new(core, vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0], 0.0).unwrap();
        assert!(matches!(solve_bordered(&sys, &[1.0, 1.0, 1.0], 0.0), Err(Error::SingularBordered { .. })));
    }

    #[test]
    fn random_systems_have_small_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 17, 120] {
            let sub: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sup: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let core = TridiagonalMatrix::new(sub, diag, sup).unwrap();
            let col: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sys = BorderedSystem::new(core, col, row, rng.random_range(-1.0..1.0)).unwrap();
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = rng.random_range(-1.0..1.0);
            let (x, y) = solve_bordered(&sys, &f, g).unwrap();
            let (top, bottom) = sys.apply(&x, y);
            let err = top.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold((bottom - g).abs(), f64::max);
            let zn = x.iter().fold(y.abs(), |m, v| m.max(v.abs()));
            assert!(err <= 1e-10 * (sys.norm_inf() * zn + 1.0), "n={n} err={err}");
        }
    }

    #[test]
    fn determinant_sign_matches_dense() {
        let core = TridiagonalMatrix::new(vec![1.0, 2.0], vec![2.0, -1.0, 3.0], vec![0.5, 1.0]).unwrap();
        let sys = BorderedSystem::new(core, vec![1.0, 0.0, -1.0], vec![0.0, 2.0, 1.0], 0.5).unwrap();
        let (_, _, sign) = dense_lu(sys.to_dense()).unwrap();
        assert_eq!(sys.factor().unwrap().det_sign(), sign);
    }
}
