use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thomas pivots smaller than this trigger the pivoted fallback.
pub const THOMAS_PIVOT_FLOOR: f64 = 1e-13;

/// Square tridiagonal matrix. `sub[i]` is entry `(i+1, i)`, `sup[i]` is `(i, i+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalMatrix {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::Domain("empty tridiagonal matrix".into()));
        }
        for band in [&sub, &sup] {
            if band.len() != n - 1 {
                return Err(Error::Dimension { expected: n - 1, got: band.len() });
            }
        }
        if sub.iter().chain(&diag).chain(&sup).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        Ok(Self { sub, diag, sup })
    }

    pub(crate) fn from_parts_unchecked(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Self {
        debug_assert!(sub.len() + 1 == diag.len() && sup.len() + 1 == diag.len());
        Self { sub, diag, sup }
    }

    pub fn symmetric(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        Self::new(off.clone(), diag, off)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts_unchecked(vec![0.0; n.saturating_sub(1)], vec![1.0; n], vec![0.0; n.saturating_sub(1)])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.diag
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    pub fn transpose(&self) -> Self {
        Self { sub: self.sup.clone(), diag: self.diag.clone(), sup: self.sub.clone() }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n, "matvec dimension");
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.sub[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.sup[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Entry `(i, j)`, zero off the three bands.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j + 1 == i {
            self.sub[j]
        } else if i + 1 == j {
            self.sup[i]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// LU factorization with partial pivoting (two super-diagonals of fill-in).
    pub fn factor(&self) -> Result<TridiagonalLu> {
        TridiagonalLu::new(self)
    }
}

/// Pivoted LU of a tridiagonal matrix, as in LAPACK `gttrf`.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn new(m: &TridiagonalMatrix) -> Result<Self> {
        let n = m.dim();
        let mut dl = m.sub.clone();
        let mut d = m.diag.clone();
        let mut du = m.sup.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(Error::Singular { index: i });
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            return Err(Error::Singular { index: n - 1 });
        }
        Ok(Self { dl, d, du, du2, swapped })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - self.dl[i] * x[i];
            } else {
                x[i + 1] -= self.dl[i] * x[i];
            }
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }

    /// Sign of the determinant: product of pivot signs times the permutation parity.
    pub fn det_sign(&self) -> f64 {
        let mut s = 1.0;
        for &p in &self.d {
            if p < 0.0 {
                s = -s;
            }
        }
        for &sw in &self.swapped {
            if sw {
                s = -s;
            }
        }
        s
    }

    pub fn min_abs_pivot(&self) -> f64 {
        self.d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

fn thomas(m: &TridiagonalMatrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = m.dim();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = m.diag[0];
    if pivot.abs() < THOMAS_PIVOT_FLOOR {
        return None;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = m.sup[i - 1] / pivot;
        pivot = m.diag[i] - m.sub[i - 1] * c[i - 1];
        if pivot.abs() < THOMAS_PIVOT_FLOOR {
            return None;
        }
        x[i] = (rhs[i] - m.sub[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

fn residual_ok(m: &TridiagonalMatrix, x: &[f64], rhs: &[f64]) -> bool {
    let r = m.matvec(x);
    let err = r.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let x_norm = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let b_norm = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    err <= 1e-12 * (m.norm_inf() * x_norm + b_norm) && x.iter().all(|v| v.is_finite())
}

/// Solves `m x = rhs`. Thomas elimination first; pivoted elimination when a
/// Thomas pivot is tiny or the recomputed residual is too large.
pub fn solve_tridiagonal(m: &TridiagonalMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != m.dim() {
        return Err(Error::Dimension { expected: m.dim(), got: rhs.len() });
    }
    if let Some(x) = thomas(m, rhs) {
        if residual_ok(m, &x, rhs) {
            return Ok(x);
        }
    }
    let lu = m.factor()?;
    Ok(lu.solve(rhs))
}
