//! The steady-state equations, optionally restricted to reflection-even profiles.

use crate::error::{Error, Result};
use crate::lattice::{jacobian_slice, residual_dmu, residual_slice, Center, LatticeParams, LatticeProfile};
use crate::linalg::TridiagonalMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Reduction {
    Full,
    /// Unknowns are sites `m..` of the window; site `m` is the center.
    OnSite { m: usize },
    /// Unknowns are sites `m..`; the center bond is between `m - 1` and `m`.
    OffSite { m: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct System {
    pub d: f64,
    pub template: LatticeProfile,
    pub red: Reduction,
    weights: Vec<f64>,
}

impl System {
    pub fn new(template: &LatticeProfile, d: f64, center: Option<Center>) -> Result<Self> {
        let red = match center {
            None => Reduction::Full,
            Some(c) => {
                if template.n_min() + template.n_max() != c.twice() {
                    return Err(Error::Precondition(format!("window is not mirror symmetric about {c}")));
                }
                let m = ((c.twice() + 1).div_euclid(2) - template.n_min()) as usize;
                if c.is_on_site() {
                    Reduction::OnSite { m }
                } else {
                    Reduction::OffSite { m }
                }
            }
        };
        let n = template.len();
        let weights = match red {
            Reduction::Full => vec![1.0; n],
            Reduction::OnSite { m } => {
                let mut w = vec![2.0; n - m];
                w[0] = 1.0;
                w
            }
            Reduction::OffSite { m } => vec![2.0; n - m],
        };
        Ok(Self { d, template: template.clone(), red, weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Weighted inner product of profile parts only.
    pub fn dot_x(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..self.dim()).map(|i| self.weights[i] * a[i] * b[i]).sum()
    }

    pub fn reduce(&self, full: &[f64]) -> Vec<f64> {
        match self.red {
            Reduction::Full => full.to_vec(),
            Reduction::OnSite { m } | Reduction::OffSite { m } => full[m..].to_vec(),
        }
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        match self.red {
            Reduction::Full => x.to_vec(),
            Reduction::OnSite { m } => {
                let mut full = vec![0.0; self.template.len()];
                for (j, &v) in x.iter().enumerate() {
                    full[m + j] = v;
                    full[m - j] = v;
                }
                full
            }
            Reduction::OffSite { m } => {
                let mut full = vec![0.0; self.template.len()];
                for (j, &v) in x.iter().enumerate() {
                    full[m + j] = v;
                    full[m - 1 - j] = v;
                }
                full
            }
        }
    }

    /// Projection of a full vector onto the reduced coordinates after
    /// averaging mirror pairs.
    pub fn symmetrize(&self, full: &[f64]) -> Vec<f64> {
        match self.red {
            Reduction::Full => full.to_vec(),
            Reduction::OnSite { m } => (0..self.dim()).map(|j| 0.5 * (full[m + j] + full[m - j])).collect(),
            Reduction::OffSite { m } => (0..self.dim()).map(|j| 0.5 * (full[m + j] + full[m - 1 - j])).collect(),
        }
    }

    fn params(&self, mu: f64) -> LatticeParams {
        LatticeParams { d: self.d, mu }
    }

    pub fn residual(&self, x: &[f64], mu: f64) -> Vec<f64> {
        let full = self.expand(x);
        let mut r = vec![0.0; full.len()];
        residual_slice(&full, self.template.boundary().ghost(), self.params(mu), &mut r);
        self.reduce(&r)
    }

    pub fn jacobian(&self, x: &[f64], mu: f64) -> TridiagonalMatrix {
        let j = jacobian_slice(x, self.params(mu));
        match self.red {
            Reduction::Full => j,
            Reduction::OnSite { .. } => {
                let mut sup = j.sup().to_vec();
                if let Some(s) = sup.first_mut() {
                    *s = 2.0 * self.d;
                }
                TridiagonalMatrix::from_parts_unchecked(j.sub().to_vec(), j.diag().to_vec(), sup)
            }
            Reduction::OffSite { .. } => {
                let mut j = j;
                j.diag_mut()[0] += self.d;
                j
            }
        }
    }

    pub fn dmu(&self, x: &[f64]) -> Vec<f64> {
        residual_dmu(x)
    }

    pub fn profile(&self, x: &[f64]) -> Result<LatticeProfile> {
        self.template.with_values(self.expand(x))
    }

    /// Weighted inner product on `(x, mu)` pairs, equal to the Euclidean one on full profiles.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = a[n] * b[n];
        for i in 0..n {
            s += self.weights[i] * a[i] * b[i];
        }
        s
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    /// `w * a` in the profile part, the row that realizes `dot(a, .)`.
    pub fn weighted_row(&self, a: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut r: Vec<f64> = (0..n).map(|i| self.weights[i] * a[i]).collect();
        r.push(a[n]);
        r
    }
}
