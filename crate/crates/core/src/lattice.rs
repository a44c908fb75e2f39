//! Steady states of the discrete Nagumo lattice
//!
//! ```text
//! 0 = d (u[n+1] + u[n-1] - 2 u[n]) + f(u[n]; mu),   f(u; mu) = u (u - mu) (1 - u)
//! ```
//!
//! posed on a finite window of sites with constant ghost values outside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::TridiagonalMatrix;

/// Coupling strength and bifurcation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub d: f64,
    pub mu: f64,
}

impl LatticeParams {
    pub fn new(d: f64, mu: f64) -> Result<Self> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::Domain(format!("coupling d must be finite and >= 0, got {d}")));
        }
        if !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be finite, got {mu}")));
        }
        Ok(Self { d, mu })
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }
}

/// Value held by the ghost sites just outside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    DirichletZero,
    /// Complemented ghosts, produced by the `u -> 1 - u` involution.
    DirichletOne,
}

impl Boundary {
    pub fn ghost(self) -> f64 {
        match self {
            Boundary::DirichletZero => 0.0,
            Boundary::DirichletOne => 1.0,
        }
    }

    pub fn complement(self) -> Self {
        match self {
            Boundary::DirichletZero => Boundary::DirichletOne,
            Boundary::DirichletOne => Boundary::DirichletZero,
        }
    }
}

/// The three spatially homogeneous steady states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomogeneousState {
    Zero,
    Mu,
    One,
}

impl HomogeneousState {
    pub fn value(self, mu: f64) -> f64 {
        match self {
            HomogeneousState::Zero => 0.0,
            HomogeneousState::Mu => mu,
            HomogeneousState::One => 1.0,
        }
    }

    /// Constant profile on `len` sites starting at `n_min`.
    pub fn profile(self, n_min: i64, len: usize, mu: f64) -> Result<LatticeProfile> {
        LatticeProfile::new(n_min, vec![self.value(mu); len])
    }
}

/// Minimum number of sites in a window.
pub const MIN_WINDOW: usize = 3;

/// Lattice values on the window `n_min ..= n_min + len - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeProfile {
    n_min: i64,
    values: Vec<f64>,
    boundary: Boundary,
}

impl LatticeProfile {
    pub fn new(n_min: i64, values: Vec<f64>) -> Result<Self> {
        Self::with_boundary(n_min, values, Boundary::DirichletZero)
    }

    pub fn with_boundary(n_min: i64, values: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if values.len() < MIN_WINDOW {
            return Err(Error::Domain(format!(
                "window must hold at least {MIN_WINDOW} sites, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at site {}", n_min + i as i64)));
        }
        Ok(Self { n_min, values, boundary })
    }

    /// Profile centered on site 0 with `half_width` sites on each side.
    pub fn zeros_centered(half_width: usize) -> Self {
        let len = 2 * half_width + 1;
        Self { n_min: -(half_width as i64), values: vec![0.0; len], boundary: Boundary::DirichletZero }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at lattice index `n`; ghost value outside the window.
    pub fn get(&self, n: i64) -> f64 {
        if n < self.n_min || n > self.n_max() {
            self.boundary.ghost()
        } else {
            self.values[(n - self.n_min) as usize]
        }
    }

    /// Same window and boundary, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Dimension { expected: self.values.len(), got: values.len() });
        }
        Self::with_boundary(self.n_min, values, self.boundary)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest deviation from the ghost value over the outermost `width` sites on either side.
    pub fn edge_deviation(&self, width: usize) -> f64 {
        let g = self.boundary.ghost();
        let w = width.min(self.values.len());
        let left = self.values[..w].iter();
        let right = self.values[self.values.len() - w..].iter();
        left.chain(right).map(|v| (v - g).abs()).fold(0.0, f64::max)
    }

    /// Mirror image about `center`. The window is mirrored with the values.
    pub fn reflect(&self, center: Center) -> Result<Self> {
        let twice = center.twice();
        if twice < 2 * self.n_min || twice > 2 * self.n_max() {
            return Err(Error::Domain(format!(
                "reflection center {} outside window [{}, {}]",
                center,
                self.n_min,
                self.n_max()
            )));
        }
        let mut values = self.values.clone();
        values.reverse();
        Ok(Self { n_min: twice - self.n_max(), values, boundary: self.boundary })
    }

    /// `[S^k u]_n = u_{n+k}`.
    pub fn shift(&self, k: i64) -> Self {
        Self { n_min: self.n_min - k, values: self.values.clone(), boundary: self.boundary }
    }

    /// Restriction (or zero/ghost extension) onto another window.
    pub fn rewindow(&self, n_min: i64, len: usize) -> Result<Self> {
        let values = (0..len as i64).map(|i| self.get(n_min + i)).collect();
        Self::with_boundary(n_min, values, self.boundary)
    }

    /// Largest absolute difference to `other` over the union of both windows.
    pub fn distance_inf(&self, other: &Self) -> f64 {
        let lo = self.n_min.min(other.n_min);
        let hi = self.n_max().max(other.n_max());
        (lo..=hi).map(|n| (self.get(n) - other.get(n)).abs()).fold(0.0, f64::max)
    }
}

/// A reflection center stored as twice its lattice coordinate: even values
/// are sites (on-site), odd values are bonds between sites (off-site).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Center(i64);

impl Center {
    pub fn site(n: i64) -> Self {
        Center(2 * n)
    }

    /// The bond between sites `n` and `n + 1`.
    pub fn bond(n: i64) -> Self {
        Center(2 * n + 1)
    }

    pub fn from_twice(twice: i64) -> Self {
        Center(twice)
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn is_on_site(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn mirror(self, n: i64) -> i64 {
        self.0 - n
    }
}

impl std::fmt::Display for Center {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_on_site() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}", self.as_f64())
        }
    }
}

/// On-site nonlinearity of a bistable lattice. Only the Nagumo cubic ships.
pub trait Nonlinearity {
    fn value(&self, u: f64, mu: f64) -> f64;
    fn du(&self, u: f64, mu: f64) -> f64;
    fn du2(&self, u: f64, mu: f64) -> f64;
    fn dmu(&self, u: f64, mu: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NagumoCubic;

impl Nonlinearity for NagumoCubic {
    #[inline]
    fn value(&self, u: f64, mu: f64) -> f64 {
        nonlinearity(u, mu)
    }
    #[inline]
    fn du(&self, u: f64, mu: f64) -> f64 {
        nonlinearity_du(u, mu)
    }
    #[inline]
    fn du2(&self, u: f64, mu: f64) -> f64 {
        nonlinearity_du2(u, mu)
    }
    #[inline]
    fn dmu(&self, u: f64, _mu: f64) -> f64 {
        nonlinearity_dmu(u)
    }
}

/// `f(u; mu) = u (u - mu) (1 - u)`
#[inline]
pub fn nonlinearity(u: f64, mu: f64) -> f64 {
    u * (u - mu) * (1.0 - u)
}

/// `f'(u) = -3u^2 + 2(1 + mu) u - mu`
#[inline]
pub fn nonlinearity_du(u: f64, mu: f64) -> f64 {
    -3.0 * u * u + 2.0 * (1.0 + mu) * u - mu
}

#[inline]
pub fn nonlinearity_du2(u: f64, mu: f64) -> f64 {
    -6.0 * u + 2.0 * (1.0 + mu)
}

/// `df/dmu = -u (1 - u)`
#[inline]
pub fn nonlinearity_dmu(u: f64) -> f64 {
    -u * (1.0 - u)
}

/// Residual on raw window values with constant ghosts. `out` must match `u` in length.
pub fn residual_slice_with<N: Nonlinearity>(
    nl: &N,
    u: &[f64],
    ghost: f64,
    params: LatticeParams,
    out: &mut [f64],
) {
    let n = u.len();
    debug_assert_eq!(out.len(), n);
    let LatticeParams { d, mu } = params;
    for i in 0..n {
        let left = if i == 0 { ghost } else { u[i - 1] };
        let right = if i + 1 == n { ghost } else { u[i + 1] };
        out[i] = d * (left + right - 2.0 * u[i]) + nl.value(u[i], mu);
    }
}

pub fn residual_slice(u: &[f64], ghost: f64, params: LatticeParams, out: &mut [f64]) {
    residual_slice_with(&NagumoCubic, u, ghost, params, out)
}

/// Steady-state residual entry by entry over the window.
pub fn residual(p: &LatticeProfile, params: LatticeParams) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    residual_slice(p.values(), p.boundary().ghost(), params, &mut out);
    out
}

pub fn residual_with<N: Nonlinearity>(nl: &N, p: &LatticeProfile, params: LatticeParams) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    residual_slice_with(nl, p.values(), p.boundary().ghost(), params, &mut out);
    out
}

/// Jacobian of the residual in `u`: `diag = -2d + f'(u_n)`, off-diagonals `d`.
pub fn jacobian_slice(u: &[f64], params: LatticeParams) -> TridiagonalMatrix {
    let n = u.len();
    let diag = u.iter().map(|&x| -2.0 * params.d + nonlinearity_du(x, params.mu)).collect();
    let off = vec![params.d; n.saturating_sub(1)];
    TridiagonalMatrix::from_parts_unchecked(off.clone(), diag, off)
}

pub fn jacobian(p: &LatticeProfile, params: LatticeParams) -> TridiagonalMatrix {
    jacobian_slice(p.values(), params)
}

/// Derivative of the residual with respect to `mu`.
pub fn residual_dmu(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&x| nonlinearity_dmu(x)).collect()
}

/// Image under `u -> 1 - u`, `mu -> 1 - mu`.
///
/// The ghosts are complemented too, so on the image the residual is exactly
/// the negated residual of the original, entry by entry, edges included.
pub fn involution_u_to_one_minus_u(
    p: &LatticeProfile,
    params: LatticeParams,
) -> (LatticeProfile, LatticeParams) {
    let values = p.values().iter().map(|v| 1.0 - v).collect();
    let image = LatticeProfile { n_min: p.n_min, values, boundary: p.boundary.complement() };
    (image, LatticeParams { d: params.d, mu: 1.0 - params.mu })
}

/// Free-function form of [`LatticeProfile::reflect`].
pub fn reflect(p: &LatticeProfile, center: Center) -> Result<LatticeProfile> {
    p.reflect(center)
}

/// Free-function form of [`LatticeProfile::shift`].
pub fn shift(p: &LatticeProfile, k: i64) -> LatticeProfile {
    p.shift(k)
}
