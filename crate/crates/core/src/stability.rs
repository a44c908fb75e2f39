//! Spectra of the linearization about steady states.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{Branch, EventKind};
use crate::error::{Error, Result};
use crate::lattice::{jacobian, Center, LatticeParams, LatticeProfile};
use crate::linalg::{solve_tridiagonal, sturm_count, symmetric_tridiagonal_eigenvalues, TridiagonalMatrix};

pub const DEFAULT_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub unstable_count: usize,
    /// Eigenvalues with `|lambda| <= margin`.
    pub marginal_count: usize,
    pub max_eig: f64,
    pub margin: f64,
}

pub fn spectrum(p: &LatticeProfile, params: LatticeParams, margin: f64) -> Result<SpectrumSummary> {
    if !(margin > 0.0) {
        return Err(Error::Domain(format!("margin must be positive, got {margin}")));
    }
    let j = jacobian(p, params);
    let eigenvalues = symmetric_tridiagonal_eigenvalues(j.diag(), j.sub());
    let unstable_count = eigenvalues.iter().filter(|&&l| l > margin).count();
    let marginal_count = eigenvalues.iter().filter(|&&l| l.abs() <= margin).count();
    let max_eig = eigenvalues.last().copied().unwrap_or(f64::NEG_INFINITY);
    Ok(SpectrumSummary { eigenvalues, unstable_count, marginal_count, max_eig, margin })
}

/// Number of eigenvalues `>= x` of a symmetric tridiagonal matrix.
pub fn count_at_or_above(m: &TridiagonalMatrix, x: f64) -> usize {
    m.dim() - sturm_count(m.diag(), m.sub(), x)
}

/// Jacobian blocks on the reflection-even and reflection-odd subspaces.
///
/// The window must be mirror symmetric about `center`. Both blocks are
/// symmetric tridiagonal and orthogonally similar to the restriction of the
/// full Jacobian, so their spectra together make up the full spectrum.
#[derive(Debug, Clone)]
pub struct SectorBlocks {
    pub symmetric: TridiagonalMatrix,
    pub antisymmetric: TridiagonalMatrix,
    pub center: Center,
}

/// Index of the center site (on-site) or of the first site right of the center bond.
fn half_start(p: &LatticeProfile, center: Center) -> Result<usize> {
    if p.n_min() + p.n_max() != center.twice() {
        return Err(Error::Precondition(format!(
            "window [{}, {}] is not mirror symmetric about {center}",
            p.n_min(),
            p.n_max()
        )));
    }
    Ok(((center.twice() + 1).div_euclid(2) - p.n_min()) as usize)
}

pub fn sector_blocks(p: &LatticeProfile, params: LatticeParams, center: Center) -> Result<SectorBlocks> {
    let m = half_start(p, center)?;
    let j = jacobian(p, params);
    let d = params.d;
    let diag = &j.diag()[m..];
    let off = vec![d; diag.len() - 1];
    let (symmetric, antisymmetric) = if center.is_on_site() {
        let mut sym_off = off.clone();
        if let Some(first) = sym_off.first_mut() {
            *first = std::f64::consts::SQRT_2 * d;
        }
        let sym = TridiagonalMatrix::symmetric(diag.to_vec(), sym_off)?;
        let anti = if diag.len() > 1 {
            TridiagonalMatrix::symmetric(diag[1..].to_vec(), off[1..].to_vec())?
        } else {
            return Err(Error::Precondition("window too small for an antisymmetric sector".into()));
        };
        (sym, anti)
    } else {
        let mut sym_diag = diag.to_vec();
        let mut anti_diag = diag.to_vec();
        sym_diag[0] += d;
        anti_diag[0] -= d;
        (TridiagonalMatrix::symmetric(sym_diag, off.clone())?, TridiagonalMatrix::symmetric(anti_diag, off)?)
    };
    Ok(SectorBlocks { symmetric, antisymmetric, center })
}

/// Unit eigenvector of a symmetric tridiagonal matrix for the eigenvalue
/// nearest `shift`, by inverse iteration.
pub fn eigenvector_near(m: &TridiagonalMatrix, shift: f64) -> Result<Vec<f64>> {
    let n = m.dim();
    let scale = m.norm_inf().max(1.0);
    let mut shifted = m.clone();
    // Offset keeps the shifted matrix numerically nonsingular.
    let mut eps = 1e-10 * scale;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 % 13) as f64)).collect();
    normalize(&mut v);
    for _ in 0..4 {
        shifted.diag_mut().iter_mut().zip(m.diag()).for_each(|(s, &a)| *s = a - shift - eps);
        match solve_tridiagonal(&shifted, &v) {
            Ok(mut w) if w.iter().all(|x| x.is_finite()) => {
                for _ in 0..6 {
                    normalize(&mut w);
                    w = solve_tridiagonal(&shifted, &w)?;
                }
                normalize(&mut w);
                return Ok(w);
            }
            _ => eps *= 10.0,
        }
        v.iter_mut().enumerate().for_each(|(i, x)| *x += 1e-3 * i as f64);
    }
    Err(Error::Precondition("inverse iteration failed".into()))
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Reflection-odd null direction lifted to the full window, unit length.
pub fn antisymmetric_null_vector(p: &LatticeProfile, params: LatticeParams, center: Center) -> Result<Vec<f64>> {
    let blocks = sector_blocks(p, params, center)?;
    let v = eigenvector_near(&blocks.antisymmetric, 0.0)?;
    let m = half_start(p, center)?;
    let mut phi = vec![0.0; p.len()];
    if center.is_on_site() {
        for (j, &x) in v.iter().enumerate() {
            phi[m + 1 + j] = x;
            phi[m - 1 - j] = -x;
        }
    } else {
        for (j, &x) in v.iter().enumerate() {
            phi[m + j] = x;
            phi[m - 1 - j] = -x;
        }
    }
    normalize(&mut phi);
    Ok(phi)
}

/// Fills `unstable_count` for every point and returns the spectra.
///
/// A change of the count between consecutive points that is not within one
/// step of a Fold or Pitchfork event is reported as a warning on the branch.
pub fn annotate_branch(branch: &mut Branch, margin: f64) -> Result<Vec<SpectrumSummary>> {
    let params = LatticeParams { d: branch.d, mu: 0.0 };
    let spectra: Vec<SpectrumSummary> = branch
        .points
        .par_iter()
        .map(|pt| spectrum(&pt.profile, params.with_mu(pt.mu), margin))
        .collect::<Result<_>>()?;
    for (pt, sp) in branch.points.iter_mut().zip(&spectra) {
        pt.unstable_count = Some(sp.unstable_count);
    }
    for i in 1..spectra.len() {
        let (a, b) = (spectra[i - 1].unstable_count, spectra[i].unstable_count);
        if a == b {
            continue;
        }
        let (s_lo, s_hi) = (branch.points[i - 1].s, branch.points[i].s);
        let step = s_hi - s_lo;
        let near = branch.events.iter().any(|e| {
            matches!(e.kind, EventKind::Fold | EventKind::Pitchfork) && e.s_at >= s_lo - step && e.s_at <= s_hi + step
        });
        if !near {
            branch.warnings.push(format!(
                "unstable count changes {a} -> {b} between s = {s_lo:.6} and s = {s_hi:.6} with no event nearby"
            ));
        }
    }
    Ok(spectra)
}
