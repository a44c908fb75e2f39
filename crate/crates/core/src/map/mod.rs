//! The steady-state equation read as a planar map
//!
//! ```text
//! (u, v) -> (v, 2 v - u - f(v; mu) / d)
//! ```
//!
//! with `(u_n, v_n) = (U_{n-1}, U_n)`. The map is reversible under the swap
//! `R(u, v) = (v, u)`, its fixed points `(0, 0)` and `(1, 1)` are saddles for
//! every `mu` in `(0, 1)`, and fronts of the lattice are its heteroclinic
//! orbits between them.

mod heteroclinic;
mod manifold;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{nonlinearity, nonlinearity_du, LatticeParams};

pub use heteroclinic::{
    find_tangency, heteroclinic_roots, verify_heteroclinic_loop, HeteroclinicRoot, LoopSettings, LoopTrace,
    ShootingSettings, TangencyEvent, TangencySide, TracePoint,
};
pub use manifold::{
    count_heteroclinic_intersections, grow_manifold, hausdorff_distance, Crossing, ManifoldArc, ManifoldSettings,
    Stability,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub u: f64,
    pub v: f64,
}

impl MapPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn reversed(self) -> Self {
        Self { u: self.v, v: self.u }
    }

    pub fn dist(self, other: Self) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// The spatial map for fixed `(d, mu)`.
///
/// `skew` splits the coupling into `d (1 + skew)` to the right and
/// `d (1 - skew)` to the left. Any nonzero skew destroys reversibility; it
/// exists as a negative control for [`check_reversibility`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NagumoMap {
    pub d: f64,
    pub mu: f64,
    pub skew: f64,
}

impl NagumoMap {
    pub fn new(params: LatticeParams) -> Result<Self> {
        if !(params.d > 0.0) {
            return Err(Error::SingularMap);
        }
        Ok(Self { d: params.d, mu: params.mu, skew: 0.0 })
    }

    pub fn with_skew(self, skew: f64) -> Self {
        Self { skew, ..self }
    }

    pub fn params(&self) -> LatticeParams {
        LatticeParams { d: self.d, mu: self.mu }
    }

    fn couplings(&self) -> (f64, f64) {
        (self.d * (1.0 - self.skew), self.d * (1.0 + self.skew))
    }

    pub fn forward(&self, p: MapPoint) -> MapPoint {
        let (dl, dr) = self.couplings();
        if self.skew == 0.0 {
            return MapPoint::new(p.v, 2.0 * p.v - p.u - nonlinearity(p.v, self.mu) / self.d);
        }
        MapPoint::new(p.v, ((dl + dr) * p.v - dl * p.u - nonlinearity(p.v, self.mu)) / dr)
    }

    /// Explicit inverse of [`forward`](Self::forward).
    pub fn backward(&self, p: MapPoint) -> MapPoint {
        let (dl, dr) = self.couplings();
        if self.skew == 0.0 {
            return MapPoint::new(2.0 * p.u - p.v - nonlinearity(p.u, self.mu) / self.d, p.u);
        }
        MapPoint::new(((dl + dr) * p.u - dr * p.v - nonlinearity(p.u, self.mu)) / dl, p.u)
    }

    pub fn iterate(&self, mut p: MapPoint, n: i64) -> MapPoint {
        if n >= 0 {
            for _ in 0..n {
                p = self.forward(p);
            }
        } else {
            for _ in 0..-n {
                p = self.backward(p);
            }
        }
        p
    }

    /// Jacobian `[[a, b], [c, e]]` of the forward map, row major.
    pub fn jacobian(&self, p: MapPoint) -> [[f64; 2]; 2] {
        let (dl, dr) = self.couplings();
        [[0.0, 1.0], [-dl / dr, (dl + dr - nonlinearity_du(p.v, self.mu)) / dr]]
    }
}

pub fn map_forward(p: MapPoint, params: LatticeParams) -> Result<MapPoint> {
    Ok(NagumoMap::new(params)?.forward(p))
}

pub fn map_backward(p: MapPoint, params: LatticeParams) -> Result<MapPoint> {
    Ok(NagumoMap::new(params)?.backward(p))
}

/// Largest `||F^-1(x) - R F(R x)||_inf` over `n_samples` points drawn
/// uniformly from `[-1, 2]^2`.
pub fn check_reversibility(map: &NagumoMap, n_samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let x = MapPoint::new(rng.random_range(-1.0..=2.0), rng.random_range(-1.0..=2.0));
        let a = map.backward(x);
        let b = map.forward(x.reversed()).reversed();
        worst = worst.max((a.u - b.u).abs().max((a.v - b.v).abs()));
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPoint {
    Origin,
    UStar,
}

impl FixedPoint {
    pub fn location(self) -> MapPoint {
        match self {
            FixedPoint::Origin => MapPoint::new(0.0, 0.0),
            FixedPoint::UStar => MapPoint::new(1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointInfo {
    pub which: FixedPoint,
    pub location: MapPoint,
    pub trace: f64,
    pub det: f64,
    /// Unstable eigenvalue; the stable one is `det / lambda`.
    pub lambda: f64,
    pub lambda_stable: f64,
    /// Unit eigenvectors with positive `u` component.
    pub eigvec_u: MapPoint,
    pub eigvec_s: MapPoint,
}

/// Eigen-data of the linearization at a fixed point, from its trace and determinant.
pub fn fixed_point_eigen(map: &NagumoMap, which: FixedPoint) -> Result<FixedPointInfo> {
    let location = which.location();
    let j = map.jacobian(location);
    let trace = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = trace * trace - 4.0 * det;
    if !(disc > 0.0) || !(trace > 0.0) || !(det > 0.0) {
        return Err(Error::NotHyperbolic { trace });
    }
    // Larger root directly, smaller through the product to avoid cancellation.
    let lambda = 0.5 * (trace + disc.sqrt());
    let lambda_stable = det / lambda;
    if !(lambda > 1.0 && lambda_stable < 1.0) {
        return Err(Error::NotHyperbolic { trace });
    }
    // Rows of J - lambda I: first row is [-lambda, 1], so (1, lambda) spans the kernel.
    let unit = |a: f64, b: f64| {
        let n = a.hypot(b);
        MapPoint::new(a / n, b / n)
    };
    Ok(FixedPointInfo {
        which,
        location,
        trace,
        det,
        lambda,
        lambda_stable,
        eigvec_u: unit(1.0, lambda),
        eigvec_s: unit(1.0, lambda_stable),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn map(d: f64, mu: f64) -> NagumoMap {
        NagumoMap::new(LatticeParams { d, mu }).unwrap()
    }

    #[test]
    fn fixed_points_are_fixed() {
        let m = map(0.1, 0.3);
        for fp in [FixedPoint::Origin, FixedPoint::UStar] {
            assert_eq!(m.forward(fp.location()), fp.location());
            assert_eq!(m.backward(fp.location()), fp.location());
        }
        let mid = MapPoint::new(0.3, 0.3);
        assert_abs_diff_eq!(m.forward(mid).v, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn round_trip_is_identity() {
        let m = map(0.1, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = MapPoint::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0));
            let q = m.backward(m.forward(p));
            assert_abs_diff_eq!(q.u, p.u, epsilon = 1e-12);
            assert_abs_diff_eq!(q.v, p.v, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_coupling_is_rejected() {
        assert!(matches!(NagumoMap::new(LatticeParams { d: 0.0, mu: 0.5 }), Err(Error::SingularMap)));
        assert!(map_forward(MapPoint::new(0.0, 0.0), LatticeParams { d: 0.0, mu: 0.5 }).is_err());
    }

    #[test]
    fn reversibility_holds_and_skew_breaks_it() {
        for mu in [0.1, 0.5, 0.9] {
            assert!(check_reversibility(&map(0.1, mu), 1000, 1) <= 1e-12);
        }
        assert!(check_reversibility(&map(0.1, 0.5).with_skew(0.1), 1000, 1) > 1e-2);
    }

    #[test]
    fn skewed_inverse_is_exact() {
        let m = map(0.1, 0.4).with_skew(0.1);
        let p = MapPoint::new(0.3, 0.7);
        let q = m.backward(m.forward(p));
        assert_abs_diff_eq!(q.u, p.u, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_at_mu_half() {
        let m = map(0.1, 0.5);
        let o = fixed_point_eigen(&m, FixedPoint::Origin).unwrap();
        assert_abs_diff_eq!(o.trace, 7.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o.lambda, (7.0 + 45f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.lambda * o.lambda_stable, 1.0, epsilon = 1e-14);
        let s = fixed_point_eigen(&m, FixedPoint::UStar).unwrap();
        assert_abs_diff_eq!(s.lambda, o.lambda, epsilon = 1e-12);
        // Eigenvectors satisfy J e = lambda e.
        let j = m.jacobian(o.location);
        let e = o.eigvec_u;
        assert_abs_diff_eq!(j[1][0] * e.u + j[1][1] * e.v, o.lambda * e.v, epsilon = 1e-12);
        // The swap exchanges the eigendirections.
        assert_abs_diff_eq!(o.eigvec_s.u, o.eigvec_u.v, epsilon = 1e-14);
    }

    #[test]
    fn origin_loses_hyperbolicity_at_mu_zero() {
        assert!(matches!(fixed_point_eigen(&map(0.1, 0.0), FixedPoint::Origin), Err(Error::NotHyperbolic { .. })));
        assert!(fixed_point_eigen(&map(0.1, 1e-6), FixedPoint::Origin).is_ok());
    }
}
