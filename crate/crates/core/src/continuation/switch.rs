use serde::{Deserialize, Serialize};

use super::engine::{correct, tangent};
use super::system::System;
use super::{BranchPoint, Event, EventKind};
use crate::error::{Error, Result};
use crate::lattice::{residual, LatticeParams};
use crate::linalg::norm_inf;
use crate::pulse::mirror_defect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchSettings {
    /// Initial offset relative to the l2 norm of the pitchfork profile.
    pub eps_factor: f64,
    pub retries: usize,
    /// `+1` or `-1`: which of the two mirror-image branches to enter.
    pub sign: f64,
    pub tol: f64,
}

impl Default for SwitchSettings {
    fn default() -> Self {
        Self { eps_factor: 1e-3, retries: 5, sign: 1.0, tol: 1e-11 }
    }
}

/// First point on the asymmetric branch emanating from a pitchfork.
///
/// The start is the symmetric profile plus `eps` times the reflection-odd
/// kernel vector; Newton corrects it with `mu` free while the projection on
/// the kernel vector stays at `eps`. The returned tangent points away from
/// the symmetric branch.
pub fn branch_switch(event: &Event, d: f64, cfg: &SwitchSettings) -> Result<BranchPoint> {
    if event.kind != EventKind::Pitchfork {
        return Err(Error::Precondition("branch switching needs a pitchfork event".into()));
    }
    let (point, phi, center) = match (&event.point, &event.null_vector, event.center) {
        (Some(p), Some(v), Some(c)) => (p, v, c),
        _ => return Err(Error::Precondition("pitchfork event carries no kernel vector".into())),
    };
    let sys = System::new(&point.profile, d, None)?;
    let n = sys.dim();
    let u0 = point.profile.values();
    let mut row = phi.clone();
    row.push(0.0);
    let mut eps = cfg.sign * cfg.eps_factor * point.profile.l2_norm();
    for _ in 0..=cfg.retries {
        let xp: Vec<f64> = u0.iter().zip(phi).map(|(u, p)| u + eps * p).collect();
        if let Ok((x, mu, _)) = correct(&sys, &xp, point.mu, &row, cfg.tol, 20) {
            let profile = sys.profile(&x)?;
            let moved = norm_inf(&x.iter().zip(u0).map(|(a, b)| a - b).collect::<Vec<_>>());
            let asym = mirror_defect(&profile, center);
            let r = norm_inf(&residual(&profile, LatticeParams { d, mu }));
            if asym > 1e-3 * eps.abs() && moved < 100.0 * eps.abs() && r <= cfg.tol {
                let mut t = tangent(&sys, &x, mu, &row)?;
                if cfg.sign < 0.0 {
                    t.iter_mut().for_each(|v| *v = -*v);
                }
                debug_assert_eq!(t.len(), n + 1);
                let mut bp = BranchPoint::new(profile, mu);
                bp.tangent = t;
                return Ok(bp);
            }
        }
        eps *= 0.5;
    }
    Err(Error::BranchSwitch { attempts: cfg.retries + 1 })
}
