use serde::{Deserialize, Serialize};

use super::tridiag::{solve_tridiagonal, TridiagonalMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Converged once the residual infinity-norm is at or below this.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Initial step scale in (0, 1].
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-11, max_iter: 30, damping: 1.0 }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::Domain("abs_tol must be positive".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::Domain("max_iter must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Domain("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Residual infinity-norms, starting with the initial guess.
    pub residual_history: Vec<f64>,
}

/// Maximum absolute entry.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const MAX_HALVINGS: usize = 12;

/// Damped Newton iteration with a tridiagonal Jacobian.
///
/// The step scale halves whenever a trial step fails to decrease the
/// residual and resets to `cfg.damping` after each accepted decrease.
pub fn newton_solve<R, J>(residual_fn: R, jacobian_fn: J, x0: &[f64], cfg: &NewtonConfig) -> Result<NewtonOutcome>
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> TridiagonalMatrix,
{
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut r = residual_fn(&x);
    let mut rn = norm_inf(&r);
    let mut history = vec![rn];
    if rn <= cfg.abs_tol {
        return Ok(NewtonOutcome { solution: x, iterations: 0, residual_history: history });
    }
    for it in 1..=cfg.max_iter {
        let jac = jacobian_fn(&x);
        let step = solve_tridiagonal(&jac, &r)?;
        let mut alpha = cfg.damping;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - alpha * si).collect();
            let rt = residual_fn(&trial);
            let rtn = norm_inf(&rt);
            if rtn.is_finite() && rtn < rn {
                accepted = Some((trial, rt, rtn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, rt, rtn)) = accepted else {
            return Err(Error::NonConvergence { iterations: it, residual: rn });
        };
        x = trial;
        r = rt;
        rn = rtn;
        history.push(rn);
        if rn <= cfg.abs_tol {
            return Ok(NewtonOutcome { solution: x, iterations: it, residual_history: history });
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iter, residual: rn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{nonlinearity, nonlinearity_du};

    fn scalar(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, x0: f64) -> Result<NewtonOutcome> {
        newton_solve(
            |x: &[f64]| vec![f(x[0])],
            |x: &[f64]| TridiagonalMatrix::symmetric(vec![df(x[0])], vec![]).unwrap(),
            &[x0],
            &NewtonConfig { abs_tol: 1e-14, ..Default::default() },
        )
    }

    #[test]
    fn exact_root_needs_no_iteration() {
        let out = scalar(|u| nonlinearity(u, 0.3), |u| nonlinearity_du(u, 0.3), 1.0).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.residual_history.len(), 1);
    }

    #[test]
    fn scalar_cubic_converges_to_one() {
        let out = scalar(|u| nonlinearity(u, 0.3), |u| nonlinearity_du(u, 0.3), 0.9).unwrap();
        assert!((out.solution[0] - 1.0).abs() < 1e-13);
        assert!(out.iterations <= 6);
    }

    #[test]
    fn quadratic_convergence_tail() {
        let out = scalar(|u| nonlinearity(u, 0.3), |u| nonlinearity_du(u, 0.3), 0.8).unwrap();
        let h = &out.residual_history;
        // Once in the asymptotic regime the ratio r_{k+1} / r_k^2 stays bounded.
        let ratios: Vec<f64> = h
            .windows(2)
            .filter(|w| w[0] < 1e-2 && w[1] > 1e-15)
            .map(|w| w[1] / (w[0] * w[0]))
            .collect();
        assert!(!ratios.is_empty());
        let c = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(c < 50.0, "history {h:?}");
    }

    #[test]
    fn no_root_fails_cleanly() {
        let res = scalar(|u| u * u + 1.0, |u| 2.0 * u, 0.5);
        assert!(matches!(res, Err(Error::NonConvergence { .. }) | Err(Error::Singular { .. })));
    }

    #[test]
    fn invalid_config() {
        let cfg = NewtonConfig { abs_tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = NewtonConfig { damping: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
