use super::system::System;
use super::{
    Branch, BranchPoint, ContinuationSettings, Direction, Event, EventKind, FoldSide, OpenReason, PeriodMatch, Sector,
    SymmetryMode, Topology,
};
use crate::error::{Error, Result};
use crate::lattice::{jacobian, residual, Center, LatticeParams};
use crate::linalg::{newton_solve, norm_inf, sturm_count, BorderedSystem, NewtonConfig};
use crate::pulse::{
    activated_extent, classify_symmetry, measure_pulse_structure, PulseSpec, SymmetryClass, DEFAULT_SYMMETRY_TOL,
};
use crate::stability::{antisymmetric_null_vector, count_at_or_above, sector_blocks};

/// Corrector tolerance used while bisecting for events.
const REFINE_TOL: f64 = 1e-13;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone)]
pub(crate) struct State {
    pub x: Vec<f64>,
    pub mu: f64,
    /// Unit tangent in the system's weighted norm, `mu` last.
    pub tan: Vec<f64>,
}

impl State {
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.push(self.mu);
        v
    }

    pub fn dmu(&self) -> f64 {
        self.tan[self.x.len()]
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Newton on `F(x, mu) = 0`, `row . ((x, mu) - (xp, mup)) = 0`.
pub(crate) fn correct(
    sys: &System,
    xp: &[f64],
    mup: f64,
    row: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = sys.dim();
    let mut x = xp.to_vec();
    let mut mu = mup;
    let mut first = f64::NAN;
    for it in 0..=max_iter {
        let f = sys.residual(&x, mu);
        let rn = norm_inf(&f);
        if !rn.is_finite() {
            break;
        }
        if it == 0 {
            first = rn;
        }
        let c: f64 = (0..n).map(|i| row[i] * (x[i] - xp[i])).sum::<f64>() + row[n] * (mu - mup);
        if rn <= tol && c.abs() <= 1e-12 {
            return Ok((x, mu, it));
        }
        if it == max_iter || rn > 1e3 * first.max(1e-8) {
            return Err(Error::NonConvergence { iterations: it, residual: rn });
        }
        let sys_b = BorderedSystem::new(sys.jacobian(&x, mu), sys.dmu(&x), row[..n].to_vec(), row[n])?;
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let (dx, dmu) = sys_b.factor()?.solve(&neg, -c)?;
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        mu += dmu;
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: f64::NAN })
}

/// Unit tangent with `row . t > 0`.
pub(crate) fn tangent(sys: &System, x: &[f64], mu: f64, row: &[f64]) -> Result<Vec<f64>> {
    let n = sys.dim();
    let b = BorderedSystem::new(sys.jacobian(x, mu), sys.dmu(x), row[..n].to_vec(), row[n])?;
    let (tx, tm) = b.factor()?.solve(&vec![0.0; n], 1.0)?;
    let mut t = tx;
    t.push(tm);
    let norm = sys.norm(&t);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::SingularBordered { schur: 0.0 });
    }
    t.iter_mut().for_each(|v| *v /= norm);
    Ok(t)
}

/// One predictor-corrector step of length `h` from `cur`.
pub(crate) fn step(sys: &System, cur: &State, h: f64, tol: f64, max_iter: usize) -> Result<(State, usize)> {
    let n = sys.dim();
    let xp: Vec<f64> = (0..n).map(|i| cur.x[i] + h * cur.tan[i]).collect();
    let mup = cur.mu + h * cur.tan[n];
    let row = sys.weighted_row(&cur.tan);
    let (x, mu, it) = correct(sys, &xp, mup, &row, tol, max_iter)?;
    let tan = tangent(sys, &x, mu, &row)?;
    Ok((State { x, mu, tan }, it))
}

fn refine_step(sys: &System, cur: &State, h: f64, cfg: &NewtonConfig) -> Option<State> {
    step(sys, cur, h, REFINE_TOL, cfg.max_iter + 4)
        .or_else(|_| step(sys, cur, h, cfg.abs_tol, cfg.max_iter + 4))
        .ok()
        .map(|(s, _)| s)
}

/// Bisection on a step length in `(0, hi]` where `past(eval(hi))` holds and
/// `past(eval(0))` does not. Returns the final step, its value, and whether
/// `done` was reached or the bracket collapsed.
pub(crate) fn bisect_by<T>(
    mut eval: impl FnMut(f64) -> Option<T>,
    hi: f64,
    past: impl Fn(&T) -> bool,
    done: impl Fn(&T) -> bool,
    min_width: f64,
) -> Option<(f64, T, bool)> {
    let mut lo = 0.0;
    let mut hi = hi;
    let mut best: Option<(f64, T)> = None;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = eval(mid)?;
        if done(&v) {
            return Some((mid, v, true));
        }
        if past(&v) {
            hi = mid;
            best = Some((mid, v));
        } else {
            lo = mid;
        }
        if hi - lo <= min_width {
            break;
        }
    }
    let collapsed = hi - lo <= min_width.max(4.0 * f64::EPSILON * hi.abs());
    match best {
        Some((h, v)) => Some((h, v, collapsed)),
        None => eval(hi).map(|v| (hi, v, collapsed)),
    }
}

enum SignChange {
    Genuine { h: f64, state: State, refined: bool },
    Jump { safe_h: f64 },
}

struct Runner<'a> {
    sys: System,
    settings: &'a ContinuationSettings,
    center: Option<Center>,
}

impl Runner<'_> {
    fn params(&self, mu: f64) -> LatticeParams {
        LatticeParams { d: self.sys.d, mu }
    }

    fn lift(&self, st: &State, s: f64) -> Result<BranchPoint> {
        let profile = self.sys.profile(&st.x)?;
        let n = self.sys.dim();
        let mut tangent = self.sys.expand(&st.tan[..n]);
        tangent.push(st.tan[n]);
        let measure = profile.l2_norm();
        Ok(BranchPoint { profile, mu: st.mu, s, tangent, unstable_count: None, measure })
    }

    fn anti_count(&self, st: &State) -> Option<usize> {
        let c = self.center?;
        let p = self.sys.profile(&st.x).ok()?;
        let blocks = sector_blocks(&p, self.params(st.mu), c).ok()?;
        Some(count_at_or_above(&blocks.antisymmetric, 0.0))
    }

    /// Second smallest eigenvalue modulus of the Jacobian on the space the
    /// branch lives in. Near a fold only the smallest one vanishes; when a
    /// second one is small too, other branches pass within about that distance.
    fn second_gap(&self, st: &State) -> Option<f64> {
        let p = self.sys.profile(&st.x).ok()?;
        let params = self.params(st.mu);
        let m = match self.center {
            Some(c) => sector_blocks(&p, params, c).ok()?.symmetric,
            None => jacobian(&p, params),
        };
        if m.dim() < 2 {
            return None;
        }
        let (diag, off) = (m.diag(), m.sub());
        let inside = |t: f64| sturm_count(diag, off, t) - sturm_count(diag, off, -t);
        let (mut lo, mut hi) = (0.0, 1.0);
        while inside(hi) < 2 {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) >= 2 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-3 * hi {
                break;
            }
        }
        Some(hi)
    }

    fn det_sign(&self, st: &State) -> Option<f64> {
        let n = self.sys.dim();
        let b =
            BorderedSystem::new(self.sys.jacobian(&st.x, st.mu), self.sys.dmu(&st.x), st.tan[..n].to_vec(), st.tan[n])
                .ok()?;
        Some(b.factor().ok()?.det_sign())
    }

    fn fold_event(&self, cur: &State, h_hi: f64, s_cur: f64, index: usize) -> Event {
        let sign0 = cur.dmu().signum();
        // Bisect to the bracket floor rather than stopping at the fold
        // tolerance: fold-pitchfork separations are measured in arclength.
        let found = bisect_by(
            |h| refine_step(&self.sys, cur, h, &self.settings.corrector),
            h_hi,
            |st: &State| st.dmu().signum() != sign0,
            |_| false,
            1e-14 * h_hi.max(1e-3),
        );
        let side = if sign0 > 0.0 { FoldSide::Right } else { FoldSide::Left };
        match found {
            Some((h, st, _)) => {
                let mut e = Event::bare(EventKind::Fold, st.mu, s_cur + h, index);
                e.refined = st.dmu().abs() < self.settings.fold_tol;
                e.side = Some(side);
                e.sector = if self.center.is_some() { Sector::Symmetric } else { Sector::None };
                e.curvature = self.curvature(cur, h);
                e.point = self.lift(&st, s_cur + h).ok();
                e
            }
            None => {
                let mut e = Event::bare(EventKind::Fold, cur.mu, s_cur, index);
                e.side = Some(side);
                e
            }
        }
    }

    /// `d^2 mu / ds^2` at step `h` from `cur`, by central differences of the tangent.
    fn curvature(&self, cur: &State, h: f64) -> Option<f64> {
        let eta = 1e-6f64.min(0.5 * h);
        let a = refine_step(&self.sys, cur, h - eta, &self.settings.corrector)?;
        let b = refine_step(&self.sys, cur, h + eta, &self.settings.corrector)?;
        Some((b.dmu() - a.dmu()) / (2.0 * eta))
    }

    fn pitchfork_event(&self, cur: &State, h_hi: f64, s_cur: f64, index: usize) -> Event {
        let c0 = self.anti_count(cur);
        let found = bisect_by(
            |h| {
                let st = refine_step(&self.sys, cur, h, &self.settings.corrector)?;
                let c = self.anti_count(&st)?;
                Some((st, c))
            },
            h_hi,
            |(_, c)| Some(*c) != c0,
            |_| false,
            1e-14 * h_hi.max(1.0),
        );
        self.branch_event(found.map(|(h, (st, _), ok)| (h, st, ok)), cur, s_cur, index, Sector::Antisymmetric)
    }

    /// Decides whether a sign change of the tangent-bordered determinant over
    /// the step `cur -> new` is a branch point on the path or a jump of the
    /// corrector to a neighbouring branch. Bisection keeps corrected states at
    /// both ends of the bracket; on a continuous path they end up close.
    fn resolve_sign_change(&self, cur: &State, new: &State, h_hi: f64) -> SignChange {
        let d0 = self.det_sign(cur);
        let (mut lo, mut hi) = (0.0, h_hi);
        let (mut s_lo, mut s_hi) = (cur.clone(), new.clone());
        let width = 1e-9 * h_hi;
        while hi - lo > width {
            let mid = 0.5 * (lo + hi);
            let Some(st) = refine_step(&self.sys, cur, mid, &self.settings.corrector) else {
                return SignChange::Jump { safe_h: 0.5 * mid };
            };
            if self.det_sign(&st) == d0 {
                lo = mid;
                s_lo = st;
            } else {
                hi = mid;
                s_hi = st;
            }
        }
        let gap = self.sys.norm(&diff(&s_hi.stacked(), &s_lo.stacked()));
        if gap <= 100.0 * (hi - lo) + 1e-8 {
            SignChange::Genuine { h: hi, state: s_hi, refined: hi - lo <= width }
        } else {
            SignChange::Jump { safe_h: 0.5 * lo }
        }
    }

    fn branch_event(
        &self,
        found: Option<(f64, State, bool)>,
        cur: &State,
        s_cur: f64,
        index: usize,
        sector: Sector,
    ) -> Event {
        match found {
            Some((h, st, ok)) => {
                let mut e = Event::bare(EventKind::Pitchfork, st.mu, s_cur + h, index);
                e.refined = ok;
                e.sector = sector;
                e.center = self.center;
                if let Ok(pt) = self.lift(&st, s_cur + h) {
                    if let Some(c) = self.center {
                        e.null_vector = antisymmetric_null_vector(&pt.profile, self.params(st.mu), c).ok();
                    }
                    e.point = Some(pt);
                }
                e
            }
            None => {
                let mut e = Event::bare(EventKind::Pitchfork, cur.mu, s_cur, index);
                e.sector = sector;
                e
            }
        }
    }

    /// Ends a branch whose steps keep failing. A full-window branch that has
    /// become mirror symmetric has run into a symmetric branch: the failure is
    /// the pitchfork itself (typically one lying almost on a fold, where the
    /// bordered system is nearly singular in two directions at once).
    fn give_up(&self, branch: &mut Branch, cur: &State, s: f64) {
        let idx = branch.points.len() - 1;
        let arrived = self.center.is_none()
            && self.settings.stop_at_branch_point
            && classify_symmetry(&branch.points[idx].profile, ARRIVAL_SYMMETRY_TOL) != SymmetryClass::Asymmetric
            && classify_symmetry(&branch.points[0].profile, ARRIVAL_SYMMETRY_TOL) == SymmetryClass::Asymmetric;
        if arrived {
            let mut e = Event::bare(EventKind::Pitchfork, cur.mu, s, idx);
            e.point = Some(branch.points[idx].clone());
            e.center = classify_symmetry(&branch.points[idx].profile, ARRIVAL_SYMMETRY_TOL).center();
            branch.events.push(e);
            branch.topology = Topology::Open(OpenReason::BranchPoint);
            branch.warnings.push(format!("steps failed on reaching a symmetric profile at mu = {}", cur.mu));
        } else {
            branch.events.push(Event::bare(EventKind::StepFailure, cur.mu, s, idx));
            branch.topology = Topology::Open(OpenReason::StepFailure);
        }
    }

    /// Solution at `mu` by Newton from `x0` with `mu` fixed.
    fn solve_at_mu(&self, x0: &[f64], mu: f64) -> Option<Vec<f64>> {
        let cfg = NewtonConfig { abs_tol: self.settings.corrector.abs_tol, max_iter: 20, damping: 1.0 };
        newton_solve(|x: &[f64]| self.sys.residual(x, mu), |x: &[f64]| self.sys.jacobian(x, mu), x0, &cfg)
            .ok()
            .map(|o| o.solution)
    }
}

fn initial_tangent(sys: &System, x: &[f64], mu: f64) -> Result<Vec<f64>> {
    let n = sys.dim();
    let mut e_mu = vec![0.0; n + 1];
    e_mu[n] = 1.0;
    tangent(sys, x, mu, &e_mu).or_else(|_| {
        let mut row: Vec<f64> = x.to_vec();
        row.push(0.0);
        tangent(sys, x, mu, &sys.weighted_row(&row))
    })
}

fn resolve_center(start: &BranchPoint, mode: SymmetryMode, warnings: &mut Vec<String>) -> Option<Center> {
    let c = match mode {
        SymmetryMode::Off => return None,
        SymmetryMode::Center(c) => Some(c),
        SymmetryMode::Auto => classify_symmetry(&start.profile, DEFAULT_SYMMETRY_TOL).center(),
    }?;
    let p = &start.profile;
    if p.n_min() + p.n_max() != c.twice() {
        warnings.push(format!("start profile is symmetric about {c} but its window is not; following the full system"));
        return None;
    }
    Some(c)
}

/// Pseudo-arclength continuation in `mu` at coupling `d`.
pub fn continue_branch(start: &BranchPoint, d: f64, settings: &ContinuationSettings) -> Result<Branch> {
    validate(settings)?;
    let mut warnings = Vec::new();
    let center = resolve_center(start, settings.symmetry, &mut warnings);
    let sys = System::new(&start.profile, d, center)?;
    let runner = Runner { sys, settings, center };
    let sys = &runner.sys;
    let n = sys.dim();

    let r0 = norm_inf(&residual(&start.profile, LatticeParams { d, mu: start.mu }));
    if r0 > 1e-8 {
        return Err(Error::Precondition(format!("start residual {r0:e} is not a steady state")));
    }
    let x0 = if center.is_some() { sys.symmetrize(start.profile.values()) } else { start.profile.values().to_vec() };
    let x0 = runner
        .solve_at_mu(&x0, start.mu)
        .ok_or_else(|| Error::Precondition("start point does not converge at fixed mu".into()))?;

    let mut tan = match settings.direction {
        Direction::Given => {
            if start.tangent.len() != start.profile.len() + 1 {
                return Err(Error::Precondition("direction Given needs a start tangent".into()));
            }
            let mut t = sys.reduce(&start.tangent[..start.profile.len()]);
            t.push(start.dmu_ds());
            let row = sys.weighted_row(&t);
            tangent(sys, &x0, start.mu, &row)?
        }
        _ => initial_tangent(sys, &x0, start.mu)?,
    };
    let flip = match settings.direction {
        Direction::IncreasingNorm => sys.dot_x(&tan, &x0) < 0.0,
        Direction::DecreasingNorm => sys.dot_x(&tan, &x0) > 0.0,
        Direction::IncreasingMu => tan[n] < 0.0,
        Direction::DecreasingMu => tan[n] > 0.0,
        Direction::Given => false,
    };
    if flip {
        tan.iter_mut().for_each(|v| *v = -*v);
    }

    let first = State { x: x0, mu: start.mu, tan };
    let mut branch = Branch {
        d,
        points: vec![runner.lift(&first, 0.0)?],
        events: Vec::new(),
        topology: Topology::Open(OpenReason::MaxSteps),
        closure_gap: None,
        center,
        periods: Vec::new(),
        warnings,
    };
    let origin = first.stacked();
    let origin_row = sys.weighted_row(&first.tan);
    let mu0 = first.mu;
    let mut reference: Option<PulseSpec> = measure_pulse_structure(&branch.points[0].profile, settings.plateau_threshold);
    let mut reference_edge = activated_extent(&branch.points[0].profile, settings.plateau_threshold);
    let mut cur = first.clone();
    let mut s = 0.0;
    let mut h = settings.ds;
    let mut easy = 0;
    let mut jumps = 0;
    let mut anti = runner.anti_count(&cur);
    let mut det = runner.det_sign(&cur);
    let mut cap_gap = if settings.cluster_step_factor > 0.0 { runner.second_gap(&cur) } else { None };

    loop {
        if branch.points.len() >= settings.max_steps {
            branch.topology = Topology::Open(OpenReason::MaxSteps);
            break;
        }
        if settings.cluster_step_factor > 0.0 {
            if let Some(g) = cap_gap {
                h = h.min((settings.cluster_step_factor * g).max(settings.cluster_step_floor));
            }
        }
        let attempt = step(sys, &cur, h, settings.corrector.abs_tol, settings.corrector.max_iter).and_then(|(st, it)| {
            let cos = sys.dot(&st.tan, &cur.tan);
            if cos < settings.min_tangent_cos && h > settings.ds_min {
                return Err(Error::NonConvergence { iterations: it, residual: f64::NAN });
            }
            let moved = {
                let xp: Vec<f64> = cur.stacked().iter().zip(&cur.tan).map(|(a, t)| a + h * t).collect();
                sys.norm(&diff(&st.stacked(), &xp))
            };
            // Near-singular points pin the state down only to about tol / sigma_min,
            // so very short steps are judged against the floor instead.
            if moved > settings.max_corrector_distance * h.max(settings.cluster_step_floor) && h > settings.ds_min {
                return Err(Error::NonConvergence { iterations: it, residual: f64::NAN });
            }
            let full = sys.profile(&st.x)?;
            let r = norm_inf(&residual(&full, LatticeParams { d, mu: st.mu }));
            if r > settings.corrector.abs_tol {
                return Err(Error::NonConvergence { iterations: it, residual: r });
            }
            Ok((st, it))
        });
        let (mut new, iters) = match attempt {
            Ok(v) => v,
            Err(_) => {
                h *= 0.5;
                easy = 0;
                if h < settings.ds_min {
                    runner.give_up(&mut branch, &cur, s);
                    break;
                }
                continue;
            }
        };
        let mut h_taken = h;

        let new_det = runner.det_sign(&new);
        let mut branch_point = None;
        if new_det.is_some() && det.is_some() && new_det != det {
            match runner.resolve_sign_change(&cur, &new, h) {
                SignChange::Jump { safe_h } => {
                    h = safe_h.max(settings.ds_min);
                    easy = 0;
                    jumps += 1;
                    if jumps > 50 {
                        runner.give_up(&mut branch, &cur, s);
                        break;
                    }
                    continue;
                }
                SignChange::Genuine { h, state, refined } => branch_point = Some((h, state, refined)),
            }
        }
        jumps = 0;
        det = new_det;

        // Closure: crossing the hyperplane through the start point normal to its tangent.
        let mut closed = false;
        if branch.points.len() > 4 {
            let g_prev = dot_row(&origin_row, &diff(&cur.stacked(), &origin));
            let g_new = dot_row(&origin_row, &diff(&new.stacked(), &origin));
            let dist = sys.norm(&diff(&new.stacked(), &origin));
            if g_prev < 0.0 && g_new >= 0.0 && dist < 3.0 * settings.ds_max.max(h) {
                let t = -g_prev / (g_new - g_prev);
                let xs: Vec<f64> = cur.stacked().iter().zip(new.stacked()).map(|(a, b)| a + t * (b - a)).collect();
                if let Ok((x, mu, _)) = correct(sys, &xs[..n], xs[n], &origin_row, REFINE_TOL, 12)
                    .or_else(|_| correct(sys, &xs[..n], xs[n], &origin_row, settings.corrector.abs_tol, 12))
                {
                    if let Ok(tan) = tangent(sys, &x, mu, &sys.weighted_row(&cur.tan)) {
                        let gap_mu = (mu - mu0).abs();
                        let gap_u = norm_inf(&diff(&sys.expand(&x), &sys.expand(&origin[..n])));
                        let ip = sys.dot(&tan, &first.tan);
                        let gap = gap_mu.max(gap_u);
                        if gap_mu <= settings.closure_mu_tol
                            && gap_u <= settings.closure_profile_tol
                            && ip > settings.closure_tangent_tol
                        {
                            let closing = State { x, mu, tan };
                            h_taken = dot_row(&sys.weighted_row(&cur.tan), &diff(&closing.stacked(), &cur.stacked()));
                            new = closing;
                            closed = true;
                            branch.closure_gap = Some(gap);
                        } else {
                            branch.warnings.push(format!("branch passed near its start with gap {gap:e}"));
                        }
                    }
                }
            }
        }

        let idx = branch.points.len() - 1;
        if new.dmu().signum() != cur.dmu().signum() && cur.dmu() != 0.0 {
            let e = runner.fold_event(&cur, h_taken, s, idx);
            branch.events.push(e);
        }
        let new_anti = runner.anti_count(&new);
        if new_anti != anti {
            let e = runner.pitchfork_event(&cur, h_taken, s, idx);
            branch.events.push(e);
            anti = new_anti;
        }
        let hit_branch_point = branch_point.is_some();
        if let Some((hb, st, refined)) = branch_point {
            if settings.monitor_branch_points {
                let sector = if center.is_some() { Sector::Symmetric } else { Sector::None };
                let e = runner.branch_event(Some((hb, st, refined)), &cur, s, idx, sector);
                branch.events.push(e);
            }
        }
        // Keep the event list ordered along the branch.
        branch.events.sort_by(|a, b| a.s_at.total_cmp(&b.s_at));

        let prev = std::mem::replace(&mut cur, new);
        s += h_taken;
        if settings.cluster_step_factor > 0.0 {
            cap_gap = runner.second_gap(&cur);
        }
        branch.points.push(runner.lift(&cur, s)?);

        if closed {
            branch.topology = Topology::Closed;
            break;
        }

        if settings.max_periods > 0 {
            let crosses = (prev.mu - mu0) * (cur.mu - mu0) <= 0.0 && prev.mu != cur.mu;
            let same_way = cur.dmu().signum() == first.dmu().signum() && prev.dmu().signum() == first.dmu().signum();
            if crosses && same_way && branch.points.len() > 2 {
                let t = (mu0 - prev.mu) / (cur.mu - prev.mu);
                let xi: Vec<f64> = prev.x.iter().zip(&cur.x).map(|(a, b)| a + t * (b - a)).collect();
                if let Some(x) = runner.solve_at_mu(&xi, mu0) {
                    let p = sys.profile(&x)?;
                    let spec = measure_pulse_structure(&p, settings.plateau_threshold);
                    let edge = activated_extent(&p, settings.plateau_threshold);
                    if let (Some(a), Some(b), Some(ea), Some(eb)) = (&reference, &spec, reference_edge, edge) {
                        if let Some(growth) = uniform_growth(a, b) {
                            let shift = eb.1 - ea.1;
                            if let Some(last) = branch.periods.last() {
                                if last.growth != growth {
                                    branch.warnings.push(format!(
                                        "plateau growth changed from {} to {growth} per period; period count restarted",
                                        last.growth
                                    ));
                                    branch.periods.clear();
                                }
                            }
                            branch.periods.push(PeriodMatch {
                                index: branch.points.len() - 1,
                                signature: b.signature(),
                                growth,
                                shift,
                            });
                            reference = spec.clone();
                            reference_edge = edge;
                            if branch.periods.len() >= settings.max_periods {
                                branch.topology = Topology::Snaking { p: shift, growth };
                                break;
                            }
                        }
                    }
                }
            }
        }

        let leaving = cur.mu < settings.mu_range.0 || cur.mu > settings.mu_range.1;
        let edge = branch.points.last().map_or(0.0, |p| p.profile.edge_deviation(1));
        if leaving || edge > settings.edge_tol {
            let idx = branch.points.len() - 1;
            branch.events.push(Event::bare(EventKind::WindowEdge, cur.mu, s, idx));
            branch.topology = Topology::Open(OpenReason::WindowEdge);
            break;
        }
        if hit_branch_point && settings.stop_at_branch_point {
            branch.topology = Topology::Open(OpenReason::BranchPoint);
            break;
        }

        if iters <= 3 {
            easy += 1;
            if easy >= 4 {
                h = (h * 1.3).min(settings.ds_max);
                easy = 0;
            }
        } else {
            easy = 0;
        }
    }
    measure_fold_gaps(&mut branch);
    Ok(branch)
}

/// Common nonzero increment of every plateau when all gaps are unchanged.
/// Anything else (one plateau growing, a gap closing) is not a period.
fn uniform_growth(a: &PulseSpec, b: &PulseSpec) -> Option<i64> {
    if a.lengths.len() != b.lengths.len() {
        return None;
    }
    let diffs: Vec<i64> = a.lengths.iter().zip(&b.lengths).map(|(&x, &y)| y as i64 - x as i64).collect();
    let g = diffs[0];
    let ok = g != 0 && diffs.iter().enumerate().all(|(j, &dj)| if j % 2 == 0 { dj == g } else { dj == 0 });
    ok.then_some(g * a.k() as i64)
}

const ARRIVAL_SYMMETRY_TOL: f64 = 1e-6;

/// Direct differences below this are dominated by rounding of `mu` itself.
const DIRECT_GAP_FLOOR: f64 = 1e-9;

/// Sets `fold_gap` on every pitchfork: the `mu` distance to the nearest fold
/// along the branch. Small gaps come from the quadratic fold normal form
/// `|mu''| ds^2 / 2`, since the arclength offset is resolved far better than
/// the difference of two nearly equal `mu` values.
pub(crate) fn measure_fold_gaps(branch: &mut Branch) {
    let folds: Vec<(f64, f64, Option<f64>)> =
        branch.folds().map(|e| (e.s_at, e.mu_at, e.curvature)).collect();
    for e in branch.events.iter_mut().filter(|e| e.kind == EventKind::Pitchfork) {
        let nearest = folds.iter().min_by(|a, b| (a.0 - e.s_at).abs().total_cmp(&(b.0 - e.s_at).abs()));
        e.fold_gap = nearest.map(|&(s_f, mu_f, kappa)| {
            let direct = (mu_f - e.mu_at).abs();
            match kappa {
                Some(k) if direct < DIRECT_GAP_FLOOR => 0.5 * k.abs() * (s_f - e.s_at).powi(2),
                _ => direct,
            }
        });
    }
}

fn dot_row(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn validate(s: &ContinuationSettings) -> Result<()> {
    s.corrector.validate()?;
    if !(s.ds_min > 0.0 && s.ds_min <= s.ds && s.ds <= s.ds_max) {
        return Err(Error::Domain(format!(
            "step sizes must satisfy 0 < ds_min <= ds <= ds_max, got {} {} {}",
            s.ds_min, s.ds, s.ds_max
        )));
    }
    if !(s.mu_range.0 < s.mu_range.1) {
        return Err(Error::Domain("empty mu range".into()));
    }
    if s.max_steps < 2 {
        return Err(Error::Domain("max_steps must be at least 2".into()));
    }
    Ok(())
}

fn state_from_point(sys: &System, p: &BranchPoint) -> Result<State> {
    if p.tangent.len() != p.profile.len() + 1 {
        return Err(Error::Precondition("branch point has no tangent".into()));
    }
    let x = sys.reduce(p.profile.values());
    let mut tan = sys.reduce(&p.tangent[..p.profile.len()]);
    tan.push(p.dmu_ds());
    let norm = sys.norm(&tan);
    tan.iter_mut().for_each(|v| *v /= norm);
    Ok(State { x, mu: p.mu, tan })
}

/// Refines a fold between two consecutive points whose tangent `mu`
/// components differ in sign. `None` when there is no sign change.
pub fn detect_fold(a: &BranchPoint, b: &BranchPoint, d: f64, settings: &ContinuationSettings) -> Result<Option<Event>> {
    if a.dmu_ds().signum() == b.dmu_ds().signum() {
        return Ok(None);
    }
    let center = resolve_center(a, settings.symmetry, &mut Vec::new());
    let sys = System::new(&a.profile, d, center)?;
    let cur = state_from_point(&sys, a)?;
    let nb = state_from_point(&sys, b)?;
    let h = dot_row(&sys.weighted_row(&cur.tan), &diff(&nb.stacked(), &cur.stacked()));
    let runner = Runner { sys, settings, center };
    Ok(Some(runner.fold_event(&cur, h, a.s, 0)))
}

/// Checks a segment of a symmetric branch for a change in the number of
/// nonnegative reflection-odd eigenvalues and refines the crossing.
pub fn detect_pitchfork_on_symmetric_branch(
    a: &BranchPoint,
    b: &BranchPoint,
    d: f64,
    center: Center,
    settings: &ContinuationSettings,
) -> Result<Option<Event>> {
    for p in [a, b] {
        let defect = crate::pulse::mirror_defect(&p.profile, center);
        if defect > DEFAULT_SYMMETRY_TOL {
            return Err(Error::Precondition(format!("profile is not symmetric about {center} (defect {defect:e})")));
        }
    }
    let sys = System::new(&a.profile, d, Some(center))?;
    let cur = state_from_point(&sys, a)?;
    let nb = state_from_point(&sys, b)?;
    let h = dot_row(&sys.weighted_row(&cur.tan), &diff(&nb.stacked(), &cur.stacked()));
    let runner = Runner { sys, settings, center: Some(center) };
    if runner.anti_count(&cur) == runner.anti_count(&nb) {
        return Ok(None);
    }
    Ok(Some(runner.pitchfork_event(&cur, h, a.s, 0)))
}

/// Re-derives the topology of a finished branch from its points.
pub fn classify_topology(branch: &Branch, settings: &ContinuationSettings) -> Topology {
    if let (Some(a), Some(b)) = (branch.points.first(), branch.points.last()) {
        if branch.points.len() > 2 {
            let gap_mu = (a.mu - b.mu).abs();
            let gap_u = a.profile.distance_inf(&b.profile);
            let ip: f64 = a.tangent.iter().zip(&b.tangent).map(|(x, y)| x * y).sum();
            if gap_mu <= settings.closure_mu_tol
                && gap_u <= settings.closure_profile_tol
                && ip > settings.closure_tangent_tol
            {
                return Topology::Closed;
            }
        }
    }
    if settings.max_periods > 0 && branch.periods.len() >= settings.max_periods {
        let last = branch.periods.last().unwrap();
        return Topology::Snaking { p: last.shift, growth: last.growth };
    }
    match branch.topology {
        Topology::Open(r) => Topology::Open(r),
        _ => Topology::Open(OpenReason::MaxSteps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_analytic_fold() {
        // mu(s) = mu0 - (s - s0)^2, dmu/ds = -2 (s - s0).
        let s0 = 0.3141592653589793;
        let found = bisect_by(
            |h| Some(-2.0 * (h - s0)),
            1.0,
            |v: &f64| v.signum() < 0.0,
            |v: &f64| v.abs() < 1e-8,
            0.0,
        )
        .unwrap();
        assert!(found.2);
        assert!((found.0 - s0).abs() < 1e-8);
    }

    #[test]
    fn bisection_collapses_on_discrete_change() {
        let jump = 0.123456789;
        let (h, _, ok) = bisect_by(|h| Some(h > jump), 1.0, |v: &bool| *v, |_| false, 1e-14).unwrap();
        assert!(ok);
        assert!((h - jump).abs() < 1e-13);
    }
}
