//! Fronts as heteroclinic orbits from `(0, 0)` to `(1, 1)`, found by shooting
//! along the local unstable manifold of the origin.
//!
//! Seeds `eps * lambda0^sigma * e_u` with `sigma` in `[0, 1)` cover one
//! fundamental domain, so `sigma` is a circle coordinate on which every orbit
//! of the unstable manifold appears exactly once. An orbit leaving a seed
//! climbs monotonically until it either passes `u = 1` or turns back; the
//! seeds where the outcome switches are the fronts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fixed_point_eigen, FixedPoint, MapPoint, NagumoMap};
use crate::error::{Error, Result};
use crate::lattice::LatticeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingSettings {
    pub seed_distance: f64,
    /// Samples of the circle in a full scan.
    pub grid: usize,
    pub max_iter: usize,
    /// Width in `sigma` to which roots are bisected.
    pub root_tol: f64,
    /// Samples across the window tracked near a merging pair of roots.
    pub local_grid: usize,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        Self { seed_distance: 1e-9, grid: 2000, max_iter: 400, root_tol: 1e-14, local_grid: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Over,
    Under,
}

struct Shooter {
    map: NagumoMap,
    dir: MapPoint,
    lambda: f64,
    cfg: ShootingSettings,
}

impl Shooter {
    fn new(map: NagumoMap, cfg: ShootingSettings) -> Result<Self> {
        let fp = fixed_point_eigen(&map, FixedPoint::Origin)?;
        Ok(Self { map, dir: fp.eigvec_u, lambda: fp.lambda, cfg })
    }

    fn seed(&self, sigma: f64) -> MapPoint {
        let r = self.cfg.seed_distance * self.lambda.powf(sigma);
        MapPoint::new(r * self.dir.u, r * self.dir.v)
    }

    fn outcome(&self, sigma: f64) -> Outcome {
        let mut p = self.seed(sigma);
        for _ in 0..self.cfg.max_iter {
            let q = self.map.forward(p);
            if q.v > 1.0 {
                return Outcome::Over;
            }
            if q.v <= q.u {
                return Outcome::Under;
            }
            p = q;
        }
        Outcome::Under
    }

    /// First orbit point with `v >= 1 - offset`.
    fn section_point(&self, sigma: f64, offset: f64) -> Option<MapPoint> {
        let mut p = self.seed(sigma);
        for _ in 0..self.cfg.max_iter {
            if p.v >= 1.0 - offset {
                return Some(p);
            }
            let q = self.map.forward(p);
            if q.v <= q.u {
                return None;
            }
            p = q;
        }
        None
    }

    fn bisect(&self, mut a: f64, mut b: f64, oa: Outcome) -> f64 {
        while b - a > self.cfg.root_tol {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.outcome(m) == oa {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Roots in `[lo, hi]` from `n` equal cells, with `sigma` left unwrapped.
    fn scan(&self, lo: f64, hi: f64, n: usize) -> Vec<(f64, bool)> {
        let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let outs: Vec<Outcome> = xs.iter().map(|&s| self.outcome(s)).collect();
        let mut roots = Vec::new();
        for k in 0..n {
            if outs[k] != outs[k + 1] {
                let s = self.bisect(xs[k], xs[k + 1], outs[k]);
                roots.push((s, outs[k] == Outcome::Under));
            }
        }
        roots
    }
}

/// A front: the seed coordinate on the circle of the orbit that converges to `(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicRoot {
    pub sigma: f64,
    pub mu: f64,
    /// True when seeds just below `sigma` fall back and seeds above overshoot.
    pub rising: bool,
}

fn wrap(s: f64) -> f64 {
    let w = s.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Distance on the circle `R / Z`.
pub(crate) fn circle_dist(a: f64, b: f64) -> f64 {
    let x = (a - b).rem_euclid(1.0);
    x.min(1.0 - x)
}

fn to_roots(raw: Vec<(f64, bool)>, mu: f64) -> Vec<HeteroclinicRoot> {
    let mut roots: Vec<HeteroclinicRoot> =
        raw.into_iter().map(|(s, rising)| HeteroclinicRoot { sigma: wrap(s), mu, rising }).collect();
    roots.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
    roots
}

/// All fronts at `(d, mu)` resolved by a full scan of the circle.
pub fn heteroclinic_roots(params: LatticeParams, cfg: &ShootingSettings) -> Result<Vec<HeteroclinicRoot>> {
    let sh = Shooter::new(NagumoMap::new(params)?, *cfg)?;
    Ok(to_roots(sh.scan(0.0, 1.0, cfg.grid), params.mu))
}

/// Full scan plus a dense scan of `[c - w, c + w]`, which replaces whatever
/// the full scan found there. A window of half the circle or more is a
/// dense full scan.
fn roots_with_window(
    params: LatticeParams,
    cfg: &ShootingSettings,
    c: f64,
    w: f64,
) -> Result<(Vec<HeteroclinicRoot>, Vec<HeteroclinicRoot>)> {
    let sh = Shooter::new(NagumoMap::new(params)?, *cfg)?;
    if w >= 0.5 {
        let all = to_roots(sh.scan(c - 0.5, c + 0.5, cfg.grid.max(cfg.local_grid)), params.mu);
        return Ok((all.clone(), all));
    }
    let mut local: Vec<HeteroclinicRoot> = sh
        .scan(c - w, c + w, cfg.local_grid)
        .into_iter()
        .map(|(s, rising)| HeteroclinicRoot { sigma: s, mu: params.mu, rising })
        .collect();
    let mut all: Vec<HeteroclinicRoot> = to_roots(sh.scan(0.0, 1.0, cfg.grid), params.mu)
        .into_iter()
        .filter(|r| circle_dist(r.sigma, c) > w)
        .collect();
    all.extend(local.iter().map(|r| HeteroclinicRoot { sigma: wrap(r.sigma), ..*r }));
    all.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
    local.iter_mut().for_each(|r| r.sigma = wrap(r.sigma));
    Ok((all, local))
}

/// The adjacent pair of roots (cyclically) that are closest on the circle.
fn closest_pair(roots: &[HeteroclinicRoot]) -> Option<(HeteroclinicRoot, HeteroclinicRoot)> {
    let n = roots.len();
    if n < 2 {
        return None;
    }
    (0..n)
        .map(|k| (roots[k], roots[(k + 1) % n]))
        .min_by(|a, b| circle_dist(a.0.sigma, a.1.sigma).total_cmp(&circle_dist(b.0.sigma, b.1.sigma)))
}

/// Midpoint of the short arc between `a` and `b`.
fn circle_mid(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(1.0);
    if d <= 0.5 {
        wrap(a + 0.5 * d)
    } else {
        wrap(b + 0.5 * (1.0 - d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangencySide {
    /// Fronts exist just above `mu_star`.
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyEvent {
    pub mu_star: f64,
    pub side: TangencySide,
    pub bracket_width: f64,
    /// Circle coordinate where the two fronts merge.
    pub sigma: f64,
    pub count_inside: usize,
    pub count_outside: usize,
    /// Root pairs at the accepted inside values, approaching the tangency.
    #[serde(skip)]
    pub approach: Vec<(f64, f64, f64)>,
}

pub const TANGENCY_TOL: f64 = 1e-10;

/// Bisects `bracket` on the number of fronts down to width `TANGENCY_TOL`.
///
/// The pair of roots that merges is tracked on a window a few separations
/// wide, so it is resolved even once it is far narrower than the full scan.
pub fn find_tangency(d: f64, bracket: (f64, f64), cfg: &ShootingSettings) -> Result<TangencyEvent> {
    let (a, b) = bracket;
    let ra = heteroclinic_roots(LatticeParams::new(d, a)?, cfg)?;
    let rb = heteroclinic_roots(LatticeParams::new(d, b)?, cfg)?;
    if ra.len() == rb.len() {
        return Err(Error::EmptyBracket { lo: a, hi: b });
    }
    let (mut mu_in, mut mu_out, roots_in, n_out) =
        if ra.len() > rb.len() { (a, b, ra, rb.len()) } else { (b, a, rb, ra.len()) };
    let n_in = roots_in.len();
    let mut pair = closest_pair(&roots_in).ok_or(Error::EmptyBracket { lo: a, hi: b })?;
    let mut approach = vec![(mu_in, pair.0.sigma, pair.1.sigma)];
    while (mu_in - mu_out).abs() > TANGENCY_TOL {
        let mid = 0.5 * (mu_in + mu_out);
        let c = circle_mid(pair.0.sigma, pair.1.sigma);
        let w = (2.0 * circle_dist(pair.0.sigma, pair.1.sigma) + 4.0 * cfg.root_tol).min(0.5);
        let (all, local) = roots_with_window(LatticeParams::new(d, mid)?, cfg, c, w)?;
        match closest_pair(&local) {
            Some(p) if all.len() == n_in => {
                mu_in = mid;
                pair = p;
                approach.push((mid, pair.0.sigma, pair.1.sigma));
            }
            _ => mu_out = mid,
        }
    }
    Ok(TangencyEvent {
        mu_star: 0.5 * (mu_in + mu_out),
        side: if mu_in > mu_out { TangencySide::Left } else { TangencySide::Right },
        bracket_width: (mu_in - mu_out).abs(),
        sigma: circle_mid(pair.0.sigma, pair.1.sigma),
        count_inside: n_in,
        count_outside: n_out,
        approach,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopSettings {
    pub shooting: ShootingSettings,
    /// The section is the line `v = 1 - section_offset`.
    pub section_offset: f64,
    pub gap_tol: f64,
    /// Largest jump in `sigma` between neighbouring vertices of one branch.
    pub fragment_tol: f64,
}

impl Default for LoopSettings {
    fn default() -> Self {
        Self { shooting: ShootingSettings::default(), section_offset: 0.05, gap_tol: 1e-3, fragment_tol: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub sigma: f64,
    pub mu: f64,
    /// First point of the front with `v >= 1 - section_offset`.
    pub section: Option<MapPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopTrace {
    pub d: f64,
    /// Closed polyline in `(sigma, mu)`, the first vertex repeated at the end.
    pub points: Vec<TracePoint>,
    pub turning_points: Vec<TangencyEvent>,
    pub closed: bool,
    /// Largest separation of the two branches at a turning point.
    pub gap: f64,
    /// Locations `(sigma, mu)` where the trace breaks apart.
    pub fragments: Vec<(f64, f64)>,
    pub notes: Vec<String>,
}

/// Traces the fronts over `mu_grid` on the circle and checks that they form one closed loop.
pub fn verify_heteroclinic_loop(d: f64, mu_grid: &[f64], cfg: &LoopSettings) -> Result<LoopTrace> {
    let mut grid = mu_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let per_mu: Vec<Vec<HeteroclinicRoot>> = grid
        .par_iter()
        .map(|&mu| heteroclinic_roots(LatticeParams::new(d, mu)?, &cfg.shooting))
        .collect::<Result<_>>()?;

    let mut trace = LoopTrace {
        d,
        points: Vec::new(),
        turning_points: Vec::new(),
        closed: false,
        gap: f64::INFINITY,
        fragments: Vec::new(),
        notes: Vec::new(),
    };
    for k in 1..grid.len() {
        if per_mu[k].len() != per_mu[k - 1].len() {
            trace.turning_points.push(find_tangency(d, (grid[k - 1], grid[k]), &cfg.shooting)?);
        }
    }
    if let Some((mu, r)) = grid.iter().zip(&per_mu).find(|(_, r)| r.len() != 0 && r.len() != 2) {
        trace.notes.push(format!("{} fronts at mu = {mu}; only pairs are traced", r.len()));
        trace.fragments.push((r[0].sigma, *mu));
    }
    let [left, right] = trace.turning_points.as_slice() else {
        trace.notes.push(format!("expected two turning points, found {}", trace.turning_points.len()));
        return Ok(trace);
    };
    let (left, right) = (left.clone(), right.clone());

    // Samples with exactly two fronts, grid and approach values together.
    let mut samples: Vec<(f64, f64, f64)> = grid
        .iter()
        .zip(&per_mu)
        .filter(|(mu, r)| r.len() == 2 && **mu > left.mu_star && **mu < right.mu_star)
        .map(|(&mu, r)| (mu, r[0].sigma, r[1].sigma))
        .collect();
    samples.extend(left.approach.iter().chain(&right.approach).copied());
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| a.0 == b.0);

    let assembled = assemble_loop(
        (left.sigma, left.mu_star),
        (right.sigma, right.mu_star),
        &samples,
        |mu| Ok(heteroclinic_roots(LatticeParams::new(d, mu)?, &cfg.shooting)?.iter().map(|r| r.sigma).collect()),
        cfg.fragment_tol,
    )?;
    trace.gap = assembled.gap;
    trace.fragments.extend(assembled.fragments);
    let poly = assembled.polyline;
    trace.points = poly
        .into_iter()
        .map(|(sigma, mu)| {
            let sh = Shooter::new(NagumoMap::new(LatticeParams::new(d, mu)?)?, cfg.shooting)?;
            Ok(TracePoint { sigma, mu, section: sh.section_point(sigma, cfg.section_offset) })
        })
        .collect::<Result<_>>()?;
    trace.closed = trace.fragments.is_empty() && trace.gap < cfg.gap_tol;
    Ok(trace)
}

struct Assembled {
    polyline: Vec<(f64, f64)>,
    gap: f64,
    fragments: Vec<(f64, f64)>,
}

/// Joins two-root samples `(mu, s1, s2)` between turning points `(sigma, mu)`
/// into one closed polyline `(sigma, mu)`.
///
/// The roots are split into two branches by continuity in `sigma`. Where a
/// branch jumps by more than `jump_tol`, `roots_at` is sampled at the middle
/// value of `mu`; a jump that survives refinement is reported as a fragment.
fn assemble_loop(
    left: (f64, f64),
    right: (f64, f64),
    samples: &[(f64, f64, f64)],
    mut roots_at: impl FnMut(f64) -> Result<Vec<f64>>,
    jump_tol: f64,
) -> Result<Assembled> {
    let mut fragments = Vec::new();
    let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(samples.len());
    for &(mu, s1, s2) in samples {
        let row = match rows.last() {
            None => (mu, s1, s2),
            Some(&(_, pa, pb)) => follow(pa, pb, mu, s1, s2),
        };
        rows.push(row);
    }
    let mut i = 0;
    let mut inserted = 0;
    while i + 1 < rows.len() {
        let (m0, a0, b0) = rows[i];
        let (m1, a1, b1) = rows[i + 1];
        if circle_dist(a0, a1) <= jump_tol && circle_dist(b0, b1) <= jump_tol {
            i += 1;
            continue;
        }
        let mm = 0.5 * (m0 + m1);
        let roots = if m1 - m0 > MIN_REFINE && inserted < MAX_REFINE { roots_at(mm)? } else { Vec::new() };
        if roots.len() != 2 {
            fragments.push((a1, m1));
            i += 1;
            continue;
        }
        rows.insert(i + 1, follow(a0, b0, mm, roots[0], roots[1]));
        inserted += 1;
    }
    let gap_at = |row: Option<&(f64, f64, f64)>| match row {
        Some(&(_, a, b)) => circle_dist(a, b),
        None => f64::INFINITY,
    };
    let gap = gap_at(rows.first()).max(gap_at(rows.last()));
    let mut polyline = vec![left];
    polyline.extend(rows.iter().map(|&(mu, a, _)| (a, mu)));
    polyline.push(right);
    polyline.extend(rows.iter().rev().map(|&(mu, _, b)| (b, mu)));
    polyline.push(left);
    for w in polyline.windows(2) {
        if circle_dist(w[0].0, w[1].0) > jump_tol && !fragments.contains(&w[1]) {
            fragments.push(w[1]);
        }
    }
    Ok(Assembled { polyline, gap, fragments })
}

const MIN_REFINE: f64 = 1e-13;
const MAX_REFINE: usize = 20_000;

/// Orders `(s1, s2)` to continue the branches last seen at `(pa, pb)`.
fn follow(pa: f64, pb: f64, mu: f64, s1: f64, s2: f64) -> (f64, f64, f64) {
    if circle_dist(s1, pa) + circle_dist(s2, pb) <= circle_dist(s2, pa) + circle_dist(s1, pb) {
        (mu, s1, s2)
    } else {
        (mu, s2, s1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_fronts_inside_none_outside() {
        let cfg = ShootingSettings::default();
        let inside = heteroclinic_roots(LatticeParams { d: 0.1, mu: 0.5 }, &cfg).unwrap();
        assert_eq!(inside.len(), 2);
        assert_ne!(inside[0].rising, inside[1].rising);
        assert!(heteroclinic_roots(LatticeParams { d: 0.1, mu: 0.05 }, &cfg).unwrap().is_empty());
    }

    #[test]
    fn empty_bracket_is_an_error() {
        let cfg = ShootingSettings::default();
        assert!(matches!(find_tangency(0.1, (0.48, 0.52), &cfg), Err(Error::EmptyBracket { .. })));
    }

    #[test]
    fn circle_helpers() {
        assert!((circle_dist(0.95, 0.05) - 0.1).abs() < 1e-15);
        assert!((circle_mid(0.95, 0.05) - 0.0).abs() < 1e-15 || (circle_mid(0.95, 0.05) - 1.0).abs() < 1e-15);
        assert!((circle_mid(0.2, 0.4) - 0.3).abs() < 1e-15);
    }

    fn ellipse_roots(mu: f64, jump: bool) -> Vec<f64> {
        let s = (mu - 0.5) / 0.1;
        let c = (1.0 - s * s).max(0.0).sqrt();
        let shift = if jump && mu > 0.5 { 0.3 } else { 0.0 };
        vec![0.5 + 0.05 * s - 0.2 * c, 0.5 + 0.05 * s + 0.2 * c + shift]
    }

    fn ellipse_samples(jump: bool) -> Vec<(f64, f64, f64)> {
        let mut mus: Vec<f64> = (1..50).map(|k| 0.4 + 0.2 * k as f64 / 50.0).collect();
        mus.extend([0.4 + 1e-9, 0.6 - 1e-9]);
        mus.sort_by(f64::total_cmp);
        mus.into_iter()
            .map(|mu| {
                let r = ellipse_roots(mu, jump);
                (mu, r[0], r[1])
            })
            .collect()
    }

    #[test]
    fn synthetic_ellipse_closes() {
        let out =
            assemble_loop((0.45, 0.4), (0.55, 0.6), &ellipse_samples(false), |mu| Ok(ellipse_roots(mu, false)), 0.05)
                .unwrap();
        assert!(out.fragments.is_empty(), "{:?}", out.fragments);
        assert!(out.gap < 1e-3, "gap {}", out.gap);
        assert_eq!(out.polyline.first(), out.polyline.last());
    }

    #[test]
    fn synthetic_jump_is_a_fragment() {
        let out =
            assemble_loop((0.45, 0.4), (0.55, 0.6), &ellipse_samples(true), |mu| Ok(ellipse_roots(mu, true)), 0.05)
                .unwrap();
        assert!(!out.fragments.is_empty());
    }

    #[test]
    fn pinning_interval_is_symmetric_and_widens_with_weaker_coupling() {
        let cfg = ShootingSettings::default();
        let l = find_tangency(0.1, (0.4, 0.5), &cfg).unwrap();
        let r = find_tangency(0.1, (0.5, 0.6), &cfg).unwrap();
        assert_eq!(l.side, TangencySide::Left);
        assert_eq!(r.side, TangencySide::Right);
        assert!(l.bracket_width <= TANGENCY_TOL);
        assert_eq!((l.count_inside, l.count_outside), (2, 0));
        assert!((l.mu_star + r.mu_star - 1.0).abs() < 1e-6);
        let l2 = find_tangency(0.01, (0.05, 0.5), &cfg).unwrap();
        let r2 = find_tangency(0.01, (0.5, 0.95), &cfg).unwrap();
        assert!(r2.mu_star - l2.mu_star > r.mu_star - l.mu_star);
    }

    #[test]
    fn loop_closes_at_weak_coupling() {
        let grid: Vec<f64> = (0..120).map(|k| 0.2 + 0.6 * k as f64 / 119.0).collect();
        let tr = verify_heteroclinic_loop(0.05, &grid, &LoopSettings::default()).unwrap();
        assert!(tr.closed, "gap {} fragments {:?} notes {:?}", tr.gap, tr.fragments, tr.notes);
        assert_eq!(tr.turning_points.len(), 2);
        assert!(circle_dist(tr.turning_points[0].sigma, tr.turning_points[1].sigma) > 1e-3);
        assert!(tr.points.iter().all(|p| p.section.is_some()));
    }
}
