//! The twelve acceptance criteria, one pass/fail line each.
//!
//! Runs without the libtest harness; a failing criterion makes the process
//! exit nonzero after all lines are printed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use pulse_atlas::continuation::{
    branch_switch, continue_branch, Branch, BranchPoint, ContinuationSettings, Direction, Event, EventKind, FoldSide,
    OpenReason, SwitchSettings, SymmetryMode, Topology,
};
use pulse_atlas::lattice::{involution_u_to_one_minus_u, jacobian_slice, residual_slice};
use pulse_atlas::linalg::{newton_solve, NewtonConfig};
use pulse_atlas::map::{
    check_reversibility, find_tangency, fixed_point_eigen, verify_heteroclinic_loop, FixedPoint, LoopSettings,
    NagumoMap, ShootingSettings, TangencyEvent,
};
use pulse_atlas::pulse::{
    build_pulse, classify_symmetry, continue_in_d, gluing_diagnostic, mirror_defect, singular_profile_in, PulseSpec,
    SeedPattern, SymmetryClass, DEFAULT_SYMMETRY_TOL,
};
use pulse_atlas::stability::{annotate_branch, DEFAULT_MARGIN};
use pulse_atlas::LatticeParams;

const D: f64 = 0.1;
const HALF_WIDTH: usize = 150;
const SEED: u64 = 20240611;
/// Refinement noise on fold locations; smaller differences carry no sign.
const FOLD_NOISE: f64 = 1e-12;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn start(lengths: &[usize]) -> Result<BranchPoint, String> {
    let spec = PulseSpec::new(lengths.to_vec()).map_err(e2s)?;
    let p = build_pulse(&spec, LatticeParams { d: D, mu: 0.5 }, HALF_WIDTH).map_err(e2s)?;
    Ok(BranchPoint::new(p, 0.5))
}

fn timed_branch(lengths: &[usize], settings: &ContinuationSettings) -> Result<(Branch, Duration), String> {
    let t = Instant::now();
    let b = continue_branch(&start(lengths)?, D, settings).map_err(e2s)?;
    Ok((b, t.elapsed()))
}

/// Branches shared between criteria, computed on first use.
#[derive(Default)]
struct Shared {
    on_site: OnceLock<Result<(Branch, Duration), String>>,
    off_site: OnceLock<Result<(Branch, Duration), String>>,
    isola: OnceLock<Result<(Branch, Duration), String>>,
}

impl Shared {
    fn on_site(&self) -> Result<&(Branch, Duration), String> {
        self.on_site.get_or_init(|| timed_branch(&[5], &ContinuationSettings::default())).as_ref().map_err(Clone::clone)
    }

    fn off_site(&self) -> Result<&(Branch, Duration), String> {
        self.off_site.get_or_init(|| timed_branch(&[6], &ContinuationSettings::default())).as_ref().map_err(Clone::clone)
    }

    fn isola(&self) -> Result<&(Branch, Duration), String> {
        self.isola
            .get_or_init(|| timed_branch(&[5, 7, 5], &ContinuationSettings::default()))
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn folds_on(b: &Branch, side: FoldSide) -> Vec<f64> {
    b.folds().filter(|e| e.side == Some(side)).map(|e| e.mu_at).collect()
}

fn nearest_fold(b: &Branch, mu: f64) -> &Event {
    b.folds().min_by(|x, y| (x.mu_at - mu).abs().total_cmp(&(y.mu_at - mu).abs())).expect("branch has folds")
}

/// Successive differences share one sign (ignoring noise) and shrink overall.
fn converges_monotonically(xs: &[f64]) -> bool {
    if xs.len() < 3 {
        return false;
    }
    let diffs: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let signed: Vec<f64> = diffs.iter().copied().filter(|d| d.abs() > FOLD_NOISE).collect();
    let one_sign = signed.iter().all(|d| d > &0.0) || signed.iter().all(|d| d < &0.0);
    one_sign && diffs.last().unwrap().abs() < diffs[0].abs()
}

fn image_branch(b: &Branch) -> Result<Branch, String> {
    let p0 = &b.points[0];
    let (img, params) = involution_u_to_one_minus_u(&p0.profile, LatticeParams { d: D, mu: p0.mu });
    let mut s = BranchPoint::new(img, params.mu);
    s.tangent = p0.tangent.iter().map(|v| -v).collect();
    continue_branch(&s, D, &ContinuationSettings { direction: Direction::Given, ..Default::default() }).map_err(e2s)
}

fn c1(_: &Shared) -> Verdict {
    let mut worst: f64 = 0.0;
    for mu in [0.1, 0.5, 0.9] {
        let map = NagumoMap::new(LatticeParams { d: D, mu }).map_err(e2s)?;
        worst = worst.max(check_reversibility(&map, 10_000, SEED));
    }
    ensure(worst <= 1e-12, format!("max defect {worst:e} > 1e-12"))?;
    Ok(format!("max |F^-1(x) - R F(R x)| = {worst:e} over 3 x 10^4 samples"))
}

fn c2(_: &Shared) -> Verdict {
    let t = Instant::now();
    let mut checked = 0;
    for k in 0..=900 {
        let mu = 0.05 + 0.001 * k as f64;
        let map = NagumoMap::new(LatticeParams { d: D, mu }).map_err(e2s)?;
        for fp in [FixedPoint::Origin, FixedPoint::UStar] {
            let info = fixed_point_eigen(&map, fp).map_err(|e| format!("mu = {mu}: {e}"))?;
            ensure(info.lambda > 0.0 && info.lambda_stable > 0.0, format!("nonpositive eigenvalue at mu = {mu}"))?;
            checked += 1;
        }
    }
    let map = NagumoMap::new(LatticeParams { d: D, mu: 0.5 }).map_err(e2s)?;
    let lam = fixed_point_eigen(&map, FixedPoint::Origin).map_err(e2s)?.lambda;
    let exact = (7.0 + 45f64.sqrt()) / 2.0;
    let elapsed = t.elapsed();
    ensure((lam - exact).abs() <= 1e-12, format!("lambda {lam} vs {exact}"))?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("{checked} fixed points real positive; |lambda - (7+sqrt45)/2| = {:e}; {elapsed:?}", (lam - exact).abs()))
}

fn c3(sh: &Shared) -> Verdict {
    let mut lines = Vec::new();
    for (name, br) in [("on-site", sh.on_site()?), ("off-site", sh.off_site()?)] {
        let (b, elapsed) = br;
        ensure(*elapsed < Duration::from_secs(60), format!("{name} took {elapsed:?}"))?;
        ensure(matches!(b.topology, Topology::Snaking { .. }), format!("{name}: {:?}", b.topology))?;
        ensure(b.periods.len() >= 6, format!("{name}: {} periods", b.periods.len()))?;
        ensure(
            b.periods.iter().all(|p| p.growth == 2),
            format!("{name}: growth {:?}", b.periods.iter().map(|p| p.growth).collect::<Vec<_>>()),
        )?;
        let left = folds_on(b, FoldSide::Left);
        let right = folds_on(b, FoldSide::Right);
        ensure(converges_monotonically(&left), format!("{name}: left folds {left:?}"))?;
        ensure(converges_monotonically(&right), format!("{name}: right folds {right:?}"))?;
        let image = image_branch(b)?;
        let a = b.fold_mus();
        let m: Vec<f64> = image.fold_mus().iter().map(|v| 1.0 - v).collect();
        ensure(a.len() == m.len(), format!("{name}: {} folds vs {} on the image", a.len(), m.len()))?;
        let worst = a.iter().zip(&m).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        ensure(worst <= 1e-6, format!("{name}: fold set asymmetry {worst:e}"))?;
        let limits = left.last().unwrap() + right.last().unwrap() - 1.0;
        lines.push(format!(
            "{name}: {} periods, {} folds, symmetry {worst:e}, limit centering {:e}, {elapsed:.1?}",
            b.periods.len(),
            a.len(),
            limits.abs()
        ));
    }
    Ok(lines.join("; "))
}

fn tangencies(d: f64) -> Result<(TangencyEvent, TangencyEvent), String> {
    let cfg = ShootingSettings::default();
    let l = find_tangency(d, (0.2, 0.5), &cfg).map_err(e2s)?;
    let r = find_tangency(d, (0.5, 0.8), &cfg).map_err(e2s)?;
    Ok((l, r))
}

fn c4(sh: &Shared) -> Verdict {
    let (l, r) = tangencies(D)?;
    let centering = (l.mu_star + r.mu_star - 1.0).abs();
    ensure(centering <= 1e-6, format!("|mu- + mu+ - 1| = {centering:e}"))?;
    let (b, _) = sh.on_site()?;
    let (fl, fr) = (*folds_on(b, FoldSide::Left).last().unwrap(), *folds_on(b, FoldSide::Right).last().unwrap());
    let (el, er) = ((l.mu_star - fl).abs(), (r.mu_star - fr).abs());
    ensure(el <= 1e-4 && er <= 1e-4, format!("tangency vs fold limits: {el:e}, {er:e}"))?;
    Ok(format!(
        "mu- = {:.12}, mu+ = {:.12}, centering {centering:e}, vs fold limits {el:e} / {er:e}",
        l.mu_star, r.mu_star
    ))
}

fn c5(sh: &Shared) -> Verdict {
    let (b, elapsed) = sh.isola()?;
    ensure(b.topology == Topology::Closed, format!("{:?}", b.topology))?;
    let gap = b.closure_gap.unwrap_or(f64::INFINITY);
    ensure(gap < 1e-6, format!("closure gap {gap:e}"))?;
    ensure(b.folds().count() == 4, format!("{} folds", b.folds().count()))?;
    ensure(*elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("Closed, gap {gap:e}, 4 folds, {} points, {elapsed:.1?}", b.points.len()))
}

fn c6(sh: &Shared) -> Verdict {
    let mut deltas = Vec::new();
    for g in [7usize, 9, 11, 13] {
        let owned;
        let b = if g == 7 {
            &sh.isola()?.0
        } else {
            owned = timed_branch(&[5, g, 5], &ContinuationSettings::default())?.0;
            &owned
        };
        ensure(b.topology == Topology::Closed, format!("G = {g}: {:?}", b.topology))?;
        let gaps: Vec<f64> = b.pitchforks().filter_map(|e| e.fold_gap).collect();
        ensure(gaps.len() == 4 && b.pitchforks().count() == 4, format!("G = {g}: {} pitchforks", gaps.len()))?;
        let delta = gaps.iter().copied().fold(0.0, f64::max);
        ensure(gaps.iter().all(|&x| x <= delta), "pitchfork outside delta")?;
        deltas.push((g, delta));
    }
    let ratios: Vec<f64> = deltas.windows(2).map(|w| w[1].1 / w[0].1).collect();
    ensure(ratios.iter().all(|&r| r < 1.0), format!("delta ratios {ratios:?}"))?;
    let shown: Vec<String> = deltas.iter().map(|(g, d)| format!("delta({g}) = {d:.3e}")).collect();
    Ok(format!("{}; ratios {:?}", shown.join(", "), ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()))
}

fn c7(sh: &Shared) -> Verdict {
    let (asym, _) = timed_branch(&[5, 7, 9], &ContinuationSettings::default())?;
    ensure(asym.topology == Topology::Closed, format!("[5,7,9]: {:?}", asym.topology))?;
    ensure(asym.pitchforks().count() == 0, format!("[5,7,9]: {} pitchforks", asym.pitchforks().count()))?;
    ensure(asym.events.iter().all(|e| e.kind == EventKind::Fold), "[5,7,9]: non-fold events")?;

    let (sym, _) = sh.isola()?;
    let settings = ContinuationSettings {
        direction: Direction::Given,
        symmetry: SymmetryMode::Off,
        stop_at_branch_point: true,
        max_periods: 0,
        ..Default::default()
    };
    let mut ends = Vec::new();
    for e in sym.pitchforks() {
        let c = e.center.ok_or("pitchfork without center")?;
        let from_side = nearest_fold(sym, e.mu_at).side;
        let plus = branch_switch(e, D, &SwitchSettings { sign: 1.0, ..Default::default() }).map_err(e2s)?;
        let minus = branch_switch(e, D, &SwitchSettings { sign: -1.0, ..Default::default() }).map_err(e2s)?;
        let mirror = plus.profile.reflect(c).map_err(e2s)?.distance_inf(&minus.profile);
        ensure(mirror < 1e-7 && (plus.mu - minus.mu).abs() < 1e-9, format!("starts are not R-images ({mirror:e})"))?;
        for s in [plus, minus] {
            let a = continue_branch(&s, D, &settings).map_err(e2s)?;
            ensure(
                a.topology == Topology::Open(OpenReason::BranchPoint),
                format!("switch at {:.9} ended {:?}", e.mu_at, a.topology),
            )?;
            let end = a.events.iter().rev().find(|x| x.kind == EventKind::Pitchfork).ok_or("no end pitchfork")?;
            let to = nearest_fold(sym, end.mu_at);
            ensure(
                to.side != from_side,
                format!("switch at {:.9} ends at {:.9} on the same fold side", e.mu_at, end.mu_at),
            )?;
            let at = &end.point.as_ref().ok_or("end pitchfork without a point")?.profile;
            let defect = mirror_defect(at, c);
            ensure(defect < 1e-6, format!("end profile is not symmetric ({defect:e})"))?;
            ends.push((e.mu_at, end.mu_at));
        }
    }
    let shown: Vec<String> = ends.iter().step_by(2).map(|(a, b)| format!("{a:.6}->{b:.6}")).collect();
    Ok(format!("[5,7,9] Closed with {} folds and no pitchforks; 8 switched branches: {}", asym.folds().count(), shown.join(", ")))
}

fn c8(_: &Shared) -> Verdict {
    let mut lines = Vec::new();
    for lengths in [vec![5, 7, 5, 7, 5, 7, 7], vec![5, 7, 5, 7, 5, 7, 5, 7, 5], vec![5, 7, 5, 7, 6, 7, 5, 7, 5]] {
        let spec = PulseSpec::new(lengths.clone()).map_err(e2s)?;
        let (b, elapsed) = timed_branch(&lengths, &ContinuationSettings::default())?;
        ensure(b.topology == Topology::Closed, format!("{lengths:?}: {:?}", b.topology))?;
        ensure(elapsed < Duration::from_secs(180), format!("{lengths:?} took {elapsed:?}"))?;
        let cls = classify_symmetry(&b.points[0].profile, DEFAULT_SYMMETRY_TOL);
        if spec.is_symmetric() {
            let odd = spec.middle() % 2 == 1;
            ensure(
                matches!(cls, SymmetryClass::OnSite(_)) == odd,
                format!("{lengths:?}: middle {} gives {cls:?}", spec.middle()),
            )?;
        } else {
            ensure(cls == SymmetryClass::Asymmetric, format!("{lengths:?}: {cls:?}"))?;
        }
        lines.push(format!("{} {cls:?} Closed {} folds {elapsed:.1?}", spec.signature(), b.folds().count()));
    }
    Ok(lines.join("; "))
}

/// Most frequent count among the points strictly between two arclengths.
fn dominant_count(b: &Branch, s_lo: f64, s_hi: f64) -> Option<usize> {
    let mut tally = std::collections::BTreeMap::new();
    for p in b.points.iter().filter(|p| p.s > s_lo && p.s < s_hi) {
        *tally.entry(p.unstable_count?).or_insert(0usize) += 1;
    }
    tally.into_iter().max_by_key(|&(_, n)| n).map(|(c, _)| c)
}

fn c9(sh: &Shared) -> Verdict {
    let mut snake = sh.on_site()?.0.clone();
    annotate_branch(&mut snake, DEFAULT_MARGIN).map_err(e2s)?;
    ensure(snake.warnings.iter().all(|w| !w.contains("unstable count")), format!("snake: {:?}", snake.warnings))?;
    let fold_s: Vec<f64> = snake.folds().map(|e| e.s_at).collect();
    let mut pattern = Vec::new();
    for w in fold_s.windows(2) {
        pattern.push(dominant_count(&snake, w[0], w[1]).ok_or("empty segment")?);
    }
    ensure(pattern.iter().all(|&c| c == 0 || c == 2), format!("snake segment counts {pattern:?}"))?;
    ensure(pattern.windows(2).all(|w| w[0] != w[1]), format!("snake counts do not alternate: {pattern:?}"))?;
    // Count 1 only between a fold and the pitchfork next to it.
    let pf_s: Vec<f64> = snake.pitchforks().map(|e| e.s_at).collect();
    for (i, p) in snake.points.iter().enumerate() {
        if p.unstable_count == Some(1) {
            let step = snake.points.get(i + 1).map_or(0.0, |q| q.s - p.s).max(if i > 0 { p.s - snake.points[i - 1].s } else { 0.0 });
            let inside = fold_s.iter().any(|&f| {
                let pf = pf_s.iter().copied().min_by(|a, b| (a - f).abs().total_cmp(&(b - f).abs())).unwrap_or(f);
                p.s >= f.min(pf) - step && p.s <= f.max(pf) + step
            });
            ensure(inside, format!("count 1 at s = {} outside fold-pitchfork gaps", p.s))?;
        }
    }

    let mut isola = sh.isola()?.0.clone();
    annotate_branch(&mut isola, DEFAULT_MARGIN).map_err(e2s)?;
    ensure(isola.warnings.iter().all(|w| !w.contains("unstable count")), format!("isola: {:?}", isola.warnings))?;
    let mut cuts: Vec<f64> = isola.folds().map(|e| e.s_at).collect();
    cuts.push(cuts[0] + isola.length());
    let mut arcs = Vec::new();
    for w in cuts.windows(2) {
        // The last arc wraps around the start of the closed branch.
        let (lo, hi) = (w[0], w[1]);
        let pts: Vec<&BranchPoint> = isola
            .points
            .iter()
            .filter(|p| (p.s > lo && p.s < hi) || (hi > isola.length() && p.s < hi - isola.length()))
            .collect();
        let mean_norm = pts.iter().map(|p| p.measure).sum::<f64>() / pts.len() as f64;
        let mut tally = std::collections::BTreeMap::new();
        for p in &pts {
            *tally.entry(p.unstable_count.unwrap()).or_insert(0usize) += 1;
        }
        let count = tally.into_iter().max_by_key(|&(_, n)| n).map(|(c, _)| c).unwrap();
        arcs.push((mean_norm, count));
    }
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (bottom, top) = (arcs[0].1, arcs[3].1);
    let connecting = [arcs[1].1, arcs[2].1];
    ensure(top == 2 && bottom == 2, format!("top/bottom counts ({top}, {bottom})"))?;
    ensure(connecting.iter().filter(|&&c| c == 0).count() == 1, format!("connecting arcs {connecting:?}"))?;
    Ok(format!("snake segment counts {pattern:?}; isola top/bottom ({top}, {bottom}), connecting {connecting:?}"))
}

fn c10(_: &Shared) -> Verdict {
    let params = LatticeParams { d: D, mu: 0.5 };
    let single = build_pulse(&PulseSpec::new(vec![5]).map_err(e2s)?, params, HALF_WIDTH).map_err(e2s)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut certified = 0;
    for g in 6..=14 {
        let r = gluing_diagnostic(&single, g, params, HALF_WIDTH, 2.0, SEED).map_err(e2s)?;
        if r.certificate.holds {
            certified += 1;
            ensure(
                r.converged && r.distance <= r.certificate.rho,
                format!("G = {g}: certified but Newton landed at {:e} (rho {:e})", r.distance, r.certificate.rho),
            )?;
        }
        xs.push(g as f64);
        ys.push(r.correction_norm.ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    ensure(r2 > 0.99 && slope < 0.0, format!("R^2 {r2}, slope {slope}"))?;
    Ok(format!("slope {slope:.4} (ratio {:.4}/site), R^2 {r2:.6}, {certified}/9 certificates hold and converge", slope.exp()))
}

fn c11(_: &Shared) -> Verdict {
    let d = 0.05;
    let grid: Vec<f64> = (0..400).map(|k| 0.2 + 0.6 * k as f64 / 399.0).collect();
    let tr = verify_heteroclinic_loop(d, &grid, &LoopSettings::default()).map_err(e2s)?;
    ensure(tr.closed && tr.gap < 1e-3, format!("closed {} gap {:e} notes {:?}", tr.closed, tr.gap, tr.notes))?;
    let (l, r) = tangencies(d)?;
    ensure(tr.turning_points.len() == 2, format!("{} turning points", tr.turning_points.len()))?;
    let mut worst: f64 = 0.0;
    for t in &tr.turning_points {
        let reference = if t.mu_star < 0.5 { l.mu_star } else { r.mu_star };
        worst = worst.max((t.mu_star - reference).abs());
    }
    ensure(worst <= 1e-6, format!("turning points differ from find_tangency by {worst:e}"))?;
    Ok(format!("closed, gap {:e}, {} trace points, turning points match to {worst:e}", tr.gap, tr.points.len()))
}

/// Every composition of `total` into an odd number of positive parts.
fn patterns(total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << (total - 1)) {
        let mut parts = Vec::new();
        let mut run = 1;
        for i in 0..total - 1 {
            if mask >> i & 1 == 1 {
                parts.push(run);
                run = 1;
            } else {
                run += 1;
            }
        }
        parts.push(run);
        if parts.len() % 2 == 1 {
            out.push(parts);
        }
    }
    out
}

fn c12(_: &Shared) -> Verdict {
    const SITES: usize = 12;
    let params = LatticeParams { d: 0.05, mu: 0.5 };
    let r = |x: &[f64]| {
        let mut out = vec![0.0; x.len()];
        residual_slice(x, 0.0, params, &mut out);
        out
    };
    let j = |x: &[f64]| jacobian_slice(x, params);
    let cfg = NewtonConfig { abs_tol: 1e-12, max_iter: 60, damping: 1.0 };
    let mut found: Vec<Vec<f64>> = Vec::new();
    for bits in 0u32..(1 << SITES) {
        let seed: Vec<f64> = (0..SITES).map(|i| f64::from(bits >> i & 1)).collect();
        if let Ok(out) = newton_solve(r, j, &seed, &cfg) {
            if !found.iter().any(|f| f.iter().zip(&out.solution).all(|(a, b)| (a - b).abs() < 1e-8)) {
                found.push(out.solution);
            }
        }
    }
    // A spec whose pulse does not survive to this coupling produces no profile;
    // those are counted, along with brute-force states showing the same layout.
    let layout = |x: &[f64]| x.iter().map(|&v| v > 0.5).collect::<Vec<bool>>();
    let (mut built, mut absent, mut absent_but_found) = (0, 0, 0);
    for total in 1..=SITES - 2 {
        for lengths in patterns(total) {
            let spec = PulseSpec::with_pad(lengths, 1).map_err(e2s)?;
            let seed = singular_profile_in(&spec, params.mu, 0, SITES, SeedPattern::Sharp).map_err(e2s)?;
            let Ok(p) = continue_in_d(&seed, params.mu, params.d, 20) else {
                absent += 1;
                let want = layout(seed.values());
                if found.iter().any(|f| layout(f) == want) {
                    absent_but_found += 1;
                }
                continue;
            };
            let hit = found.iter().any(|f| f.iter().zip(p.values()).all(|(a, b)| (a - b).abs() < 1e-8));
            ensure(hit, format!("builder profile {} missing from the brute-force set", spec.signature()))?;
            built += 1;
        }
    }
    ensure(built > 0, "no spec could be built")?;
    Ok(format!(
        "{} distinct states from 4096 seeds contain all {built} builder profiles; \
         {absent} specs do not persist to d = {} ({absent_but_found} of them match a brute-force layout)",
        found.len(),
        params.d
    ))
}

fn main() {
    let shared = Shared::default();
    let criteria: [(&str, fn(&Shared) -> Verdict); 12] = [
        ("reversibility identity", c1),
        ("hyperbolic positive fixed points", c2),
        ("single-pulse snaking", c3),
        ("pinning boundaries vs fold limits", c4),
        ("symmetric 2-pulse isola", c5),
        ("pitchfork proximity and scaling", c6),
        ("asymmetric isolas and switched branches", c7),
        ("k-pulse isolas and parity", c8),
        ("stability patterns", c9),
        ("gluing decay and certificates", c10),
        ("heteroclinic loop", c11),
        ("brute-force existence oracle", c12),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(|| f(&shared))).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{:.1?}]", i + 1, t.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{:.1?}]", i + 1, t.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
