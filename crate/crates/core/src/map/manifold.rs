use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{FixedPoint, FixedPointInfo, MapPoint, NagumoMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifoldSettings {
    /// `+1` follows the eigenvector with positive `u` component, `-1` the other branch.
    pub side: f64,
    pub seed_distance: f64,
    /// Initial points per fundamental domain.
    pub subdivisions: usize,
    pub max_spacing: f64,
    /// Largest turning angle between consecutive segments, radians.
    pub max_angle: f64,
    /// Largest distance of the curve midpoint of a step from its chord.
    pub max_chord_error: f64,
    /// Number of fundamental domains to grow.
    pub max_tau: f64,
    pub max_length: f64,
    pub max_points: usize,
    /// Growth is confined to `|u|, |v| <= bound`; escaping pieces are cut.
    pub bound: f64,
    pub min_dtau: f64,
}

impl Default for ManifoldSettings {
    fn default() -> Self {
        Self {
            side: 1.0,
            seed_distance: 1e-7,
            subdivisions: 50,
            max_spacing: 1e-3,
            max_angle: 0.2,
            max_chord_error: 1e-7,
            max_tau: 20.0,
            max_length: 20.0,
            max_points: 500_000,
            bound: 3.0,
            min_dtau: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcStop {
    TauLimit,
    LengthLimit,
}

/// A piece of a one-dimensional invariant manifold as a polyline.
///
/// `tau` is the fundamental-domain coordinate: the point with coordinate
/// `tau + 1` is the image of the point with coordinate `tau` under the map
/// (inverse map for stable manifolds), up to the quadratic error of the
/// linear seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldArc {
    pub fixed_point: FixedPoint,
    pub stability: Stability,
    pub side: f64,
    pub points: Vec<MapPoint>,
    pub tau: Vec<f64>,
    /// Indices `i` whose segment from `i - 1` is not part of the curve.
    pub breaks: Vec<usize>,
    pub length: f64,
    pub stop: ArcStop,
}

impl ManifoldArc {
    /// Index pairs of consecutive points joined by the curve.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.points.len()).filter(|i| self.breaks.binary_search(i).is_err()).map(|i| (i - 1, i))
    }

    /// Reflection under the swap `(u, v) -> (v, u)`.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.points.iter_mut().for_each(|p| *p = p.reversed());
        out.stability = match self.stability {
            Stability::Stable => Stability::Unstable,
            Stability::Unstable => Stability::Stable,
        };
        out
    }
}

struct Parametrization<'a> {
    map: &'a NagumoMap,
    base: MapPoint,
    dir: MapPoint,
    seed: f64,
    rate: f64,
    forward: bool,
}

impl Parametrization<'_> {
    fn at(&self, tau: f64) -> MapPoint {
        let k = tau.floor();
        let r = self.seed * self.rate.powf(tau - k);
        let mut p = MapPoint::new(self.base.u + r * self.dir.u, self.base.v + r * self.dir.v);
        for _ in 0..k as i64 {
            p = if self.forward { self.map.forward(p) } else { self.map.backward(p) };
        }
        p
    }
}

fn turn_angle(a: MapPoint, b: MapPoint, c: MapPoint) -> f64 {
    let (x1, y1) = (b.u - a.u, b.v - a.v);
    let (x2, y2) = (c.u - b.u, c.v - b.v);
    (x1 * y2 - y1 * x2).atan2(x1 * x2 + y1 * y2).abs()
}

/// Grows one branch of the stable or unstable manifold of `fp`.
///
/// The linear seed `x* + side * eps * rate^t * e` for `t` in `[0, 1)` is a
/// fundamental domain; further points are its images. Steps in `tau` are
/// halved until consecutive points are at most `max_spacing` apart, turn by
/// less than `max_angle`, and the curve between them stays within
/// `max_chord_error` of the chord.
pub fn grow_manifold(
    fp: &FixedPointInfo,
    map: &NagumoMap,
    stability: Stability,
    settings: &ManifoldSettings,
) -> Result<ManifoldArc> {
    if !(settings.seed_distance > 0.0) || settings.subdivisions == 0 || !(settings.max_spacing > 0.0) {
        return Err(Error::Domain("manifold settings need positive seed distance, subdivisions and spacing".into()));
    }
    let (dir, rate, forward) = match stability {
        Stability::Unstable => (fp.eigvec_u, fp.lambda, true),
        Stability::Stable => (fp.eigvec_s, 1.0 / fp.lambda_stable, false),
    };
    let param = Parametrization {
        map,
        base: fp.location,
        dir: MapPoint::new(settings.side * dir.u, settings.side * dir.v),
        seed: settings.seed_distance,
        rate,
        forward,
    };
    let inside = |p: MapPoint| p.is_finite() && p.u.abs() <= settings.bound && p.v.abs() <= settings.bound;
    let h_max = 1.0 / settings.subdivisions as f64;

    let mut arc = ManifoldArc {
        fixed_point: fp.which,
        stability,
        side: settings.side,
        points: vec![param.at(0.0)],
        tau: vec![0.0],
        breaks: Vec::new(),
        length: 0.0,
        stop: ArcStop::TauLimit,
    };
    let mut tau = 0.0;
    let mut h = h_max;
    let mut piece_start = 0;
    while tau < settings.max_tau {
        if arc.points.len() >= settings.max_points {
            return Err(Error::BudgetExhausted { points: arc.points.len() });
        }
        let t1 = (tau + h).min(settings.max_tau);
        let q = param.at(t1);
        let last = *arc.points.last().unwrap();
        if !inside(q) {
            if h > settings.min_dtau {
                h *= 0.5;
                continue;
            }
            // Left the box: skip ahead to where the curve comes back.
            match reentry(&param, &inside, t1, h_max, settings) {
                Some((t_in, p_in)) => {
                    arc.breaks.push(arc.points.len());
                    arc.points.push(p_in);
                    arc.tau.push(t_in);
                    piece_start = arc.points.len() - 1;
                    tau = t_in;
                    h = h_max;
                    continue;
                }
                None => break,
            }
        }
        let spacing = q.dist(last);
        let n = arc.points.len();
        let bent = n - piece_start >= 2 && turn_angle(arc.points[n - 2], last, q) > settings.max_angle;
        let sag = point_segment_distance(param.at(0.5 * (tau + t1)), last, q);
        if (spacing > settings.max_spacing || bent || sag > settings.max_chord_error) && h > settings.min_dtau {
            h *= 0.5;
            continue;
        }
        arc.points.push(q);
        arc.tau.push(t1);
        arc.length += spacing;
        tau = t1;
        h = (1.5 * h).min(h_max);
        if arc.length >= settings.max_length {
            arc.stop = ArcStop::LengthLimit;
            break;
        }
    }
    Ok(arc)
}

/// First `tau > t_out` where the curve is back inside the box, located to `min_dtau`.
fn reentry(
    param: &Parametrization<'_>,
    inside: &impl Fn(MapPoint) -> bool,
    t_out: f64,
    step: f64,
    settings: &ManifoldSettings,
) -> Option<(f64, MapPoint)> {
    let mut lo = t_out;
    loop {
        let hi = (lo + step).min(settings.max_tau);
        if hi <= lo {
            return None;
        }
        if inside(param.at(hi)) {
            let (mut a, mut b) = (lo, hi);
            while b - a > settings.min_dtau {
                let m = 0.5 * (a + b);
                if inside(param.at(m)) {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Some((b, param.at(b)));
        }
        lo = hi;
    }
}

/// Uniform grid of segment indices for proximity queries.
struct SegmentGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    segs: Vec<(MapPoint, MapPoint)>,
}

impl SegmentGrid {
    fn new(segs: Vec<(MapPoint, MapPoint)>, cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, (a, b)) in segs.iter().enumerate() {
            let (i0, i1) = Self::range(a.u.min(b.u), a.u.max(b.u), cell);
            let (j0, j1) = Self::range(a.v.min(b.v), a.v.max(b.v), cell);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    cells.entry((i, j)).or_default().push(k);
                }
            }
        }
        Self { cell, cells, segs }
    }

    fn range(lo: f64, hi: f64, cell: f64) -> (i64, i64) {
        ((lo / cell).floor() as i64, (hi / cell).floor() as i64)
    }

    fn key(&self, p: MapPoint) -> (i64, i64) {
        ((p.u / self.cell).floor() as i64, (p.v / self.cell).floor() as i64)
    }

    /// Distance from `p` to the nearest segment, searching rings of cells
    /// until the nearest candidate is provably closest.
    fn distance(&self, p: MapPoint, max_ring: i64) -> f64 {
        let (ci, cj) = self.key(p);
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            for i in ci - ring..=ci + ring {
                for j in cj - ring..=cj + ring {
                    if (i - ci).abs() != ring && (j - cj).abs() != ring {
                        continue;
                    }
                    if let Some(list) = self.cells.get(&(i, j)) {
                        for &k in list {
                            let (a, b) = self.segs[k];
                            best = best.min(point_segment_distance(p, a, b));
                        }
                    }
                }
            }
            if best <= ring as f64 * self.cell {
                break;
            }
        }
        best
    }
}

fn point_segment_distance(p: MapPoint, a: MapPoint, b: MapPoint) -> f64 {
    let (dx, dy) = (b.u - a.u, b.v - a.v);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.u - a.u) * dx + (p.v - a.v) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    MapPoint::new(a.u + t * dx, a.v + t * dy).dist(p)
}

fn arc_segments(arc: &ManifoldArc) -> Vec<(MapPoint, MapPoint)> {
    arc.segments().map(|(i, j)| (arc.points[i], arc.points[j])).collect()
}

fn cell_size(segs: &[(MapPoint, MapPoint)]) -> f64 {
    let longest = segs.iter().map(|(a, b)| a.dist(*b)).fold(0.0, f64::max);
    longest.max(1e-9)
}

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each to the segments of the other.
pub fn hausdorff_distance(a: &ManifoldArc, b: &ManifoldArc) -> f64 {
    let one_way = |from: &ManifoldArc, to: &ManifoldArc| {
        let segs = arc_segments(to);
        if segs.is_empty() {
            return f64::INFINITY;
        }
        let cell = cell_size(&segs).max(cell_size(&arc_segments(from)));
        let grid = SegmentGrid::new(segs, cell);
        let extent = (2.0 * 3.0f64.max(
            to.points.iter().chain(&from.points).map(|p| p.u.abs().max(p.v.abs())).fold(0.0, f64::max),
        ) / cell)
            .ceil() as i64;
        from.points.iter().map(|&p| grid.distance(p, extent)).fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub point: MapPoint,
    /// Segment start index in the first arc and local coordinate in `[0, 1)`.
    pub index_a: usize,
    pub t_a: f64,
    pub index_b: usize,
    pub t_b: f64,
    pub tau_a: f64,
    pub tau_b: f64,
    /// Sign of the cross product of the two segment directions.
    pub sign: i8,
    /// Set when a neighbouring crossing along the first arc is closer than the merge distance.
    pub tangency_candidate: bool,
}

/// Merge distance below which consecutive crossings are flagged as a tangency candidate.
pub const MERGE_TOL: f64 = 1e-8;

/// All transverse crossings between the segments of two arcs, ordered along `a`.
pub fn count_heteroclinic_intersections(a: &ManifoldArc, b: &ManifoldArc) -> Vec<Crossing> {
    let seg_a: Vec<(usize, usize)> = a.segments().collect();
    let seg_b: Vec<(usize, usize)> = b.segments().collect();
    let pts_b: Vec<(MapPoint, MapPoint)> = seg_b.iter().map(|&(i, j)| (b.points[i], b.points[j])).collect();
    if seg_a.is_empty() || pts_b.is_empty() {
        return Vec::new();
    }
    let cell = cell_size(&pts_b).max(cell_size(&arc_segments(a)));
    let grid = SegmentGrid::new(pts_b, cell);
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for &(i, j) in &seg_a {
        let (p0, p1) = (a.points[i], a.points[j]);
        let (i0, i1) = SegmentGrid::range(p0.u.min(p1.u), p0.u.max(p1.u), cell);
        let (j0, j1) = SegmentGrid::range(p0.v.min(p1.v), p0.v.max(p1.v), cell);
        seen.clear();
        for ci in i0..=i1 {
            for cj in j0..=j1 {
                if let Some(list) = grid.cells.get(&(ci, cj)) {
                    seen.extend_from_slice(list);
                }
            }
        }
        seen.sort_unstable();
        seen.dedup();
        for &k in &seen {
            let (q0, q1) = grid.segs[k];
            if let Some((ta, tb, sign)) = segment_crossing(p0, p1, q0, q1) {
                let (bi, bj) = seg_b[k];
                out.push(Crossing {
                    point: MapPoint::new(p0.u + ta * (p1.u - p0.u), p0.v + ta * (p1.v - p0.v)),
                    index_a: i,
                    t_a: ta,
                    index_b: bi,
                    t_b: tb,
                    tau_a: a.tau[i] + ta * (a.tau[j] - a.tau[i]),
                    tau_b: b.tau[bi] + tb * (b.tau[bj] - b.tau[bi]),
                    sign,
                    tangency_candidate: false,
                });
            }
        }
    }
    out.sort_by(|x, y| x.tau_a.total_cmp(&y.tau_a));
    for k in 1..out.len() {
        if out[k].point.dist(out[k - 1].point) < MERGE_TOL {
            out[k].tangency_candidate = true;
            out[k - 1].tangency_candidate = true;
        }
    }
    out
}

/// Intersection of `[p0, p1)` and `[q0, q1)` as local coordinates and orientation sign.
fn segment_crossing(p0: MapPoint, p1: MapPoint, q0: MapPoint, q1: MapPoint) -> Option<(f64, f64, i8)> {
    let r = (p1.u - p0.u, p1.v - p0.v);
    let s = (q1.u - q0.u, q1.v - q0.v);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom == 0.0 {
        return None;
    }
    let w = (q0.u - p0.u, q0.v - p0.v);
    let t = (w.0 * s.1 - w.1 * s.0) / denom;
    let u = (w.0 * r.1 - w.1 * r.0) / denom;
    if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&u) {
        Some((t, u, if denom > 0.0 { 1 } else { -1 }))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixed_point_eigen;
    use super::*;
    use crate::lattice::LatticeParams;

    fn map(d: f64, mu: f64) -> NagumoMap {
        NagumoMap::new(LatticeParams { d, mu }).unwrap()
    }

    fn line(points: Vec<MapPoint>) -> ManifoldArc {
        let n = points.len();
        ManifoldArc {
            fixed_point: FixedPoint::Origin,
            stability: Stability::Unstable,
            side: 1.0,
            tau: (0..n).map(|i| i as f64).collect(),
            points,
            breaks: Vec::new(),
            length: 0.0,
            stop: ArcStop::TauLimit,
        }
    }

    #[test]
    fn straight_segments_cross_once() {
        let a = line(vec![MapPoint::new(0.0, 0.0), MapPoint::new(1.0, 1.0)]);
        let b = line(vec![MapPoint::new(0.0, 1.0), MapPoint::new(1.0, 0.0)]);
        let c = count_heteroclinic_intersections(&a, &b);
        assert_eq!(c.len(), 1);
        assert!((c[0].point.u - 0.5).abs() < 1e-15);
        assert_eq!(c[0].sign, -1);
        assert!(count_heteroclinic_intersections(&a, &line(vec![MapPoint::new(0.0, 1.0), MapPoint::new(1.0, 2.0)]))
            .is_empty());
    }

    #[test]
    fn unstable_manifold_leaves_along_eigenvector() {
        let m = map(0.1, 0.5);
        let fp = fixed_point_eigen(&m, FixedPoint::Origin).unwrap();
        let s = ManifoldSettings { max_tau: 3.0, ..Default::default() };
        let arc = grow_manifold(&fp, &m, Stability::Unstable, &s).unwrap();
        let e = fp.eigvec_u;
        // The first point at distance about 1e-5 from the origin.
        let p = arc.points.iter().find(|p| p.u.hypot(p.v) >= 1e-5).unwrap();
        let angle = (p.u * e.v - p.v * e.u).atan2(p.u * e.u + p.v * e.v).abs();
        assert!(angle < 1e-4, "angle {angle}");
        for (i, j) in arc.segments() {
            assert!(arc.points[i].dist(arc.points[j]) <= s.max_spacing * (1.0 + 1e-12));
        }
    }

    #[test]
    fn stable_manifold_is_reflected_unstable_manifold() {
        let m = map(0.1, 0.5);
        let fp = fixed_point_eigen(&m, FixedPoint::UStar).unwrap();
        let s = ManifoldSettings { side: -1.0, max_tau: 12.0, ..Default::default() };
        let wu = grow_manifold(&fp, &m, Stability::Unstable, &s).unwrap();
        let ws = grow_manifold(&fp, &m, Stability::Stable, &s).unwrap();
        assert!(ws.length > 0.5);
        let h = hausdorff_distance(&wu.reversed(), &ws);
        assert!(h < 1e-6, "hausdorff {h}");
    }

    #[test]
    fn arc_is_invariant() {
        let m = map(0.1, 0.5);
        let fp = fixed_point_eigen(&m, FixedPoint::Origin).unwrap();
        let arc = grow_manifold(&fp, &m, Stability::Unstable, &ManifoldSettings { max_tau: 10.0, ..Default::default() })
            .unwrap();
        let mut images = arc.clone();
        let keep: Vec<usize> = (0..arc.points.len()).filter(|&i| arc.tau[i] <= 9.0).collect();
        images.points = keep.iter().map(|&i| m.forward(arc.points[i])).collect();
        images.tau = keep.iter().map(|&i| arc.tau[i] + 1.0).collect();
        images.breaks.clear();
        let segs = arc_segments(&arc);
        let grid = SegmentGrid::new(segs.clone(), cell_size(&segs));
        let worst = images.points.iter().map(|&p| grid.distance(p, 10_000)).fold(0.0, f64::max);
        assert!(worst < 1e-6, "image off the arc by {worst}");
    }

    #[test]
    fn crossings_inside_and_outside_pinning() {
        let s_u = ManifoldSettings { max_tau: 14.0, ..Default::default() };
        let s_s = ManifoldSettings { side: -1.0, max_tau: 6.0, ..Default::default() };
        let count = |mu: f64| {
            let m = map(0.1, mu);
            let o = fixed_point_eigen(&m, FixedPoint::Origin).unwrap();
            let u = fixed_point_eigen(&m, FixedPoint::UStar).unwrap();
            let wu = grow_manifold(&o, &m, Stability::Unstable, &s_u).unwrap();
            let ws = grow_manifold(&u, &m, Stability::Stable, &s_s).unwrap();
            count_heteroclinic_intersections(&wu, &ws)
        };
        let inside = count(0.5);
        assert!(inside.len() >= 2, "{} crossings", inside.len());
        for w in inside.windows(2) {
            assert_ne!(w[0].sign, w[1].sign);
        }
        assert!(count(0.05).is_empty());
    }
}
