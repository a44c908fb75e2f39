//! File formats: profile JSON, branch CSV, summary JSON, manifold and loop CSV.
//!
//! Floats in CSV files carry 17 significant digits, so a value read back is
//! bit-identical to the one written.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::continuation::{Branch, Event, EventKind, FoldSide, OpenReason, Sector, Topology};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeParams, LatticeProfile};
use crate::map::{ManifoldArc, LoopTrace, TangencyEvent, TangencySide};
use crate::pulse::measure_pulse_structure;

pub const BRANCH_COLUMNS: [&str; 7] = ["step", "s", "mu", "l2_norm", "plateau_signature", "unstable_count", "event"];

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub n: i64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub params: LatticeParams,
    pub boundary: Boundary,
    pub profile: Vec<Site>,
}

impl ProfileRecord {
    pub fn new(p: &LatticeProfile, params: LatticeParams) -> Self {
        let profile = (p.n_min()..=p.n_max()).map(|n| Site { n, u: p.get(n) }).collect();
        Self { params, boundary: p.boundary(), profile }
    }

    /// Sites must be consecutive.
    pub fn to_profile(&self) -> Result<LatticeProfile> {
        let first = self.profile.first().ok_or_else(|| Error::Domain("empty profile".into()))?;
        if let Some(w) = self.profile.windows(2).find(|w| w[1].n != w[0].n + 1) {
            return Err(Error::Domain(format!("sites {} and {} are not consecutive", w[0].n, w[1].n)));
        }
        LatticeProfile::with_boundary(first.n, self.profile.iter().map(|s| s.u).collect(), self.boundary)
    }
}

pub fn write_profile_json<W: Write>(w: W, p: &LatticeProfile, params: LatticeParams) -> Result<()> {
    serde_json::to_writer_pretty(w, &ProfileRecord::new(p, params))?;
    Ok(())
}

pub fn read_profile_json<R: Read>(r: R) -> Result<(LatticeProfile, LatticeParams)> {
    let rec: ProfileRecord = serde_json::from_reader(r)?;
    Ok((rec.to_profile()?, rec.params))
}

fn event_label(e: &Event) -> String {
    let base = match e.kind {
        EventKind::Fold => "fold",
        EventKind::Pitchfork => "pitchfork",
        EventKind::WindowEdge => "window_edge",
        EventKind::StepFailure => "step_failure",
    };
    match e.side {
        Some(FoldSide::Left) => format!("{base}_left"),
        Some(FoldSide::Right) => format!("{base}_right"),
        None => base.to_string(),
    }
}

/// One row per branch point. Events are attached to the point just before
/// them and joined with `;` when several share a row.
pub fn write_branch_csv<W: Write>(w: W, branch: &Branch, plateau_threshold: f64) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BRANCH_COLUMNS).map_err(csv_err)?;
    for (i, pt) in branch.points.iter().enumerate() {
        let signature = measure_pulse_structure(&pt.profile, plateau_threshold).map_or(String::new(), |s| s.signature());
        let events: Vec<String> = branch.events.iter().filter(|e| e.index == i).map(event_label).collect();
        out.write_record([
            i.to_string(),
            fmt_f64(pt.s),
            fmt_f64(pt.mu),
            fmt_f64(pt.measure),
            signature,
            pt.unstable_count.map_or(String::new(), |c| c.to_string()),
            events.join(";"),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub mu: f64,
    pub s: f64,
    pub side: Option<FoldSide>,
    pub curvature: Option<f64>,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchforkRecord {
    pub mu: f64,
    pub s: f64,
    pub sector: Sector,
    pub fold_gap: Option<f64>,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    /// `closed`, `snaking` or `open`.
    pub topology: String,
    pub snaking_shift: Option<i64>,
    pub snaking_growth: Option<i64>,
    pub open_reason: Option<OpenReason>,
    pub closure_gap: Option<f64>,
    pub d: f64,
    pub points: usize,
    pub length: f64,
    pub folds: Vec<FoldRecord>,
    pub pitchforks: Vec<PitchforkRecord>,
    pub periods: usize,
    pub warnings: Vec<String>,
}

impl BranchSummary {
    pub fn new(branch: &Branch) -> Self {
        let (topology, snaking_shift, snaking_growth, open_reason) = match branch.topology {
            Topology::Closed => ("closed", None, None, None),
            Topology::Snaking { p, growth } => ("snaking", Some(p), Some(growth), None),
            Topology::Open(r) => ("open", None, None, Some(r)),
        };
        Self {
            topology: topology.into(),
            snaking_shift,
            snaking_growth,
            open_reason,
            closure_gap: branch.closure_gap,
            d: branch.d,
            points: branch.points.len(),
            length: branch.length(),
            folds: branch
                .folds()
                .map(|e| FoldRecord { mu: e.mu_at, s: e.s_at, side: e.side, curvature: e.curvature, refined: e.refined })
                .collect(),
            pitchforks: branch
                .pitchforks()
                .map(|e| PitchforkRecord {
                    mu: e.mu_at,
                    s: e.s_at,
                    sector: e.sector,
                    fold_gap: e.fold_gap,
                    refined: e.refined,
                })
                .collect(),
            periods: branch.periods.len(),
            warnings: branch.warnings.clone(),
        }
    }
}

pub fn write_summary_json<W: Write>(w: W, branch: &Branch) -> Result<()> {
    serde_json::to_writer_pretty(w, &BranchSummary::new(branch))?;
    Ok(())
}

/// Columns `u, v, segment`; the segment counter increases at every break of the arc.
pub fn write_arc_csv<W: Write>(w: W, arc: &ManifoldArc) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["u", "v", "segment"]).map_err(csv_err)?;
    let mut segment = 0usize;
    for (i, p) in arc.points.iter().enumerate() {
        if arc.breaks.binary_search(&i).is_ok() {
            segment += 1;
        }
        out.write_record([fmt_f64(p.u), fmt_f64(p.v), segment.to_string()]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `u, v, sigma, mu`; `u, v` is the section point and is empty when the front never reached it.
pub fn write_loop_csv<W: Write>(w: W, trace: &LoopTrace) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["u", "v", "sigma", "mu"]).map_err(csv_err)?;
    for p in &trace.points {
        let (u, v) = p.section.map_or((String::new(), String::new()), |q| (fmt_f64(q.u), fmt_f64(q.v)));
        out.write_record([u, v, fmt_f64(p.sigma), fmt_f64(p.mu)]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyReport {
    pub d: f64,
    pub mu_minus: Option<f64>,
    pub mu_plus: Option<f64>,
    /// `|mu_minus + mu_plus - 1|`.
    pub centering_defect: Option<f64>,
    pub events: Vec<TangencyEvent>,
}

impl TangencyReport {
    pub fn new(d: f64, events: Vec<TangencyEvent>) -> Self {
        let pick = |side| events.iter().find(|e| e.side == side).map(|e| e.mu_star);
        let mu_minus = pick(TangencySide::Left);
        let mu_plus = pick(TangencySide::Right);
        let centering_defect = mu_minus.zip(mu_plus).map(|(a, b)| (a + b - 1.0).abs());
        Self { d, mu_minus, mu_plus, centering_defect, events }
    }
}

pub fn write_tangency_json<W: Write>(w: W, report: &TangencyReport) -> Result<()> {
    serde_json::to_writer_pretty(w, report)?;
    Ok(())
}
