//! Pseudo-arclength continuation in `mu` with fold and pitchfork detection.
//!
//! Branches whose start profile is mirror symmetric are followed inside the
//! symmetric subspace (half the window plus the center), so symmetry-breaking
//! pitchforks never make the corrector singular; they are detected instead
//! from the eigenvalues of the reflection-odd Jacobian block. Branches without
//! symmetry are followed in the full window and monitored through the sign of
//! the determinant of the tangent-bordered Jacobian.

mod engine;
mod switch;
mod system;

use serde::{Deserialize, Serialize};

use crate::lattice::{Center, LatticeProfile};
use crate::linalg::NewtonConfig;

pub use engine::{classify_topology, continue_branch, detect_fold, detect_pitchfork_on_symmetric_branch};
pub use switch::{branch_switch, SwitchSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub profile: LatticeProfile,
    pub mu: f64,
    pub s: f64,
    /// Unit vector in `(profile, mu)` space, `mu` last. Empty when unknown.
    pub tangent: Vec<f64>,
    pub unstable_count: Option<usize>,
    /// l2 norm of the profile.
    pub measure: f64,
}

impl BranchPoint {
    pub fn new(profile: LatticeProfile, mu: f64) -> Self {
        let measure = profile.l2_norm();
        Self { profile, mu, s: 0.0, tangent: Vec::new(), unstable_count: None, measure }
    }

    /// Tangent `mu` component, `NaN` when no tangent is stored.
    pub fn dmu_ds(&self) -> f64 {
        self.tangent.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Fold,
    Pitchfork,
    WindowEdge,
    StepFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Symmetric,
    Antisymmetric,
    None,
}

/// Which way a fold turns: at a `Right` fold `mu` has a local maximum along the branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub mu_at: f64,
    pub s_at: f64,
    pub sector: Sector,
    /// Index of the branch point just before the event.
    pub index: usize,
    /// False when bisection did not reach its tolerance.
    pub refined: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub side: Option<FoldSide>,
    /// `d^2 mu / ds^2` at a fold.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub curvature: Option<f64>,
    /// For pitchforks: `mu` distance to the nearest fold on the branch.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fold_gap: Option<f64>,
    /// Solution at the event location.
    #[serde(skip)]
    pub point: Option<BranchPoint>,
    /// Unit reflection-odd kernel direction at a pitchfork, full window.
    #[serde(skip)]
    pub null_vector: Option<Vec<f64>>,
    /// Reflection center of the symmetric branch the event was found on.
    #[serde(skip)]
    pub center: Option<Center>,
}

impl Event {
    pub(crate) fn bare(kind: EventKind, mu_at: f64, s_at: f64, index: usize) -> Self {
        Self {
            kind,
            mu_at,
            s_at,
            sector: Sector::None,
            index,
            refined: false,
            side: None,
            curvature: None,
            fold_gap: None,
            point: None,
            null_vector: None,
            center: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpenReason {
    WindowEdge,
    MaxSteps,
    StepFailure,
    /// Stopped at a branch point of a branch without symmetry.
    BranchPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    Closed,
    Snaking { p: i64, growth: i64 },
    Open(OpenReason),
}

/// A return of the branch to the start value of `mu` in the same direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMatch {
    pub index: usize,
    pub signature: String,
    /// Change of the total activated length against the previous match.
    pub growth: i64,
    /// Shift of the rightmost activated site against the previous match.
    pub shift: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub d: f64,
    pub points: Vec<BranchPoint>,
    pub events: Vec<Event>,
    pub topology: Topology,
    pub closure_gap: Option<f64>,
    /// Reflection center when the branch was followed in the symmetric subspace.
    pub center: Option<Center>,
    pub periods: Vec<PeriodMatch>,
    pub warnings: Vec<String>,
}

impl Branch {
    pub fn folds(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Fold)
    }

    pub fn pitchforks(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Pitchfork)
    }

    pub fn fold_mus(&self) -> Vec<f64> {
        self.folds().map(|e| e.mu_at).collect()
    }

    /// Arclength of the last point.
    pub fn length(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    IncreasingNorm,
    DecreasingNorm,
    IncreasingMu,
    DecreasingMu,
    /// Use the tangent stored in the start point.
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryMode {
    /// Reduce when the start profile is symmetric and its window fits the center.
    Auto,
    Off,
    Center(Center),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    /// Snaking branches stop after this many returns; 0 disables period detection.
    pub max_periods: usize,
    pub direction: Direction,
    /// The interval J; leaving it ends the branch.
    pub mu_range: (f64, f64),
    pub corrector: NewtonConfig,
    /// Largest corrector displacement accepted, relative to the step length.
    pub max_corrector_distance: f64,
    /// Smallest cosine between consecutive tangents accepted without halving the step.
    pub min_tangent_cos: f64,
    /// Caps the step at this times the second smallest Jacobian eigenvalue
    /// modulus, so that clusters of nearly simultaneous folds are resolved.
    /// 0 disables.
    pub cluster_step_factor: f64,
    /// The cap never goes below this.
    pub cluster_step_floor: f64,
    pub fold_tol: f64,
    pub closure_mu_tol: f64,
    pub closure_profile_tol: f64,
    pub closure_tangent_tol: f64,
    /// Largest deviation from the ghost value tolerated at the outermost site.
    pub edge_tol: f64,
    pub symmetry: SymmetryMode,
    pub monitor_branch_points: bool,
    pub stop_at_branch_point: bool,
    pub plateau_threshold: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            ds: 0.02,
            ds_min: 1e-8,
            ds_max: 0.1,
            max_steps: 20_000,
            max_periods: 6,
            direction: Direction::IncreasingNorm,
            mu_range: (0.05, 0.95),
            corrector: NewtonConfig { abs_tol: 1e-11, max_iter: 8, damping: 1.0 },
            max_corrector_distance: 0.5,
            min_tangent_cos: 0.95,
            cluster_step_factor: 1.0,
            cluster_step_floor: 1e-5,
            fold_tol: 1e-8,
            closure_mu_tol: 1e-8,
            closure_profile_tol: 1e-6,
            closure_tangent_tol: 0.999,
            edge_tol: 1e-10,
            symmetry: SymmetryMode::Auto,
            monitor_branch_points: true,
            stop_at_branch_point: false,
            plateau_threshold: 0.5,
        }
    }
}
