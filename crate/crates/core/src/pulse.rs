//! k-pulse initial guesses from the uncoupled limit `d = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{jacobian_slice, residual_slice, Center, LatticeParams, LatticeProfile};
use crate::linalg::{
    kantorovich_check, newton_solve, norm_inf, KantorovichCertificate, NewtonConfig, DEFAULT_KANTOROVICH_SAMPLES,
};

/// Default half-width of the computational window.
pub const DEFAULT_HALF_WIDTH: usize = 150;

/// Plateau/gap run lengths `N_1, ..., N_{2k-1}`.
///
/// Odd positions (1-based) are activated plateaus near 1, even positions are
/// gaps near 0. `pad` is the minimal number of background sites required on
/// either side of the pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PulseSpec {
    pub lengths: Vec<usize>,
    #[serde(default)]
    pub pad: usize,
}

impl PulseSpec {
    pub fn new(lengths: Vec<usize>) -> Result<Self> {
        Self::with_pad(lengths, 0)
    }

    pub fn with_pad(lengths: Vec<usize>, pad: usize) -> Result<Self> {
        if lengths.is_empty() || lengths.len() % 2 == 0 {
            return Err(Error::Domain(format!(
                "a k-pulse needs an odd number of run lengths, got {}",
                lengths.len()
            )));
        }
        if lengths.contains(&0) {
            return Err(Error::Domain("run lengths must be positive".into()));
        }
        Ok(Self { lengths, pad })
    }

    /// Number of plateaus.
    pub fn k(&self) -> usize {
        self.lengths.len().div_ceil(2)
    }

    pub fn total_length(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// `N_j = N_{2k-j}` for all `j`.
    pub fn is_symmetric(&self) -> bool {
        self.lengths.iter().eq(self.lengths.iter().rev())
    }

    /// The central run `N_k`.
    pub fn middle(&self) -> usize {
        self.lengths[self.lengths.len() / 2]
    }

    pub fn min_length(&self) -> usize {
        self.lengths.iter().copied().min().unwrap_or(0)
    }

    pub fn plateaus(&self) -> impl Iterator<Item = usize> + '_ {
        self.lengths.iter().step_by(2).copied()
    }

    /// Run lengths joined by dashes, e.g. `5-7-5`.
    pub fn signature(&self) -> String {
        self.lengths.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("-")
    }
}

/// Which singular pattern seeds the pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPattern {
    /// Sharp 0/1 steps.
    #[default]
    Sharp,
    /// The background site just left of the first plateau takes the value `mu`.
    Interface,
}

/// Window that holds `total` pattern sites centered, with its center on a
/// site when `total` is odd and on a bond otherwise. Indices start at `-half_width`.
pub fn centered_window(total: usize, half_width: usize) -> (i64, usize) {
    let len = if total % 2 == 1 { 2 * half_width + 1 } else { 2 * half_width + 2 };
    (-(half_width as i64), len)
}

/// Piecewise-constant steady state of the uncoupled lattice.
pub fn singular_profile(spec: &PulseSpec, mu: f64, half_width: usize) -> Result<LatticeProfile> {
    singular_profile_with(spec, mu, half_width, SeedPattern::Sharp)
}

pub fn singular_profile_with(
    spec: &PulseSpec,
    mu: f64,
    half_width: usize,
    pattern: SeedPattern,
) -> Result<LatticeProfile> {
    let (n_min, len) = centered_window(spec.total_length(), half_width);
    singular_profile_in(spec, mu, n_min, len, pattern)
}

/// Same pattern on a given window of `len` sites starting at `n_min`,
/// centered with the odd slack site on the right.
pub fn singular_profile_in(
    spec: &PulseSpec,
    mu: f64,
    n_min: i64,
    len: usize,
    pattern: SeedPattern,
) -> Result<LatticeProfile> {
    let total = spec.total_length();
    if total > len || (len - total) / 2 < spec.pad.max(usize::from(pattern == SeedPattern::Interface)) {
        return Err(Error::SpecTooLarge(format!(
            "pattern of {total} sites plus padding {} does not fit {len} sites",
            spec.pad
        )));
    }
    let start = (len - total) / 2;
    let mut values = vec![0.0; len];
    let mut pos = start;
    for (j, &n) in spec.lengths.iter().enumerate() {
        if j % 2 == 0 {
            values[pos..pos + n].iter_mut().for_each(|v| *v = 1.0);
        }
        pos += n;
    }
    if pattern == SeedPattern::Interface {
        values[start - 1] = mu;
    }
    LatticeProfile::new(n_min, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DPathSettings {
    /// First nonzero coupling on the geometric path.
    pub d_start: f64,
    pub steps: usize,
    /// A step whose Newton solution moves any site by more than this is
    /// treated as a jump to another solution.
    pub max_site_change: f64,
    pub newton: NewtonConfig,
}

impl Default for DPathSettings {
    fn default() -> Self {
        Self {
            d_start: 1e-4,
            steps: 20,
            max_site_change: 0.3,
            newton: NewtonConfig { abs_tol: 1e-12, max_iter: 30, damping: 1.0 },
        }
    }
}

/// Natural-parameter continuation in the coupling, from the uncoupled
/// steady state `p` up to `d_target` at fixed `mu`.
pub fn continue_in_d(p: &LatticeProfile, mu: f64, d_target: f64, steps: usize) -> Result<LatticeProfile> {
    continue_in_d_with(p, mu, d_target, &DPathSettings { steps, ..Default::default() })
}

pub fn continue_in_d_with(p: &LatticeProfile, mu: f64, d_target: f64, cfg: &DPathSettings) -> Result<LatticeProfile> {
    if d_target == 0.0 {
        return Ok(p.clone());
    }
    if !(d_target > 0.0) {
        return Err(Error::Domain(format!("d_target must be >= 0, got {d_target}")));
    }
    let ghost = p.boundary().ghost();
    let path: Vec<f64> = if d_target <= cfg.d_start || cfg.steps <= 1 {
        vec![d_target]
    } else {
        let ratio = (d_target / cfg.d_start).powf(1.0 / (cfg.steps - 1) as f64);
        (0..cfg.steps).map(|i| if i + 1 == cfg.steps { d_target } else { cfg.d_start * ratio.powi(i as i32) }).collect()
    };
    let mut u = p.values().to_vec();
    let mut reached = 0.0;
    for &d in &path {
        let params = LatticeParams { d, mu };
        let out = newton_solve(
            |x: &[f64]| {
                let mut r = vec![0.0; x.len()];
                residual_slice(x, ghost, params, &mut r);
                r
            },
            |x: &[f64]| jacobian_slice(x, params),
            &u,
            &cfg.newton,
        )
        .map_err(|e| Error::DContinuation { reached, source: Box::new(e) })?;
        let jump = u.iter().zip(&out.solution).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if jump > cfg.max_site_change {
            return Err(Error::DContinuation {
                reached,
                source: Box::new(Error::Precondition(format!(
                    "Newton jumped by {jump:.3} at d = {d:e}; solution branch lost"
                ))),
            });
        }
        u = out.solution;
        reached = d;
    }
    p.with_values(u)
}

/// Convenience: singular profile continued to `(d, mu)`.
pub fn build_pulse(spec: &PulseSpec, params: LatticeParams, half_width: usize) -> Result<LatticeProfile> {
    let seed = singular_profile(spec, params.mu, half_width)?;
    continue_in_d_with(&seed, params.mu, params.d, &DPathSettings::default())
}

/// Reflection symmetry class of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryClass {
    OnSite(i64),
    /// Symmetric about the bond between sites `n` and `n + 1`.
    OffSite(i64),
    Asymmetric,
}

impl SymmetryClass {
    pub fn center(self) -> Option<Center> {
        match self {
            SymmetryClass::OnSite(n) => Some(Center::site(n)),
            SymmetryClass::OffSite(n) => Some(Center::bond(n)),
            SymmetryClass::Asymmetric => None,
        }
    }

    pub fn from_center(c: Center) -> Self {
        if c.is_on_site() {
            SymmetryClass::OnSite(c.twice() / 2)
        } else {
            SymmetryClass::OffSite(c.twice().div_euclid(2))
        }
    }
}

pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-8;

/// Largest mirror mismatch `|u_n - u_{2c-n}|` over the window.
pub fn mirror_defect(p: &LatticeProfile, center: Center) -> f64 {
    (p.n_min()..=p.n_max()).map(|n| (p.get(n) - p.get(center.mirror(n))).abs()).fold(0.0, f64::max)
}

/// Searches all centers in the window; among matching centers the one
/// nearest the activation centroid wins.
pub fn classify_symmetry(p: &LatticeProfile, tol: f64) -> SymmetryClass {
    let g = p.boundary().ghost();
    let (mut wsum, mut nsum) = (0.0, 0.0);
    for n in p.n_min()..=p.n_max() {
        let w = (p.get(n) - g).abs();
        wsum += w;
        nsum += w * n as f64;
    }
    let centroid = if wsum > 0.0 { nsum / wsum } else { 0.5 * (p.n_min() + p.n_max()) as f64 };
    let mut best: Option<(f64, Center)> = None;
    for twice in 2 * p.n_min()..=2 * p.n_max() {
        let c = Center::from_twice(twice);
        if mirror_defect(p, c) <= tol {
            let dist = (c.as_f64() - centroid).abs();
            if best.is_none_or(|(bd, _)| dist < bd) {
                best = Some((dist, c));
            }
        }
    }
    best.map_or(SymmetryClass::Asymmetric, |(_, c)| SymmetryClass::from_center(c))
}

/// Sites on the far side of `threshold` from the background. On the zero
/// background these are the sites above it; on the one background, those below.
fn active_sites(p: &LatticeProfile, threshold: f64) -> Vec<bool> {
    let high_background = p.boundary().ghost() > threshold;
    p.values().iter().map(|&v| (v > threshold) != high_background).collect()
}

/// Recovers run lengths by thresholding. `None` when no site is activated.
pub fn measure_pulse_structure(p: &LatticeProfile, threshold: f64) -> Option<PulseSpec> {
    let active = active_sites(p, threshold);
    let first = active.iter().position(|&a| a)?;
    let last = active.iter().rposition(|&a| a)?;
    let mut lengths = Vec::new();
    let mut run = 1;
    for i in first + 1..=last {
        if active[i] == active[i - 1] {
            run += 1;
        } else {
            lengths.push(run);
            run = 1;
        }
    }
    lengths.push(run);
    let pad = first.min(active.len() - 1 - last);
    Some(PulseSpec { lengths, pad })
}

/// Index of the first and last activated site.
pub fn activated_extent(p: &LatticeProfile, threshold: f64) -> Option<(i64, i64)> {
    let active = active_sites(p, threshold);
    let first = active.iter().position(|&a| a)?;
    let last = active.iter().rposition(|&a| a)?;
    Some((p.n_min() + first as i64, p.n_min() + last as i64))
}

/// Two copies of the single pulse `single` placed with `gap` background
/// sites between their plateaus, superposed on the zero state.
///
/// The window is the centered window of the `[N, gap, N]` pattern, so the
/// glue is symmetric exactly when the spec `[N, gap, N]` is.
pub fn glue_pulses(single: &LatticeProfile, gap: usize, threshold: f64, half_width: usize) -> Result<LatticeProfile> {
    let (a, b) = activated_extent(single, threshold)
        .ok_or_else(|| Error::Precondition("single pulse has no activated site".into()))?;
    if single.boundary().ghost() != 0.0 {
        return Err(Error::Precondition("gluing needs the zero background".into()));
    }
    let n = (b - a + 1) as usize;
    let spec = PulseSpec::new(vec![n, gap, n])?;
    let layout = singular_profile(&spec, 0.5, half_width)?;
    let (start, _) = activated_extent(&layout, threshold).expect("layout has plateaus");
    let s1 = start - a;
    let s2 = s1 + (n + gap) as i64;
    let values = (layout.n_min()..=layout.n_max()).map(|m| single.get(m - s1) + single.get(m - s2)).collect();
    layout.with_values(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingReport {
    pub gap: usize,
    /// `||J^{-1} r||_inf` at the glued guess.
    pub correction_norm: f64,
    pub certificate: KantorovichCertificate,
    pub converged: bool,
    /// `||u* - u_0||_inf` for the Newton limit `u*`, `NaN` without convergence.
    pub distance: f64,
}

/// Newton correction of a glued guess, a sampled Kantorovich certificate on
/// a ball of radius `rho_factor` times that correction, and where Newton
/// actually lands.
pub fn gluing_diagnostic(
    single: &LatticeProfile,
    gap: usize,
    params: LatticeParams,
    half_width: usize,
    rho_factor: f64,
    seed: u64,
) -> Result<GluingReport> {
    let guess = glue_pulses(single, gap, 0.5, half_width)?;
    let ghost = guess.boundary().ghost();
    let r = |x: &[f64]| {
        let mut out = vec![0.0; x.len()];
        residual_slice(x, ghost, params, &mut out);
        out
    };
    let j = |x: &[f64]| jacobian_slice(x, params);
    let x0 = guess.values();
    let correction_norm = norm_inf(&j(x0).factor()?.solve(&r(x0)));
    let rho = (rho_factor * correction_norm).max(f64::MIN_POSITIVE);
    let certificate = kantorovich_check(r, j, x0, rho, DEFAULT_KANTOROVICH_SAMPLES, seed)?;
    let cfg = NewtonConfig { abs_tol: 1e-13, max_iter: 50, damping: 1.0 };
    let (converged, distance) = match newton_solve(r, j, x0, &cfg) {
        Ok(out) => (true, x0.iter().zip(&out.solution).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)),
        Err(_) => (false, f64::NAN),
    };
    Ok(GluingReport { gap, correction_norm, certificate, converged, distance })
}
