//! Subcommand drivers.
//!
//! Independent branches are computed on the rayon pool; files are written
//! afterwards in a fixed order through one [`Outputs`], so results do not
//! depend on the thread count.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use pulse_atlas::continuation::{
    branch_switch, continue_branch, Branch, BranchPoint, ContinuationSettings, Direction, Event, EventKind,
    OpenReason, SwitchSettings, SymmetryMode, Topology,
};
use pulse_atlas::io::{write_arc_csv, write_branch_csv, write_loop_csv, write_profile_json, write_summary_json, write_tangency_json, TangencyReport};
use pulse_atlas::lattice::{involution_u_to_one_minus_u, jacobian, residual};
use pulse_atlas::map::{
    check_reversibility, count_heteroclinic_intersections, find_tangency, fixed_point_eigen, grow_manifold,
    verify_heteroclinic_loop, FixedPoint, LoopSettings, ManifoldSettings, NagumoMap, ShootingSettings, Stability,
};
use pulse_atlas::pulse::{classify_symmetry, continue_in_d_with, singular_profile_with, DPathSettings, PulseSpec, SymmetryClass, DEFAULT_SYMMETRY_TOL};
use pulse_atlas::stability::annotate_branch;
use pulse_atlas::{Error, LatticeParams};

use crate::config::{ExperimentConfig, Format};
use crate::manifest::{now, Failure, FileKind, Outputs, RunManifest, RunStatus};
use crate::plot::emit_plot_script;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Snake,
    Isola,
    Manifold,
    Verify,
    Stability,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Snake => "snake",
            Self::Isola => "isola",
            Self::Manifold => "manifold",
            Self::Verify => "verify",
            Self::Stability => "stability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunError {
    Config(String),
    Solver(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 3,
            Self::Solver(_) | Self::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Solver(m) => write!(f, "solver failure: {m}"),
            Self::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

fn solver(context: &str) -> impl Fn(Error) -> RunError + '_ {
    move |e| RunError::Solver(format!("{context}: {e}"))
}

#[derive(Debug)]
pub struct RunOutcome {
    /// `None` only when the output directory could not be created.
    pub manifest: Option<RunManifest>,
    pub error: Option<RunError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, RunError::exit_code)
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: Outputs,
    metrics: BTreeMap<String, Value>,
}

/// Runs `cmd` and writes its outputs and manifest into `dir`. Whatever was
/// produced before a failure stays on disk and is indexed, and the manifest
/// carries the failure.
pub fn run(cmd: Command, cfg: &ExperimentConfig, dir: &Path) -> RunOutcome {
    let started = now();
    let out = match Outputs::create(dir) {
        Ok(o) => o,
        Err(e) => return RunOutcome { manifest: None, error: Some(RunError::Io(format!("{}: {e}", dir.display()))) },
    };
    let mut ctx = Ctx { cfg, out, metrics: BTreeMap::new() };
    let mut result = cfg.validate().map_err(RunError::Config).and_then(|()| {
        let text = toml::to_string(cfg).map_err(|e| RunError::Io(e.to_string()))?;
        ctx.out.write("config.toml", FileKind::Config, None, text.as_bytes())?;
        match cmd {
            Command::Snake => snake(&mut ctx),
            Command::Isola => isola(&mut ctx),
            Command::Manifold => manifold(&mut ctx),
            Command::Verify => verify(&mut ctx),
            Command::Stability => stability(&mut ctx),
        }
    });
    if cfg.wants(Format::Plot) {
        let plotted = plots(&mut ctx, cmd, started);
        if result.is_ok() {
            result = plotted;
        }
    }
    let error = result.err();
    let manifest = RunManifest {
        tool: "pulse-atlas".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cmd.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        started,
        finished: now(),
        status: if error.is_some() { RunStatus::Failed } else { RunStatus::Complete },
        failure: error.as_ref().map(|e| Failure { code: e.exit_code(), message: e.to_string() }),
        files: ctx.out.into_files(),
        metrics: ctx.metrics,
    };
    let error = match manifest.write(dir) {
        Ok(()) => error,
        Err(e) => error.or(Some(RunError::Io(format!("manifest: {e}")))),
    };
    RunOutcome { manifest: Some(manifest), error }
}

fn plots(ctx: &mut Ctx, cmd: Command, started: f64) -> Result<(), RunError> {
    let mut figures: Vec<String> =
        ctx.out.files().iter().filter(|f| f.kind == FileKind::Branch).filter_map(|f| f.figure.clone()).collect();
    figures.dedup();
    let snapshot = RunManifest {
        tool: String::new(),
        version: String::new(),
        subcommand: cmd.name().into(),
        config_hash: String::new(),
        seed: ctx.cfg.seed,
        started,
        finished: started,
        status: RunStatus::Complete,
        failure: None,
        files: ctx.out.files().to_vec(),
        metrics: BTreeMap::new(),
    };
    for fig in figures {
        let script = emit_plot_script(&snapshot, ctx.out.dir(), &fig).map_err(|e| RunError::Io(e.to_string()))?;
        ctx.out.write(&format!("{fig}.gp"), FileKind::Plot, Some(&fig), script.as_bytes())?;
    }
    Ok(())
}

fn params(cfg: &ExperimentConfig) -> Result<LatticeParams, RunError> {
    LatticeParams::new(cfg.model.d, cfg.model.mu_start).map_err(|e| RunError::Config(e.to_string()))
}

fn settings(cfg: &ExperimentConfig) -> ContinuationSettings {
    let c = &cfg.continuation;
    ContinuationSettings {
        ds: c.ds,
        ds_min: c.ds_min,
        ds_max: c.ds_max,
        max_steps: c.max_steps,
        max_periods: c.max_periods,
        mu_range: (cfg.model.interval[0], cfg.model.interval[1]),
        ..Default::default()
    }
}

fn switch_settings(cfg: &ExperimentConfig) -> ContinuationSettings {
    ContinuationSettings {
        direction: Direction::Given,
        symmetry: SymmetryMode::Off,
        stop_at_branch_point: true,
        max_periods: 0,
        ..settings(cfg)
    }
}

/// Steady state for `lengths` at the configured `(d, mu_start)`.
fn start_point(cfg: &ExperimentConfig, lengths: &[usize]) -> Result<BranchPoint, RunError> {
    let spec = PulseSpec::new(lengths.to_vec()).map_err(|e| RunError::Config(e.to_string()))?;
    let p = params(cfg)?;
    let seed = singular_profile_with(&spec, p.mu, cfg.domain.half_width, cfg.pulse.seed_pattern).map_err(|e| match e {
        Error::SpecTooLarge(_) | Error::Domain(_) => RunError::Config(e.to_string()),
        e => RunError::Solver(e.to_string()),
    })?;
    let profile = continue_in_d_with(&seed, p.mu, p.d, &DPathSettings::default())
        .map_err(solver(&format!("building {}", spec.signature())))?;
    Ok(BranchPoint::new(profile, p.mu))
}

fn follow(cfg: &ExperimentConfig, lengths: &[usize]) -> Result<(BranchPoint, Branch), RunError> {
    let start = start_point(cfg, lengths)?;
    let label = PulseSpec::new(lengths.to_vec()).map(|s| s.signature()).unwrap_or_default();
    let b = continue_branch(&start, cfg.model.d, &settings(cfg)).map_err(solver(&format!("continuing {label}")))?;
    Ok((start, b))
}

fn switched(cfg: &ExperimentConfig, e: &Event) -> Result<Branch, RunError> {
    let at = format!("switching at mu = {}", e.mu_at);
    let s = branch_switch(e, cfg.model.d, &SwitchSettings::default()).map_err(solver(&at))?;
    continue_branch(&s, cfg.model.d, &switch_settings(cfg)).map_err(solver(&at))
}

fn topology_label(t: &Topology) -> String {
    match t {
        Topology::Closed => "closed".into(),
        Topology::Snaking { p, growth } => format!("snaking(p = {p}, growth = {growth})"),
        Topology::Open(r) => format!("open({r:?})").to_lowercase(),
    }
}

fn branch_metrics(b: &Branch) -> Value {
    json!({
        "topology": topology_label(&b.topology),
        "points": b.points.len(),
        "length": b.length(),
        "folds": b.folds().count(),
        "pitchforks": b.pitchforks().count(),
        "closure_gap": b.closure_gap,
        "periods": b.periods.len(),
        "warnings": b.warnings,
    })
}

impl Ctx<'_> {
    fn annotate(&self, b: &mut Branch) -> Result<(), RunError> {
        if self.cfg.stability.enabled {
            annotate_branch(b, self.cfg.stability.margin).map_err(solver("stability"))?;
        }
        Ok(())
    }

    fn save_branch(&mut self, name: &str, figure: &str, b: &Branch) -> Result<(), RunError> {
        if self.cfg.wants(Format::Csv) {
            let mut buf = Vec::new();
            write_branch_csv(&mut buf, b, 0.5).map_err(|e| RunError::Io(e.to_string()))?;
            self.out.write(&format!("{name}.csv"), FileKind::Branch, Some(figure), &buf)?;
        }
        if self.cfg.wants(Format::Json) {
            let mut buf = Vec::new();
            write_summary_json(&mut buf, b).map_err(|e| RunError::Io(e.to_string()))?;
            self.out.write(&format!("{name}.summary.json"), FileKind::Summary, Some(figure), &buf)?;
        }
        let entry = self.metrics.entry("branches".into()).or_insert_with(|| json!({}));
        entry[name] = branch_metrics(b);
        if b.topology == Topology::Open(OpenReason::StepFailure) {
            let mu = b.points.last().map_or(f64::NAN, |p| p.mu);
            return Err(RunError::Solver(format!("branch {name} ended with a step failure at mu = {mu}")));
        }
        Ok(())
    }

    fn save_profile(&mut self, name: &str, p: &BranchPoint) -> Result<(), RunError> {
        if self.cfg.wants(Format::Json) {
            let mut buf = Vec::new();
            write_profile_json(&mut buf, &p.profile, LatticeParams { d: self.cfg.model.d, mu: p.mu })
                .map_err(|e| RunError::Io(e.to_string()))?;
            self.out.write(&format!("{name}.profile.json"), FileKind::Profile, None, &buf)?;
        }
        Ok(())
    }

    fn save_json(&mut self, name: &str, kind: FileKind, v: &impl serde::Serialize) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(v).map_err(|e| RunError::Io(e.to_string()))?;
        text.push('\n');
        self.out.write(name, kind, None, text.as_bytes())?;
        Ok(())
    }
}

/// On-site and off-site single-pulse snakes plus the asymmetric rungs that
/// leave the on-site snake at its pitchforks.
fn snake(ctx: &mut Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let &[n] = cfg.pulse.lengths.as_slice() else {
        return Err(RunError::Config(format!("snake needs a single plateau length, got {:?}", cfg.pulse.lengths)));
    };
    let (odd, even) = if n % 2 == 1 { (n, n + 1) } else { (n + 1, n) };
    let (on, off) = rayon::join(|| follow(cfg, &[odd]), || follow(cfg, &[even]));
    let (on_start, mut on) = on?;
    let (off_start, mut off) = off?;
    ctx.annotate(&mut on)?;
    ctx.annotate(&mut off)?;
    ctx.save_profile("snake_on_site_start", &on_start)?;
    ctx.save_profile("snake_off_site_start", &off_start)?;
    ctx.save_branch("snake_on_site", "snake", &on)?;
    ctx.save_branch("snake_off_site", "snake", &off)?;

    let forks: Vec<&Event> = on.pitchforks().filter(|e| e.point.is_some() && e.null_vector.is_some()).collect();
    let rungs: Vec<Result<Branch, RunError>> = forks
        .par_iter()
        .map(|e| {
            let mut b = switched(cfg, e)?;
            ctx.annotate(&mut b)?;
            Ok(b)
        })
        .collect();
    let mut ends = Vec::new();
    for (k, r) in rungs.into_iter().enumerate() {
        let b = r?;
        ends.push(json!({
            "from_mu": forks[k].mu_at,
            "to_mu": b.events.iter().rev().find(|e| e.kind == EventKind::Pitchfork).map(|e| e.mu_at),
            "topology": topology_label(&b.topology),
        }));
        ctx.save_branch(&format!("snake_rung_{k:02}"), "snake", &b)?;
    }
    ctx.metrics.insert("rungs".into(), Value::Array(ends));
    Ok(())
}

/// A multi-pulse isola and, for symmetric specs, one asymmetric branch per
/// pair of pitchforks it connects.
fn isola(ctx: &mut Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let (start, mut b) = follow(cfg, &cfg.pulse.lengths)?;
    ctx.annotate(&mut b)?;
    ctx.save_profile("isola_start", &start)?;
    ctx.save_branch("isola", "isola", &b)?;

    let forks: Vec<&Event> = b.pitchforks().filter(|e| e.point.is_some() && e.null_vector.is_some()).collect();
    let nearest = |mu: f64| {
        forks.iter().enumerate().min_by(|x, y| (x.1.mu_at - mu).abs().total_cmp(&(y.1.mu_at - mu).abs())).map(|(i, _)| i)
    };
    let mut covered = vec![false; forks.len()];
    let mut subs = Vec::new();
    for i in 0..forks.len() {
        if covered[i] {
            continue;
        }
        covered[i] = true;
        let mut sb = switched(cfg, forks[i])?;
        ctx.annotate(&mut sb)?;
        let end = sb.events.iter().rev().find(|e| e.kind == EventKind::Pitchfork).map(|e| e.mu_at);
        let end_fork = end.and_then(nearest).filter(|&j| j != i);
        if let Some(j) = end_fork {
            covered[j] = true;
        }
        subs.push(json!({ "from_mu": forks[i].mu_at, "to_mu": end, "joins_pitchfork": end_fork.map(|j| forks[j].mu_at) }));
        ctx.save_branch(&format!("isola_asym_{:02}", subs.len() - 1), "isola", &sb)?;
    }
    ctx.metrics.insert("asymmetric_subbranches".into(), Value::Array(subs));
    Ok(())
}

/// One branch with unstable counts, whatever `stability.enabled` says.
fn stability(ctx: &mut Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let (start, mut b) = follow(cfg, &cfg.pulse.lengths)?;
    annotate_branch(&mut b, cfg.stability.margin).map_err(solver("stability"))?;
    let mut segments = Vec::new();
    let folds: Vec<usize> = b.folds().map(|e| e.index).collect();
    let mut cut = vec![0];
    cut.extend(folds.iter().map(|i| i + 1));
    cut.push(b.points.len());
    for w in cut.windows(2) {
        let counts: Vec<usize> = b.points[w[0]..w[1]].iter().filter_map(|p| p.unstable_count).collect();
        let mut tally = BTreeMap::new();
        for c in counts {
            *tally.entry(c).or_insert(0usize) += 1;
        }
        segments.push(json!(tally.into_iter().max_by_key(|&(_, n)| n).map(|(c, _)| c)));
    }
    ctx.metrics.insert("segment_unstable_counts".into(), Value::Array(segments));
    ctx.save_profile("stability_start", &start)?;
    ctx.save_branch("stability", "stability", &b)
}

/// Invariant manifolds at `mu_start`, pinning boundaries and the heteroclinic loop.
fn manifold(ctx: &mut Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let m = &cfg.map_analysis;
    if !m.enabled {
        return Err(RunError::Config("manifold needs map_analysis.enabled = true".into()));
    }
    let p = params(cfg)?;
    let map = NagumoMap::new(p).map_err(solver("map"))?;
    let origin = fixed_point_eigen(&map, FixedPoint::Origin).map_err(solver("origin"))?;
    let ustar = fixed_point_eigen(&map, FixedPoint::UStar).map_err(solver("u = 1"))?;
    let wu = grow_manifold(&origin, &map, Stability::Unstable, &ManifoldSettings { max_tau: 14.0, ..Default::default() })
        .map_err(solver("unstable manifold"))?;
    let ws =
        grow_manifold(&ustar, &map, Stability::Stable, &ManifoldSettings { side: -1.0, max_tau: 6.0, ..Default::default() })
            .map_err(solver("stable manifold"))?;
    let crossings = count_heteroclinic_intersections(&wu, &ws);
    if cfg.wants(Format::Csv) {
        for (name, arc) in [("arc_unstable_origin.csv", &wu), ("arc_stable_one.csv", &ws)] {
            let mut buf = Vec::new();
            write_arc_csv(&mut buf, arc).map_err(|e| RunError::Io(e.to_string()))?;
            ctx.out.write(name, FileKind::Arc, None, &buf)?;
        }
    }
    ctx.metrics.insert("heteroclinic_crossings".into(), json!(crossings.len()));

    let grid = m.mu_grid.values();
    let (lo, hi) = (m.mu_grid.start, m.mu_grid.stop);
    let mut events = Vec::new();
    let mut notes = Vec::new();
    if lo < 0.5 && 0.5 < hi {
        for bracket in [(lo, 0.5), (0.5, hi)] {
            match find_tangency(p.d, bracket, &ShootingSettings::default()) {
                Ok(t) => events.push(t),
                Err(Error::EmptyBracket { lo, hi }) => notes.push(format!("no tangency in [{lo}, {hi}]")),
                Err(e) => return Err(RunError::Solver(format!("tangency: {e}"))),
            }
        }
    } else {
        notes.push("mu grid does not straddle 0.5; tangencies skipped".into());
    }
    let report = TangencyReport::new(p.d, events);
    if cfg.wants(Format::Json) {
        let mut buf = Vec::new();
        write_tangency_json(&mut buf, &report).map_err(|e| RunError::Io(e.to_string()))?;
        ctx.out.write("tangency.json", FileKind::Report, None, &buf)?;
    }
    ctx.metrics.insert("tangency".into(), json!({ "mu_minus": report.mu_minus, "mu_plus": report.mu_plus, "notes": notes }));

    let loop_cfg = LoopSettings { section_offset: m.section_offset, ..Default::default() };
    let trace = verify_heteroclinic_loop(p.d, &grid, &loop_cfg).map_err(solver("heteroclinic loop"))?;
    if cfg.wants(Format::Csv) {
        let mut buf = Vec::new();
        write_loop_csv(&mut buf, &trace).map_err(|e| RunError::Io(e.to_string()))?;
        ctx.out.write("loop.csv", FileKind::Loop, None, &buf)?;
    }
    ctx.metrics.insert(
        "loop".into(),
        json!({ "closed": trace.closed, "gap": trace.gap, "points": trace.points.len(), "notes": trace.notes }),
    );
    Ok(())
}

#[derive(Debug, serde::Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, value: f64, tolerance: f64, detail: String) -> Check {
    Check { name, value, tolerance, passed: value <= tolerance, detail }
}

/// Module invariants on the configured model.
fn verify(ctx: &mut Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let p = params(cfg)?;
    let [lo, hi] = cfg.model.interval;
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for mu in [lo, 0.5 * (lo + hi), hi] {
        let map = NagumoMap::new(p.with_mu(mu)).map_err(solver("map"))?;
        worst = worst.max(check_reversibility(&map, 10_000, cfg.seed));
    }
    checks.push(check("reversibility", worst, 1e-12, format!("10000 samples at mu = {lo}, {}, {hi}", 0.5 * (lo + hi))));

    let steps = ((hi - lo) / 1e-3).round() as usize;
    let mut bad = Vec::new();
    for k in 0..=steps {
        let mu = if k == steps { hi } else { lo + 1e-3 * k as f64 };
        let map = NagumoMap::new(p.with_mu(mu)).map_err(solver("map"))?;
        for fp in [FixedPoint::Origin, FixedPoint::UStar] {
            let ok = fixed_point_eigen(&map, fp).is_ok_and(|i| i.lambda > 0.0 && i.lambda_stable > 0.0);
            if !ok {
                bad.push(mu);
            }
        }
    }
    checks.push(check(
        "eigenvalue_positivity",
        bad.len() as f64,
        0.0,
        format!("{} fixed points on a 0.001 grid over [{lo}, {hi}]; failures at {bad:?}", 2 * (steps + 1)),
    ));

    let start = start_point(cfg, &cfg.pulse.lengths)?;
    let jac = jacobian(&start.profile, p);
    let h = 1e-6;
    let mut fd_err: f64 = 0.0;
    let values = start.profile.values();
    for j in 0..values.len() {
        let bump = |delta: f64| {
            let mut v = values.to_vec();
            v[j] += delta;
            residual(&start.profile.with_values(v).expect("same length"), p)
        };
        let (rp, rm) = (bump(h), bump(-h));
        for i in j.saturating_sub(1)..(j + 2).min(values.len()) {
            fd_err = fd_err.max(((rp[i] - rm[i]) / (2.0 * h) - jac.get(i, j)).abs());
        }
    }
    checks.push(check("jacobian_fd", fd_err, 1e-6, format!("central differences, h = {h}, {} sites", values.len())));

    let b = continue_branch(&start, p.d, &settings(cfg)).map_err(solver("branch"))?;
    let p0 = &b.points[0];
    let (img, img_params) = involution_u_to_one_minus_u(&p0.profile, p.with_mu(p0.mu));
    let mut s = BranchPoint::new(img, img_params.mu);
    s.tangent = p0.tangent.iter().map(|v| -v).collect();
    let image = continue_branch(&s, p.d, &ContinuationSettings { direction: Direction::Given, ..settings(cfg) })
        .map_err(solver("involution image"))?;
    let (a, m) = (b.fold_mus(), image.fold_mus());
    let asym = if a.len() == m.len() {
        a.iter().zip(&m).map(|(x, y)| (x + y - 1.0).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    checks.push(check(
        "involution_fold_symmetry",
        asym,
        1e-6,
        format!("{} folds on the branch, {} on its image under u -> 1-u, mu -> 1-mu", a.len(), m.len()),
    ));

    let class = classify_symmetry(&start.profile, DEFAULT_SYMMETRY_TOL);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    ctx.metrics.insert("checks_passed".into(), json!(checks.len() - failed.len()));
    ctx.metrics.insert("checks_total".into(), json!(checks.len()));
    let report = json!({ "spec": cfg.pulse.lengths, "symmetry": format!("{class:?}"), "checks": checks });
    ctx.save_json("verify.json", FileKind::Report, &report)?;
    if !failed.is_empty() {
        return Err(RunError::Solver(format!("verification failed: {}", failed.join(", "))));
    }
    if class == SymmetryClass::Asymmetric && cfg.pulse.lengths.len() == 1 {
        return Err(RunError::Solver("single pulse start is not mirror symmetric".into()));
    }
    Ok(())
}
