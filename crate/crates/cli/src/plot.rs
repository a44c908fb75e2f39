//! Gnuplot scripts for branch figures: mu against the l2 norm, solid where
//! the unstable count is zero, dashed where it is positive, dots at folds.
//!
//! Data is inlined as named datablocks so a script runs on its own.

use std::fmt::Write as _;
use std::path::Path;

use pulse_atlas::io::BRANCH_COLUMNS;

use crate::manifest::{FileKind, RunManifest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlotError {
    MissingColumn { file: String, column: String },
    Read { file: String, message: String },
    NoBranches { figure: String },
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MissingColumn { file, column } => write!(f, "{file}: missing column {column:?}"),
            Self::Read { file, message } => write!(f, "{file}: {message}"),
            Self::NoBranches { figure } => write!(f, "no branch files for figure {figure:?}"),
        }
    }
}

impl std::error::Error for PlotError {}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    mu: String,
    norm: String,
    count: Option<usize>,
    fold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRows {
    pub name: String,
    rows: Vec<Row>,
    unknown_counts: bool,
}

impl BranchRows {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Parses a branch CSV; every branch column must be present.
pub fn read_branch_csv(name: &str, bytes: &[u8]) -> Result<BranchRows, PlotError> {
    let read_err = |e: csv::Error| PlotError::Read { file: name.to_string(), message: e.to_string() };
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers().map_err(read_err)?.clone();
    let mut idx = [0usize; BRANCH_COLUMNS.len()];
    for (slot, col) in idx.iter_mut().zip(BRANCH_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| PlotError::MissingColumn { file: name.to_string(), column: col.to_string() })?;
    }
    let [_, _, i_mu, i_norm, _, i_count, i_event] = idx;
    let mut rows = Vec::new();
    let mut unknown_counts = false;
    for rec in rdr.records() {
        let rec = rec.map_err(read_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let count = match field(i_count) {
            "" => {
                unknown_counts = true;
                None
            }
            c => Some(c.parse::<usize>().map_err(|e| PlotError::Read {
                file: name.to_string(),
                message: format!("unstable_count {c:?}: {e}"),
            })?),
        };
        for (col, i) in [("mu", i_mu), ("l2_norm", i_norm)] {
            field(i).parse::<f64>().map_err(|e| PlotError::Read {
                file: name.to_string(),
                message: format!("{col} {:?}: {e}", field(i)),
            })?;
        }
        rows.push(Row {
            mu: field(i_mu).to_string(),
            norm: field(i_norm).to_string(),
            count,
            fold: field(i_event).split(';').any(|e| e.starts_with("fold")),
        });
    }
    Ok(BranchRows { name: name.to_string(), rows, unknown_counts })
}

const COLORS: [&str; 8] = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#16a085", "#7f8c8d", "#b7950b"];

/// Splits a branch into runs of equal stability class; each run repeats the
/// last point of the previous run so the drawn curve has no holes.
fn runs(rows: &[Row]) -> (Vec<Vec<&Row>>, Vec<Vec<&Row>>) {
    let unstable = |r: &Row| r.count.is_some_and(|c| c > 0);
    let (mut solid, mut dashed) = (Vec::new(), Vec::new());
    let mut cur: Vec<&Row> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if i > 0 && unstable(r) != unstable(&rows[i - 1]) {
            let run = std::mem::replace(&mut cur, vec![&rows[i - 1]]);
            if unstable(&rows[i - 1]) { dashed.push(run) } else { solid.push(run) }
        }
        cur.push(r);
    }
    if let Some(last) = rows.last() {
        if unstable(last) { dashed.push(cur) } else { solid.push(cur) }
    }
    (solid, dashed)
}

fn datablock(out: &mut String, name: &str, blocks: &[Vec<&Row>]) {
    let _ = writeln!(out, "${name} << EOD");
    for (k, b) in blocks.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for r in b {
            let _ = writeln!(out, "{} {}", r.mu, r.norm);
        }
    }
    out.push_str("EOD\n");
}

pub fn render(figure: &str, branches: &[BranchRows]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# pulse-atlas figure: {figure}");
    out.push_str("# solid: unstable_count = 0, dashed: unstable_count > 0, dots: folds\n");
    out.push_str("set xlabel 'mu'\nset ylabel 'l2 norm'\nset key off\nset grid\n\n");
    let mut plots = Vec::new();
    for (i, b) in branches.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(out, "# branch {i}: {} ({} points)", b.name, b.len());
        if b.is_empty() {
            let _ = writeln!(out, "# warning: {} has no points; its datasets are empty", b.name);
        }
        if b.unknown_counts {
            let _ = writeln!(out, "# warning: {} has points without unstable_count; drawn solid", b.name);
        }
        let (solid, dashed) = runs(&b.rows);
        let folds: Vec<&Row> = b.rows.iter().filter(|r| r.fold).collect();
        let names = [format!("b{i}_solid"), format!("b{i}_dashed"), format!("b{i}_folds")];
        datablock(&mut out, &names[0], &solid);
        datablock(&mut out, &names[1], &dashed);
        datablock(&mut out, &names[2], std::slice::from_ref(&folds));
        out.push('\n');
        if !solid.is_empty() {
            plots.push(format!("${} with lines lw 2 dt 1 lc rgb '{color}'", names[0]));
        }
        if !dashed.is_empty() {
            plots.push(format!("${} with lines lw 2 dt 2 lc rgb '{color}'", names[1]));
        }
        if !folds.is_empty() {
            plots.push(format!("${} with points pt 7 ps 1.5 lc rgb '{color}'", names[2]));
        }
    }
    if plots.is_empty() {
        out.push_str("# warning: every dataset is empty, nothing to plot\n");
    } else {
        let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
    }
    out
}

/// Script for the branches of `figure` listed in the manifest in `dir`.
pub fn emit_plot_script(manifest: &RunManifest, dir: &Path, figure: &str) -> Result<String, PlotError> {
    let mut branches = Vec::new();
    for f in manifest.figure_files(figure, FileKind::Branch) {
        let bytes = std::fs::read(dir.join(&f.path))
            .map_err(|e| PlotError::Read { file: f.path.clone(), message: e.to_string() })?;
        branches.push(read_branch_csv(&f.path, &bytes)?);
    }
    if branches.is_empty() {
        return Err(PlotError::NoBranches { figure: figure.to_string() });
    }
    Ok(render(figure, &branches))
}
