//! Deterministic rendering of computed structures and verification
//! verdicts.
//!
//! Text mode groups component families under `#` headings whose text is
//! the family's generic-index pattern, with one `LABEL = EXPR` line per
//! component. Machine mode emits flat `key = value` lines with dotted
//! family prefixes and no headings. Connection and nonlinear-connection
//! sections use the scene-file keys directly and are preceded by the
//! scene's coordinate declarations, so their machine output reloads as a
//! scene file. Expressions print in their canonical form, which re-parses
//! to the identical expression.

use std::fmt::Write as _;

use crate::curvtor::{CurvatureSet, TorsionSet};
use crate::geometry::{GammaConnection, JetSpace, NonlinearConnection};
use crate::identities::{DeflectionSet, IdentityReport};
use crate::symexpr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMode {
    Text,
    Machine,
}

/// One rendered component: a text-mode label, a machine-mode key, and
/// the printed value.
#[derive(Debug, Clone)]
pub struct ReportItem {
    pub label: String,
    pub key: String,
    pub value: String,
}

impl ReportItem {
    fn new(label: String, key: String, value: &Expr) -> ReportItem {
        ReportItem {
            label,
            key,
            value: value.to_string(),
        }
    }

    /// An item whose label doubles as its machine key.
    fn plain(label: impl Into<String>, value: &Expr) -> ReportItem {
        let label = label.into();
        ReportItem {
            key: label.clone(),
            label,
            value: value.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
enum Block {
    /// Scene coordinate declarations, emitted verbatim in both modes.
    Header(Vec<String>),
    Components {
        heading: String,
        items: Vec<ReportItem>,
    },
    Verdicts(IdentityReport),
}

/// An ordered sequence of renderable blocks.
#[derive(Debug, Clone, Default)]
pub struct Report {
    blocks: Vec<Block>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn push_header(&mut self, lines: Vec<String>) {
        self.blocks.push(Block::Header(lines));
    }

    pub fn push_components(&mut self, heading: impl Into<String>, items: Vec<ReportItem>) {
        self.blocks.push(Block::Components {
            heading: heading.into(),
            items,
        });
    }

    pub fn push_verdicts(&mut self, verdicts: IdentityReport) {
        self.blocks.push(Block::Verdicts(verdicts));
    }

    /// Does any verdict block contain a failed check?
    pub fn has_failures(&self) -> bool {
        self.blocks
            .iter()
            .any(|b| matches!(b, Block::Verdicts(v) if !v.all_passed()))
    }

    pub fn render(&self, mode: ReportMode) -> String {
        let mut out = String::new();
        for (pos, block) in self.blocks.iter().enumerate() {
            if pos > 0 {
                out.push('\n');
            }
            match block {
                Block::Header(lines) => {
                    for line in lines {
                        out.push_str(line);
                        out.push('\n');
                    }
                }
                Block::Components { heading, items } => {
                    if mode == ReportMode::Text {
                        let _ = writeln!(out, "# {heading}");
                    }
                    for item in items {
                        let name = match mode {
                            ReportMode::Text => &item.label,
                            ReportMode::Machine => &item.key,
                        };
                        let _ = writeln!(out, "{name} = {}", item.value);
                    }
                }
                Block::Verdicts(verdicts) => {
                    let _ = writeln!(out, "seed = {}", verdicts.seed);
                    for entry in &verdicts.entries {
                        let _ = writeln!(
                            out,
                            "{} {}  residual={:.3e}  samples={}  path={}",
                            if entry.passed { "PASS" } else { "FAIL" },
                            entry.name,
                            entry.max_residual,
                            entry.samples,
                            entry.path,
                        );
                    }
                    let failed = verdicts.entries.iter().filter(|e| !e.passed).count();
                    let total = verdicts.entries.len();
                    if failed == 0 {
                        let _ = writeln!(out, "result: {total} checks, all passed");
                    } else {
                        let _ = writeln!(out, "result: {failed} of {total} checks failed");
                    }
                }
            }
        }
        out
    }
}

/// The scene-file coordinate declarations for a jet space.
pub fn scene_header(space: &JetSpace, params: &[String]) -> Vec<String> {
    let mut lines = vec![format!("time {}", space.time_coord())];
    lines.push(format!(
        "space {} {}",
        space.dim(),
        space.space_coords().join(" ")
    ));
    if !params.is_empty() {
        lines.push(format!("param {}", params.join(" ")));
    }
    lines
}

/// Adds the two christoffel families of a metric pair.
pub fn add_christoffel(report: &mut Report, h_symbol: &Expr, gamma: &[Vec<Vec<Expr>>]) {
    report.push_components(
        "H[1,1]^[1]",
        vec![ReportItem::new(
            "H[1,1]^[1]".into(),
            "christoffel.H[1,1]^[1]".into(),
            h_symbol,
        )],
    );
    let n = gamma.len();
    let mut items = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let label = format!("gamma[{},{}]^[{}]", j + 1, k + 1, i + 1);
                items.push(ReportItem::new(
                    label.clone(),
                    format!("christoffel.{label}"),
                    &gamma[i][j][k],
                ));
            }
        }
    }
    report.push_components("gamma[j,k]^[i]", items);
}

/// Adds a nonlinear connection as scene-file `M`/`N` entries.
pub fn add_nlc(report: &mut Report, nlc: &NonlinearConnection) {
    let n = nlc.dim();
    let mut time_items = Vec::new();
    let mut space_items = Vec::new();
    for i in 0..n {
        time_items.push(ReportItem::new(
            format!("M[(1)][1]^[({})]", i + 1),
            format!("M[{}]", i + 1),
            &nlc.m[i],
        ));
        for j in 0..n {
            space_items.push(ReportItem::new(
                format!("N[(1)][{}]^[({})]", j + 1, i + 1),
                format!("N[{}][{}]", i + 1, j + 1),
                &nlc.n[i][j],
            ));
        }
    }
    report.push_components("M[(1)][1]^[(i)]", time_items);
    report.push_components("N[(1)][j]^[(i)]", space_items);
}

/// Adds a full connection, nonlinear part included, as scene-file
/// entries.
pub fn add_connection(report: &mut Report, conn: &GammaConnection) {
    add_nlc(report, &conn.nlc);
    let n = conn.dim();

    report.push_components("Gbar", vec![ReportItem::plain("Gbar", &conn.gbar)]);

    let section2 = |name: &str, block: &[Vec<Expr>], report: &mut Report| {
        let mut items = Vec::new();
        for k in 0..n {
            for i in 0..n {
                items.push(ReportItem::plain(
                    format!("{name}[{}][{}]", k + 1, i + 1),
                    &block[k][i],
                ));
            }
        }
        report.push_components(format!("{name}[k][i]"), items);
    };
    section2("G", &conn.g, report);
    section2("Gv", &conn.gv, report);

    let mut items = Vec::new();
    for j in 0..n {
        items.push(ReportItem::plain(format!("Lbar[{}]", j + 1), &conn.lbar[j]));
    }
    report.push_components("Lbar[j]", items);

    let section3 = |name: &str, block: &[Vec<Vec<Expr>>], report: &mut Report| {
        let mut items = Vec::new();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    items.push(ReportItem::plain(
                        format!("{name}[{}][{}][{}]", k + 1, i + 1, j + 1),
                        &block[k][i][j],
                    ));
                }
            }
        }
        report.push_components(format!("{name}[k][i][j]"), items);
    };
    section3("L", &conn.l, report);
    section3("Lv", &conn.lv, report);

    let mut items = Vec::new();
    for k in 0..n {
        items.push(ReportItem::plain(format!("Cbar[{}]", k + 1), &conn.cbar[k]));
    }
    report.push_components("Cbar[k]", items);

    section3("C", &conn.c, report);
    section3("Cv", &conn.cv, report);
}

fn torsion_heading(tag: &str) -> &'static str {
    match tag {
        "tbar" => "Tbar[1,j]^[1]",
        "t_time" => "T[1,j]^[k]",
        "t_space" => "T[i,j]^[k]",
        "pbar" => "Pbar[1,(j)]^[1,(1)]",
        "p_space" => "P[i,(j)]^[k,(1)]",
        "p_vert_time" => "P[(1)][1,(j)]^[(k),(1)]",
        "p_vert_space" => "P[(1)][i,(j)]^[(k),(1)]",
        "s_vert" => "S[(1)][(i),(j)]^[(k),(1)]",
        "r_time" => "R[(1)][1,j]^[(k)]",
        "r_space" => "R[(1)][i,j]^[(k)]",
        other => unreachable!("unknown torsion family `{other}`"),
    }
}

fn curvature_heading(tag: &str) -> &'static str {
    match tag {
        "rbar_time" => "Rbar[1,1,k]^[1]",
        "rbar_space" => "Rbar[1,j,k]^[1]",
        "pbar_time" => "Pbar[1,1,(k)]^[1,(1)]",
        "pbar_space" => "Pbar[1,j,(k)]^[1,(1)]",
        "sbar" => "Sbar[1,(j),(k)]^[1,(1),(1)]",
        "r_time" => "R[i,1,k]^[l]",
        "r_space" => "R[i,j,k]^[l]",
        "p_time" => "P[i,1,(k)]^[l,(1)]",
        "p_space" => "P[i,j,(k)]^[l,(1)]",
        "s_space" => "S[i,(j),(k)]^[l,(1),(1)]",
        "rv_time" => "R[(1)][(i),1,k]^[(l),(1)]",
        "rv_space" => "R[(1)][(i),j,k]^[(l),(1)]",
        "pv_time" => "P[(1)][(i),1,(k)]^[(l),(1),(1)]",
        "pv_space" => "P[(1)][(i),j,(k)]^[(l),(1),(1)]",
        "sv" => "S[(1)][(i),(j),(k)]^[(l),(1),(1)]",
        other => unreachable!("unknown curvature family `{other}`"),
    }
}

fn deflection_heading(tag: &str) -> &'static str {
    match tag {
        "dbar" => "Dbar[(1)][1]^[(i)]",
        "d" => "D[(1)][j]^[(i)]",
        "dv" => "d[(1)][(j)]^[(i),(1)]",
        other => unreachable!("unknown deflection family `{other}`"),
    }
}

/// Groups `(family, label, value)` triples into consecutive-family
/// sections with dotted machine keys.
fn add_families<'a>(
    report: &mut Report,
    prefix: &str,
    named: impl Iterator<Item = (&'static str, String, &'a Expr)>,
    heading_of: fn(&str) -> &'static str,
) {
    let mut current: Option<(&'static str, Vec<ReportItem>)> = None;
    for (family, label, value) in named {
        let item = ReportItem::new(label.clone(), format!("{prefix}.{family}.{label}"), value);
        match &mut current {
            Some((tag, items)) if *tag == family => items.push(item),
            _ => {
                if let Some((tag, items)) = current.take() {
                    report.push_components(heading_of(tag), items);
                }
                current = Some((family, vec![item]));
            }
        }
    }
    if let Some((tag, items)) = current.take() {
        report.push_components(heading_of(tag), items);
    }
}

/// Adds all ten torsion families.
pub fn add_torsion(report: &mut Report, set: &TorsionSet) {
    add_families(report, "torsion", set.iter_named(), torsion_heading);
}

/// Adds all fifteen curvature families.
pub fn add_curvature(report: &mut Report, set: &CurvatureSet) {
    add_families(report, "curvature", set.iter_named(), curvature_heading);
}

/// Adds the three deflection families.
pub fn add_deflection(report: &mut Report, set: &DeflectionSet) {
    add_families(report, "deflection", set.iter_named(), deflection_heading);
}

/// Adds the electromagnetic 2-form components.
pub fn add_em(report: &mut Report, f: &[Vec<Expr>]) {
    let n = f.len();
    let mut items = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let label = format!("F[({}),{}]^[(1)]", i + 1, j + 1);
            items.push(ReportItem::new(
                label.clone(),
                format!("em.{label}"),
                &f[i][j],
            ));
        }
    }
    report.push_components("F[(i),j]^[(1)]", items);
}

/// Concatenates verdict reports from several suites into one, keeping
/// the name ordering of a single finished report. The seeds agree by
/// construction; the first is kept.
pub fn merge_verdicts(reports: impl IntoIterator<Item = IdentityReport>) -> IdentityReport {
    let mut iter = reports.into_iter();
    let Some(first) = iter.next() else {
        return IdentityReport::new(0).finish();
    };
    let mut merged = IdentityReport::new(first.seed);
    for entry in first.entries {
        merged.push(entry);
    }
    for report in iter {
        for entry in report.entries {
            merged.push(entry);
        }
    }
    merged.finish()
}
