//! Line-oriented scene description files.
//!
//! A scene file declares the jet-space coordinates, then either a metric
//! pair (`h11`, `phi[i][j]`) or explicit connection coefficients
//! (`Gbar`, `G[k][i]`, ..., `M[i]`, `N[i][j]`), plus optional extras:
//! free parameters, a lowered deflection field `Dlow[i][j]` for the
//! electromagnetic 2-form, run controls (`samples`, `seed`, `tol`), and an
//! embedded coordinate change (`t_new`/`t_old`/`x_new[i]`/`x_old[i]`).
//!
//! ```text
//! # exponential clock over a flat plane
//! time t
//! space 2 x1 x2
//! h11 = exp(2*t)
//! phi[1][1] = 1
//! phi[2][2] = 1
//! ```
//!
//! Lines are independent; `#` starts a comment; blank lines are skipped.
//! Indices are literal and 1-based. Omitted connection or `Dlow` entries
//! default to zero. `phi` may be given on or above the diagonal only; a
//! contradictory mirrored pair is rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{
    GammaConnection, GeometryError, JetSpace, NonlinearConnection, SpatialMetric, TimeMetric,
};
use crate::symexpr::{parse, Expr, ExprError, SampleDomain, ZeroTester};
use crate::transform::{change_of_coords, CoordChange, TransformError};

#[derive(Debug, Error)]
pub enum ConfigError {
    /// A line that does not parse: bad key, bad expression, bad number.
    #[error("line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },
    /// Structurally inconsistent data: out-of-range indices, asymmetric
    /// `phi`, mismatched change maps.
    #[error("{what}")]
    ShapeMismatch { what: String },
    /// A required section is absent.
    #[error("missing section: {what}")]
    MissingSection { what: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// The geometric data a scene starts from: either a metric pair, from
/// which connections are derived, or connection coefficients given
/// directly.
#[derive(Debug, Clone)]
pub enum SceneKind {
    Metrics {
        time: TimeMetric,
        spatial: SpatialMetric,
    },
    Explicit {
        connection: GammaConnection,
    },
}

/// A parsed and validated scene file.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub space: JetSpace,
    pub params: Vec<String>,
    pub kind: SceneKind,
    /// Lowered deflection components `Dlow[i][j]`, when given.
    pub dlow: Option<Vec<Vec<Expr>>>,
    /// Embedded coordinate change, when given.
    pub change: Option<ChangeSpec>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

impl SceneConfig {
    /// Sampling domain covering the coordinates and all declared
    /// parameters.
    pub fn domain(&self) -> SampleDomain {
        let mut domain = self.space.sample_domain();
        for p in &self.params {
            domain = domain.base(p.clone());
        }
        domain
    }

    /// A zero tester over [`SceneConfig::domain`] with default controls.
    pub fn tester(&self) -> ZeroTester {
        ZeroTester::new(self.domain())
    }
}

/// A coordinate change as raw forward/inverse maps, prior to validation.
#[derive(Debug, Clone)]
pub struct ChangeSpec {
    pub t_new: Expr,
    pub x_new: Vec<Expr>,
    pub t_old: Expr,
    pub x_old: Vec<Expr>,
}

impl ChangeSpec {
    /// Validates the maps and builds the transport data.
    pub fn realize(
        &self,
        space: &JetSpace,
        tester: &ZeroTester,
    ) -> Result<CoordChange, TransformError> {
        change_of_coords(
            space,
            self.t_new.clone(),
            self.x_new.clone(),
            self.t_old.clone(),
            self.x_old.clone(),
            tester,
        )
    }
}

pub fn load_config(path: &Path) -> Result<SceneConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&src)
}

pub fn load_change(path: &Path, config: &SceneConfig) -> Result<ChangeSpec, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_change(&src, config)
}

/// One comment-stripped, nonblank input line.
struct Line<'a> {
    no: usize,
    text: &'a str,
}

fn content_lines(src: &str) -> Vec<Line<'_>> {
    src.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let text = match raw.find('#') {
                Some(at) => &raw[..at],
                None => raw,
            }
            .trim();
            (!text.is_empty()).then_some(Line { no: i + 1, text })
        })
        .collect()
}

fn syntax(line: usize, reason: impl Into<String>) -> ConfigError {
    ConfigError::ConfigSyntax {
        line,
        reason: reason.into(),
    }
}

/// Splits `phi[1][2]` into `("phi", [1, 2])`. Indices are literal
/// decimal integers; anything trailing the last bracket is rejected.
fn parse_key(line: usize, key: &str) -> Result<(String, Vec<usize>), ConfigError> {
    let head_len = key.find('[').unwrap_or(key.len());
    let name = &key[..head_len];
    if name.is_empty() {
        return Err(syntax(line, format!("key `{key}` has no name")));
    }
    let mut indices = Vec::new();
    let mut rest = &key[head_len..];
    while !rest.is_empty() {
        let Some(stripped) = rest.strip_prefix('[') else {
            return Err(syntax(line, format!("malformed key `{key}`")));
        };
        let Some(close) = stripped.find(']') else {
            return Err(syntax(line, format!("unclosed `[` in key `{key}`")));
        };
        let digits = &stripped[..close];
        let idx: usize = digits.parse().map_err(|_| {
            syntax(
                line,
                format!("index `{digits}` in key `{key}` is not a positive integer"),
            )
        })?;
        indices.push(idx);
        rest = &stripped[close + 1..];
    }
    Ok((name.to_string(), indices))
}

/// Checks a literal 1-based index against the spatial dimension and
/// converts it to 0-based.
fn check_index(line: usize, key: &str, idx: usize, n: usize) -> Result<usize, ConfigError> {
    if idx == 0 || idx > n {
        return Err(ConfigError::ShapeMismatch {
            what: format!("line {line}: index {idx} in `{key}` is out of range 1..={n}"),
        });
    }
    Ok(idx - 1)
}

fn expect_rank(line: usize, key: &str, indices: &[usize], want: usize) -> Result<(), ConfigError> {
    if indices.len() != want {
        return Err(syntax(
            line,
            format!("key `{key}` takes {want} indices, got {}", indices.len()),
        ));
    }
    Ok(())
}

struct Parser {
    space: JetSpace,
    params: Vec<String>,
    vars: BTreeSet<String>,
    n: usize,
    seen: BTreeSet<String>,
    h: Option<Expr>,
    phi: BTreeMap<(usize, usize), (usize, Expr)>,
    first_metric_line: Option<usize>,
    first_explicit_line: Option<usize>,
    conn: GammaConnection,
    dlow: Option<Vec<Vec<Expr>>>,
    change: ChangeAcc,
    samples: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
}

#[derive(Default)]
struct ChangeAcc {
    t_new: Option<Expr>,
    t_old: Option<Expr>,
    x_new: Vec<Option<Expr>>,
    x_old: Vec<Option<Expr>>,
}

pub fn parse_config(src: &str) -> Result<SceneConfig, ConfigError> {
    let lines = content_lines(src);

    // First pass: coordinate and parameter declarations.
    let mut time: Option<(usize, String)> = None;
    let mut space_names: Option<(usize, Vec<String>)> = None;
    let mut params: Vec<String> = Vec::new();
    for line in &lines {
        let tokens: Vec<&str> = line.text.split_whitespace().collect();
        match tokens[0] {
            "time" => {
                if time.is_some() {
                    return Err(syntax(line.no, "`time` declared twice"));
                }
                if tokens.len() != 2 {
                    return Err(syntax(line.no, "expected `time NAME`"));
                }
                time = Some((line.no, tokens[1].to_string()));
            }
            "space" => {
                if space_names.is_some() {
                    return Err(syntax(line.no, "`space` declared twice"));
                }
                if tokens.len() < 3 {
                    return Err(syntax(line.no, "expected `space N NAME...`"));
                }
                let n: usize = tokens[1]
                    .parse()
                    .map_err(|_| syntax(line.no, format!("`{}` is not a dimension", tokens[1])))?;
                if tokens.len() != n + 2 {
                    return Err(syntax(
                        line.no,
                        format!(
                            "`space {n}` expects {n} coordinate names, got {}",
                            tokens.len() - 2
                        ),
                    ));
                }
                space_names = Some((line.no, tokens[2..].iter().map(|s| s.to_string()).collect()));
            }
            "param" => {
                if tokens.len() < 2 {
                    return Err(syntax(line.no, "expected `param NAME...`"));
                }
                for name in &tokens[1..] {
                    params.push(name.to_string());
                }
            }
            _ => {}
        }
    }

    let (_, time) = time.ok_or(ConfigError::MissingSection {
        what: "`time NAME` declaration".into(),
    })?;
    let (space_line, names) = space_names.ok_or(ConfigError::MissingSection {
        what: "`space N NAME...` declaration".into(),
    })?;
    let n = names.len();
    let fiber: Vec<String> = (1..=n).map(|i| format!("y1_{i}")).collect();
    let space = JetSpace::new(time, names, fiber)?;

    let mut vars = space.var_set();
    for p in &params {
        if !vars.insert(p.clone()) {
            return Err(syntax(
                space_line,
                format!("parameter `{p}` collides with a coordinate"),
            ));
        }
    }

    let mut parser = Parser {
        n,
        params,
        vars,
        seen: BTreeSet::new(),
        h: None,
        phi: BTreeMap::new(),
        first_metric_line: None,
        first_explicit_line: None,
        conn: GammaConnection::zero(NonlinearConnection::zero(&space)),
        dlow: None,
        change: ChangeAcc {
            x_new: vec![None; n],
            x_old: vec![None; n],
            ..ChangeAcc::default()
        },
        samples: None,
        seed: None,
        tol: None,
        space,
    };

    // Second pass: assignments.
    for line in &lines {
        let first = line.text.split_whitespace().next().unwrap_or("");
        if matches!(first, "time" | "space" | "param") {
            continue;
        }
        let Some(eq) = line.text.find('=') else {
            return Err(syntax(
                line.no,
                format!("expected `KEY = EXPR`, got `{}`", line.text),
            ));
        };
        let key = line.text[..eq].trim();
        let rhs = line.text[eq + 1..].trim();
        if rhs.is_empty() {
            return Err(syntax(
                line.no,
                format!("`{key}` has an empty right-hand side"),
            ));
        }
        parser.assign(line.no, key, rhs)?;
    }

    parser.finish()
}

impl Parser {
    fn expr(&self, line: usize, rhs: &str) -> Result<Expr, ConfigError> {
        parse(rhs, &self.vars).map_err(|e| syntax(line, e.to_string()))
    }

    fn mark_seen(&mut self, line: usize, key: &str) -> Result<(), ConfigError> {
        if !self.seen.insert(key.to_string()) {
            return Err(syntax(line, format!("`{key}` given twice")));
        }
        Ok(())
    }

    fn mark_metric(&mut self, line: usize) {
        self.first_metric_line.get_or_insert(line);
    }

    fn mark_explicit(&mut self, line: usize) {
        self.first_explicit_line.get_or_insert(line);
    }

    fn assign(&mut self, line: usize, key: &str, rhs: &str) -> Result<(), ConfigError> {
        let (name, indices) = parse_key(line, key)?;
        self.mark_seen(line, key)?;
        let n = self.n;

        // Run controls take numbers, not expressions.
        match name.as_str() {
            "samples" => {
                expect_rank(line, key, &indices, 0)?;
                self.samples = Some(
                    rhs.parse()
                        .map_err(|_| syntax(line, format!("`{rhs}` is not a sample count")))?,
                );
                return Ok(());
            }
            "seed" => {
                expect_rank(line, key, &indices, 0)?;
                self.seed = Some(
                    rhs.parse()
                        .map_err(|_| syntax(line, format!("`{rhs}` is not a seed")))?,
                );
                return Ok(());
            }
            "tol" => {
                expect_rank(line, key, &indices, 0)?;
                let tol: f64 = rhs
                    .parse()
                    .map_err(|_| syntax(line, format!("`{rhs}` is not a tolerance")))?;
                if !(tol.is_finite() && tol > 0.0) {
                    return Err(syntax(line, "tolerance must be finite and positive"));
                }
                self.tol = Some(tol);
                return Ok(());
            }
            _ => {}
        }

        let value = self.expr(line, rhs)?;
        match name.as_str() {
            "h11" => {
                expect_rank(line, key, &indices, 0)?;
                self.mark_metric(line);
                self.h = Some(value);
            }
            "phi" => {
                expect_rank(line, key, &indices, 2)?;
                self.mark_metric(line);
                let i = check_index(line, key, indices[0], n)?;
                let j = check_index(line, key, indices[1], n)?;
                self.phi.insert((i, j), (line, value));
            }
            "M" => {
                expect_rank(line, key, &indices, 1)?;
                self.mark_explicit(line);
                let i = check_index(line, key, indices[0], n)?;
                self.conn.nlc.m[i] = value;
            }
            "N" => {
                expect_rank(line, key, &indices, 2)?;
                self.mark_explicit(line);
                let i = check_index(line, key, indices[0], n)?;
                let j = check_index(line, key, indices[1], n)?;
                self.conn.nlc.n[i][j] = value;
            }
            "Gbar" => {
                expect_rank(line, key, &indices, 0)?;
                self.mark_explicit(line);
                self.conn.gbar = value;
            }
            "G" => {
                expect_rank(line, key, &indices, 2)?;
                self.mark_explicit(line);
                let k = check_index(line, key, indices[0], n)?;
                let i = check_index(line, key, indices[1], n)?;
                self.conn.g[k][i] = value;
            }
            "Gv" => {
                expect_rank(line, key, &indices, 2)?;
                self.mark_explicit(line);
                let k = check_index(line, key, indices[0], n)?;
                let i = check_index(line, key, indices[1], n)?;
                self.conn.gv[k][i] = value;
            }
            "Lbar" => {
                expect_rank(line, key, &indices, 1)?;
                self.mark_explicit(line);
                let j = check_index(line, key, indices[0], n)?;
                self.conn.lbar[j] = value;
            }
            "L" => {
                expect_rank(line, key, &indices, 3)?;
                self.mark_explicit(line);
                let k = check_index(line, key, indices[0], n)?;
                let i = check_index(line, key, indices[1], n)?;
                let j = check_index(line, key, indices[2], n)?;
                self.conn.l[k][i][j] = value;
            }
            "Lv" => {
                expect_rank(line, key, &indices, 3)?;
                self.mark_explicit(line);
                let k = check_index(line, key, indices[0], n)?;
                let i = check_index(line, key, indices[1], n)?;
                let j = check_index(line, key, indices[2], n)?;
                self.conn.lv[k][i][j] = value;
            }
            "Cbar" => {
                expect_rank(line, key, &indices, 1)?;
                self.mark_explicit(line);
                let k = check_index(line, key, indices[0], n)?;
                self.conn.cbar[k] = value;
            }
            "C" => {
                expect_rank(line, key, &indices, 3)?;
                self.mark_explicit(line);
                let k = check_index(line, key, indices[0], n)?;
                let i = check_index(line, key, indices[1], n)?;
                let j = check_index(line, key, indices[2], n)?;
                self.conn.c[k][i][j] = value;
            }
            "Cv" => {
                expect_rank(line, key, &indices, 3)?;
                self.mark_explicit(line);
                let k = check_index(line, key, indices[0], n)?;
                let i = check_index(line, key, indices[1], n)?;
                let j = check_index(line, key, indices[2], n)?;
                self.conn.cv[k][i][j] = value;
            }
            "Dlow" => {
                expect_rank(line, key, &indices, 2)?;
                let i = check_index(line, key, indices[0], n)?;
                let j = check_index(line, key, indices[1], n)?;
                self.dlow
                    .get_or_insert_with(|| vec![vec![Expr::zero(); n]; n])[i][j] = value;
            }
            "t_new" => {
                expect_rank(line, key, &indices, 0)?;
                self.change.t_new = Some(value);
            }
            "t_old" => {
                expect_rank(line, key, &indices, 0)?;
                self.change.t_old = Some(value);
            }
            "x_new" => {
                expect_rank(line, key, &indices, 1)?;
                let i = check_index(line, key, indices[0], n)?;
                self.change.x_new[i] = Some(value);
            }
            "x_old" => {
                expect_rank(line, key, &indices, 1)?;
                let i = check_index(line, key, indices[0], n)?;
                self.change.x_old[i] = Some(value);
            }
            other => {
                return Err(syntax(line, format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<SceneConfig, ConfigError> {
        let Parser {
            space,
            params,
            n,
            h,
            phi,
            first_metric_line,
            first_explicit_line,
            conn,
            dlow,
            change,
            samples,
            seed,
            tol,
            ..
        } = self;

        let kind = match (first_metric_line, first_explicit_line) {
            (Some(m), Some(e)) => {
                return Err(syntax(
                    m.max(e),
                    "metric entries (h11/phi) and explicit connection entries are mutually exclusive",
                ));
            }
            (None, None) => {
                return Err(ConfigError::MissingSection {
                    what: "a metric pair (`h11`, `phi[i][j]`) or explicit connection coefficients"
                        .into(),
                });
            }
            (Some(_), None) => {
                let h = h.ok_or(ConfigError::MissingSection {
                    what: "`h11 = EXPR`".into(),
                })?;
                if phi.is_empty() {
                    return Err(ConfigError::MissingSection {
                        what: "`phi[i][j] = EXPR` entries".into(),
                    });
                }
                // Mirror the given entries and reject contradictions.
                let mut full = vec![vec![Expr::zero(); n]; n];
                for i in 0..n {
                    for j in 0..n {
                        match (phi.get(&(i, j)), phi.get(&(j, i))) {
                            (Some((_, a)), Some((_, b))) if i != j && a != b => {
                                return Err(ConfigError::ShapeMismatch {
                                    what: format!(
                                        "phi[{}][{}] and phi[{}][{}] disagree; phi must be symmetric",
                                        i + 1,
                                        j + 1,
                                        j + 1,
                                        i + 1
                                    ),
                                });
                            }
                            (Some((_, a)), _) => full[i][j] = a.clone(),
                            (None, Some((_, b))) => full[i][j] = b.clone(),
                            (None, None) => {}
                        }
                    }
                }
                let mut domain = space.sample_domain();
                for p in &params {
                    domain = domain.base(p.clone());
                }
                let tester = ZeroTester::new(domain);
                let time = TimeMetric::new(&space, h, &tester)?;
                let spatial = SpatialMetric::new(&space, full, &tester)?;
                SceneKind::Metrics { time, spatial }
            }
            (None, Some(_)) => SceneKind::Explicit { connection: conn },
        };

        let change = realize_change_acc(change, &space)?;

        Ok(SceneConfig {
            space,
            params,
            kind,
            dlow,
            change,
            samples,
            seed,
            tol,
        })
    }
}

/// Resolves accumulated change lines into a [`ChangeSpec`], defaulting
/// unmentioned coordinates to the identity. Forward and inverse maps must
/// be given in pairs.
fn realize_change_acc(acc: ChangeAcc, space: &JetSpace) -> Result<Option<ChangeSpec>, ConfigError> {
    let ChangeAcc {
        t_new,
        t_old,
        x_new,
        x_old,
    } = acc;
    let any = t_new.is_some()
        || t_old.is_some()
        || x_new.iter().any(Option::is_some)
        || x_old.iter().any(Option::is_some);
    if !any {
        return Ok(None);
    }
    if t_new.is_some() != t_old.is_some() {
        return Err(ConfigError::ShapeMismatch {
            what: "`t_new` and `t_old` must be given together".into(),
        });
    }
    for i in 0..space.dim() {
        if x_new[i].is_some() != x_old[i].is_some() {
            return Err(ConfigError::ShapeMismatch {
                what: format!(
                    "`x_new[{0}]` and `x_old[{0}]` must be given together",
                    i + 1
                ),
            });
        }
    }
    let t_id = space.t_var();
    let x_id = |i: usize| Expr::var(&space.space_coords()[i]);
    Ok(Some(ChangeSpec {
        t_new: t_new.unwrap_or_else(|| t_id.clone()),
        x_new: x_new
            .into_iter()
            .enumerate()
            .map(|(i, slot)| slot.unwrap_or_else(|| x_id(i)))
            .collect(),
        t_old: t_old.unwrap_or(t_id),
        x_old: x_old
            .into_iter()
            .enumerate()
            .map(|(i, slot)| slot.unwrap_or_else(|| x_id(i)))
            .collect(),
    }))
}

/// Parses a standalone change file against an already-loaded scene. The
/// file holds only `t_new`/`t_old`/`x_new[i]`/`x_old[i]` lines.
pub fn parse_change(src: &str, config: &SceneConfig) -> Result<ChangeSpec, ConfigError> {
    let n = config.space.dim();
    let mut vars: BTreeSet<String> = config.space.var_set();
    for p in &config.params {
        vars.insert(p.clone());
    }
    let mut acc = ChangeAcc {
        x_new: vec![None; n],
        x_old: vec![None; n],
        ..ChangeAcc::default()
    };
    let mut seen = BTreeSet::new();
    for line in content_lines(src) {
        let Some(eq) = line.text.find('=') else {
            return Err(syntax(
                line.no,
                format!("expected `KEY = EXPR`, got `{}`", line.text),
            ));
        };
        let key = line.text[..eq].trim();
        let rhs = line.text[eq + 1..].trim();
        let (name, indices) = parse_key(line.no, key)?;
        if !seen.insert(key.to_string()) {
            return Err(syntax(line.no, format!("`{key}` given twice")));
        }
        let value = parse(rhs, &vars).map_err(|e| syntax(line.no, e.to_string()))?;
        match name.as_str() {
            "t_new" => {
                expect_rank(line.no, key, &indices, 0)?;
                acc.t_new = Some(value);
            }
            "t_old" => {
                expect_rank(line.no, key, &indices, 0)?;
                acc.t_old = Some(value);
            }
            "x_new" => {
                expect_rank(line.no, key, &indices, 1)?;
                let i = check_index(line.no, key, indices[0], n)?;
                acc.x_new[i] = Some(value);
            }
            "x_old" => {
                expect_rank(line.no, key, &indices, 1)?;
                let i = check_index(line.no, key, indices[0], n)?;
                acc.x_old[i] = Some(value);
            }
            other => {
                return Err(syntax(line.no, format!("unknown change key `{other}`")));
            }
        }
    }
    realize_change_acc(acc, &config.space)?.ok_or(ConfigError::MissingSection {
        what: "at least one `t_new`/`x_new[i]` pair".into(),
    })
}
