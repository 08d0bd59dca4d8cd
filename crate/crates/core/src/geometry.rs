//! Jet spaces, metrics, and the connections built from them.
//!
//! The configuration space is a 1-jet space over a one-dimensional time
//! axis and an n-dimensional spatial manifold, with coordinates
//! `(t, x^i, y^i)`; the fiber coordinates `y^i` transform like velocities
//! `dx^i/dt`. A pair of metrics — `h(t)` on time, `phi_ij(x)` on space —
//! induces Christoffel symbols, a canonical nonlinear connection, and a
//! canonical linear connection whose only nonzero blocks are built from
//! those Christoffels.

use crate::symexpr::{Expr, ExprError, SampleDomain, ZeroTester};
use std::collections::BTreeSet;
use std::fmt;

/// Maximum spatial dimension the symbolic adjugate inverse supports.
pub const MAX_DIMENSION: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    /// `h` vanishes identically or `det(phi)` does: the metric cannot be
    /// inverted.
    #[error("singular metric: {what}")]
    SingularMetric { what: String },
    /// The symbolic inverse is cofactor-based and capped at n = 4.
    #[error("spatial dimension {n} exceeds the supported maximum {MAX_DIMENSION}")]
    DimensionTooLarge { n: usize },
    /// At least one spatial coordinate is required.
    #[error("a jet space needs at least one spatial coordinate")]
    ZeroDimension,
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    /// A field depends on a coordinate its definition forbids, e.g. a
    /// time metric depending on a spatial coordinate.
    #[error("{what} must not depend on `{var}`")]
    ForbiddenDependency { what: String, var: String },
    /// Coordinate names must be pairwise distinct and well-formed.
    #[error("bad coordinate name `{name}`: {reason}")]
    BadCoordinate { name: String, reason: String },
    #[error("{what} has shape {got}, expected {want}")]
    ShapeMismatch {
        what: String,
        got: String,
        want: String,
    },
    /// A matrix entry breaks a required symmetry.
    #[error("metric is not symmetric at entry ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// The 1-jet space of curves into an n-dimensional manifold: one time
/// coordinate, n spatial coordinates, n fiber (velocity) coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetSpace {
    time: String,
    space: Vec<String>,
    fiber: Vec<String>,
}

impl JetSpace {
    /// Builds a jet space from explicit coordinate names. Names must be
    /// distinct, nonempty, and start with a letter or underscore.
    pub fn new(
        time: impl Into<String>,
        space: Vec<String>,
        fiber: Vec<String>,
    ) -> Result<JetSpace, GeometryError> {
        let time = time.into();
        if space.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        if space.len() > MAX_DIMENSION {
            return Err(GeometryError::DimensionTooLarge { n: space.len() });
        }
        if fiber.len() != space.len() {
            return Err(GeometryError::ShapeMismatch {
                what: "fiber coordinates".into(),
                got: fiber.len().to_string(),
                want: space.len().to_string(),
            });
        }
        let mut seen = BTreeSet::new();
        for name in std::iter::once(&time).chain(&space).chain(&fiber) {
            let mut chars = name.chars();
            let head_ok = chars
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
            if !head_ok || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(GeometryError::BadCoordinate {
                    name: name.clone(),
                    reason: "not a valid identifier".into(),
                });
            }
            if crate::symexpr::Func::from_name(name).is_some() {
                return Err(GeometryError::BadCoordinate {
                    name: name.clone(),
                    reason: "collides with a function name".into(),
                });
            }
            if !seen.insert(name.clone()) {
                return Err(GeometryError::BadCoordinate {
                    name: name.clone(),
                    reason: "duplicate coordinate".into(),
                });
            }
        }
        Ok(JetSpace { time, space, fiber })
    }

    /// `t`, `x1..xn`, `y1_1..y1_n`.
    pub fn standard(n: usize) -> Result<JetSpace, GeometryError> {
        JetSpace::new(
            "t",
            (1..=n).map(|i| format!("x{i}")).collect(),
            (1..=n).map(|i| format!("y1_{i}")).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn time_coord(&self) -> &str {
        &self.time
    }

    pub fn space_coords(&self) -> &[String] {
        &self.space
    }

    pub fn fiber_coords(&self) -> &[String] {
        &self.fiber
    }

    pub fn space_coord(&self, i: usize) -> Result<&str, GeometryError> {
        self.space
            .get(i)
            .map(String::as_str)
            .ok_or(GeometryError::IndexOutOfRange {
                index: i,
                n: self.dim(),
            })
    }

    pub fn fiber_coord(&self, i: usize) -> Result<&str, GeometryError> {
        self.fiber
            .get(i)
            .map(String::as_str)
            .ok_or(GeometryError::IndexOutOfRange {
                index: i,
                n: self.dim(),
            })
    }

    pub fn t_var(&self) -> Expr {
        Expr::var(&self.time)
    }

    pub fn x_var(&self, i: usize) -> Expr {
        Expr::var(&self.space[i])
    }

    pub fn y_var(&self, i: usize) -> Expr {
        Expr::var(&self.fiber[i])
    }

    /// All coordinate names, for expression parsing.
    pub fn var_set(&self) -> BTreeSet<String> {
        std::iter::once(self.time.clone())
            .chain(self.space.iter().cloned())
            .chain(self.fiber.iter().cloned())
            .collect()
    }

    /// Sampling box: time and space coordinates on the pole-free base
    /// range, fiber coordinates straddling zero.
    pub fn sample_domain(&self) -> SampleDomain {
        let mut domain = SampleDomain::new().base(&self.time);
        for x in &self.space {
            domain = domain.base(x.clone());
        }
        for y in &self.fiber {
            domain = domain.fiber(y.clone());
        }
        domain
    }

    /// Zero tester over this space's sampling box with default budget.
    pub fn tester(&self) -> ZeroTester {
        ZeroTester::new(self.sample_domain())
    }

    /// Is the coordinate a fiber (velocity) coordinate?
    pub fn is_fiber(&self, name: &str) -> bool {
        self.fiber.iter().any(|y| y == name)
    }
}

impl fmt::Display for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J^1({}; {})", self.time, self.space.join(", "))
    }
}

/// Riemannian metric `h(t)` on the time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMetric {
    space: JetSpace,
    h: Expr,
}

impl TimeMetric {
    /// Validates that `h` involves only the time coordinate (parameters
    /// are fine) and is not identically zero under `tester`.
    pub fn new(
        space: &JetSpace,
        h: Expr,
        tester: &ZeroTester,
    ) -> Result<TimeMetric, GeometryError> {
        for var in h.free_vars() {
            if space.space.contains(&var) || space.fiber.contains(&var) {
                return Err(GeometryError::ForbiddenDependency {
                    what: "time metric h".into(),
                    var,
                });
            }
        }
        if tester.is_zero(&h)? {
            return Err(GeometryError::SingularMetric {
                what: "h vanishes identically".into(),
            });
        }
        Ok(TimeMetric {
            space: space.clone(),
            h,
        })
    }

    pub fn h(&self) -> &Expr {
        &self.h
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }
}

/// Symmetric, nondegenerate metric `phi_ij(x)` on the spatial manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMetric {
    space: JetSpace,
    phi: Vec<Vec<Expr>>,
}

impl SpatialMetric {
    /// Validates shape, symmetry (canonical forms must coincide), spatial
    /// dependency, and nondegeneracy of the determinant under `tester`.
    pub fn new(
        space: &JetSpace,
        phi: Vec<Vec<Expr>>,
        tester: &ZeroTester,
    ) -> Result<SpatialMetric, GeometryError> {
        let n = space.dim();
        if phi.len() != n || phi.iter().any(|row| row.len() != n) {
            return Err(GeometryError::ShapeMismatch {
                what: "spatial metric phi".into(),
                got: format!("{}x{}", phi.len(), phi.first().map_or(0, Vec::len)),
                want: format!("{n}x{n}"),
            });
        }
        for (i, row) in phi.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                if j > i && *entry != phi[j][i] {
                    return Err(GeometryError::NotSymmetric { i, j });
                }
                for var in entry.free_vars() {
                    if var == space.time || space.fiber.contains(&var) {
                        return Err(GeometryError::ForbiddenDependency {
                            what: format!("spatial metric entry phi[{}][{}]", i + 1, j + 1),
                            var,
                        });
                    }
                }
            }
        }
        let det = matrix::det(&phi);
        if tester.is_zero(&det)? {
            return Err(GeometryError::SingularMetric {
                what: "det(phi) vanishes identically".into(),
            });
        }
        Ok(SpatialMetric {
            space: space.clone(),
            phi,
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.phi[i][j]
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.phi
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    pub fn determinant(&self) -> Expr {
        matrix::det(&self.phi)
    }

    /// Exact symbolic inverse by adjugate over determinant.
    pub fn inverse(&self) -> Vec<Vec<Expr>> {
        matrix::inverse(&self.phi)
    }
}

/// Nonlinear connection on the jet space: the coefficients that tilt the
/// horizontal frame fields
///
/// ```text
/// d/dt_adapted = d/dt - M[k] d/dy_k
/// d/dx_i_adapted = d/dx_i - N[k][i] d/dy_k
/// ```
///
/// Slot convention: `m[k]` carries the upper index, `n[k][i]` has the
/// upper index first, lower (direction) index second.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearConnection {
    pub space: JetSpace,
    pub m: Vec<Expr>,
    pub n: Vec<Vec<Expr>>,
}

impl NonlinearConnection {
    pub fn new(
        space: &JetSpace,
        m: Vec<Expr>,
        n: Vec<Vec<Expr>>,
    ) -> Result<NonlinearConnection, GeometryError> {
        let dim = space.dim();
        if m.len() != dim {
            return Err(GeometryError::ShapeMismatch {
                what: "nonlinear connection M".into(),
                got: m.len().to_string(),
                want: dim.to_string(),
            });
        }
        if n.len() != dim || n.iter().any(|row| row.len() != dim) {
            return Err(GeometryError::ShapeMismatch {
                what: "nonlinear connection N".into(),
                got: format!("{}x{}", n.len(), n.first().map_or(0, Vec::len)),
                want: format!("{dim}x{dim}"),
            });
        }
        Ok(NonlinearConnection {
            space: space.clone(),
            m,
            n,
        })
    }

    pub fn zero(space: &JetSpace) -> NonlinearConnection {
        let n = space.dim();
        NonlinearConnection {
            space: space.clone(),
            m: vec![Expr::zero(); n],
            n: vec![vec![Expr::zero(); n]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

/// Linear connection adapted to a nonlinear connection, stored as nine
/// coefficient blocks. In `conn[upper][lower...]` order:
///
/// * time derivatives: `gbar` (time/time), `g[k][i]` (space), `gv[k][i]`
///   (fiber);
/// * spatial derivatives: `lbar[j]` (time), `l[k][i][j]` (space),
///   `lv[k][i][j]` (fiber) — the last index is the derivative direction;
/// * fiber derivatives: `cbar[k]` (time), `c[k][i][j]` (space),
///   `cv[k][i][j]` (fiber) — the last index is the fiber direction.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaConnection {
    pub nlc: NonlinearConnection,
    pub gbar: Expr,
    pub g: Vec<Vec<Expr>>,
    pub gv: Vec<Vec<Expr>>,
    pub lbar: Vec<Expr>,
    pub l: Vec<Vec<Vec<Expr>>>,
    pub lv: Vec<Vec<Vec<Expr>>>,
    pub cbar: Vec<Expr>,
    pub c: Vec<Vec<Vec<Expr>>>,
    pub cv: Vec<Vec<Vec<Expr>>>,
}

impl GammaConnection {
    /// All-zero blocks over the given nonlinear connection.
    pub fn zero(nlc: NonlinearConnection) -> GammaConnection {
        let n = nlc.dim();
        GammaConnection {
            nlc,
            gbar: Expr::zero(),
            g: vec![vec![Expr::zero(); n]; n],
            gv: vec![vec![Expr::zero(); n]; n],
            lbar: vec![Expr::zero(); n],
            l: vec![vec![vec![Expr::zero(); n]; n]; n],
            lv: vec![vec![vec![Expr::zero(); n]; n]; n],
            cbar: vec![Expr::zero(); n],
            c: vec![vec![vec![Expr::zero(); n]; n]; n],
            cv: vec![vec![vec![Expr::zero(); n]; n]; n],
        }
    }

    pub fn space(&self) -> &JetSpace {
        &self.nlc.space
    }

    pub fn dim(&self) -> usize {
        self.nlc.dim()
    }

    /// Shape check for hand-assembled connections.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.dim();
        let want2 = |what: &str, m: &Vec<Vec<Expr>>| -> Result<(), GeometryError> {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(GeometryError::ShapeMismatch {
                    what: what.into(),
                    got: format!("{}x{}", m.len(), m.first().map_or(0, Vec::len)),
                    want: format!("{n}x{n}"),
                });
            }
            Ok(())
        };
        let want3 = |what: &str, m: &Vec<Vec<Vec<Expr>>>| -> Result<(), GeometryError> {
            let ok = m.len() == n
                && m.iter()
                    .all(|p| p.len() == n && p.iter().all(|r| r.len() == n));
            if !ok {
                return Err(GeometryError::ShapeMismatch {
                    what: what.into(),
                    got: "ragged".into(),
                    want: format!("{n}x{n}x{n}"),
                });
            }
            Ok(())
        };
        let want1 = |what: &str, v: &Vec<Expr>| -> Result<(), GeometryError> {
            if v.len() != n {
                return Err(GeometryError::ShapeMismatch {
                    what: what.into(),
                    got: v.len().to_string(),
                    want: n.to_string(),
                });
            }
            Ok(())
        };
        want2("G", &self.g)?;
        want2("Gv", &self.gv)?;
        want1("Lbar", &self.lbar)?;
        want3("L", &self.l)?;
        want3("Lv", &self.lv)?;
        want1("Cbar", &self.cbar)?;
        want3("C", &self.c)?;
        want3("Cv", &self.cv)?;
        Ok(())
    }
}

/// Christoffel symbol of the time metric: `h'(t) / (2 h(t))`.
pub fn christoffel_time(metric: &TimeMetric) -> Expr {
    let t = metric.space.time_coord();
    let dh = metric.h.differentiate(t);
    Expr::product([Expr::ratio(1, 2), dh, metric.h.inv()])
}

/// Christoffel symbols of the spatial metric,
/// `gamma[i][j][k] = phi^im/2 (d_k phi_mj + d_j phi_mk - d_m phi_jk)`,
/// symmetric in the lower pair `(j, k)`.
pub fn christoffel_spatial(metric: &SpatialMetric) -> Vec<Vec<Vec<Expr>>> {
    let n = metric.space.dim();
    let inv = metric.inverse();
    let x = |i: usize| metric.space.space_coords()[i].clone();
    let mut gamma = vec![vec![vec![Expr::zero(); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut terms = Vec::with_capacity(n);
                for m in 0..n {
                    let bracket = Expr::sum([
                        metric.phi[m][j].differentiate(&x(k)),
                        metric.phi[m][k].differentiate(&x(j)),
                        metric.phi[j][k].differentiate(&x(m)).neg(),
                    ]);
                    terms.push(Expr::product([inv[i][m].clone(), bracket]));
                }
                let value = Expr::product([Expr::ratio(1, 2), Expr::sum(terms)]);
                gamma[i][j][k] = value.clone();
                gamma[i][k][j] = value;
            }
        }
    }
    gamma
}

/// Curvature tensor of the spatial Christoffel symbols,
///
/// ```text
/// r[l][m][i][j] = d_j gamma[l][i][m] - d_i gamma[l][j][m]
///              + gamma[l][j][r] gamma[r][i][m] - gamma[l][i][r] gamma[r][j][m]
/// ```
///
/// antisymmetric in the trailing pair `(i, j)`.
pub fn spatial_riemann(metric: &SpatialMetric) -> Vec<Vec<Vec<Vec<Expr>>>> {
    let n = metric.space.dim();
    let gamma = christoffel_spatial(metric);
    let x = |i: usize| metric.space.space_coords()[i].clone();
    let mut riem = vec![vec![vec![vec![Expr::zero(); n]; n]; n]; n];
    for l in 0..n {
        for m in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut terms = vec![
                        gamma[l][i][m].differentiate(&x(j)),
                        gamma[l][j][m].differentiate(&x(i)).neg(),
                    ];
                    for r in 0..n {
                        terms.push(Expr::product([
                            gamma[l][j][r].clone(),
                            gamma[r][i][m].clone(),
                        ]));
                        terms.push(
                            Expr::product([gamma[l][i][r].clone(), gamma[r][j][m].clone()]).neg(),
                        );
                    }
                    let value = Expr::sum(terms);
                    riem[l][m][i][j] = value.clone();
                    riem[l][m][j][i] = value.neg();
                }
            }
        }
    }
    riem
}

/// The nonlinear connection induced by the metric pair:
/// `M[j] = -H y^j`, `N[k][i] = gamma[k][i][m] y^m`.
pub fn canonical_nlc(
    time: &TimeMetric,
    spatial: &SpatialMetric,
) -> Result<NonlinearConnection, GeometryError> {
    if time.space != spatial.space {
        return Err(GeometryError::ShapeMismatch {
            what: "metric pair".into(),
            got: "metrics over different jet spaces".into(),
            want: "one shared jet space".into(),
        });
    }
    let space = &time.space;
    let n = space.dim();
    let h_chr = christoffel_time(time);
    let gamma = christoffel_spatial(spatial);
    let m: Vec<Expr> = (0..n)
        .map(|j| Expr::product([h_chr.clone(), space.y_var(j)]).neg())
        .collect();
    let mut nn = vec![vec![Expr::zero(); n]; n];
    for k in 0..n {
        for i in 0..n {
            nn[k][i] = Expr::sum(
                (0..n).map(|m_| Expr::product([gamma[k][i][m_].clone(), space.y_var(m_)])),
            );
        }
    }
    NonlinearConnection::new(space, m, nn)
}

/// The canonical linear connection of the metric pair over the canonical
/// nonlinear connection. Its nonzero blocks are `gbar = H`,
/// `gv[k][i] = -delta H`, and `l = lv = gamma`.
pub fn berwald_connection(
    time: &TimeMetric,
    spatial: &SpatialMetric,
) -> Result<GammaConnection, GeometryError> {
    let nlc = canonical_nlc(time, spatial)?;
    let space = nlc.space.clone();
    let n = space.dim();
    let h_chr = christoffel_time(time);
    let gamma = christoffel_spatial(spatial);
    let mut conn = GammaConnection::zero(nlc);
    conn.gbar = h_chr.clone();
    for k in 0..n {
        conn.gv[k][k] = h_chr.neg();
    }
    conn.l = gamma.clone();
    conn.lv = gamma;
    Ok(conn)
}

/// Exact matrix algebra over expressions (cofactor-based, so only small
/// dimensions are supported).
pub mod matrix {
    use super::*;

    /// Determinant by Laplace expansion along the first row.
    pub fn det(m: &[Vec<Expr>]) -> Expr {
        let n = m.len();
        assert!(
            n <= MAX_DIMENSION,
            "symbolic determinant capped at {MAX_DIMENSION}"
        );
        match n {
            0 => Expr::one(),
            1 => m[0][0].clone(),
            _ => Expr::sum((0..n).map(|j| {
                let cofactor = det(&minor(m, 0, j));
                let term = Expr::product([m[0][j].clone(), cofactor]);
                if j % 2 == 0 {
                    term
                } else {
                    term.neg()
                }
            })),
        }
    }

    /// Inverse by adjugate over determinant. The caller is responsible
    /// for ensuring the determinant is not identically zero.
    pub fn inverse(m: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
        let n = m.len();
        let d = det(m);
        let dinv = d.inv();
        let mut out = vec![vec![Expr::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                // Adjugate: transposed cofactor matrix.
                let cof = det(&minor(m, j, i));
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                out[i][j] = Expr::product([Expr::from_int(sign), cof, dinv.clone()]);
            }
        }
        out
    }

    fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
        m.iter()
            .enumerate()
            .filter(|(i, _)| *i != row)
            .map(|(_, r)| {
                r.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != col)
                    .map(|(_, e)| e.clone())
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{central_difference, parse, Point};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space2() -> JetSpace {
        JetSpace::standard(2).unwrap()
    }

    fn ex(src: &str, space: &JetSpace) -> Expr {
        parse(src, &space.var_set()).unwrap()
    }

    /// Sphere metric `diag(1, sin(x1)^2)` over the standard 2d jet space.
    fn sphere() -> SpatialMetric {
        let s = space2();
        SpatialMetric::new(
            &s,
            vec![
                vec![Expr::one(), Expr::zero()],
                vec![Expr::zero(), ex("sin(x1)^2", &s)],
            ],
            &s.tester(),
        )
        .unwrap()
    }

    #[test]
    fn jet_space_validation() {
        assert!(JetSpace::standard(1).is_ok());
        assert!(JetSpace::standard(4).is_ok());
        assert!(matches!(
            JetSpace::standard(5),
            Err(GeometryError::DimensionTooLarge { n: 5 })
        ));
        assert!(matches!(
            JetSpace::standard(0),
            Err(GeometryError::ZeroDimension)
        ));
        assert!(matches!(
            JetSpace::new(
                "t",
                vec!["x1".into(), "t".into()],
                vec!["a".into(), "b".into()]
            ),
            Err(GeometryError::BadCoordinate { .. })
        ));
        assert!(matches!(
            JetSpace::new("t", vec!["sin".into()], vec!["y".into()]),
            Err(GeometryError::BadCoordinate { .. })
        ));
    }

    #[test]
    fn time_christoffel_examples() {
        let s = space2();
        let tester = s.tester();
        // Exponential lapse: H = 1 exactly.
        let m = TimeMetric::new(&s, ex("exp(2*t)", &s), &tester).unwrap();
        assert_eq!(christoffel_time(&m), Expr::one());
        // Rational lapse: H = t / (t^2 + 1).
        let m = TimeMetric::new(&s, ex("t^2 + 1", &s), &tester).unwrap();
        assert_eq!(christoffel_time(&m), ex("t/(t^2+1)", &s));
        // Constant lapse: flat.
        let m = TimeMetric::new(&s, Expr::one(), &tester).unwrap();
        assert_eq!(christoffel_time(&m), Expr::zero());
    }

    #[test]
    fn metric_validation_rejects_bad_input() {
        let s = space2();
        let tester = s.tester();
        assert!(matches!(
            TimeMetric::new(&s, Expr::zero(), &tester),
            Err(GeometryError::SingularMetric { .. })
        ));
        assert!(matches!(
            TimeMetric::new(&s, ex("x1", &s), &tester),
            Err(GeometryError::ForbiddenDependency { .. })
        ));
        // Rank-one matrix: determinant vanishes identically.
        let phi = vec![
            vec![ex("x1", &s), ex("x1", &s)],
            vec![ex("x1", &s), ex("x1", &s)],
        ];
        assert!(matches!(
            SpatialMetric::new(&s, phi, &tester),
            Err(GeometryError::SingularMetric { .. })
        ));
        let phi = vec![
            vec![Expr::one(), ex("x1", &s)],
            vec![ex("x2", &s), Expr::one()],
        ];
        assert!(matches!(
            SpatialMetric::new(&s, phi, &tester),
            Err(GeometryError::NotSymmetric { .. })
        ));
        let phi = vec![
            vec![ex("t", &s), Expr::zero()],
            vec![Expr::zero(), Expr::one()],
        ];
        assert!(matches!(
            SpatialMetric::new(&s, phi, &tester),
            Err(GeometryError::ForbiddenDependency { .. })
        ));
    }

    #[test]
    fn spatial_inverse_is_exact() {
        let s = space2();
        let tester = s.tester();
        let phi = SpatialMetric::new(
            &s,
            vec![
                vec![ex("2", &s), ex("x2", &s)],
                vec![ex("x2", &s), ex("1 + x2^2", &s)],
            ],
            &tester,
        )
        .unwrap();
        let inv = phi.inverse();
        for i in 0..2 {
            for j in 0..2 {
                let entry = Expr::sum(
                    (0..2).map(|k| Expr::product([phi.entry(i, k).clone(), inv[k][j].clone()])),
                );
                let want = if i == j { Expr::one() } else { Expr::zero() };
                assert!(
                    tester.is_zero(&(&entry - &want)).unwrap(),
                    "phi * phi^-1 not identity at ({i},{j})"
                );
            }
        }
    }

    /// Independent numeric Christoffels: invert phi and take central
    /// differences at a point, no symbolic machinery involved.
    fn numeric_christoffel(metric: &SpatialMetric, at: &Point) -> Vec<Vec<Vec<f64>>> {
        let n = metric.space.dim();
        let xs = metric.space.space_coords();
        let step = 1e-6;
        let mut phival = vec![vec![0.0; n]; n];
        let mut dphi = vec![vec![vec![0.0; n]; n]; n]; // dphi[k][i][j] = d_k phi_ij
        for i in 0..n {
            for j in 0..n {
                phival[i][j] = metric.phi[i][j].evaluate(at).unwrap();
                for k in 0..n {
                    dphi[k][i][j] =
                        central_difference(&metric.phi[i][j], &xs[k], at, step).unwrap();
                }
            }
        }
        // Gauss-Jordan inverse of phival.
        let mut aug: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = phival[i].clone();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            let p = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= p;
            }
            for row in 0..n {
                if row != col {
                    let f = aug[row][col];
                    for k in 0..2 * n {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
        let inv: Vec<Vec<f64>> = aug.iter().map(|r| r[n..].to_vec()).collect();
        let mut gamma = vec![vec![vec![0.0; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += inv[i][m] * (dphi[k][m][j] + dphi[j][m][k] - dphi[m][j][k]);
                    }
                    gamma[i][j][k] = acc / 2.0;
                }
            }
        }
        gamma
    }

    #[test]
    fn sphere_christoffels_match_finite_differences_and_frozen_forms() {
        let metric = sphere();
        let s = metric.space().clone();
        let gamma = christoffel_spatial(&metric);

        // Numeric oracle at seeded points.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..8 {
            let mut at = Point::new();
            at.set("x1", rng.gen_range(0.4..1.1));
            at.set("x2", rng.gen_range(0.4..1.1));
            let oracle = numeric_christoffel(&metric, &at);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        let got = gamma[i][j][k].evaluate(&at).unwrap();
                        assert!(
                            (got - oracle[i][j][k]).abs() < 1e-5 * (1.0 + got.abs()),
                            "gamma[{i}][{j}][{k}]: symbolic {got} vs numeric {}",
                            oracle[i][j][k]
                        );
                    }
                }
            }
        }

        // Frozen closed forms.
        assert_eq!(gamma[0][1][1], ex("-sin(x1)*cos(x1)", &s));
        assert_eq!(gamma[1][0][1], ex("cos(x1)/sin(x1)", &s));
        assert_eq!(gamma[1][1][0], ex("cos(x1)/sin(x1)", &s));
        assert_eq!(gamma[0][0][0], Expr::zero());
        assert_eq!(gamma[0][0][1], Expr::zero());
        assert_eq!(gamma[1][0][0], Expr::zero());
        assert_eq!(gamma[1][1][1], Expr::zero());
    }

    #[test]
    fn flat_metric_has_no_christoffels_or_curvature() {
        let s = space2();
        let tester = s.tester();
        let phi = SpatialMetric::new(
            &s,
            vec![
                vec![Expr::one(), Expr::zero()],
                vec![Expr::zero(), Expr::one()],
            ],
            &tester,
        )
        .unwrap();
        let gamma = christoffel_spatial(&phi);
        let riem = spatial_riemann(&phi);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!(gamma[i][j][k].is_zero_literal());
                    for l in 0..2 {
                        assert!(riem[i][j][k][l].is_zero_literal());
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_riemann_frozen_component_and_antisymmetry() {
        let metric = sphere();
        let s = metric.space().clone();
        let riem = spatial_riemann(&metric);
        // Gaussian curvature 1: the single independent component.
        assert_eq!(riem[0][1][0][1], ex("-(sin(x1)^2)", &s));
        assert_eq!(riem[1][0][0][1], ex("1", &s));
        for l in 0..2 {
            for m in 0..2 {
                for i in 0..2 {
                    assert!(riem[l][m][i][i].is_zero_literal());
                    for j in 0..2 {
                        assert_eq!(riem[l][m][i][j], riem[l][m][j][i].neg());
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_nlc_of_metric_pair() {
        let s = space2();
        let tester = s.tester();
        let time = TimeMetric::new(&s, ex("exp(2*t)", &s), &tester).unwrap();
        let flat = SpatialMetric::new(
            &s,
            vec![
                vec![Expr::one(), Expr::zero()],
                vec![Expr::zero(), Expr::one()],
            ],
            &tester,
        )
        .unwrap();
        let nlc = canonical_nlc(&time, &flat).unwrap();
        assert_eq!(nlc.m[0], ex("-y1_1", &s));
        assert_eq!(nlc.m[1], ex("-y1_2", &s));
        for k in 0..2 {
            for i in 0..2 {
                assert!(nlc.n[k][i].is_zero_literal());
            }
        }

        let nlc = canonical_nlc(&time, &sphere()).unwrap();
        assert_eq!(nlc.n[0][1], ex("-sin(x1)*cos(x1)*y1_2", &s));
        assert_eq!(nlc.n[1][0], ex("cos(x1)/sin(x1)*y1_2", &s));
        assert_eq!(nlc.n[1][1], ex("cos(x1)/sin(x1)*y1_1", &s));
        assert!(nlc.n[0][0].is_zero_literal());
    }

    #[test]
    fn berwald_blocks_follow_the_metric_pair() {
        let s = space2();
        let tester = s.tester();
        let time = TimeMetric::new(&s, ex("t^2 + 1", &s), &tester).unwrap();
        let conn = berwald_connection(&time, &sphere()).unwrap();
        conn.validate().unwrap();
        let h_chr = ex("t/(t^2+1)", &s);
        assert_eq!(conn.gbar, h_chr);
        for k in 0..2 {
            for i in 0..2 {
                let want = if k == i { h_chr.neg() } else { Expr::zero() };
                assert_eq!(conn.gv[k][i], want);
                assert!(conn.g[k][i].is_zero_literal());
            }
        }
        let gamma = christoffel_spatial(&sphere());
        assert_eq!(conn.l, gamma);
        assert_eq!(conn.lv, gamma);
        for e in conn.cbar.iter().chain(conn.lbar.iter()) {
            assert!(e.is_zero_literal());
        }
    }
}
