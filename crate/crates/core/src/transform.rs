//! Product-form coordinate changes on the 1-jet space and the transport
//! they induce on metrics, connections, and indexed component families.
//!
//! A change replaces the time coordinate by a function of time alone and
//! the spatial coordinates by functions of the spatial coordinates alone;
//! the fiber coordinates then transform with one spatial-Jacobian factor
//! and one inverse time-rate factor each, and this fiber rule is always
//! derived, never user-supplied. Because symbolic inversion is
//! undecidable in general, the caller provides closed-form inverses and
//! the constructor validates them by round-trip sampling.
//!
//! Transport rules produce components of the image object expressed in
//! the new chart (which reuses the same symbol names). Covariance
//! checking compares `compute-then-transport` against
//! `transform-then-compute`: the residuals are formed by composing the
//! new-chart components with the forward change, so that sampling them
//! evaluates both sides at pairs of points related by the change.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curvtor::{curvature, torsion, CurvatureSet, TorsionSet};
use crate::dtensor::{
    cov_space_all, cov_time, cov_vert_all, liouville, DTensor, DTensorError, IndexSlot, SlotKind,
    Variance,
};
use crate::geometry::{
    berwald_connection, canonical_nlc, christoffel_spatial, christoffel_time, matrix,
    GammaConnection, GeometryError, JetSpace, NonlinearConnection, SpatialMetric, TimeMetric,
};
use crate::identities::{index_label, IdentityEntry, IdentityReport};
use crate::symexpr::{Expr, ExprError, SampleDomain, ZeroTester};

/// Any sampled magnitude of a time rate or Jacobian determinant below
/// this floor counts as a singularity on the box.
const SINGULARITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    /// The change mixes time into space or space into time (or touches
    /// the fiber coordinates, which are never free inputs).
    #[error("{what} depends on `{var}`, breaking the product form of the change")]
    NotProductChange { what: String, var: String },
    /// A time rate or Jacobian determinant vanishes, dips below the
    /// working floor, or changes sign somewhere on the sample box.
    #[error("{what} vanishes or changes sign on the sample box")]
    JacobianSingular { what: String },
    /// A supplied inverse fails its round-trip check.
    #[error("{what} fails the round-trip inverse check (max residual {max_residual:.3e})")]
    InverseMismatch { what: String, max_residual: f64 },
    /// Objects built over different jet spaces cannot be combined.
    #[error("objects live on different jet spaces")]
    SpaceMismatch,
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    DTensor(#[from] DTensorError),
}

/// First and second derivatives of a coordinate change, all expressed in
/// the old chart.
///
/// `u` is the derivative of the new time coordinate with respect to the
/// old one and `w` its reciprocal; `j[k][i]` differentiates the new `k`th
/// spatial coordinate by the old `i`th, while `jinv[i][k]` differentiates
/// the old `i`th by the new `k`th (computed from the supplied inverse map
/// and re-expressed in old coordinates). `hess_fwd[s][i][j]` holds second
/// derivatives of the forward spatial map; `hess_inv[s][q][r]` those of
/// the inverse map, again re-expressed in old coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub u: Expr,
    pub u_prime: Expr,
    pub w: Expr,
    pub w_prime: Expr,
    pub j: Vec<Vec<Expr>>,
    pub jinv: Vec<Vec<Expr>>,
    pub hess_fwd: Vec<Vec<Vec<Expr>>>,
    pub hess_inv: Vec<Vec<Vec<Expr>>>,
}

/// A validated product-form coordinate change together with its cached
/// Jacobian data and the substitution maps between the two charts.
///
/// Both charts use the same symbol names: an expression "in the new
/// chart" is one whose symbols denote the new coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordChange {
    space: JetSpace,
    t_new: Expr,
    x_new: Vec<Expr>,
    t_old: Expr,
    x_old: Vec<Expr>,
    jac: Jacobian,
    /// Replaces old-chart symbols by their expressions in new-chart
    /// symbols (fiber symbols included).
    old_to_new: BTreeMap<String, Expr>,
    /// Replaces new-chart symbols by their expressions in old-chart
    /// symbols (fiber symbols included).
    new_to_old: BTreeMap<String, Expr>,
}

impl CoordChange {
    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    /// New time coordinate as a function of the old one.
    pub fn t_new(&self) -> &Expr {
        &self.t_new
    }

    /// New spatial coordinates as functions of the old ones.
    pub fn x_new(&self) -> &[Expr] {
        &self.x_new
    }

    /// Old time coordinate as a function of the new one.
    pub fn t_old(&self) -> &Expr {
        &self.t_old
    }

    /// Old spatial coordinates as functions of the new ones.
    pub fn x_old(&self) -> &[Expr] {
        &self.x_old
    }

    pub fn jacobian(&self) -> &Jacobian {
        &self.jac
    }

    /// The change that renames nothing.
    pub fn identity(space: &JetSpace) -> CoordChange {
        let x_vars: Vec<Expr> = (0..space.dim()).map(|i| space.x_var(i)).collect();
        assemble(space, space.t_var(), x_vars.clone(), space.t_var(), x_vars)
            .expect("the identity change is always well-formed")
    }

    /// Re-expresses an old-chart expression in the new chart, using the
    /// supplied inverses for the base coordinates and the derived rule
    /// for the fiber coordinates.
    pub fn to_new_chart(&self, expr: &Expr) -> Result<Expr, ExprError> {
        Ok(expr.substitute(&self.old_to_new)?.simplify())
    }

    /// Re-expresses a new-chart expression in the old chart; composing a
    /// new-chart function with the forward change.
    pub fn to_old_chart(&self, expr: &Expr) -> Result<Expr, ExprError> {
        Ok(expr.substitute(&self.new_to_old)?.simplify())
    }
}

/// Builds maps and Jacobian data without validating; callers validate.
fn assemble(
    space: &JetSpace,
    t_new: Expr,
    x_new: Vec<Expr>,
    t_old: Expr,
    x_old: Vec<Expr>,
) -> Result<CoordChange, TransformError> {
    let n = space.dim();
    let t = space.time_coord().to_string();

    let mut base_old_to_new = BTreeMap::new();
    base_old_to_new.insert(t.clone(), t_old.clone());
    let mut base_new_to_old = BTreeMap::new();
    base_new_to_old.insert(t.clone(), t_new.clone());
    for i in 0..n {
        let name = space.space_coords()[i].clone();
        base_old_to_new.insert(name.clone(), x_old[i].clone());
        base_new_to_old.insert(name, x_new[i].clone());
    }

    let u = t_new.differentiate(&t).simplify();
    let u_prime = u.differentiate(&t).simplify();
    let w = u.inv();
    let w_prime = w.differentiate(&t).simplify();

    let mut j = vec![vec![Expr::zero(); n]; n];
    let mut jinv = vec![vec![Expr::zero(); n]; n];
    let mut hess_fwd = vec![vec![vec![Expr::zero(); n]; n]; n];
    let mut hess_inv = vec![vec![vec![Expr::zero(); n]; n]; n];
    for s in 0..n {
        for a in 0..n {
            let xa = space.space_coords()[a].as_str();
            j[s][a] = x_new[s].differentiate(xa).simplify();
            jinv[s][a] = x_old[s]
                .differentiate(xa)
                .substitute(&base_new_to_old)?
                .simplify();
            for b in 0..n {
                let xb = space.space_coords()[b].as_str();
                hess_fwd[s][a][b] = j[s][a].differentiate(xb).simplify();
                hess_inv[s][a][b] = x_old[s]
                    .differentiate(xa)
                    .differentiate(xb)
                    .substitute(&base_new_to_old)?
                    .simplify();
            }
        }
    }

    // Fiber rules in both directions. Forward: the new fiber coordinate
    // combines one forward spatial derivative with the reciprocal time
    // rate. The inverse direction differentiates the inverse map, whose
    // expressions already live in the new chart.
    let mut old_to_new = base_old_to_new.clone();
    let mut new_to_old = base_new_to_old.clone();
    let u_in_new = t_old.differentiate(&t).inv();
    for k in 0..n {
        let mut fwd = Vec::with_capacity(n);
        let mut bwd = Vec::with_capacity(n);
        for i in 0..n {
            fwd.push(Expr::product([j[k][i].clone(), w.clone(), space.y_var(i)]));
            let xi = space.space_coords()[i].as_str();
            bwd.push(Expr::product([
                x_old[k].differentiate(xi),
                u_in_new.clone(),
                space.y_var(i),
            ]));
        }
        new_to_old.insert(space.fiber_coords()[k].clone(), Expr::sum(fwd).simplify());
        old_to_new.insert(space.fiber_coords()[k].clone(), Expr::sum(bwd).simplify());
    }

    Ok(CoordChange {
        space: space.clone(),
        t_new,
        x_new,
        t_old,
        x_old,
        jac: Jacobian {
            u,
            u_prime,
            w,
            w_prime,
            j,
            jinv,
            hess_fwd,
            hess_inv,
        },
        old_to_new,
        new_to_old,
    })
}

/// True when `expr` is identically zero, numerically below the working
/// floor at a sample point, or changes sign across the box (an interior
/// zero for a continuous expression).
fn vanishes_on_box(expr: &Expr, tester: &ZeroTester) -> Result<bool, TransformError> {
    if tester.is_zero(expr)? {
        return Ok(true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tester.seed);
    let mut positive = false;
    let mut negative = false;
    for _ in 0..tester.trials.max(8) {
        let (value, _) = tester.evaluate_resampling(expr, &mut rng)?;
        if value.abs() < SINGULARITY_FLOOR {
            return Ok(true);
        }
        if value > 0.0 {
            positive = true;
        } else {
            negative = true;
        }
        if positive && negative {
            return Ok(true);
        }
    }
    Ok(false)
}

fn guard_product(
    space: &JetSpace,
    expr: &Expr,
    what: &str,
    time_side: bool,
) -> Result<(), TransformError> {
    for var in expr.free_vars() {
        let is_space = space.space_coords().contains(&var);
        let offending = if time_side {
            is_space || space.is_fiber(&var)
        } else {
            var == space.time_coord() || space.is_fiber(&var)
        };
        if offending {
            return Err(TransformError::NotProductChange {
                what: what.to_string(),
                var,
            });
        }
    }
    Ok(())
}

fn check_round_trip(
    what: &str,
    composed: &Expr,
    target: &Expr,
    tester: &ZeroTester,
) -> Result<(), TransformError> {
    let diff = Expr::sum([composed.clone(), target.neg()]);
    let check = tester.check(&diff)?;
    if !check.zero {
        return Err(TransformError::InverseMismatch {
            what: what.to_string(),
            max_residual: check.max_residual,
        });
    }
    Ok(())
}

/// Validates and caches a product-form coordinate change.
///
/// `t_new` may involve only the time coordinate, each `x_new` entry only
/// the spatial coordinates (free symbols that are not jet coordinates
/// are treated as parameters and pass through). The supplied inverses
/// are checked by round-trip substitution in both directions, the time
/// rate and spatial Jacobian determinant are checked for zeros on the
/// tester's box, and the derivative consistency `J · J⁻¹ = identity` is
/// verified on samples.
pub fn change_of_coords(
    space: &JetSpace,
    t_new: Expr,
    x_new: Vec<Expr>,
    t_old: Expr,
    x_old: Vec<Expr>,
    tester: &ZeroTester,
) -> Result<CoordChange, TransformError> {
    let n = space.dim();
    if x_new.len() != n || x_old.len() != n {
        return Err(TransformError::Geometry(GeometryError::ShapeMismatch {
            what: "coordinate change".into(),
            got: format!("{} forward / {} inverse entries", x_new.len(), x_old.len()),
            want: format!("{n} of each"),
        }));
    }

    guard_product(space, &t_new, "the new time coordinate", true)?;
    guard_product(space, &t_old, "the inverse time map", true)?;
    for (i, e) in x_new.iter().enumerate() {
        guard_product(
            space,
            e,
            &format!("new spatial coordinate {}", i + 1),
            false,
        )?;
    }
    for (i, e) in x_old.iter().enumerate() {
        guard_product(space, e, &format!("inverse spatial map {}", i + 1), false)?;
    }

    let ch = assemble(space, t_new, x_new, t_old, x_old)?;

    if vanishes_on_box(&ch.jac.u, tester)? {
        return Err(TransformError::JacobianSingular {
            what: "the time rate of the change".into(),
        });
    }
    let det = matrix::det(&ch.jac.j).simplify();
    if vanishes_on_box(&det, tester)? {
        return Err(TransformError::JacobianSingular {
            what: "the spatial Jacobian determinant".into(),
        });
    }

    // Round trips in both charts.
    let mut base_old_to_new = BTreeMap::new();
    let mut base_new_to_old = BTreeMap::new();
    let t = space.time_coord().to_string();
    base_old_to_new.insert(t.clone(), ch.t_old.clone());
    base_new_to_old.insert(t, ch.t_new.clone());
    for i in 0..n {
        let name = space.space_coords()[i].clone();
        base_old_to_new.insert(name.clone(), ch.x_old[i].clone());
        base_new_to_old.insert(name, ch.x_new[i].clone());
    }
    check_round_trip(
        "the time pair (forward after inverse)",
        &ch.t_new.substitute(&base_old_to_new)?,
        &ch.space.t_var(),
        tester,
    )?;
    check_round_trip(
        "the time pair (inverse after forward)",
        &ch.t_old.substitute(&base_new_to_old)?,
        &ch.space.t_var(),
        tester,
    )?;
    for i in 0..n {
        check_round_trip(
            &format!("spatial pair {} (forward after inverse)", i + 1),
            &ch.x_new[i].substitute(&base_old_to_new)?,
            &ch.space.x_var(i),
            tester,
        )?;
        check_round_trip(
            &format!("spatial pair {} (inverse after forward)", i + 1),
            &ch.x_old[i].substitute(&base_new_to_old)?,
            &ch.space.x_var(i),
            tester,
        )?;
    }

    // Derivative-level consistency of the cached inverse Jacobian.
    for a in 0..n {
        for b in 0..n {
            let prod = Expr::sum(
                (0..n).map(|c| Expr::product([ch.jac.j[a][c].clone(), ch.jac.jinv[c][b].clone()])),
            );
            let target = if a == b { Expr::one() } else { Expr::zero() };
            check_round_trip(
                &format!("Jacobian inverse entry ({}, {})", a + 1, b + 1),
                &prod,
                &target,
                tester,
            )?;
        }
    }

    Ok(ch)
}

/// The change obtained by applying `first` and then `second`; the
/// symbols of `second` are read in the chart that `first` produces. The
/// composite is validated like any other change.
pub fn compose(
    first: &CoordChange,
    second: &CoordChange,
    tester: &ZeroTester,
) -> Result<CoordChange, TransformError> {
    if first.space != second.space {
        return Err(TransformError::SpaceMismatch);
    }
    let space = &first.space;
    let n = space.dim();
    let mut fwd = BTreeMap::new();
    let mut bwd = BTreeMap::new();
    let t = space.time_coord().to_string();
    fwd.insert(t.clone(), first.t_new.clone());
    bwd.insert(t, second.t_old.clone());
    for i in 0..n {
        let name = space.space_coords()[i].clone();
        fwd.insert(name.clone(), first.x_new[i].clone());
        bwd.insert(name, second.x_old[i].clone());
    }
    let t_new = second.t_new.substitute(&fwd)?.simplify();
    let x_new: Result<Vec<Expr>, ExprError> = second
        .x_new
        .iter()
        .map(|e| Ok(e.substitute(&fwd)?.simplify()))
        .collect();
    let t_old = first.t_old.substitute(&bwd)?.simplify();
    let x_old: Result<Vec<Expr>, ExprError> = first
        .x_old
        .iter()
        .map(|e| Ok(e.substitute(&bwd)?.simplify()))
        .collect();
    change_of_coords(space, t_new, x_new?, t_old, x_old?, tester)
}

/// Image of a time metric: the old metric picks up two reciprocal time
/// rates, and the result is re-expressed in the new chart.
pub fn transform_time_metric(
    metric: &TimeMetric,
    ch: &CoordChange,
    tester: &ZeroTester,
) -> Result<TimeMetric, TransformError> {
    if metric.space() != &ch.space {
        return Err(TransformError::SpaceMismatch);
    }
    let raw = Expr::product([metric.h().clone(), ch.jac.w.powi(2)]);
    let h_new = ch.to_new_chart(&raw)?;
    Ok(TimeMetric::new(&ch.space, h_new, tester)?)
}

/// Image of a spatial metric: one inverse Jacobian factor per slot.
pub fn transform_spatial_metric(
    metric: &SpatialMetric,
    ch: &CoordChange,
    tester: &ZeroTester,
) -> Result<SpatialMetric, TransformError> {
    if metric.space() != &ch.space {
        return Err(TransformError::SpaceMismatch);
    }
    let n = ch.space.dim();
    let mut entries = vec![vec![Expr::zero(); n]; n];
    for p in 0..n {
        for q in 0..n {
            let raw = Expr::sum((0..n).flat_map(|i| {
                (0..n).map(move |jx| {
                    Expr::product([
                        metric.entry(i, jx).clone(),
                        ch.jac.jinv[i][p].clone(),
                        ch.jac.jinv[jx][q].clone(),
                    ])
                })
            }));
            entries[p][q] = ch.to_new_chart(&raw)?;
        }
    }
    Ok(SpatialMetric::new(&ch.space, entries, tester)?)
}

/// Image of a nonlinear connection under the change, including the
/// inhomogeneous terms that differentiate the derived fiber rule, with
/// the result re-expressed in the new chart.
pub fn transform_nlc(
    nlc: &NonlinearConnection,
    ch: &CoordChange,
) -> Result<NonlinearConnection, TransformError> {
    if nlc.space != ch.space {
        return Err(TransformError::SpaceMismatch);
    }
    let space = &ch.space;
    let n = space.dim();
    let jac = &ch.jac;
    let w2 = jac.w.powi(2);

    let mut m_new = Vec::with_capacity(n);
    for k in 0..n {
        let mut terms = Vec::new();
        for jx in 0..n {
            terms.push(Expr::product([
                nlc.m[jx].clone(),
                w2.clone(),
                jac.j[k][jx].clone(),
            ]));
            terms.push(
                Expr::product([
                    jac.w.clone(),
                    jac.j[k][jx].clone(),
                    jac.w_prime.clone(),
                    space.y_var(jx),
                ])
                .neg(),
            );
        }
        m_new.push(ch.to_new_chart(&Expr::sum(terms))?);
    }

    let mut n_new = vec![vec![Expr::zero(); n]; n];
    for k in 0..n {
        for l in 0..n {
            let mut terms = Vec::new();
            for i in 0..n {
                let xi = space.space_coords()[i].as_str();
                for jx in 0..n {
                    terms.push(Expr::product([
                        nlc.n[jx][i].clone(),
                        jac.w.clone(),
                        jac.jinv[i][l].clone(),
                        jac.j[k][jx].clone(),
                    ]));
                    terms.push(
                        Expr::product([
                            jac.jinv[i][l].clone(),
                            jac.j[k][jx].differentiate(xi),
                            jac.w.clone(),
                            space.y_var(jx),
                        ])
                        .neg(),
                    );
                }
            }
            n_new[k][l] = ch.to_new_chart(&Expr::sum(terms))?;
        }
    }

    Ok(NonlinearConnection::new(space, m_new, n_new)?)
}

/// Image of a linear connection: every block contracts with Jacobian
/// factors matching its slots, the time-time, fiber-time, and both
/// spatial-derivative blocks pick up their inhomogeneous terms, and the
/// underlying nonlinear connection is transported alongside.
pub fn transform_connection(
    conn: &GammaConnection,
    ch: &CoordChange,
) -> Result<GammaConnection, TransformError> {
    if conn.space() != &ch.space {
        return Err(TransformError::SpaceMismatch);
    }
    let space = &ch.space;
    let n = space.dim();
    let jac = &ch.jac;
    let nlc = transform_nlc(&conn.nlc, ch)?;

    let gbar = ch.to_new_chart(&Expr::sum([
        Expr::product([conn.gbar.clone(), jac.w.clone()]),
        jac.w_prime.clone(),
    ]))?;

    let mut g = vec![vec![Expr::zero(); n]; n];
    let mut gv = vec![vec![Expr::zero(); n]; n];
    let inhom_gv = Expr::product([jac.w.powi(2), jac.u_prime.clone()]);
    for k in 0..n {
        for i in 0..n {
            let hom = |block: &Vec<Vec<Expr>>| -> Expr {
                Expr::sum((0..n).flat_map(|r| {
                    (0..n).map(move |jx| {
                        Expr::product([
                            block[r][jx].clone(),
                            jac.j[k][r].clone(),
                            jac.jinv[jx][i].clone(),
                            jac.w.clone(),
                        ])
                    })
                }))
            };
            g[k][i] = ch.to_new_chart(&hom(&conn.g))?;
            let mut terms = vec![hom(&conn.gv)];
            if k == i {
                terms.push(inhom_gv.clone());
            }
            gv[k][i] = ch.to_new_chart(&Expr::sum(terms))?;
        }
    }

    let mut lbar = vec![Expr::zero(); n];
    for jx in 0..n {
        let raw = Expr::sum(
            (0..n).map(|l| Expr::product([conn.lbar[l].clone(), jac.jinv[l][jx].clone()])),
        );
        lbar[jx] = ch.to_new_chart(&raw)?;
    }

    let spatial_block = |block: &Vec<Vec<Vec<Expr>>>, r: usize, i: usize, jx: usize| -> Expr {
        let mut terms = Vec::new();
        for s in 0..n {
            for p in 0..n {
                for q in 0..n {
                    terms.push(Expr::product([
                        block[s][p][q].clone(),
                        jac.j[r][s].clone(),
                        jac.jinv[p][i].clone(),
                        jac.jinv[q][jx].clone(),
                    ]));
                }
            }
            terms.push(Expr::product([
                jac.j[r][s].clone(),
                jac.hess_inv[s][i][jx].clone(),
            ]));
        }
        Expr::sum(terms)
    };
    let mut l = vec![vec![vec![Expr::zero(); n]; n]; n];
    let mut lv = vec![vec![vec![Expr::zero(); n]; n]; n];
    for r in 0..n {
        for i in 0..n {
            for jx in 0..n {
                l[r][i][jx] = ch.to_new_chart(&spatial_block(&conn.l, r, i, jx))?;
                lv[r][i][jx] = ch.to_new_chart(&spatial_block(&conn.lv, r, i, jx))?;
            }
        }
    }

    let mut cbar = vec![Expr::zero(); n];
    for i in 0..n {
        let raw = Expr::sum((0..n).map(|jx| {
            Expr::product([
                conn.cbar[jx].clone(),
                jac.jinv[jx][i].clone(),
                jac.u.clone(),
            ])
        }));
        cbar[i] = ch.to_new_chart(&raw)?;
    }

    let fiber_block = |block: &Vec<Vec<Vec<Expr>>>, k: usize, i: usize, jx: usize| -> Expr {
        let mut terms = Vec::new();
        for s in 0..n {
            for p in 0..n {
                for r in 0..n {
                    terms.push(Expr::product([
                        block[s][p][r].clone(),
                        jac.j[k][s].clone(),
                        jac.jinv[p][i].clone(),
                        jac.jinv[r][jx].clone(),
                        jac.u.clone(),
                    ]));
                }
            }
        }
        Expr::sum(terms)
    };
    let mut c = vec![vec![vec![Expr::zero(); n]; n]; n];
    let mut cv = vec![vec![vec![Expr::zero(); n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for jx in 0..n {
                c[k][i][jx] = ch.to_new_chart(&fiber_block(&conn.c, k, i, jx))?;
                cv[k][i][jx] = ch.to_new_chart(&fiber_block(&conn.cv, k, i, jx))?;
            }
        }
    }

    Ok(GammaConnection {
        nlc,
        gbar,
        g,
        gv,
        lbar,
        l,
        lv,
        cbar,
        c,
        cv,
    })
}

/// One transport factor per slot: up slots carry the forward factor of
/// their frame family, down slots the inverse one.
fn slot_factor(slot: &IndexSlot, new_i: usize, old_i: usize, jac: &Jacobian) -> Expr {
    match (slot.variance, slot.kind) {
        (Variance::Up, SlotKind::TimeH) => jac.u.clone(),
        (Variance::Up, SlotKind::SpaceH) => jac.j[new_i][old_i].clone(),
        (Variance::Up, SlotKind::Vertical) => {
            Expr::product([jac.j[new_i][old_i].clone(), jac.w.clone()])
        }
        (Variance::Down, SlotKind::TimeH) => jac.w.clone(),
        (Variance::Down, SlotKind::SpaceH) => jac.jinv[old_i][new_i].clone(),
        (Variance::Down, SlotKind::Vertical) => {
            Expr::product([jac.jinv[old_i][new_i].clone(), jac.u.clone()])
        }
    }
}

/// Contracts every slot with its transport factor, leaving the result in
/// old-chart coordinates (components indexed by the new chart).
fn transported_components(tensor: &DTensor, ch: &CoordChange) -> DTensor {
    let signature = tensor.signature().to_vec();
    DTensor::from_fn(&ch.space, signature.clone(), |new_idx| {
        let terms: Vec<Expr> = tensor
            .iter()
            .map(|(old_idx, comp)| {
                let mut factors = vec![comp.clone()];
                for (s, slot) in signature.iter().enumerate() {
                    factors.push(slot_factor(slot, new_idx[s], old_idx[s], &ch.jac));
                }
                Expr::product(factors)
            })
            .collect();
        Expr::sum(terms)
    })
}

/// Transports a d-tensor: one Jacobian-type factor per slot, then
/// re-expression in the new chart.
pub fn transform_dtensor(tensor: &DTensor, ch: &CoordChange) -> Result<DTensor, TransformError> {
    if tensor.space() != &ch.space {
        return Err(TransformError::SpaceMismatch);
    }
    let transported = transported_components(tensor, ch);
    let mut out = Vec::new();
    for (_, comp) in transported.iter() {
        out.push(ch.to_new_chart(comp)?);
    }
    let array = ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(transported.shape()), out)
        .expect("components are collected in row-major order");
    Ok(DTensor::new(
        &ch.space,
        transported.signature().to_vec(),
        array,
    )?)
}

/// What `covariance_check` should put through the two paths.
///
/// `Tensor` treats the stored components as a chart-independent defining
/// formula (the same expressions are read in both charts); the other
/// three recompute their component families from the transformed
/// connection.
// One payload variant against three markers: values are built a handful
// of times and passed by reference, so the size skew is harmless.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum CovarianceObject {
    Tensor(DTensor),
    Torsion,
    Curvature,
    Deflection,
}

fn torsion_families(set: &TorsionSet, space: &JetSpace) -> Vec<(String, DTensor)> {
    use crate::frames::FrameKind::{SpaceH, TimeH, Vertical};
    let up = IndexSlot::up;
    let down = IndexSlot::down;
    vec![
        (
            "torsion.tbar".to_string(),
            DTensor::from_fn(space, vec![up(TimeH), down(TimeH), down(SpaceH)], |i| {
                set.tbar[i[2]].clone()
            }),
        ),
        (
            "torsion.t_time".to_string(),
            DTensor::from_fn(space, vec![up(SpaceH), down(TimeH), down(SpaceH)], |i| {
                set.t_time[i[0]][i[2]].clone()
            }),
        ),
        (
            "torsion.t_space".to_string(),
            DTensor::from_fn(space, vec![up(SpaceH), down(SpaceH), down(SpaceH)], |i| {
                set.t_space[i[0]][i[1]][i[2]].clone()
            }),
        ),
        (
            "torsion.pbar".to_string(),
            DTensor::from_fn(space, vec![up(TimeH), down(TimeH), down(Vertical)], |i| {
                set.pbar[i[2]].clone()
            }),
        ),
        (
            "torsion.p_space".to_string(),
            DTensor::from_fn(space, vec![up(SpaceH), down(SpaceH), down(Vertical)], |i| {
                set.p_space[i[0]][i[1]][i[2]].clone()
            }),
        ),
        (
            "torsion.p_vert_time".to_string(),
            DTensor::from_fn(
                space,
                vec![up(Vertical), down(TimeH), down(Vertical)],
                |i| set.p_vert_time[i[0]][i[2]].clone(),
            ),
        ),
        (
            "torsion.p_vert_space".to_string(),
            DTensor::from_fn(
                space,
                vec![up(Vertical), down(SpaceH), down(Vertical)],
                |i| set.p_vert_space[i[0]][i[1]][i[2]].clone(),
            ),
        ),
        (
            "torsion.s_vert".to_string(),
            DTensor::from_fn(
                space,
                vec![up(Vertical), down(Vertical), down(Vertical)],
                |i| set.s_vert[i[0]][i[1]][i[2]].clone(),
            ),
        ),
        (
            "torsion.r_time".to_string(),
            DTensor::from_fn(space, vec![up(Vertical), down(TimeH), down(SpaceH)], |i| {
                set.r_time[i[0]][i[2]].clone()
            }),
        ),
        (
            "torsion.r_space".to_string(),
            DTensor::from_fn(space, vec![up(Vertical), down(SpaceH), down(SpaceH)], |i| {
                set.r_space[i[0]][i[1]][i[2]].clone()
            }),
        ),
    ]
}

fn curvature_families(set: &CurvatureSet, space: &JetSpace) -> Vec<(String, DTensor)> {
    use crate::frames::FrameKind::{SpaceH, TimeH, Vertical};
    let up = IndexSlot::up;
    let down = IndexSlot::down;
    vec![
        (
            "curvature.rbar_time".to_string(),
            DTensor::from_fn(
                space,
                vec![up(TimeH), down(TimeH), down(TimeH), down(SpaceH)],
                |i| set.rbar_time[i[3]].clone(),
            ),
        ),
        (
            "curvature.rbar_space".to_string(),
            DTensor::from_fn(
                space,
                vec![up(TimeH), down(TimeH), down(SpaceH), down(SpaceH)],
                |i| set.rbar_space[i[2]][i[3]].clone(),
            ),
        ),
        (
            "curvature.pbar_time".to_string(),
            DTensor::from_fn(
                space,
                vec![up(TimeH), down(TimeH), down(TimeH), down(Vertical)],
                |i| set.pbar_time[i[3]].clone(),
            ),
        ),
        (
            "curvature.pbar_space".to_string(),
            DTensor::from_fn(
                space,
                vec![up(TimeH), down(TimeH), down(SpaceH), down(Vertical)],
                |i| set.pbar_space[i[2]][i[3]].clone(),
            ),
        ),
        (
            "curvature.sbar".to_string(),
            DTensor::from_fn(
                space,
                vec![up(TimeH), down(TimeH), down(Vertical), down(Vertical)],
                |i| set.sbar[i[2]][i[3]].clone(),
            ),
        ),
        (
            "curvature.r_time".to_string(),
            DTensor::from_fn(
                space,
                vec![up(SpaceH), down(SpaceH), down(TimeH), down(SpaceH)],
                |i| set.r_time[i[0]][i[1]][i[3]].clone(),
            ),
        ),
        (
            "curvature.r_space".to_string(),
            DTensor::from_fn(
                space,
                vec![up(SpaceH), down(SpaceH), down(SpaceH), down(SpaceH)],
                |i| set.r_space[i[0]][i[1]][i[2]][i[3]].clone(),
            ),
        ),
        (
            "curvature.p_time".to_string(),
            DTensor::from_fn(
                space,
                vec![up(SpaceH), down(SpaceH), down(TimeH), down(Vertical)],
                |i| set.p_time[i[0]][i[1]][i[3]].clone(),
            ),
        ),
        (
            "curvature.p_space".to_string(),
            DTensor::from_fn(
                space,
                vec![up(SpaceH), down(SpaceH), down(SpaceH), down(Vertical)],
                |i| set.p_space[i[0]][i[1]][i[2]][i[3]].clone(),
            ),
        ),
        (
            "curvature.s_space".to_string(),
            DTensor::from_fn(
                space,
                vec![up(SpaceH), down(SpaceH), down(Vertical), down(Vertical)],
                |i| set.s_space[i[0]][i[1]][i[2]][i[3]].clone(),
            ),
        ),
        (
            "curvature.rv_time".to_string(),
            DTensor::from_fn(
                space,
                vec![up(Vertical), down(Vertical), down(TimeH), down(SpaceH)],
                |i| set.rv_time[i[0]][i[1]][i[3]].clone(),
            ),
        ),
        (
            "curvature.rv_space".to_string(),
            DTensor::from_fn(
                space,
                vec![up(Vertical), down(Vertical), down(SpaceH), down(SpaceH)],
                |i| set.rv_space[i[0]][i[1]][i[2]][i[3]].clone(),
            ),
        ),
        (
            "curvature.pv_time".to_string(),
            DTensor::from_fn(
                space,
                vec![up(Vertical), down(Vertical), down(TimeH), down(Vertical)],
                |i| set.pv_time[i[0]][i[1]][i[3]].clone(),
            ),
        ),
        (
            "curvature.pv_space".to_string(),
            DTensor::from_fn(
                space,
                vec![up(Vertical), down(Vertical), down(SpaceH), down(Vertical)],
                |i| set.pv_space[i[0]][i[1]][i[2]][i[3]].clone(),
            ),
        ),
        (
            "curvature.sv".to_string(),
            DTensor::from_fn(
                space,
                vec![up(Vertical), down(Vertical), down(Vertical), down(Vertical)],
                |i| set.sv[i[0]][i[1]][i[2]][i[3]].clone(),
            ),
        ),
    ]
}

/// Pairs of (old-chart, new-chart) component families for one object.
fn covariance_families(
    object: &CovarianceObject,
    conn: &GammaConnection,
    ch: &CoordChange,
) -> Result<Vec<(String, DTensor, DTensor)>, TransformError> {
    let space = &ch.space;
    match object {
        CovarianceObject::Tensor(t) => {
            if t.space() != space {
                return Err(TransformError::SpaceMismatch);
            }
            Ok(vec![("tensor".to_string(), t.clone(), t.clone())])
        }
        CovarianceObject::Torsion => {
            let old = torsion_families(&torsion(conn), space);
            let conn_new = transform_connection(conn, ch)?;
            let new = torsion_families(&torsion(&conn_new), space);
            Ok(old
                .into_iter()
                .zip(new)
                .map(|((name, a), (_, b))| (name, a, b))
                .collect())
        }
        CovarianceObject::Curvature => {
            let old = curvature_families(&curvature(conn), space);
            let conn_new = transform_connection(conn, ch)?;
            let new = curvature_families(&curvature(&conn_new), space);
            Ok(old
                .into_iter()
                .zip(new)
                .map(|((name, a), (_, b))| (name, a, b))
                .collect())
        }
        CovarianceObject::Deflection => {
            let conn_new = transform_connection(conn, ch)?;
            let field = liouville(space);
            Ok(vec![
                (
                    "deflection.dbar".to_string(),
                    cov_time(&field, conn),
                    cov_time(&field, &conn_new),
                ),
                (
                    "deflection.d".to_string(),
                    cov_space_all(&field, conn),
                    cov_space_all(&field, &conn_new),
                ),
                (
                    "deflection.dv".to_string(),
                    cov_vert_all(&field, conn),
                    cov_vert_all(&field, &conn_new),
                ),
            ])
        }
    }
}

/// Checks that computing in the old chart and transporting agrees with
/// transforming first and recomputing, component by component.
///
/// Each residual composes the new-chart component with the forward
/// change and subtracts the slot-by-slot transport of the old-chart
/// component, so a sampled verdict evaluates both sides at point pairs
/// related by the change. Free symbols that are not jet coordinates are
/// sampled as parameters.
pub fn covariance_check(
    object: &CovarianceObject,
    conn: &GammaConnection,
    ch: &CoordChange,
    samples: usize,
    seed: u64,
) -> Result<IdentityReport, TransformError> {
    covariance_check_with_tol(object, conn, ch, samples, seed, ZeroTester::DEFAULT_TOL)
}

/// As [`covariance_check`], with an explicit residual tolerance.
pub fn covariance_check_with_tol(
    object: &CovarianceObject,
    conn: &GammaConnection,
    ch: &CoordChange,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<IdentityReport, TransformError> {
    if conn.space() != &ch.space {
        return Err(TransformError::SpaceMismatch);
    }
    let space = &ch.space;
    let n = space.dim();

    let mut items: Vec<(String, Expr)> = Vec::new();
    for (name, t_old, t_new) in covariance_families(object, conn, ch)? {
        let transported = transported_components(&t_old, ch);
        for (idx, comp_new) in t_new.iter() {
            let lhs = comp_new.substitute(&ch.new_to_old)?;
            let rhs = transported
                .get(&idx)
                .expect("transport preserves the signature");
            let residual = Expr::sum([lhs, rhs.neg()]);
            let label = index_label(t_new.signature(), &idx, n);
            items.push((format!("covariance.{name}{label}"), residual));
        }
    }

    let mut domain = space.sample_domain();
    for (_, residual) in &items {
        cover_free_vars(&mut domain, residual);
    }
    let tester = ZeroTester::new(domain)
        .with_trials(samples)
        .with_seed(seed)
        .with_tol(tol);

    let mut report = IdentityReport::new(seed);
    for (name, residual) in items {
        let check = tester.check(&residual)?;
        report.push(IdentityEntry::from_check(name, &residual, check));
    }
    Ok(report.finish())
}

fn cover_free_vars(domain: &mut SampleDomain, expr: &Expr) {
    for var in expr.free_vars() {
        if !domain.contains(&var) {
            let (lo, hi) = SampleDomain::BASE_RANGE;
            domain.insert(var, lo, hi);
        }
    }
}

/// Verifies that every metric-derived structure obeys its transport
/// rule: the time and spatial christoffel symbols, the canonical
/// nonlinear connection, and the metric-pair linear connection are each
/// computed directly from the transformed metrics and compared against
/// the transported images of their old-chart counterparts.
pub fn metric_covariance_check(
    time: &TimeMetric,
    spatial: &SpatialMetric,
    ch: &CoordChange,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<IdentityReport, TransformError> {
    if time.space() != &ch.space || spatial.space() != &ch.space {
        return Err(TransformError::SpaceMismatch);
    }
    let space = &ch.space;
    let n = space.dim();
    let jac = &ch.jac;

    // Metric validation during transport may sample expressions holding
    // free parameters; cover everything the inputs mention.
    let mut domain = space.sample_domain();
    cover_free_vars(&mut domain, time.h());
    for row in spatial.entries() {
        for entry in row {
            cover_free_vars(&mut domain, entry);
        }
    }
    cover_free_vars(&mut domain, &ch.t_old);
    for x in &ch.x_old {
        cover_free_vars(&mut domain, x);
    }
    cover_free_vars(&mut domain, &ch.t_new);
    for x in &ch.x_new {
        cover_free_vars(&mut domain, x);
    }
    let pre_tester = ZeroTester::new(domain.clone())
        .with_trials(samples)
        .with_seed(seed)
        .with_tol(tol);

    let time_new = transform_time_metric(time, ch, &pre_tester)?;
    let spatial_new = transform_spatial_metric(spatial, ch, &pre_tester)?;

    let mut items: Vec<(String, Expr)> = Vec::new();

    // Time christoffel symbol: rate factor plus the derivative term.
    let direct_h = christoffel_time(&time_new);
    let rule_h = ch.to_new_chart(&Expr::sum([
        Expr::product([christoffel_time(time), jac.w.clone()]),
        jac.w_prime.clone(),
    ]))?;
    items.push(("christoffel.H[1,1]^[1]".into(), &direct_h - &rule_h));

    // Spatial christoffel symbols: one Jacobian factor per slot plus the
    // second-derivative term of the inverse map.
    let gamma_old = christoffel_spatial(spatial);
    let gamma_new = christoffel_spatial(&spatial_new);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                let mut terms = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            terms.push(Expr::product([
                                gamma_old[i][j][k].clone(),
                                jac.j[p][i].clone(),
                                jac.jinv[j][q].clone(),
                                jac.jinv[k][r].clone(),
                            ]));
                        }
                    }
                }
                for s in 0..n {
                    terms.push(Expr::product([
                        jac.j[p][s].clone(),
                        jac.hess_inv[s][q][r].clone(),
                    ]));
                }
                let rule = ch.to_new_chart(&Expr::sum(terms))?;
                items.push((
                    format!("christoffel.gamma[{},{}]^[{}]", q + 1, r + 1, p + 1),
                    &gamma_new[p][q][r] - &rule,
                ));
            }
        }
    }

    // Canonical nonlinear connection.
    let nlc_direct = canonical_nlc(&time_new, &spatial_new)?;
    let nlc_rule = transform_nlc(&canonical_nlc(time, spatial)?, ch)?;
    for k in 0..n {
        items.push((
            format!("nlc.M[(1)][1]^[({})]", k + 1),
            &nlc_direct.m[k] - &nlc_rule.m[k],
        ));
        for l in 0..n {
            items.push((
                format!("nlc.N[(1)][{}]^[({})]", l + 1, k + 1),
                &nlc_direct.n[k][l] - &nlc_rule.n[k][l],
            ));
        }
    }

    // Metric-pair linear connection, all nine blocks.
    let conn_direct = berwald_connection(&time_new, &spatial_new)?;
    let conn_rule = transform_connection(&berwald_connection(time, spatial)?, ch)?;
    items.push((
        "connection.Gbar".into(),
        &conn_direct.gbar - &conn_rule.gbar,
    ));
    for k in 0..n {
        items.push((
            format!("connection.Lbar[{}]", k + 1),
            &conn_direct.lbar[k] - &conn_rule.lbar[k],
        ));
        items.push((
            format!("connection.Cbar[{}]", k + 1),
            &conn_direct.cbar[k] - &conn_rule.cbar[k],
        ));
        for i in 0..n {
            items.push((
                format!("connection.G[{}][{}]", k + 1, i + 1),
                &conn_direct.g[k][i] - &conn_rule.g[k][i],
            ));
            items.push((
                format!("connection.Gv[{}][{}]", k + 1, i + 1),
                &conn_direct.gv[k][i] - &conn_rule.gv[k][i],
            ));
            for j in 0..n {
                items.push((
                    format!("connection.L[{}][{}][{}]", k + 1, i + 1, j + 1),
                    &conn_direct.l[k][i][j] - &conn_rule.l[k][i][j],
                ));
                items.push((
                    format!("connection.Lv[{}][{}][{}]", k + 1, i + 1, j + 1),
                    &conn_direct.lv[k][i][j] - &conn_rule.lv[k][i][j],
                ));
                items.push((
                    format!("connection.C[{}][{}][{}]", k + 1, i + 1, j + 1),
                    &conn_direct.c[k][i][j] - &conn_rule.c[k][i][j],
                ));
                items.push((
                    format!("connection.Cv[{}][{}][{}]", k + 1, i + 1, j + 1),
                    &conn_direct.cv[k][i][j] - &conn_rule.cv[k][i][j],
                ));
            }
        }
    }

    for (_, residual) in &items {
        cover_free_vars(&mut domain, residual);
    }
    let tester = ZeroTester::new(domain)
        .with_trials(samples)
        .with_seed(seed)
        .with_tol(tol);
    let mut report = IdentityReport::new(seed);
    for (name, residual) in items {
        let check = tester.check(&residual)?;
        report.push(IdentityEntry::from_check(
            format!("covariance.{name}"),
            &residual,
            check,
        ));
    }
    Ok(report.finish())
}

/// The built-in suite of coordinate changes used by the verification
/// front end: an affine time rescaling, a rational spatial rotation (a
/// plain rescaling when there is a single spatial coordinate), and a
/// shift of the last spatial coordinate.
pub fn standard_changes(
    space: &JetSpace,
    tester: &ZeroTester,
) -> Result<Vec<(String, CoordChange)>, TransformError> {
    let n = space.dim();
    let t = space.t_var();
    let x_vars: Vec<Expr> = (0..n).map(|i| space.x_var(i)).collect();

    let affine = change_of_coords(
        space,
        Expr::product([Expr::from_int(2), t.clone()]),
        x_vars.clone(),
        Expr::product([Expr::ratio(1, 2), t.clone()]),
        x_vars.clone(),
        tester,
    )?;

    let rotation = if n == 1 {
        change_of_coords(
            space,
            t.clone(),
            vec![Expr::product([Expr::from_int(2), space.x_var(0)])],
            t.clone(),
            vec![Expr::product([Expr::ratio(1, 2), space.x_var(0)])],
            tester,
        )?
    } else {
        // Rotation by the rational angle with cosine 3/5 and sine 4/5 in
        // the plane of the first two coordinates; the inverse is the
        // transpose.
        let cos = Expr::ratio(3, 5);
        let sin = Expr::ratio(4, 5);
        let mut fwd = x_vars.clone();
        let mut bwd = x_vars.clone();
        fwd[0] = Expr::sum([
            Expr::product([cos.clone(), space.x_var(0)]),
            Expr::product([sin.clone(), space.x_var(1)]).neg(),
        ]);
        fwd[1] = Expr::sum([
            Expr::product([sin.clone(), space.x_var(0)]),
            Expr::product([cos.clone(), space.x_var(1)]),
        ]);
        bwd[0] = Expr::sum([
            Expr::product([cos.clone(), space.x_var(0)]),
            Expr::product([sin.clone(), space.x_var(1)]),
        ]);
        bwd[1] = Expr::sum([
            Expr::product([sin, space.x_var(0)]).neg(),
            Expr::product([cos, space.x_var(1)]),
        ]);
        change_of_coords(space, t.clone(), fwd, t.clone(), bwd, tester)?
    };

    let mut fwd = x_vars.clone();
    let mut bwd = x_vars;
    fwd[n - 1] = Expr::sum([space.x_var(n - 1), Expr::ratio(1, 4)]);
    bwd[n - 1] = Expr::sum([space.x_var(n - 1), Expr::ratio(1, 4).neg()]);
    let shift = change_of_coords(space, t.clone(), fwd, t, bwd, tester)?;

    Ok(vec![
        ("affine-time".to_string(), affine),
        ("rotation".to_string(), rotation),
        ("shift".to_string(), shift),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{berwald_connection, canonical_nlc, christoffel_time};
    use crate::symexpr::parse;

    fn ex(src: &str, space: &JetSpace) -> Expr {
        parse(src, &space.var_set()).unwrap()
    }

    fn poly_conn(s: &JetSpace) -> GammaConnection {
        let nlc = NonlinearConnection::new(
            s,
            vec![ex("t*y1_1", s), ex("x2 + y1_2", s)],
            vec![
                vec![ex("y1_2", s), ex("x1", s)],
                vec![ex("t", s), ex("x1*y1_1", s)],
            ],
        )
        .unwrap();
        let mut conn = GammaConnection::zero(nlc);
        conn.gbar = ex("t^2", s);
        conn.g[0][1] = ex("x1", s);
        conn.gv[1][0] = ex("y1_1", s);
        conn.lbar[0] = ex("t*x2", s);
        conn.l[0][0][1] = ex("x2^2", s);
        conn.l[1][0][1] = ex("t", s);
        conn.lv[1][1][0] = ex("x1 + t", s);
        conn.cbar[1] = ex("x1*y1_2", s);
        conn.c[0][1][0] = ex("y1_1", s);
        conn.cv[1][0][1] = ex("t*x1", s);
        conn.validate().unwrap();
        conn
    }

    #[test]
    fn validation_rejects_malformed_changes() {
        let s = JetSpace::standard(2).unwrap();
        let tester = s.tester();
        let xs = vec![s.x_var(0), s.x_var(1)];

        let mixed = change_of_coords(
            &s,
            s.t_var(),
            vec![ex("x1 + t", &s), s.x_var(1)],
            s.t_var(),
            vec![ex("x1 - t", &s), s.x_var(1)],
            &tester,
        );
        assert!(matches!(
            mixed,
            Err(TransformError::NotProductChange { .. })
        ));

        // A time map whose rate changes sign inside the box.
        let wide = ZeroTester::new(s.sample_domain().with("t", -1.0, 1.0));
        let squared = change_of_coords(&s, ex("t^2", &s), xs.clone(), s.t_var(), xs.clone(), &wide);
        assert!(matches!(
            squared,
            Err(TransformError::JacobianSingular { .. })
        ));

        // Degenerate spatial Jacobian.
        let collapsed = change_of_coords(
            &s,
            s.t_var(),
            vec![ex("x1 + x2", &s), ex("x1 + x2", &s)],
            s.t_var(),
            xs.clone(),
            &tester,
        );
        assert!(matches!(
            collapsed,
            Err(TransformError::JacobianSingular { .. })
        ));

        // A wrong inverse for a valid forward map.
        let lying = change_of_coords(&s, ex("2*t", &s), xs.clone(), ex("1/3*t", &s), xs, &tester);
        assert!(matches!(lying, Err(TransformError::InverseMismatch { .. })));
    }

    #[test]
    fn identity_change_is_inert() {
        let s = JetSpace::standard(2).unwrap();
        let ch = CoordChange::identity(&s);
        let conn = poly_conn(&s);

        let moved = transform_nlc(&conn.nlc, &ch).unwrap();
        for k in 0..2 {
            assert_eq!(moved.m[k], conn.nlc.m[k].simplify());
            for l in 0..2 {
                assert_eq!(moved.n[k][l], conn.nlc.n[k][l].simplify());
            }
        }

        let carried = transform_connection(&conn, &ch).unwrap();
        assert_eq!(carried.gbar, conn.gbar.simplify());
        for k in 0..2 {
            for i in 0..2 {
                assert_eq!(carried.g[k][i], conn.g[k][i].simplify());
                assert_eq!(carried.gv[k][i], conn.gv[k][i].simplify());
                for jx in 0..2 {
                    assert_eq!(carried.l[k][i][jx], conn.l[k][i][jx].simplify());
                    assert_eq!(carried.lv[k][i][jx], conn.lv[k][i][jx].simplify());
                    assert_eq!(carried.c[k][i][jx], conn.c[k][i][jx].simplify());
                    assert_eq!(carried.cv[k][i][jx], conn.cv[k][i][jx].simplify());
                }
            }
        }

        let field = liouville(&s);
        let same = transform_dtensor(&field, &ch).unwrap();
        assert_eq!(same, field);
    }

    #[test]
    fn affine_time_rescaling_halves_the_fiber() {
        let s = JetSpace::standard(1).unwrap();
        let tester = s.tester();
        let ch = change_of_coords(
            &s,
            ex("2*t", &s),
            vec![s.x_var(0)],
            ex("1/2*t", &s),
            vec![s.x_var(0)],
            &tester,
        )
        .unwrap();

        // The derived fiber rule: the new fiber coordinate is half the
        // old one, so reading a new-chart fiber symbol in the old chart
        // halves it, and the reverse direction doubles it.
        assert_eq!(ch.to_old_chart(&s.y_var(0)).unwrap(), ex("1/2*y1_1", &s));
        assert_eq!(ch.to_new_chart(&s.y_var(0)).unwrap(), ex("2*y1_1", &s));

        // A vanishing nonlinear connection stays vanishing: the only
        // candidate contribution differentiates a constant rate.
        let zero_nlc = NonlinearConnection::zero(&s);
        let moved = transform_nlc(&zero_nlc, &ch).unwrap();
        assert!(moved.m[0].is_zero_literal());
        assert!(moved.n[0][0].is_zero_literal());

        // An all-zero linear connection also stays zero: the affine
        // change kills both inhomogeneous time terms.
        let carried = transform_connection(&GammaConnection::zero(zero_nlc), &ch).unwrap();
        assert!(carried.gbar.is_zero_literal());
        assert!(carried.gv[0][0].is_zero_literal());

        // The canonical vertical field keeps its defining components.
        let field = liouville(&s);
        assert_eq!(transform_dtensor(&field, &ch).unwrap(), field);
    }

    #[test]
    fn canonical_structures_are_covariant() {
        let s = JetSpace::standard(2).unwrap();
        let tester = s.tester();
        let time = TimeMetric::new(&s, ex("t^2", &s), &tester).unwrap();
        let phi = SpatialMetric::new(
            &s,
            vec![
                vec![ex("1 + x2^2", &s), Expr::zero()],
                vec![Expr::zero(), ex("1 + x1^2", &s)],
            ],
            &tester,
        )
        .unwrap();

        for (name, ch) in standard_changes(&s, &tester).unwrap() {
            let time_new = transform_time_metric(&time, &ch, &tester).unwrap();
            let phi_new = transform_spatial_metric(&phi, &ch, &tester).unwrap();

            // The time Christoffel of the moved metric obeys its stated
            // rule.
            let rule = ch
                .to_new_chart(&Expr::sum([
                    Expr::product([christoffel_time(&time), ch.jacobian().w.clone()]),
                    ch.jacobian().w_prime.clone(),
                ]))
                .unwrap();
            let diff = Expr::sum([christoffel_time(&time_new), rule.neg()]);
            assert!(tester.is_zero(&diff).unwrap(), "time rule under {name}");

            // Transforming the canonical nonlinear connection agrees
            // with rebuilding it from the moved metrics.
            let direct = canonical_nlc(&time_new, &phi_new).unwrap();
            let moved = transform_nlc(&canonical_nlc(&time, &phi).unwrap(), &ch).unwrap();
            for k in 0..2 {
                let dm = Expr::sum([direct.m[k].clone(), moved.m[k].neg()]);
                assert!(tester.is_zero(&dm).unwrap(), "M[{k}] under {name}");
                for l in 0..2 {
                    let dn = Expr::sum([direct.n[k][l].clone(), moved.n[k][l].neg()]);
                    assert!(tester.is_zero(&dn).unwrap(), "N[{k}][{l}] under {name}");
                }
            }

            // Same for the metric-induced linear connection.
            let direct = berwald_connection(&time_new, &phi_new).unwrap();
            let moved =
                transform_connection(&berwald_connection(&time, &phi).unwrap(), &ch).unwrap();
            let pairs: Vec<(Expr, Expr, String)> = {
                let mut v = vec![(direct.gbar.clone(), moved.gbar.clone(), "gbar".into())];
                for k in 0..2 {
                    for i in 0..2 {
                        v.push((
                            direct.g[k][i].clone(),
                            moved.g[k][i].clone(),
                            format!("g[{k}][{i}]"),
                        ));
                        v.push((
                            direct.gv[k][i].clone(),
                            moved.gv[k][i].clone(),
                            format!("gv[{k}][{i}]"),
                        ));
                        for jx in 0..2 {
                            v.push((
                                direct.l[k][i][jx].clone(),
                                moved.l[k][i][jx].clone(),
                                format!("l[{k}][{i}][{jx}]"),
                            ));
                            v.push((
                                direct.lv[k][i][jx].clone(),
                                moved.lv[k][i][jx].clone(),
                                format!("lv[{k}][{i}][{jx}]"),
                            ));
                            v.push((
                                direct.c[k][i][jx].clone(),
                                moved.c[k][i][jx].clone(),
                                format!("c[{k}][{i}][{jx}]"),
                            ));
                            v.push((
                                direct.cv[k][i][jx].clone(),
                                moved.cv[k][i][jx].clone(),
                                format!("cv[{k}][{i}][{jx}]"),
                            ));
                        }
                    }
                }
                v
            };
            for (a, b, which) in pairs {
                let diff = Expr::sum([a, b.neg()]);
                assert!(tester.is_zero(&diff).unwrap(), "{which} under {name}");
            }
        }
    }

    #[test]
    fn composition_matches_iterated_transport() {
        let s = JetSpace::standard(1).unwrap();
        let tester = s.tester();

        // A time shift with a spatial inversion, followed by linear
        // rescalings of both coordinates.
        let first = change_of_coords(
            &s,
            ex("t + 1", &s),
            vec![ex("1/x1", &s)],
            ex("t - 1", &s),
            vec![ex("1/x1", &s)],
            &tester,
        )
        .unwrap();
        let second = change_of_coords(
            &s,
            ex("3*t", &s),
            vec![ex("2*x1", &s)],
            ex("1/3*t", &s),
            vec![ex("1/2*x1", &s)],
            &tester,
        )
        .unwrap();
        let composite = compose(&first, &second, &tester).unwrap();
        assert_eq!(composite.t_new(), &ex("3*t + 3", &s));
        assert_eq!(composite.x_new()[0], ex("2*x1^-1", &s));

        let nlc =
            NonlinearConnection::new(&s, vec![ex("t*y1_1", &s)], vec![vec![ex("x1*y1_1", &s)]])
                .unwrap();
        let mut conn = GammaConnection::zero(nlc);
        conn.gbar = ex("t^2", &s);
        conn.g[0][0] = ex("x1", &s);
        conn.gv[0][0] = ex("y1_1", &s);
        conn.lbar[0] = ex("t*x1", &s);
        conn.l[0][0][0] = ex("x1^2", &s);
        conn.lv[0][0][0] = ex("x1 + t", &s);
        conn.cbar[0] = ex("x1*y1_1", &s);
        conn.c[0][0][0] = ex("y1_1", &s);
        conn.cv[0][0][0] = ex("t*x1", &s);

        let once = transform_connection(&conn, &composite).unwrap();
        let twice =
            transform_connection(&transform_connection(&conn, &first).unwrap(), &second).unwrap();

        let blocks = [
            (once.gbar.clone(), twice.gbar.clone(), "gbar"),
            (once.nlc.m[0].clone(), twice.nlc.m[0].clone(), "M"),
            (once.nlc.n[0][0].clone(), twice.nlc.n[0][0].clone(), "N"),
            (once.g[0][0].clone(), twice.g[0][0].clone(), "g"),
            (once.gv[0][0].clone(), twice.gv[0][0].clone(), "gv"),
            (once.lbar[0].clone(), twice.lbar[0].clone(), "lbar"),
            (once.l[0][0][0].clone(), twice.l[0][0][0].clone(), "l"),
            (once.lv[0][0][0].clone(), twice.lv[0][0][0].clone(), "lv"),
            (once.cbar[0].clone(), twice.cbar[0].clone(), "cbar"),
            (once.c[0][0][0].clone(), twice.c[0][0][0].clone(), "c"),
            (once.cv[0][0][0].clone(), twice.cv[0][0][0].clone(), "cv"),
        ];
        for (a, b, which) in blocks {
            let diff = Expr::sum([a, b.neg()]);
            assert!(tester.is_zero(&diff).unwrap(), "{which}");
        }
    }

    #[test]
    fn torsion_curvature_and_deflection_are_covariant() {
        let s = JetSpace::standard(2).unwrap();
        let tester = s.tester();
        let conn = poly_conn(&s);
        let changes = standard_changes(&s, &tester).unwrap();
        let rotation = &changes[1].1;
        let affine = &changes[0].1;

        for object in [
            CovarianceObject::Torsion,
            CovarianceObject::Curvature,
            CovarianceObject::Deflection,
        ] {
            let report = covariance_check(&object, &conn, rotation, 24, 5).unwrap();
            assert!(!report.entries.is_empty());
            assert!(
                report.all_passed(),
                "failures: {:?}",
                report.failures().map(|e| &e.name).collect::<Vec<_>>()
            );
        }

        let field = liouville(&s);
        let report =
            covariance_check(&CovarianceObject::Tensor(field), &conn, affine, 24, 5).unwrap();
        assert!(report.all_passed());

        // Negative control: a bare coordinate function is not a
        // d-tensor, and a shift is the change that exposes it.
        let fake = DTensor::scalar(&s, ex("x2", &s));
        let shift = &changes[2].1;
        let report =
            covariance_check(&CovarianceObject::Tensor(fake), &conn, shift, 24, 5).unwrap();
        assert!(!report.all_passed());
    }

    #[test]
    fn surface_shift_preserves_metric_torsion_and_curvature() {
        let s = JetSpace::standard(2).unwrap();
        let tester = s.tester();
        let time = TimeMetric::new(&s, Expr::one(), &tester).unwrap();
        let phi = SpatialMetric::new(
            &s,
            vec![
                vec![Expr::one(), Expr::zero()],
                vec![Expr::zero(), ex("sin(x1)^2", &s)],
            ],
            &tester,
        )
        .unwrap();
        let conn = berwald_connection(&time, &phi).unwrap();

        // Shifting the ignorable coordinate is an isometry of this
        // metric, so the transported metric coincides with the original.
        let changes = standard_changes(&s, &tester).unwrap();
        let shift = &changes[2].1;
        let phi_new = transform_spatial_metric(&phi, shift, &tester).unwrap();
        for i in 0..2 {
            for jx in 0..2 {
                let diff = Expr::sum([phi_new.entry(i, jx).clone(), phi.entry(i, jx).neg()]);
                assert!(tester.is_zero(&diff).unwrap());
            }
        }

        for object in [CovarianceObject::Torsion, CovarianceObject::Curvature] {
            let report = covariance_check(&object, &conn, shift, 24, 11).unwrap();
            assert!(
                report.all_passed(),
                "failures: {:?}",
                report.failures().map(|e| &e.name).collect::<Vec<_>>()
            );
        }
    }
    #[test]
    fn metric_covariance_suite_passes_under_standard_changes() {
        let s = JetSpace::standard(2).unwrap();
        let tester = s.tester();
        let time = TimeMetric::new(&s, ex("t^2", &s), &tester).unwrap();
        let phi = SpatialMetric::new(
            &s,
            vec![
                vec![ex("1 + x2^2", &s), Expr::zero()],
                vec![Expr::zero(), ex("1 + x1^2", &s)],
            ],
            &tester,
        )
        .unwrap();
        for (name, ch) in standard_changes(&s, &tester).unwrap() {
            let report = metric_covariance_check(&time, &phi, &ch, 16, 3, 1e-9).unwrap();
            let failures: Vec<_> = report.failures().collect();
            assert!(failures.is_empty(), "{name}: {failures:?}");
        }

        let other = JetSpace::new(
            "s",
            vec!["u1".into(), "u2".into()],
            vec!["v1".into(), "v2".into()],
        )
        .unwrap();
        let ch = CoordChange::identity(&other);
        assert!(matches!(
            metric_covariance_check(&time, &phi, &ch, 4, 0, 1e-9),
            Err(TransformError::SpaceMismatch)
        ));
    }
}
