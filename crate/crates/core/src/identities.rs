//! Commutation identities for covariant derivatives, deflection tensors,
//! and the induced electromagnetic 2-form.
//!
//! The central object is the commutator residual: for a d-tensor `X` and
//! an ordered pair of derivative kinds `(B, C)`,
//!
//! ```text
//! X_{:B:C} - X_{:C:B}
//!     - [per up slot]   X^f R(value)_{f B C}
//!     + [per down slot] X_f R(f)_{value B C}
//!     + X_{:F} T(F)_{B C}   summed over every frame direction F
//! ```
//!
//! which must vanish identically. Specializing `X` to the three parts of
//! a d-vector yields fifteen identities; specializing it to the canonical
//! vertical field yields the five deflection identities, which are also
//! implemented here directly from their displayed forms so that the two
//! constructions can serve as mutual oracles.

use crate::curvtor::{curvature, torsion, CurvatureSet, TorsionSet};
use crate::dtensor::{
    cov_deriv, cov_space_all, cov_time, cov_vert_all, liouville, DTensor, DTensorError, DVector,
    IndexSlot, SlotKind, Variance,
};
use crate::frames::{all_directions, apply_frame, bracket_tensors, FrameKind};
use crate::geometry::{GammaConnection, JetSpace, NonlinearConnection};
use crate::symexpr::{Expr, ExprError, ZeroCheck, ZeroPath, ZeroTester};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IdentityError {
    /// Two constructions that must agree did not; this signals a defect in
    /// the engine, never invalid input.
    #[error("internal inconsistency: {what}")]
    InternalInconsistency { what: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    DTensor(#[from] DTensorError),
}

/// Verdict for one checked component of an identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityEntry {
    pub name: String,
    /// Simplified symbolic residual; the literal zero when the symbolic
    /// path decided.
    pub residual: Expr,
    pub passed: bool,
    pub path: ZeroPath,
    pub max_residual: f64,
    pub samples: usize,
}

impl IdentityEntry {
    pub(crate) fn from_check(name: String, residual: &Expr, check: ZeroCheck) -> IdentityEntry {
        IdentityEntry {
            name,
            residual: residual.simplify(),
            passed: check.zero,
            path: check.path,
            max_residual: check.max_residual,
            samples: check.samples,
        }
    }
}

/// Outcome of an identity suite, ordered by entry name.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub seed: u64,
    pub entries: Vec<IdentityEntry>,
}

impl IdentityReport {
    pub fn new(seed: u64) -> IdentityReport {
        IdentityReport {
            seed,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: IdentityEntry) {
        self.entries.push(entry);
    }

    /// Sorts entries by name; call once after the last push.
    pub fn finish(mut self) -> IdentityReport {
        self.entries.sort_by(|a, b| a.name.cmp(&b.name));
        self
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

/// 1-based component label, skipping extent-1 (time) axes.
pub(crate) fn index_label(signature: &[IndexSlot], idx: &[usize], n: usize) -> String {
    let shown: Vec<String> = signature
        .iter()
        .zip(idx)
        .filter(|(slot, _)| slot.extent(n) > 1)
        .map(|(_, i)| (i + 1).to_string())
        .collect();
    if shown.is_empty() {
        String::new()
    } else {
        format!("[{}]", shown.join(","))
    }
}

fn cov_all(tensor: &DTensor, conn: &GammaConnection, kind: FrameKind) -> DTensor {
    match kind {
        FrameKind::TimeH => cov_time(tensor, conn),
        FrameKind::SpaceH => cov_space_all(tensor, conn),
        FrameKind::Vertical => cov_vert_all(tensor, conn),
    }
}

/// Commutator residual with torsion and curvature supplied by the caller,
/// so suites over one connection reuse them.
pub fn commutator_residual_with(
    tensor: &DTensor,
    b: FrameKind,
    c: FrameKind,
    conn: &GammaConnection,
    tor: &TorsionSet,
    cur: &CurvatureSet,
) -> DTensor {
    let n = tensor.space().dim();
    let rank = tensor.rank();
    let signature = tensor.signature().to_vec();

    let first = cov_all(&cov_all(tensor, conn, b), conn, c);
    let second = cov_all(&cov_all(tensor, conn, c), conn, b);
    let derivs: Vec<DTensor> = all_directions(n)
        .into_iter()
        .map(|dir| cov_deriv(tensor, conn, dir))
        .collect();
    let dirs = all_directions(n);

    let mut result_sig = signature.clone();
    result_sig.push(IndexSlot::down(b));
    result_sig.push(IndexSlot::down(c));

    DTensor::from_fn(tensor.space(), result_sig, |idx| {
        let (orig, pair) = idx.split_at(rank);
        let (bi, ci) = (pair[0], pair[1]);
        let b_dir = b.direction(bi);
        let c_dir = c.direction(ci);

        let mut swapped = orig.to_vec();
        swapped.push(ci);
        swapped.push(bi);

        let mut terms = vec![
            first.get(idx).unwrap().clone(),
            second.get(&swapped).unwrap().neg(),
        ];
        for (slot_pos, slot) in signature.iter().enumerate() {
            for f in 0..slot.extent(n) {
                let mut other = orig.to_vec();
                other[slot_pos] = f;
                let x_comp = tensor.get(&other).unwrap().clone();
                let held = slot.kind.direction(orig[slot_pos]);
                let free = slot.kind.direction(f);
                let term = match slot.variance {
                    Variance::Up => {
                        Expr::product([x_comp, cur.component(held, free, b_dir, c_dir)]).neg()
                    }
                    Variance::Down => {
                        Expr::product([x_comp, cur.component(free, held, b_dir, c_dir)])
                    }
                };
                terms.push(term);
            }
        }
        for (dir, deriv) in dirs.iter().zip(&derivs) {
            terms.push(Expr::product([
                deriv.get(orig).unwrap().clone(),
                tor.component(*dir, b_dir, c_dir),
            ]));
        }
        Expr::sum(terms)
    })
}

/// Commutator residual of the second covariant derivatives of `tensor`
/// over the ordered derivative-kind pair `(b, c)`. The result appends a
/// down slot per kind; every component must vanish.
pub fn commutator_residual(
    tensor: &DTensor,
    b: FrameKind,
    c: FrameKind,
    conn: &GammaConnection,
) -> DTensor {
    let tor = torsion(conn);
    let cur = curvature(conn);
    commutator_residual_with(tensor, b, c, conn, &tor, &cur)
}

/// The five ordered derivative-kind pairs, numbered as the deflection
/// identities are.
pub const KIND_PAIRS: [(FrameKind, FrameKind); 5] = [
    (FrameKind::TimeH, FrameKind::SpaceH),
    (FrameKind::SpaceH, FrameKind::SpaceH),
    (FrameKind::TimeH, FrameKind::Vertical),
    (FrameKind::SpaceH, FrameKind::Vertical),
    (FrameKind::Vertical, FrameKind::Vertical),
];

/// Verifies the fifteen commutation identities on the three parts of a
/// d-vector: five derivative-kind pairs for each of the time, spatial,
/// and vertical components.
pub fn ricci_check(
    conn: &GammaConnection,
    x: &DVector,
    samples: usize,
    seed: u64,
) -> Result<IdentityReport, IdentityError> {
    let tester = conn.space().tester().with_trials(samples).with_seed(seed);
    ricci_check_with_tester(conn, x, &tester)
}

/// As `ricci_check`, with full control over the tester.
pub fn ricci_check_with_tester(
    conn: &GammaConnection,
    x: &DVector,
    tester: &ZeroTester,
) -> Result<IdentityReport, IdentityError> {
    let tor = torsion(conn);
    let cur = curvature(conn);
    let n = conn.dim();
    let mut report = IdentityReport::new(tester.seed);

    for (part, tag) in x.parts().iter().zip(["hR", "hM", "v"]) {
        for (pair_no, (b, c)) in KIND_PAIRS.iter().enumerate() {
            let residual = commutator_residual_with(part, *b, *c, conn, &tor, &cur);
            for (idx, expr) in residual.iter() {
                let name = format!(
                    "ricci.{tag}.{}{}",
                    pair_no + 1,
                    index_label(residual.signature(), &idx, n)
                );
                let check = tester.check(expr)?;
                report.push(IdentityEntry::from_check(name, expr, check));
            }
        }
    }
    Ok(report.finish())
}

/// The deflection d-tensors of a connection: the covariant derivatives of
/// the canonical vertical field, one per derivative kind.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionSet {
    /// Time derivative, `[i]`.
    pub dbar: Vec<Expr>,
    /// Spatial derivative, `[i][j]`.
    pub d: Vec<Vec<Expr>>,
    /// Vertical derivative, `[i][j]`.
    pub dv: Vec<Vec<Expr>>,
}

impl DeflectionSet {
    /// Components with their canonical labels, grouped by family:
    /// `Dbar[(1)][1]^[(i)]`, `D[(1)][j]^[(i)]`, and `d[(1)][(j)]^[(i),(1)]`
    /// with literal 1-based indices.
    pub fn iter_named(&self) -> impl Iterator<Item = (&'static str, String, &Expr)> {
        let n = self.dbar.len();
        let mut out: Vec<(&'static str, String, &Expr)> = Vec::new();
        for i in 0..n {
            out.push(("dbar", format!("Dbar[(1)][1]^[({})]", i + 1), &self.dbar[i]));
        }
        for i in 0..n {
            for j in 0..n {
                out.push((
                    "d",
                    format!("D[(1)][{}]^[({})]", j + 1, i + 1),
                    &self.d[i][j],
                ));
            }
        }
        for i in 0..n {
            for j in 0..n {
                out.push((
                    "dv",
                    format!("d[(1)][({})]^[({}),(1)]", j + 1, i + 1),
                    &self.dv[i][j],
                ));
            }
        }
        out.into_iter()
    }
}

/// Computes the deflection tensors twice — once by differentiating the
/// canonical vertical field, once from the closed forms
///
/// ```text
/// Dbar^i   = -M^i     + Gv^i_r y^r
/// D^i_j    = -N^i_j   + Lv^i_{r j} y^r
/// d^i_(j)  = delta^i_j + Cv^i_{r j} y^r
/// ```
///
/// and fails if the two constructions disagree.
pub fn deflection_tensors(conn: &GammaConnection) -> Result<DeflectionSet, IdentityError> {
    let tester = conn.space().tester();
    deflection_tensors_with_tester(conn, &tester)
}

/// As [`deflection_tensors`], with full control over the tester used for
/// the cross-construction consistency check.
pub fn deflection_tensors_with_tester(
    conn: &GammaConnection,
    tester: &ZeroTester,
) -> Result<DeflectionSet, IdentityError> {
    let space = conn.space();
    let n = conn.dim();
    let field = liouville(space);

    let derived_time = cov_time(&field, conn);
    let derived_space = cov_space_all(&field, conn);
    let derived_vert = cov_vert_all(&field, conn);

    let dbar: Vec<Expr> = (0..n)
        .map(|i| {
            Expr::sum(
                std::iter::once(conn.nlc.m[i].neg())
                    .chain((0..n).map(|r| Expr::product([conn.gv[i][r].clone(), space.y_var(r)]))),
            )
        })
        .collect();
    let d: Vec<Vec<Expr>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    Expr::sum(std::iter::once(conn.nlc.n[i][j].neg()).chain(
                        (0..n).map(|r| Expr::product([conn.lv[i][r][j].clone(), space.y_var(r)])),
                    ))
                })
                .collect()
        })
        .collect();
    let dv: Vec<Vec<Expr>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let kronecker = if i == j { Expr::one() } else { Expr::zero() };
                    Expr::sum(std::iter::once(kronecker).chain(
                        (0..n).map(|r| Expr::product([conn.cv[i][r][j].clone(), space.y_var(r)])),
                    ))
                })
                .collect()
        })
        .collect();

    for i in 0..n {
        let diff = derived_time.get(&[i, 0]).unwrap() - &dbar[i];
        if !tester.is_zero(&diff)? {
            return Err(IdentityError::InternalInconsistency {
                what: format!("time deflection component {i} disagrees between constructions"),
            });
        }
        for j in 0..n {
            let diff = derived_space.get(&[i, j]).unwrap() - &d[i][j];
            if !tester.is_zero(&diff)? {
                return Err(IdentityError::InternalInconsistency {
                    what: format!(
                        "spatial deflection component ({i},{j}) disagrees between constructions"
                    ),
                });
            }
            let diff = derived_vert.get(&[i, j]).unwrap() - &dv[i][j];
            if !tester.is_zero(&diff)? {
                return Err(IdentityError::InternalInconsistency {
                    what: format!(
                        "vertical deflection component ({i},{j}) disagrees between constructions"
                    ),
                });
            }
        }
    }

    Ok(DeflectionSet { dbar, d, dv })
}

/// The residuals of the five deflection identities, assembled directly
/// from their displayed forms (independently of the generic commutator
/// machinery, so the two act as oracles for each other).
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionResiduals {
    /// (time, space) pair: `[i][k]`.
    pub id1: Vec<Vec<Expr>>,
    /// (space, space) pair: `[i][j][k]`.
    pub id2: Vec<Vec<Vec<Expr>>>,
    /// (time, vertical) pair: `[i][k]`.
    pub id3: Vec<Vec<Expr>>,
    /// (space, vertical) pair: `[i][j][k]`.
    pub id4: Vec<Vec<Vec<Expr>>>,
    /// (vertical, vertical) pair: `[i][j][k]`.
    pub id5: Vec<Vec<Vec<Expr>>>,
}

pub fn deflection_identity_residuals(
    conn: &GammaConnection,
) -> Result<DeflectionResiduals, IdentityError> {
    let space = conn.space();
    let n = conn.dim();
    let defl = deflection_tensors(conn)?;
    let tor = torsion(conn);
    let cur = curvature(conn);

    let dbar_tensor = DTensor::from_fn(
        space,
        vec![
            IndexSlot::up(SlotKind::Vertical),
            IndexSlot::down(SlotKind::TimeH),
        ],
        |idx| defl.dbar[idx[0]].clone(),
    );
    let d_tensor = DTensor::from_fn(
        space,
        vec![
            IndexSlot::up(SlotKind::Vertical),
            IndexSlot::down(SlotKind::SpaceH),
        ],
        |idx| defl.d[idx[0]][idx[1]].clone(),
    );
    let dv_tensor = DTensor::from_fn(
        space,
        vec![
            IndexSlot::up(SlotKind::Vertical),
            IndexSlot::down(SlotKind::Vertical),
        ],
        |idx| defl.dv[idx[0]][idx[1]].clone(),
    );

    let dbar_sp = cov_space_all(&dbar_tensor, conn);
    let dbar_vt = cov_vert_all(&dbar_tensor, conn);
    let d_tm = cov_time(&d_tensor, conn);
    let d_sp = cov_space_all(&d_tensor, conn);
    let d_vt = cov_vert_all(&d_tensor, conn);
    let dv_tm = cov_time(&dv_tensor, conn);
    let dv_sp = cov_space_all(&dv_tensor, conn);
    let dv_vt = cov_vert_all(&dv_tensor, conn);

    let y = |r: usize| space.y_var(r);

    let id1 = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    Expr::sum(
                        [
                            dbar_sp.get(&[i, 0, k]).unwrap().clone(),
                            d_tm.get(&[i, k, 0]).unwrap().neg(),
                            Expr::product([defl.dbar[i].clone(), tor.tbar[k].clone()]),
                        ]
                        .into_iter()
                        .chain((0..n).flat_map(|r| {
                            [
                                Expr::product([y(r), cur.rv_time[i][r][k].clone()]).neg(),
                                Expr::product([defl.d[i][r].clone(), tor.t_time[r][k].clone()]),
                                Expr::product([defl.dv[i][r].clone(), tor.r_time[r][k].clone()]),
                            ]
                        })),
                    )
                })
                .collect()
        })
        .collect();

    let id2 = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            Expr::sum(
                                [
                                    d_sp.get(&[i, j, k]).unwrap().clone(),
                                    d_sp.get(&[i, k, j]).unwrap().neg(),
                                ]
                                .into_iter()
                                .chain((0..n).flat_map(|r| {
                                    [
                                        Expr::product([y(r), cur.rv_space[i][r][j][k].clone()])
                                            .neg(),
                                        Expr::product([
                                            defl.d[i][r].clone(),
                                            tor.t_space[r][j][k].clone(),
                                        ]),
                                        Expr::product([
                                            defl.dv[i][r].clone(),
                                            tor.r_space[r][j][k].clone(),
                                        ]),
                                    ]
                                })),
                            )
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let id3 = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    Expr::sum(
                        [
                            dbar_vt.get(&[i, 0, k]).unwrap().clone(),
                            dv_tm.get(&[i, k, 0]).unwrap().neg(),
                            Expr::product([defl.dbar[i].clone(), tor.pbar[k].clone()]),
                        ]
                        .into_iter()
                        .chain((0..n).flat_map(|r| {
                            [
                                Expr::product([y(r), cur.pv_time[i][r][k].clone()]).neg(),
                                Expr::product([
                                    defl.dv[i][r].clone(),
                                    tor.p_vert_time[r][k].clone(),
                                ]),
                            ]
                        })),
                    )
                })
                .collect()
        })
        .collect();

    let id4 = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            Expr::sum(
                                [
                                    d_vt.get(&[i, j, k]).unwrap().clone(),
                                    dv_sp.get(&[i, k, j]).unwrap().neg(),
                                ]
                                .into_iter()
                                .chain((0..n).flat_map(|r| {
                                    [
                                        Expr::product([y(r), cur.pv_space[i][r][j][k].clone()])
                                            .neg(),
                                        Expr::product([
                                            defl.d[i][r].clone(),
                                            tor.p_space[r][j][k].clone(),
                                        ]),
                                        Expr::product([
                                            defl.dv[i][r].clone(),
                                            tor.p_vert_space[r][j][k].clone(),
                                        ]),
                                    ]
                                })),
                            )
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let id5 = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            Expr::sum(
                                [
                                    dv_vt.get(&[i, j, k]).unwrap().clone(),
                                    dv_vt.get(&[i, k, j]).unwrap().neg(),
                                ]
                                .into_iter()
                                .chain((0..n).flat_map(|r| {
                                    [
                                        Expr::product([y(r), cur.sv[i][r][j][k].clone()]).neg(),
                                        Expr::product([
                                            defl.dv[i][r].clone(),
                                            tor.s_vert[r][j][k].clone(),
                                        ]),
                                    ]
                                })),
                            )
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    Ok(DeflectionResiduals {
        id1,
        id2,
        id3,
        id4,
        id5,
    })
}

/// Verifies the five deflection identities.
pub fn deflection_identities_check(
    conn: &GammaConnection,
    samples: usize,
    seed: u64,
) -> Result<IdentityReport, IdentityError> {
    let tester = conn.space().tester().with_trials(samples).with_seed(seed);
    deflection_identities_check_with_tester(conn, &tester)
}

/// As `deflection_identities_check`, with full control over the tester.
pub fn deflection_identities_check_with_tester(
    conn: &GammaConnection,
    tester: &ZeroTester,
) -> Result<IdentityReport, IdentityError> {
    let residuals = deflection_identity_residuals(conn)?;
    let n = conn.dim();
    let mut report = IdentityReport::new(tester.seed);

    let push2 =
        |report: &mut IdentityReport, no: usize, arr: &[Vec<Expr>]| -> Result<(), IdentityError> {
            for i in 0..n {
                for k in 0..n {
                    let name = format!("deflection.{no}[{},{}]", i + 1, k + 1);
                    let check = tester.check(&arr[i][k])?;
                    report.push(IdentityEntry::from_check(name, &arr[i][k], check));
                }
            }
            Ok(())
        };
    push2(&mut report, 1, &residuals.id1)?;
    push2(&mut report, 3, &residuals.id3)?;

    let push3 = |report: &mut IdentityReport,
                 no: usize,
                 arr: &[Vec<Vec<Expr>>]|
     -> Result<(), IdentityError> {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let name = format!("deflection.{no}[{},{},{}]", i + 1, j + 1, k + 1);
                    let check = tester.check(&arr[i][j][k])?;
                    report.push(IdentityEntry::from_check(name, &arr[i][j][k], check));
                }
            }
        }
        Ok(())
    };
    push3(&mut report, 2, &residuals.id2)?;
    push3(&mut report, 4, &residuals.id4)?;
    push3(&mut report, 5, &residuals.id5)?;

    Ok(report.finish())
}

/// A random polynomial in the given variables: two to four terms, each a
/// small rational coefficient times one or two variables. Degree stays at
/// most two so that repeated frame derivatives stay cheap while every
/// coordinate still gets a chance to appear.
fn random_polynomial<R: Rng>(vars: &[Expr], rng: &mut R) -> Expr {
    loop {
        let terms = rng.gen_range(2..=4);
        let mut parts = Vec::with_capacity(terms);
        for _ in 0..terms {
            let mut numer = 0;
            while numer == 0 {
                numer = rng.gen_range(-3..=3);
            }
            let coeff = Expr::ratio(numer, rng.gen_range(1..=2));
            let a = vars[rng.gen_range(0..vars.len())].clone();
            let term = if rng.gen_bool(0.5) {
                let b = vars[rng.gen_range(0..vars.len())].clone();
                Expr::product([coeff, a, b])
            } else {
                Expr::product([coeff, a])
            };
            parts.push(term);
        }
        let poly = Expr::sum(parts);
        // Terms can cancel outright; redraw until the probe actually
        // depends on something.
        if !poly.free_vars().is_empty() {
            return poly;
        }
    }
}

fn coordinate_vars(space: &JetSpace) -> Vec<Expr> {
    let n = space.dim();
    let mut vars = vec![space.t_var()];
    for i in 0..n {
        vars.push(space.x_var(i));
    }
    for i in 0..n {
        vars.push(space.y_var(i));
    }
    vars
}

/// A deterministic pseudo-random scalar function on the jet space, for
/// use as a differential-operator probe.
pub fn generic_scalar(space: &JetSpace, seed: u64) -> Expr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_polynomial(&coordinate_vars(space), &mut rng)
}

/// A deterministic pseudo-random d-vector with polynomial components.
pub fn generic_dvector(space: &JetSpace, seed: u64) -> Result<DVector, IdentityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = coordinate_vars(space);
    let n = space.dim();
    let time = random_polynomial(&vars, &mut rng);
    let spatial = (0..n).map(|_| random_polynomial(&vars, &mut rng)).collect();
    let vertical = (0..n).map(|_| random_polynomial(&vars, &mut rng)).collect();
    Ok(DVector::new(space, time, spatial, vertical)?)
}

/// Verifies the six commutation identities of the adapted frame field on
/// seeded random scalar probes: applied to any function, the commutator
/// of two frame operators must equal its known vertical expansion —
/// zero for two time frames or two vertical frames, curvature-coefficient
/// combinations for the horizontal pairs, and fiber derivatives of the
/// connection coefficients for the mixed pairs.
pub fn bracket_check(
    nlc: &NonlinearConnection,
    probes: usize,
    samples: usize,
    seed: u64,
) -> Result<IdentityReport, IdentityError> {
    let tester = nlc.space.tester().with_trials(samples).with_seed(seed);
    bracket_check_with_tester(nlc, probes, &tester)
}

/// As [`bracket_check`], with full control over the tester.
pub fn bracket_check_with_tester(
    nlc: &NonlinearConnection,
    probes: usize,
    tester: &ZeroTester,
) -> Result<IdentityReport, IdentityError> {
    let space = &nlc.space;
    let n = space.dim();
    let dirs = all_directions(n);
    let brackets = bracket_tensors(nlc);
    let vars = coordinate_vars(space);
    let mut rng = ChaCha8Rng::seed_from_u64(tester.seed);
    let mut report = IdentityReport::new(tester.seed);

    for probe in 0..probes {
        let f = random_polynomial(&vars, &mut rng);
        let fiber_grad: Vec<Expr> = (0..n)
            .map(|r| f.differentiate(&space.fiber_coords()[r]))
            .collect();
        for (ai, a) in dirs.iter().enumerate() {
            for b in &dirs[ai..] {
                use FrameKind::{SpaceH, TimeH, Vertical};
                // Equal directions commute trivially; keep only the
                // time-time case so every kind pair shows up once.
                if a == b && a.kind() != TimeH {
                    continue;
                }
                let (tag, label): (&str, String) = match (a.kind(), b.kind()) {
                    (TimeH, TimeH) => ("tt", String::new()),
                    (TimeH, SpaceH) => ("tx", format!("[{}]", b.index() + 1)),
                    (SpaceH, SpaceH) if a.index() < b.index() => {
                        ("xx", format!("[{},{}]", a.index() + 1, b.index() + 1))
                    }
                    (SpaceH, SpaceH) => continue,
                    (TimeH, Vertical) => ("ty", format!("[{}]", b.index() + 1)),
                    (SpaceH, Vertical) => ("xy", format!("[{},{}]", a.index() + 1, b.index() + 1)),
                    (Vertical, Vertical) if a.index() < b.index() => {
                        ("yy", format!("[{},{}]", a.index() + 1, b.index() + 1))
                    }
                    (Vertical, Vertical) => continue,
                    _ => unreachable!("directions are ordered time, space, vertical"),
                };

                let coeff = |r: usize| -> Expr {
                    match (a.kind(), b.kind()) {
                        (TimeH, TimeH) | (Vertical, Vertical) => Expr::zero(),
                        (TimeH, SpaceH) => brackets.r1j[r][b.index()].clone(),
                        (SpaceH, SpaceH) => brackets.rij[r][a.index()][b.index()].clone(),
                        (TimeH, Vertical) => {
                            nlc.m[r].differentiate(&space.fiber_coords()[b.index()])
                        }
                        (SpaceH, Vertical) => {
                            nlc.n[r][a.index()].differentiate(&space.fiber_coords()[b.index()])
                        }
                        _ => unreachable!("directions are ordered time, space, vertical"),
                    }
                };

                let ab = apply_frame(nlc, *a, &apply_frame(nlc, *b, &f));
                let ba = apply_frame(nlc, *b, &apply_frame(nlc, *a, &f));
                let expansion =
                    Expr::sum((0..n).map(|r| Expr::product([coeff(r), fiber_grad[r].clone()])));
                let residual = Expr::sum([ab, ba.neg(), expansion.neg()]);
                let check = tester.check(&residual)?;
                report.push(IdentityEntry::from_check(
                    format!("bracket.{tag}{label}.f{probe}"),
                    &residual,
                    check,
                ));
            }
        }
    }
    Ok(report.finish())
}

/// Antisymmetrizes a lowered deflection array into the induced
/// electromagnetic 2-form: `F = (Dlow - transpose(Dlow)) / 2`.
pub fn em_two_form(dlow: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = dlow.len();
    assert!(
        dlow.iter().all(|row| row.len() == n),
        "lowered deflection array must be square"
    );
    let half = Expr::ratio(1, 2);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Expr::product([half.clone(), &dlow[i][j] - &dlow[j][i]]))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        berwald_connection, GammaConnection, JetSpace, NonlinearConnection, SpatialMetric,
        TimeMetric,
    };
    use crate::symexpr::parse;

    fn space2() -> JetSpace {
        JetSpace::standard(2).unwrap()
    }

    fn ex(src: &str, s: &JetSpace) -> Expr {
        parse(src, &s.var_set()).unwrap()
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

    fn sphere_berwald(s: &JetSpace) -> GammaConnection {
        let tester = s.tester();
        let time = TimeMetric::new(s, ex("exp(2*t)", s), &tester).unwrap();
        let phi = SpatialMetric::new(
            s,
            vec![
                vec![Expr::one(), Expr::zero()],
                vec![Expr::zero(), ex("sin(x1)^2", s)],
            ],
            &tester,
        )
        .unwrap();
        berwald_connection(&time, &phi).unwrap()
    }

    #[test]
    fn scalar_commutator_vanishes_for_a_flat_connection() {
        let s = space2();
        let tester = s.tester();
        let time = TimeMetric::new(&s, Expr::one(), &tester).unwrap();
        let phi = SpatialMetric::new(
            &s,
            vec![
                vec![Expr::one(), Expr::zero()],
                vec![Expr::zero(), Expr::one()],
            ],
            &tester,
        )
        .unwrap();
        let conn = berwald_connection(&time, &phi).unwrap();
        let scalar = DTensor::scalar(&s, ex("t*x1 + y1_2^2", &s));
        for (b, c) in KIND_PAIRS {
            let residual = commutator_residual(&scalar, b, c, &conn);
            for (_, e) in residual.iter() {
                assert!(e.simplify().is_zero_literal(), "got {e}");
            }
        }
    }

    #[test]
    fn ricci_suite_passes_for_a_generic_connection() {
        let s = space2();
        let conn = poly_conn(&s);
        let x = DVector::new(
            &s,
            ex("t + x1*y1_2", &s),
            vec![ex("x2^2", &s), ex("t*y1_1", &s)],
            vec![ex("x1 + y1_1", &s), ex("t^2*x2", &s)],
        )
        .unwrap();
        let report = ricci_check(&conn, &x, 32, 7).unwrap();
        assert_eq!(report.seed, 7);
        // Per pair (2 + 4 + 2 + 4 + 4) = 16 slots; the time part carries
        // them once, the spatial and vertical parts twice each (free up
        // index of extent 2).
        assert_eq!(report.entries.len(), 80);
        for entry in &report.entries {
            assert!(
                entry.passed,
                "{} failed with residual {} (max {})",
                entry.name, entry.residual, entry.max_residual
            );
        }
        let names: Vec<&str> = report.entries.iter().map(|e| e.name.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn rank_two_mixed_tensor_commutators_vanish() {
        let s = space2();
        let conn = poly_conn(&s);
        let tensor = DTensor::from_fn(
            &s,
            vec![
                IndexSlot::up(SlotKind::SpaceH),
                IndexSlot::down(SlotKind::Vertical),
            ],
            |idx| match (idx[0], idx[1]) {
                (0, 0) => ex("t*y1_1", &s),
                (0, 1) => ex("x2", &s),
                (1, 0) => ex("x1^2 + y1_2", &s),
                _ => ex("t", &s),
            },
        );
        let tester = s.tester();
        for (b, c) in [
            (FrameKind::TimeH, FrameKind::SpaceH),
            (FrameKind::SpaceH, FrameKind::Vertical),
        ] {
            let residual = commutator_residual(&tensor, b, c, &conn);
            for (idx, e) in residual.iter() {
                assert!(tester.is_zero(e).unwrap(), "component {idx:?} residual {e}");
            }
        }
    }

    #[test]
    fn deflection_tensors_of_metric_connections_are_rigid() {
        let s = space2();
        let conn = sphere_berwald(&s);
        let defl = deflection_tensors(&conn).unwrap();
        let tester = s.tester();
        for i in 0..2 {
            assert!(tester.is_zero(&defl.dbar[i]).unwrap());
            for j in 0..2 {
                assert!(tester.is_zero(&defl.d[i][j]).unwrap());
                let kronecker = if i == j { Expr::one() } else { Expr::zero() };
                assert!(tester.is_zero(&(&defl.dv[i][j] - &kronecker)).unwrap());
            }
        }
    }

    #[test]
    fn one_dimensional_vertical_deflection_tracks_the_vertical_block() {
        let s = JetSpace::standard(1).unwrap();
        let nlc = NonlinearConnection::zero(&s);
        let mut conn = GammaConnection::zero(nlc);
        conn.cv[0][0][0] = ex("x1", &s);
        let defl = deflection_tensors(&conn).unwrap();
        let want = ex("1 + x1*y1_1", &s);
        assert!(s.tester().is_zero(&(&defl.dv[0][0] - &want)).unwrap());
    }

    #[test]
    fn deflection_identities_hold_and_match_the_commutator_machinery() {
        let s = space2();
        let _n = 2;
        for conn in [sphere_berwald(&s), poly_conn(&s)] {
            let report = deflection_identities_check(&conn, 32, 0).unwrap();
            assert!(
                report.all_passed(),
                "failures: {:?}",
                report.failures().map(|e| &e.name).collect::<Vec<_>>()
            );

            // Mutual oracle: the same residuals must fall out of the generic
            // commutator applied to the canonical vertical field.
            let residuals = deflection_identity_residuals(&conn).unwrap();
            let tor = torsion(&conn);
            let cur = curvature(&conn);
            let field = liouville(&s);
            let tight = s.tester().with_tol(1e-12);
            for (pair_no, (b, c)) in KIND_PAIRS.iter().enumerate() {
                let generic = commutator_residual_with(&field, *b, *c, &conn, &tor, &cur);
                for (idx, e) in generic.iter() {
                    let direct = match pair_no {
                        0 => &residuals.id1[idx[0]][idx[2]],
                        1 => &residuals.id2[idx[0]][idx[1]][idx[2]],
                        2 => &residuals.id3[idx[0]][idx[2]],
                        3 => &residuals.id4[idx[0]][idx[1]][idx[2]],
                        _ => &residuals.id5[idx[0]][idx[1]][idx[2]],
                    };
                    assert!(
                        tight.is_zero(&(e - direct)).unwrap(),
                        "pair {} component {idx:?}",
                        pair_no + 1
                    );
                }
            }
        }
    }

    #[test]
    fn em_two_form_antisymmetrizes() {
        let lift = |m: [[i64; 2]; 2]| -> Vec<Vec<Expr>> {
            m.iter()
                .map(|row| row.iter().map(|&v| Expr::from_int(v)).collect())
                .collect()
        };
        let f = em_two_form(&lift([[0, 2], [-4, 0]]));
        assert_eq!(f[0][1], Expr::from_int(3));
        assert_eq!(f[1][0], Expr::from_int(-3));
        assert!(f[0][0].is_zero_literal() && f[1][1].is_zero_literal());

        let f = em_two_form(&lift([[1, 5], [1, 2]]));
        assert_eq!(f[0][1], Expr::from_int(2));
        assert_eq!(f[1][0], Expr::from_int(-2));

        let f = em_two_form(&lift([[1, 7], [7, 3]]));
        assert!(f.iter().flatten().all(|e| e.is_zero_literal()));
    }
    #[test]
    fn generic_probes_are_deterministic() {
        let s = space2();
        let f = generic_scalar(&s, 5);
        assert_eq!(f, generic_scalar(&s, 5));
        assert_ne!(f, generic_scalar(&s, 6));
        assert!(!f.is_zero_literal());

        let x = generic_dvector(&s, 5).unwrap();
        assert_eq!(x, generic_dvector(&s, 5).unwrap());
        let [xt, _, _] = x.parts();
        assert!(!xt.get(&[0]).unwrap().is_zero_literal());
    }

    #[test]
    fn bracket_expansions_hold_on_random_probes() {
        let s = space2();
        let conn = poly_conn(&s);
        let report = bracket_check(&conn.nlc, 3, 24, 11).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.is_empty(), "failures: {failures:?}");
        // One time-time pair, two time-space, one space-space, two
        // time-vertical, four space-vertical, one vertical-vertical:
        // eleven identities per probe function.
        assert_eq!(report.entries.len(), 33);
        assert!(report
            .entries
            .iter()
            .any(|e| e.name == "bracket.xy[2,1].f0"));
    }

    #[test]
    fn frame_commutators_detect_a_wrong_expansion() {
        let s = space2();
        let conn = poly_conn(&s);
        let tester = s.tester();
        // The raw commutator of two adapted frames is *not* zero for a
        // fiber-dependent connection; the expansion term is what closes
        // the identity.
        let dirs = all_directions(2);
        let f = ex("x1*y1_1", &s);
        let ab = apply_frame(&conn.nlc, dirs[0], &apply_frame(&conn.nlc, dirs[3], &f));
        let ba = apply_frame(&conn.nlc, dirs[3], &apply_frame(&conn.nlc, dirs[0], &f));
        let raw = Expr::sum([ab, ba.neg()]);
        assert!(!tester.is_zero(&raw).unwrap());
    }

    #[test]
    fn deflection_labels_follow_the_pairing_convention() {
        let s = space2();
        let conn = poly_conn(&s);
        let set = deflection_tensors(&conn).unwrap();
        let named: Vec<(&'static str, String)> = set
            .iter_named()
            .map(|(family, label, _)| (family, label))
            .collect();
        assert_eq!(named.len(), 2 + 4 + 4);
        assert_eq!(named[0], ("dbar", "Dbar[(1)][1]^[(1)]".to_string()));
        assert_eq!(named[3], ("d", "D[(1)][2]^[(1)]".to_string()));
        assert_eq!(named[6], ("dv", "d[(1)][(1)]^[(1),(1)]".to_string()));
        assert_eq!(named[9], ("dv", "d[(1)][(2)]^[(2),(1)]".to_string()));
    }
}
