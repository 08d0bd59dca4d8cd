//! Torsion and curvature of a linear connection adapted to the jet space.
//!
//! Both objects are organized by where their value lands (time, space, or
//! vertical frame) and by the kinds of the two argument directions. Only
//! the families that can be nonzero for an adapted connection are stored;
//! the `component` accessors expose the full index ranges, filling in the
//! structural zeros and the antisymmetry in the argument pair.
//!
//! Conventions, with `Y` ranging over adapted frame fields:
//! the torsion component table realizes
//! `T(Y_c, Y_b) = cov_c Y_b - cov_b Y_c - [Y_c, Y_b]`
//! and the curvature table realizes
//! `R(Y_c, Y_b) Y_a = cov_c (cov_b Y_a) - cov_b (cov_c Y_a) - cov_{[Y_c, Y_b]} Y_a`,
//! stored as components over `[value][acted][b][c]`.

use crate::dtensor::{cov_deriv, DTensor, IndexSlot, SlotKind};
use crate::frames::{apply_frame, bracket_tensors, FrameDir};
use crate::geometry::GammaConnection;
use crate::symexpr::Expr;

fn grid1(n: usize, f: impl Fn(usize) -> Expr) -> Vec<Expr> {
    (0..n).map(f).collect()
}

fn grid2(n: usize, f: impl Fn(usize, usize) -> Expr) -> Vec<Vec<Expr>> {
    (0..n).map(|a| (0..n).map(|b| f(a, b)).collect()).collect()
}

fn grid3(n: usize, f: impl Fn(usize, usize, usize) -> Expr) -> Vec<Vec<Vec<Expr>>> {
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| (0..n).map(|c| f(a, b, c)).collect())
                .collect()
        })
        .collect()
}

#[allow(clippy::type_complexity)]
fn grid4(n: usize, f: impl Fn(usize, usize, usize, usize) -> Expr) -> Vec<Vec<Vec<Vec<Expr>>>> {
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    (0..n)
                        .map(|c| (0..n).map(|d| f(a, b, c, d)).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Argument-pair kind order used to canonicalize torsion and curvature
/// component lookups: time, then space, then vertical.
fn dir_rank(d: FrameDir) -> u8 {
    match d {
        FrameDir::TimeH => 0,
        FrameDir::SpaceH(_) => 1,
        FrameDir::Vertical(_) => 2,
    }
}

/// The nonzero torsion families of an adapted linear connection.
///
/// Component `T(value)_{b c}` is antisymmetric in the argument pair
/// `(b, c)`. Stored arrays are indexed `[value][b-ish][c-ish]` with the
/// argument kinds fixed per field as documented.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsionSet {
    /// Time-valued, arguments (time, space `j`).
    pub tbar: Vec<Expr>,
    /// Space-valued `[r]`, arguments (time, space `j`).
    pub t_time: Vec<Vec<Expr>>,
    /// Space-valued `[r]`, arguments (space `i`, space `j`); antisymmetric.
    pub t_space: Vec<Vec<Vec<Expr>>>,
    /// Time-valued, arguments (time, vertical `j`).
    pub pbar: Vec<Expr>,
    /// Space-valued `[r]`, arguments (space `i`, vertical `j`).
    pub p_space: Vec<Vec<Vec<Expr>>>,
    /// Vertical-valued `[r]`, arguments (time, vertical `j`).
    pub p_vert_time: Vec<Vec<Expr>>,
    /// Vertical-valued `[r]`, arguments (space `i`, vertical `j`).
    pub p_vert_space: Vec<Vec<Vec<Expr>>>,
    /// Vertical-valued `[r]`, arguments (vertical `i`, vertical `j`); antisymmetric.
    pub s_vert: Vec<Vec<Vec<Expr>>>,
    /// Vertical-valued `[r]`, arguments (time, space `j`): the mixed
    /// curvature of the underlying nonlinear connection.
    pub r_time: Vec<Vec<Expr>>,
    /// Vertical-valued `[r]`, arguments (space `i`, space `j`): the spatial
    /// curvature of the underlying nonlinear connection; antisymmetric.
    pub r_space: Vec<Vec<Vec<Expr>>>,
}

/// Assembles every torsion family of the connection.
pub fn torsion(conn: &GammaConnection) -> TorsionSet {
    let n = conn.dim();
    let space = conn.space();
    let brackets = bracket_tensors(&conn.nlc);
    TorsionSet {
        tbar: conn.lbar.clone(),
        t_time: grid2(n, |r, j| conn.g[r][j].neg()),
        t_space: grid3(n, |r, i, j| &conn.l[r][i][j] - &conn.l[r][j][i]),
        pbar: conn.cbar.clone(),
        p_space: conn.c.clone(),
        p_vert_time: grid2(n, |r, j| {
            &conn.nlc.m[r].differentiate(space.fiber_coord(j).unwrap()) - &conn.gv[r][j]
        }),
        p_vert_space: grid3(n, |r, i, j| {
            &conn.nlc.n[r][i].differentiate(space.fiber_coord(j).unwrap()) - &conn.lv[r][j][i]
        }),
        s_vert: grid3(n, |r, i, j| &conn.cv[r][i][j] - &conn.cv[r][j][i]),
        r_time: brackets.r1j,
        r_space: brackets.rij,
    }
}

impl TorsionSet {
    fn dim(&self) -> usize {
        self.tbar.len()
    }

    /// Component `T(value)_{b c}` for arbitrary ordered arguments,
    /// including the structural zeros and the antisymmetry.
    pub fn component(&self, value: FrameDir, b: FrameDir, c: FrameDir) -> Expr {
        if dir_rank(b) > dir_rank(c) {
            return self.component(value, c, b).neg();
        }
        use FrameDir::{SpaceH, TimeH, Vertical};
        match (b, c, value) {
            (TimeH, SpaceH(k), TimeH) => self.tbar[k].clone(),
            (TimeH, SpaceH(k), SpaceH(r)) => self.t_time[r][k].clone(),
            (TimeH, SpaceH(k), Vertical(r)) => self.r_time[r][k].clone(),
            (SpaceH(j), SpaceH(k), SpaceH(r)) => self.t_space[r][j][k].clone(),
            (SpaceH(j), SpaceH(k), Vertical(r)) => self.r_space[r][j][k].clone(),
            (TimeH, Vertical(k), TimeH) => self.pbar[k].clone(),
            (TimeH, Vertical(k), Vertical(r)) => self.p_vert_time[r][k].clone(),
            (SpaceH(j), Vertical(k), SpaceH(r)) => self.p_space[r][j][k].clone(),
            (SpaceH(j), Vertical(k), Vertical(r)) => self.p_vert_space[r][j][k].clone(),
            (Vertical(j), Vertical(k), Vertical(r)) => self.s_vert[r][j][k].clone(),
            _ => Expr::zero(),
        }
    }

    /// True when every stored component simplifies to the literal zero.
    pub fn is_structurally_zero(&self) -> bool {
        self.iter_named()
            .all(|(_, _, e)| e.simplify().is_zero_literal())
    }

    /// Iterates `(family, label, component)` triples in a deterministic
    /// order. The family tag names the argument-kind pattern and keeps
    /// labels unambiguous: a first spatial index and the time index both
    /// print as `1`, so families must never be pooled into one namespace.
    pub fn iter_named(&self) -> impl Iterator<Item = (&'static str, String, &Expr)> {
        let n = self.dim();
        let mut out: Vec<(&'static str, String, &Expr)> = Vec::new();
        for j in 0..n {
            out.push(("tbar", format!("Tbar[1,{}]^[1]", j + 1), &self.tbar[j]));
        }
        for r in 0..n {
            for j in 0..n {
                out.push((
                    "t_time",
                    format!("T[1,{}]^[{}]", j + 1, r + 1),
                    &self.t_time[r][j],
                ));
            }
        }
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out.push((
                        "t_space",
                        format!("T[{},{}]^[{}]", i + 1, j + 1, r + 1),
                        &self.t_space[r][i][j],
                    ));
                }
            }
        }
        for j in 0..n {
            out.push((
                "pbar",
                format!("Pbar[1,({})]^[1,(1)]", j + 1),
                &self.pbar[j],
            ));
        }
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out.push((
                        "p_space",
                        format!("P[{},({})]^[{},(1)]", i + 1, j + 1, r + 1),
                        &self.p_space[r][i][j],
                    ));
                }
            }
        }
        for r in 0..n {
            for j in 0..n {
                out.push((
                    "p_vert_time",
                    format!("P[(1)][1,({})]^[({}),(1)]", j + 1, r + 1),
                    &self.p_vert_time[r][j],
                ));
            }
        }
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out.push((
                        "p_vert_space",
                        format!("P[(1)][{},({})]^[({}),(1)]", i + 1, j + 1, r + 1),
                        &self.p_vert_space[r][i][j],
                    ));
                }
            }
        }
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out.push((
                        "s_vert",
                        format!("S[(1)][({}),({})]^[({}),(1)]", i + 1, j + 1, r + 1),
                        &self.s_vert[r][i][j],
                    ));
                }
            }
        }
        for r in 0..n {
            for j in 0..n {
                out.push((
                    "r_time",
                    format!("R[(1)][1,{}]^[({})]", j + 1, r + 1),
                    &self.r_time[r][j],
                ));
            }
        }
        for r in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out.push((
                        "r_space",
                        format!("R[(1)][{},{}]^[({})]", i + 1, j + 1, r + 1),
                        &self.r_space[r][i][j],
                    ));
                }
            }
        }
        out.into_iter()
    }
}

/// The nonzero curvature families of an adapted linear connection,
/// indexed `[value l][acted i][b][c]` (time-kind positions dropped).
/// Every family is antisymmetric under swapping the argument pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSet {
    /// Time block, arguments (time, space `k`).
    pub rbar_time: Vec<Expr>,
    /// Time block, arguments (space `j`, space `k`).
    pub rbar_space: Vec<Vec<Expr>>,
    /// Time block, arguments (time, vertical `k`).
    pub pbar_time: Vec<Expr>,
    /// Time block, arguments (space `j`, vertical `k`).
    pub pbar_space: Vec<Vec<Expr>>,
    /// Time block, arguments (vertical `j`, vertical `k`).
    pub sbar: Vec<Vec<Expr>>,
    /// Space block `[l][i]`, arguments (time, space `k`).
    pub r_time: Vec<Vec<Vec<Expr>>>,
    /// Space block `[l][i]`, arguments (space `j`, space `k`).
    pub r_space: Vec<Vec<Vec<Vec<Expr>>>>,
    /// Space block `[l][i]`, arguments (time, vertical `k`).
    pub p_time: Vec<Vec<Vec<Expr>>>,
    /// Space block `[l][i]`, arguments (space `j`, vertical `k`).
    pub p_space: Vec<Vec<Vec<Vec<Expr>>>>,
    /// Space block `[l][i]`, arguments (vertical `j`, vertical `k`).
    pub s_space: Vec<Vec<Vec<Vec<Expr>>>>,
    /// Vertical block `[l][i]`, arguments (time, space `k`).
    pub rv_time: Vec<Vec<Vec<Expr>>>,
    /// Vertical block `[l][i]`, arguments (space `j`, space `k`).
    pub rv_space: Vec<Vec<Vec<Vec<Expr>>>>,
    /// Vertical block `[l][i]`, arguments (time, vertical `k`).
    pub pv_time: Vec<Vec<Vec<Expr>>>,
    /// Vertical block `[l][i]`, arguments (space `j`, vertical `k`).
    pub pv_space: Vec<Vec<Vec<Vec<Expr>>>>,
    /// Vertical block `[l][i]`, arguments (vertical `j`, vertical `k`).
    pub sv: Vec<Vec<Vec<Vec<Expr>>>>,
}

/// Assembles every curvature family of the connection.
///
/// The three mixed families against a vertical argument are built from
/// the covariant derivatives of the vertical-direction connection blocks,
/// which are themselves computed with the generic d-tensor machinery.
pub fn curvature(conn: &GammaConnection) -> CurvatureSet {
    let n = conn.dim();
    let space = conn.space().clone();
    let nlc = &conn.nlc;
    let brackets = bracket_tensors(nlc);
    let tor = torsion(conn);

    let dx = |e: &Expr, k: usize| apply_frame(nlc, FrameDir::SpaceH(k), e);
    let dt = |e: &Expr| apply_frame(nlc, FrameDir::TimeH, e);
    let dy = |e: &Expr, k: usize| apply_frame(nlc, FrameDir::Vertical(k), e);

    // The vertical-direction blocks as d-tensors, so that their covariant
    // derivatives pick up exactly the right slot corrections.
    let cbar_tensor = DTensor::from_fn(
        &space,
        vec![
            IndexSlot::up(SlotKind::TimeH),
            IndexSlot::down(SlotKind::TimeH),
            IndexSlot::down(SlotKind::Vertical),
        ],
        |idx| conn.cbar[idx[2]].clone(),
    );
    let c_tensor = DTensor::from_fn(
        &space,
        vec![
            IndexSlot::up(SlotKind::SpaceH),
            IndexSlot::down(SlotKind::SpaceH),
            IndexSlot::down(SlotKind::Vertical),
        ],
        |idx| conn.c[idx[0]][idx[1]][idx[2]].clone(),
    );
    let cv_tensor = DTensor::from_fn(
        &space,
        vec![
            IndexSlot::up(SlotKind::Vertical),
            IndexSlot::down(SlotKind::Vertical),
            IndexSlot::down(SlotKind::Vertical),
        ],
        |idx| conn.cv[idx[0]][idx[1]][idx[2]].clone(),
    );

    let cbar_time = cov_deriv(&cbar_tensor, conn, FrameDir::TimeH);
    let c_time = cov_deriv(&c_tensor, conn, FrameDir::TimeH);
    let cv_time = cov_deriv(&cv_tensor, conn, FrameDir::TimeH);
    let cbar_sp: Vec<DTensor> = (0..n)
        .map(|j| cov_deriv(&cbar_tensor, conn, FrameDir::SpaceH(j)))
        .collect();
    let c_sp: Vec<DTensor> = (0..n)
        .map(|j| cov_deriv(&c_tensor, conn, FrameDir::SpaceH(j)))
        .collect();
    let cv_sp: Vec<DTensor> = (0..n)
        .map(|j| cov_deriv(&cv_tensor, conn, FrameDir::SpaceH(j)))
        .collect();

    CurvatureSet {
        rbar_time: grid1(n, |k| {
            Expr::sum(
                [dx(&conn.gbar, k), dt(&conn.lbar[k]).neg()]
                    .into_iter()
                    .chain(
                        (0..n).map(|r| {
                            Expr::product([conn.cbar[r].clone(), tor.r_time[r][k].clone()])
                        }),
                    ),
            )
        }),
        rbar_space: grid2(n, |j, k| {
            Expr::sum(
                [dx(&conn.lbar[j], k), dx(&conn.lbar[k], j).neg()]
                    .into_iter()
                    .chain((0..n).map(|r| {
                        Expr::product([conn.cbar[r].clone(), tor.r_space[r][j][k].clone()])
                    })),
            )
        }),
        pbar_time: grid1(n, |k| {
            Expr::sum(
                [dy(&conn.gbar, k), cbar_time.get(&[0, 0, k]).unwrap().neg()]
                    .into_iter()
                    .chain((0..n).map(|r| {
                        Expr::product([conn.cbar[r].clone(), tor.p_vert_time[r][k].clone()])
                    })),
            )
        }),
        pbar_space: grid2(n, |j, k| {
            Expr::sum(
                [
                    dy(&conn.lbar[j], k),
                    cbar_sp[j].get(&[0, 0, k]).unwrap().neg(),
                ]
                .into_iter()
                .chain((0..n).map(|r| {
                    Expr::product([conn.cbar[r].clone(), tor.p_vert_space[r][j][k].clone()])
                })),
            )
        }),
        sbar: grid2(n, |j, k| &dy(&conn.cbar[j], k) - &dy(&conn.cbar[k], j)),
        r_time: grid3(n, |l, i, k| {
            Expr::sum(
                [dx(&conn.g[l][i], k), dt(&conn.l[l][i][k]).neg()]
                    .into_iter()
                    .chain((0..n).flat_map(|r| {
                        [
                            Expr::product([conn.g[r][i].clone(), conn.l[l][r][k].clone()]),
                            Expr::product([conn.l[r][i][k].clone(), conn.g[l][r].clone()]).neg(),
                            Expr::product([conn.c[l][i][r].clone(), brackets.r1j[r][k].clone()]),
                        ]
                    })),
            )
        }),
        r_space: grid4(n, |l, i, j, k| {
            Expr::sum(
                [dx(&conn.l[l][i][j], k), dx(&conn.l[l][i][k], j).neg()]
                    .into_iter()
                    .chain((0..n).flat_map(|r| {
                        [
                            Expr::product([conn.l[r][i][j].clone(), conn.l[l][r][k].clone()]),
                            Expr::product([conn.l[r][i][k].clone(), conn.l[l][r][j].clone()]).neg(),
                            Expr::product([conn.c[l][i][r].clone(), brackets.rij[r][j][k].clone()]),
                        ]
                    })),
            )
        }),
        p_time: grid3(n, |l, i, k| {
            Expr::sum(
                [dy(&conn.g[l][i], k), c_time.get(&[l, i, k]).unwrap().neg()]
                    .into_iter()
                    .chain((0..n).map(|r| {
                        Expr::product([conn.c[l][i][r].clone(), tor.p_vert_time[r][k].clone()])
                    })),
            )
        }),
        p_space: grid4(n, |l, i, j, k| {
            Expr::sum(
                [
                    dy(&conn.l[l][i][j], k),
                    c_sp[j].get(&[l, i, k]).unwrap().neg(),
                ]
                .into_iter()
                .chain((0..n).map(|r| {
                    Expr::product([conn.c[l][i][r].clone(), tor.p_vert_space[r][j][k].clone()])
                })),
            )
        }),
        s_space: grid4(n, |l, i, j, k| {
            Expr::sum(
                [dy(&conn.c[l][i][j], k), dy(&conn.c[l][i][k], j).neg()]
                    .into_iter()
                    .chain((0..n).flat_map(|r| {
                        [
                            Expr::product([conn.c[r][i][j].clone(), conn.c[l][r][k].clone()]),
                            Expr::product([conn.c[r][i][k].clone(), conn.c[l][r][j].clone()]).neg(),
                        ]
                    })),
            )
        }),
        rv_time: grid3(n, |l, i, k| {
            Expr::sum(
                [dx(&conn.gv[l][i], k), dt(&conn.lv[l][i][k]).neg()]
                    .into_iter()
                    .chain((0..n).flat_map(|r| {
                        [
                            Expr::product([conn.gv[r][i].clone(), conn.lv[l][r][k].clone()]),
                            Expr::product([conn.lv[r][i][k].clone(), conn.gv[l][r].clone()]).neg(),
                            Expr::product([conn.cv[l][i][r].clone(), brackets.r1j[r][k].clone()]),
                        ]
                    })),
            )
        }),
        rv_space: grid4(n, |l, i, j, k| {
            Expr::sum(
                [dx(&conn.lv[l][i][j], k), dx(&conn.lv[l][i][k], j).neg()]
                    .into_iter()
                    .chain((0..n).flat_map(|r| {
                        [
                            Expr::product([conn.lv[r][i][j].clone(), conn.lv[l][r][k].clone()]),
                            Expr::product([conn.lv[r][i][k].clone(), conn.lv[l][r][j].clone()])
                                .neg(),
                            Expr::product([
                                conn.cv[l][i][r].clone(),
                                brackets.rij[r][j][k].clone(),
                            ]),
                        ]
                    })),
            )
        }),
        pv_time: grid3(n, |l, i, k| {
            Expr::sum(
                [
                    dy(&conn.gv[l][i], k),
                    cv_time.get(&[l, i, k]).unwrap().neg(),
                ]
                .into_iter()
                .chain((0..n).map(|r| {
                    Expr::product([conn.cv[l][i][r].clone(), tor.p_vert_time[r][k].clone()])
                })),
            )
        }),
        pv_space: grid4(n, |l, i, j, k| {
            Expr::sum(
                [
                    dy(&conn.lv[l][i][j], k),
                    cv_sp[j].get(&[l, i, k]).unwrap().neg(),
                ]
                .into_iter()
                .chain((0..n).map(|r| {
                    Expr::product([conn.cv[l][i][r].clone(), tor.p_vert_space[r][j][k].clone()])
                })),
            )
        }),
        sv: grid4(n, |l, i, j, k| {
            Expr::sum(
                [dy(&conn.cv[l][i][j], k), dy(&conn.cv[l][i][k], j).neg()]
                    .into_iter()
                    .chain((0..n).flat_map(|r| {
                        [
                            Expr::product([conn.cv[r][i][j].clone(), conn.cv[l][r][k].clone()]),
                            Expr::product([conn.cv[r][i][k].clone(), conn.cv[l][r][j].clone()])
                                .neg(),
                        ]
                    })),
            )
        }),
    }
}

impl CurvatureSet {
    fn dim(&self) -> usize {
        self.rbar_time.len()
    }

    /// Component `R(value)_{acted, b, c}`. Zero when the value and acted
    /// kinds differ (the connection preserves the three distributions);
    /// antisymmetric in the argument pair `(b, c)`.
    pub fn component(&self, value: FrameDir, acted: FrameDir, b: FrameDir, c: FrameDir) -> Expr {
        if value.kind() != acted.kind() {
            return Expr::zero();
        }
        if dir_rank(b) > dir_rank(c) {
            return self.component(value, acted, c, b).neg();
        }
        use FrameDir::{SpaceH, TimeH, Vertical};
        let (l, i) = (value.index(), acted.index());
        match (value.kind(), b, c) {
            (_, TimeH, TimeH) => Expr::zero(),
            (crate::frames::FrameKind::TimeH, TimeH, SpaceH(k)) => self.rbar_time[k].clone(),
            (crate::frames::FrameKind::TimeH, SpaceH(j), SpaceH(k)) => {
                self.rbar_space[j][k].clone()
            }
            (crate::frames::FrameKind::TimeH, TimeH, Vertical(k)) => self.pbar_time[k].clone(),
            (crate::frames::FrameKind::TimeH, SpaceH(j), Vertical(k)) => {
                self.pbar_space[j][k].clone()
            }
            (crate::frames::FrameKind::TimeH, Vertical(j), Vertical(k)) => self.sbar[j][k].clone(),
            (crate::frames::FrameKind::SpaceH, TimeH, SpaceH(k)) => self.r_time[l][i][k].clone(),
            (crate::frames::FrameKind::SpaceH, SpaceH(j), SpaceH(k)) => {
                self.r_space[l][i][j][k].clone()
            }
            (crate::frames::FrameKind::SpaceH, TimeH, Vertical(k)) => self.p_time[l][i][k].clone(),
            (crate::frames::FrameKind::SpaceH, SpaceH(j), Vertical(k)) => {
                self.p_space[l][i][j][k].clone()
            }
            (crate::frames::FrameKind::SpaceH, Vertical(j), Vertical(k)) => {
                self.s_space[l][i][j][k].clone()
            }
            (crate::frames::FrameKind::Vertical, TimeH, SpaceH(k)) => self.rv_time[l][i][k].clone(),
            (crate::frames::FrameKind::Vertical, SpaceH(j), SpaceH(k)) => {
                self.rv_space[l][i][j][k].clone()
            }
            (crate::frames::FrameKind::Vertical, TimeH, Vertical(k)) => {
                self.pv_time[l][i][k].clone()
            }
            (crate::frames::FrameKind::Vertical, SpaceH(j), Vertical(k)) => {
                self.pv_space[l][i][j][k].clone()
            }
            (crate::frames::FrameKind::Vertical, Vertical(j), Vertical(k)) => {
                self.sv[l][i][j][k].clone()
            }
            // The argument pair was canonicalized by kind above.
            _ => unreachable!("non-canonical argument pair"),
        }
    }

    /// Iterates `(family, label, component)` triples in a deterministic
    /// order. As with torsion, the family tag disambiguates labels whose
    /// first spatial index prints like the time index.
    pub fn iter_named(&self) -> impl Iterator<Item = (&'static str, String, &Expr)> {
        let n = self.dim();
        let mut out: Vec<(&'static str, String, &Expr)> = Vec::new();
        for k in 0..n {
            out.push((
                "rbar_time",
                format!("Rbar[1,1,{}]^[1]", k + 1),
                &self.rbar_time[k],
            ));
        }
        for j in 0..n {
            for k in 0..n {
                out.push((
                    "rbar_space",
                    format!("Rbar[1,{},{}]^[1]", j + 1, k + 1),
                    &self.rbar_space[j][k],
                ));
            }
        }
        for k in 0..n {
            out.push((
                "pbar_time",
                format!("Pbar[1,1,({})]^[1,(1)]", k + 1),
                &self.pbar_time[k],
            ));
        }
        for j in 0..n {
            for k in 0..n {
                out.push((
                    "pbar_space",
                    format!("Pbar[1,{},({})]^[1,(1)]", j + 1, k + 1),
                    &self.pbar_space[j][k],
                ));
            }
        }
        for j in 0..n {
            for k in 0..n {
                out.push((
                    "sbar",
                    format!("Sbar[1,({}),({})]^[1,(1),(1)]", j + 1, k + 1),
                    &self.sbar[j][k],
                ));
            }
        }
        out.extend(named3("r_time", &self.r_time, n, |l, i, k| {
            format!("R[{},1,{}]^[{}]", i + 1, k + 1, l + 1)
        }));
        out.extend(named4("r_space", &self.r_space, n, |l, i, j, k| {
            format!("R[{},{},{}]^[{}]", i + 1, j + 1, k + 1, l + 1)
        }));
        out.extend(named3("p_time", &self.p_time, n, |l, i, k| {
            format!("P[{},1,({})]^[{},(1)]", i + 1, k + 1, l + 1)
        }));
        out.extend(named4("p_space", &self.p_space, n, |l, i, j, k| {
            format!("P[{},{},({})]^[{},(1)]", i + 1, j + 1, k + 1, l + 1)
        }));
        out.extend(named4("s_space", &self.s_space, n, |l, i, j, k| {
            format!("S[{},({}),({})]^[{},(1),(1)]", i + 1, j + 1, k + 1, l + 1)
        }));
        out.extend(named3("rv_time", &self.rv_time, n, |l, i, k| {
            format!("R[(1)][({}),1,{}]^[({}),(1)]", i + 1, k + 1, l + 1)
        }));
        out.extend(named4("rv_space", &self.rv_space, n, |l, i, j, k| {
            format!("R[(1)][({}),{},{}]^[({}),(1)]", i + 1, j + 1, k + 1, l + 1)
        }));
        out.extend(named3("pv_time", &self.pv_time, n, |l, i, k| {
            format!("P[(1)][({}),1,({})]^[({}),(1),(1)]", i + 1, k + 1, l + 1)
        }));
        out.extend(named4("pv_space", &self.pv_space, n, |l, i, j, k| {
            format!(
                "P[(1)][({}),{},({})]^[({}),(1),(1)]",
                i + 1,
                j + 1,
                k + 1,
                l + 1
            )
        }));
        out.extend(named4("sv", &self.sv, n, |l, i, j, k| {
            format!(
                "S[(1)][({}),({}),({})]^[({}),(1),(1)]",
                i + 1,
                j + 1,
                k + 1,
                l + 1
            )
        }));
        out.into_iter()
    }
}

fn named3<'a>(
    family: &'static str,
    arr: &'a [Vec<Vec<Expr>>],
    n: usize,
    name: impl Fn(usize, usize, usize) -> String,
) -> Vec<(&'static str, String, &'a Expr)> {
    let mut out = Vec::new();
    for l in 0..n {
        for i in 0..n {
            for k in 0..n {
                out.push((family, name(l, i, k), &arr[l][i][k]));
            }
        }
    }
    out
}

fn named4<'a>(
    family: &'static str,
    arr: &'a [Vec<Vec<Vec<Expr>>>],
    n: usize,
    name: impl Fn(usize, usize, usize, usize) -> String,
) -> Vec<(&'static str, String, &'a Expr)> {
    let mut out = Vec::new();
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out.push((family, name(l, i, j, k), &arr[l][i][j][k]));
                }
            }
        }
    }
    out
}
