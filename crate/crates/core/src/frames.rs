//! Adapted frame fields and their commutators.
//!
//! A nonlinear connection tilts the coordinate frame into the adapted
//! frame `{ delta/delta t, delta/delta x^i, d/dy^i }`:
//!
//! ```text
//! delta f / delta t   = df/dt   - M[k]    df/dy_k
//! delta f / delta x_i = df/dx_i - N[k][i] df/dy_k
//! ```
//!
//! The adapted frame is not holonomic; every commutator of two frame
//! fields lies in the vertical distribution, with coefficients given by
//! [`bracket_tensors`] and the fiber derivatives of `M` and `N`.

use crate::geometry::NonlinearConnection;
use crate::symexpr::Expr;

/// A direction in the adapted frame. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameDir {
    /// `delta/delta t`
    TimeH,
    /// `delta/delta x_i`
    SpaceH(usize),
    /// `d/dy_i`
    Vertical(usize),
}

/// The three kinds of frame direction, without an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FrameKind {
    TimeH,
    SpaceH,
    Vertical,
}

impl FrameKind {
    /// Number of directions of this kind over an n-dimensional base.
    pub fn extent(self, n: usize) -> usize {
        match self {
            FrameKind::TimeH => 1,
            FrameKind::SpaceH | FrameKind::Vertical => n,
        }
    }

    pub fn direction(self, index: usize) -> FrameDir {
        match self {
            FrameKind::TimeH => FrameDir::TimeH,
            FrameKind::SpaceH => FrameDir::SpaceH(index),
            FrameKind::Vertical => FrameDir::Vertical(index),
        }
    }
}

impl FrameDir {
    pub fn kind(self) -> FrameKind {
        match self {
            FrameDir::TimeH => FrameKind::TimeH,
            FrameDir::SpaceH(_) => FrameKind::SpaceH,
            FrameDir::Vertical(_) => FrameKind::Vertical,
        }
    }

    pub fn index(self) -> usize {
        match self {
            FrameDir::TimeH => 0,
            FrameDir::SpaceH(i) | FrameDir::Vertical(i) => i,
        }
    }
}

/// Every adapted frame direction over an n-dimensional base, in the
/// canonical order: time, space 0..n, vertical 0..n.
pub fn all_directions(n: usize) -> Vec<FrameDir> {
    let mut dirs = vec![FrameDir::TimeH];
    dirs.extend((0..n).map(FrameDir::SpaceH));
    dirs.extend((0..n).map(FrameDir::Vertical));
    dirs
}

/// An adapted frame derivation bound to its nonlinear connection.
#[derive(Debug, Clone, Copy)]
pub struct FrameOp<'a> {
    pub nlc: &'a NonlinearConnection,
    pub dir: FrameDir,
}

impl<'a> FrameOp<'a> {
    pub fn new(nlc: &'a NonlinearConnection, dir: FrameDir) -> FrameOp<'a> {
        FrameOp { nlc, dir }
    }

    pub fn apply(&self, f: &Expr) -> Expr {
        apply_frame(self.nlc, self.dir, f)
    }
}

/// Applies the adapted frame derivative in direction `dir` to a scalar.
pub fn apply_frame(nlc: &NonlinearConnection, dir: FrameDir, f: &Expr) -> Expr {
    let space = &nlc.space;
    let n = space.dim();
    match dir {
        FrameDir::TimeH => {
            let mut terms = vec![f.differentiate(space.time_coord())];
            for k in 0..n {
                terms.push(
                    Expr::product([
                        nlc.m[k].clone(),
                        f.differentiate(space.fiber_coords()[k].as_str()),
                    ])
                    .neg(),
                );
            }
            Expr::sum(terms)
        }
        FrameDir::SpaceH(i) => {
            let mut terms = vec![f.differentiate(space.space_coords()[i].as_str())];
            for k in 0..n {
                terms.push(
                    Expr::product([
                        nlc.n[k][i].clone(),
                        f.differentiate(space.fiber_coords()[k].as_str()),
                    ])
                    .neg(),
                );
            }
            Expr::sum(terms)
        }
        FrameDir::Vertical(i) => f.differentiate(space.fiber_coords()[i].as_str()),
    }
}

/// Vertical curvature coefficients of the nonlinear connection: the
/// commutators of the horizontal frame fields are purely vertical,
///
/// ```text
/// [delta/delta t,   delta/delta x_j] = r1j[r][j]    d/dy_r
/// [delta/delta x_i, delta/delta x_j] = rij[r][i][j] d/dy_r
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct BracketTensors {
    /// `r1j[r][j] = delta M[r] / delta x_j - delta N[r][j] / delta t`
    pub r1j: Vec<Vec<Expr>>,
    /// `rij[r][i][j] = delta N[r][i] / delta x_j - delta N[r][j] / delta x_i`
    pub rij: Vec<Vec<Vec<Expr>>>,
}

/// Computes the vertical commutator coefficients of the horizontal frame.
pub fn bracket_tensors(nlc: &NonlinearConnection) -> BracketTensors {
    let n = nlc.dim();
    let mut r1j = vec![vec![Expr::zero(); n]; n];
    for r in 0..n {
        for j in 0..n {
            r1j[r][j] = &apply_frame(nlc, FrameDir::SpaceH(j), &nlc.m[r])
                - &apply_frame(nlc, FrameDir::TimeH, &nlc.n[r][j]);
        }
    }
    let mut rij = vec![vec![vec![Expr::zero(); n]; n]; n];
    for r in 0..n {
        for i in 0..n {
            for j in (i + 1)..n {
                let value = &apply_frame(nlc, FrameDir::SpaceH(j), &nlc.n[r][i])
                    - &apply_frame(nlc, FrameDir::SpaceH(i), &nlc.n[r][j]);
                rij[r][i][j] = value.clone();
                rij[r][j][i] = value.neg();
            }
        }
    }
    BracketTensors { r1j, rij }
}
