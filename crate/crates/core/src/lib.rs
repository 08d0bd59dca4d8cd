//! Symbolic differential geometry on the 1-jet space J^1(R, M) of curves.
//!
//! The jet space carries coordinates (t, x^i, y^i) where t is the curve
//! parameter, x^i are coordinates on an n-dimensional manifold M, and y^i
//! are the fiber (velocity) coordinates. Everything here is built from a
//! small exact symbolic core:
//!
//! * [`symexpr`] — expression trees with exact rational constants,
//!   differentiation, evaluation, and seeded probabilistic zero testing;
//! * [`geometry`] — jet spaces, metric pairs, Christoffel symbols,
//!   nonlinear connections, and linear connections adapted to them;
//! * [`frames`] — the adapted frame operators and their commutators;
//! * [`dtensor`] — distinguished tensors and the three covariant
//!   derivative operators;
//! * [`curvtor`] — torsion and curvature component tables;
//! * [`identities`] — Ricci/commutation identities, deflection tensors,
//!   and the electromagnetic 2-form;
//! * [`transform`] — jet coordinate changes and covariance checking;
//! * [`config`] / [`report`] — the line-oriented scene format and
//!   deterministic report rendering used by the `jetgeo` binary;
//! * [`driver`] — one-call scene-to-report drivers shared by the binary
//!   and the C bindings.

// Components are manipulated in index notation throughout; `for i in 0..n`
// loops keep the code aligned with the formulas they implement, where the
// iterator rewrites this lint suggests would obscure which index runs.
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod curvtor;
pub mod driver;
pub mod dtensor;
pub mod frames;
pub mod geometry;
pub mod identities;
pub mod report;
pub mod symexpr;
pub mod transform;

pub use symexpr::{Expr, ExprError, Point, SampleDomain, ZeroTester};
