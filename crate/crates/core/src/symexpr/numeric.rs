//! Numeric evaluation and probabilistic zero testing.

use super::{Expr, ExprError, Func, Node};
use num_traits::ToPrimitive;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// An assignment of floating-point values to variable names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Point(BTreeMap<String, f64>);

impl Point {
    pub fn new() -> Point {
        Point(BTreeMap::new())
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Point {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Point {
        Point(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

impl Expr {
    /// Evaluates at `point`. Every free variable must be assigned.
    pub fn evaluate(&self, point: &Point) -> Result<f64, ExprError> {
        Ok(self.evaluate_with_scale(point)?.0)
    }

    /// Evaluates at `point`, also returning the largest absolute value
    /// seen at any subexpression. The scale feeds the relative tolerance
    /// of [`ZeroTester`].
    pub fn evaluate_with_scale(&self, point: &Point) -> Result<(f64, f64), ExprError> {
        let mut scale = 0.0_f64;
        let value = self.eval_rec(point, &mut scale)?;
        Ok((value, scale))
    }

    fn eval_rec(&self, point: &Point, scale: &mut f64) -> Result<f64, ExprError> {
        let value = match self.node() {
            Node::Num(q) => q.to_f64().unwrap_or(f64::INFINITY),
            Node::Var(name) => point
                .get(name)
                .ok_or_else(|| ExprError::UnboundVariable { name: name.clone() })?,
            Node::Add(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval_rec(point, scale)?;
                }
                acc
            }
            Node::Mul(factors) => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval_rec(point, scale)?;
                }
                acc
            }
            Node::Pow(base, k) => {
                let b = base.eval_rec(point, scale)?;
                if *k < 0 && b == 0.0 {
                    return Err(self.singularity());
                }
                b.powi((*k).clamp(i32::MIN as i64, i32::MAX as i64) as i32)
            }
            Node::Func(func, arg) => {
                let u = arg.eval_rec(point, scale)?;
                match func {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Tan => u.tan(),
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(self.singularity());
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(self.singularity());
                        }
                        u.sqrt()
                    }
                    Func::Sinh => u.sinh(),
                    Func::Cosh => u.cosh(),
                }
            }
        };
        if !value.is_finite() {
            return Err(self.singularity());
        }
        *scale = scale.max(value.abs());
        Ok(value)
    }

    fn singularity(&self) -> ExprError {
        let mut context = self.to_string();
        if context.len() > 48 {
            context.truncate(45);
            context.push_str("...");
        }
        ExprError::EvaluationSingularity { context }
    }
}

/// Central finite difference `(f(v+h) - f(v-h)) / 2h` of `expr` in `var`
/// at `at`. Second-order accurate; the standard numeric cross-check for
/// symbolic derivatives.
pub fn central_difference(expr: &Expr, var: &str, at: &Point, step: f64) -> Result<f64, ExprError> {
    let base = at.get(var).ok_or_else(|| ExprError::UnboundVariable {
        name: var.to_string(),
    })?;
    let mut hi = at.clone();
    hi.set(var, base + step);
    let mut lo = at.clone();
    lo.set(var, base - step);
    Ok((expr.evaluate(&hi)? - expr.evaluate(&lo)?) / (2.0 * step))
}

/// Per-variable sampling ranges for randomized checks.
///
/// Base coordinates (time, space, parameters) default to a box bounded
/// away from the poles of the supported function set; fiber coordinates
/// straddle zero.
#[derive(Debug, Clone, Default)]
pub struct SampleDomain {
    ranges: BTreeMap<String, (f64, f64)>,
}

impl SampleDomain {
    /// Range for time, space, and parameter variables.
    pub const BASE_RANGE: (f64, f64) = (0.3, 1.2);
    /// Range for fiber (velocity) variables.
    pub const FIBER_RANGE: (f64, f64) = (-1.0, 1.0);

    pub fn new() -> SampleDomain {
        SampleDomain::default()
    }

    pub fn with(mut self, name: impl Into<String>, lo: f64, hi: f64) -> SampleDomain {
        self.insert(name, lo, hi);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, lo: f64, hi: f64) {
        assert!(lo <= hi, "empty sampling range");
        self.ranges.insert(name.into(), (lo, hi));
    }

    pub fn base(mut self, name: impl Into<String>) -> SampleDomain {
        let (lo, hi) = Self::BASE_RANGE;
        self.insert(name, lo, hi);
        self
    }

    pub fn fiber(mut self, name: impl Into<String>) -> SampleDomain {
        let (lo, hi) = Self::FIBER_RANGE;
        self.insert(name, lo, hi);
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.ranges.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ranges.keys().map(|k| k.as_str())
    }

    /// Draws one point covering every variable in the domain. Variables
    /// are consumed in sorted name order, so a seeded generator yields a
    /// reproducible stream.
    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        self.ranges
            .iter()
            .map(|(name, &(lo, hi))| (name.clone(), rng.gen_range(lo..=hi)))
            .collect()
    }
}

/// Which path settled a zero check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroPath {
    /// Canonicalization reached the literal zero; no sampling ran.
    Symbolic,
    /// Settled by seeded numeric sampling.
    Sampled,
}

impl std::fmt::Display for ZeroPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ZeroPath::Symbolic => "symbolic",
            ZeroPath::Sampled => "sampled",
        })
    }
}

/// Outcome of a zero check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCheck {
    pub zero: bool,
    pub path: ZeroPath,
    /// Largest relative residual |value| / (1 + scale) seen; 0 when the
    /// symbolic path decided.
    pub max_residual: f64,
    pub samples: usize,
}

/// Probabilistic zero test: accept the literal zero after simplification,
/// otherwise sample seeded points and compare against a scale-relative
/// tolerance. Deterministic for a fixed seed.
#[derive(Debug, Clone)]
pub struct ZeroTester {
    domain: SampleDomain,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
}

impl ZeroTester {
    pub const DEFAULT_TRIALS: usize = 32;
    pub const DEFAULT_TOL: f64 = 1e-9;
    /// Redraw budget per sample point when evaluation hits a pole.
    pub const RESAMPLE_ATTEMPTS: usize = 8;

    pub fn new(domain: SampleDomain) -> ZeroTester {
        ZeroTester {
            domain,
            trials: Self::DEFAULT_TRIALS,
            seed: 0,
            tol: Self::DEFAULT_TOL,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> ZeroTester {
        self.trials = trials.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> ZeroTester {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> ZeroTester {
        self.tol = tol;
        self
    }

    pub fn domain(&self) -> &SampleDomain {
        &self.domain
    }

    pub fn is_zero(&self, expr: &Expr) -> Result<bool, ExprError> {
        Ok(self.check(expr)?.zero)
    }

    pub fn check(&self, expr: &Expr) -> Result<ZeroCheck, ExprError> {
        let simplified = expr.simplify();
        if simplified.is_zero_literal() {
            return Ok(ZeroCheck {
                zero: true,
                path: ZeroPath::Symbolic,
                max_residual: 0.0,
                samples: 0,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut zero = true;
        let mut max_residual = 0.0_f64;
        for _ in 0..self.trials {
            let (value, scale) = self.evaluate_resampling(&simplified, &mut rng)?;
            let residual = value.abs() / (1.0 + scale);
            max_residual = max_residual.max(residual);
            if residual > self.tol {
                zero = false;
            }
        }
        Ok(ZeroCheck {
            zero,
            path: ZeroPath::Sampled,
            max_residual,
            samples: self.trials,
        })
    }

    /// Evaluates at a fresh point, redrawing on singularities up to the
    /// resample budget.
    pub fn evaluate_resampling(
        &self,
        expr: &Expr,
        rng: &mut impl Rng,
    ) -> Result<(f64, f64), ExprError> {
        for _ in 0..Self::RESAMPLE_ATTEMPTS {
            let point = self.domain.sample(rng);
            match expr.evaluate_with_scale(&point) {
                Ok(pair) => return Ok(pair),
                Err(ExprError::EvaluationSingularity { .. }) => continue,
                Err(other) => return Err(other),
            }
        }
        Err(ExprError::SampleExhausted {
            attempts: Self::RESAMPLE_ATTEMPTS,
        })
    }

    /// Largest relative residual of `expr` over the seeded sample set,
    /// regardless of verdict.
    pub fn max_residual(&self, expr: &Expr) -> Result<f64, ExprError> {
        Ok(self.check(expr)?.max_residual)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;
    use std::collections::BTreeSet;

    fn vars() -> BTreeSet<String> {
        ["t", "x1", "x2", "y1_1", "y1_2"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn domain() -> SampleDomain {
        SampleDomain::new()
            .base("t")
            .base("x1")
            .base("x2")
            .fiber("y1_1")
            .fiber("y1_2")
    }

    #[test]
    fn evaluation_matches_f64_arithmetic() {
        let e = parse("sin(x1)^2 + t/2", &vars()).unwrap();
        let mut p = Point::new();
        p.set("x1", 0.7).set("t", 1.0);
        let got = e.evaluate(&p).unwrap();
        let want = 0.7_f64.sin().powi(2) + 0.5;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn scale_tracks_largest_subterm() {
        let e = parse("exp(t) - exp(t) + x1", &vars()).unwrap();
        // Canonicalization cancels exp(t) exactly, so build it numerically:
        assert_eq!(e, parse("x1", &vars()).unwrap());
        let f = parse("1000*t - 1000*t + x1", &vars()).unwrap();
        assert_eq!(f, parse("x1", &vars()).unwrap());
        let g = parse("1000*t*y1_1 + x1", &vars()).unwrap();
        let mut p = Point::new();
        p.set("t", 1.0).set("x1", 0.5).set("y1_1", 1.0);
        let (v, scale) = g.evaluate_with_scale(&p).unwrap();
        assert!((v - 1000.5).abs() < 1e-12);
        assert!(scale >= 1000.0);
    }

    #[test]
    fn singularities_are_reported() {
        let e = parse("log(x1 - 1)", &vars()).unwrap();
        let mut p = Point::new();
        p.set("x1", 0.5);
        assert!(matches!(
            e.evaluate(&p),
            Err(ExprError::EvaluationSingularity { .. })
        ));
        let f = parse("1/y1_1", &vars()).unwrap();
        let mut q = Point::new();
        q.set("y1_1", 0.0);
        assert!(matches!(
            f.evaluate(&q),
            Err(ExprError::EvaluationSingularity { .. })
        ));
    }

    #[test]
    fn unbound_variables_are_reported() {
        let e = parse("x1 + t", &vars()).unwrap();
        let mut p = Point::new();
        p.set("x1", 1.0);
        assert!(matches!(
            e.evaluate(&p),
            Err(ExprError::UnboundVariable { name }) if name == "t"
        ));
    }

    #[test]
    fn zero_tester_symbolic_path() {
        let e = parse("(x1+1)^2 - x1^2 - 2*x1 - 1", &vars()).unwrap();
        let check = ZeroTester::new(domain()).check(&e).unwrap();
        assert!(check.zero);
        assert_eq!(check.path, ZeroPath::Symbolic);
        assert_eq!(check.max_residual, 0.0);
    }

    #[test]
    fn zero_tester_sampled_path() {
        // Pythagorean identity: not a polynomial identity over the atoms,
        // so only sampling can accept it.
        let e = parse("sin(x1)^2 + cos(x1)^2 - 1", &vars()).unwrap();
        let check = ZeroTester::new(domain()).check(&e).unwrap();
        assert!(check.zero);
        assert_eq!(check.path, ZeroPath::Sampled);
        assert_eq!(check.samples, ZeroTester::DEFAULT_TRIALS);

        let nonzero = parse("sin(x1)^2 - cos(x1)^2", &vars()).unwrap();
        let check = ZeroTester::new(domain()).check(&nonzero).unwrap();
        assert!(!check.zero);
        assert!(check.max_residual > 1e-3);
    }

    #[test]
    fn zero_tester_is_deterministic() {
        let e = parse("sin(2*x1) - 2*sin(x1)*cos(x1)", &vars()).unwrap();
        let a = ZeroTester::new(domain()).with_seed(7).check(&e).unwrap();
        let b = ZeroTester::new(domain()).with_seed(7).check(&e).unwrap();
        assert_eq!(a, b);
        assert!(a.zero);
    }

    #[test]
    fn zero_tester_resamples_singular_points() {
        // log(y1_1) is singular on half the fiber range; resampling must
        // still find usable points.
        let e = parse("log(y1_1^2)*0 + (y1_1 - y1_1)", &vars()).unwrap();
        assert!(e.is_zero_literal());
        let f = parse("log(1/4 + y1_1) - log(1/4 + y1_1)", &vars()).unwrap();
        assert!(f.is_zero_literal());
        // A genuinely sampled case with occasional poles:
        let g = parse("log(y1_1 + 1)*(x1 - x1 + 1) - log(y1_1 + 1)", &vars()).unwrap();
        let check = ZeroTester::new(domain()).check(&g).unwrap();
        assert!(check.zero);
    }

    #[test]
    fn sample_exhaustion_is_detected() {
        // log(-1 - y1_1^2) is singular everywhere on the real box.
        let e = parse("log(-1 - y1_1^2)", &vars()).unwrap();
        let err = ZeroTester::new(domain()).check(&e);
        assert!(matches!(err, Err(ExprError::SampleExhausted { .. })));
    }
}
