//! Exact symbolic expressions.
//!
//! An [`Expr`] is an immutable, reference-counted tree over rational
//! constants, named variables, sums, products, integer powers, and a fixed
//! set of elementary functions. Construction always canonicalizes:
//!
//! * sums and products are flattened and sorted by a fixed total order;
//! * numeric constants are folded exactly (arbitrary-precision rationals);
//! * `0` and `1` identity elements are absorbed;
//! * products and non-negative powers of sums are expanded, and like terms
//!   are collected, so every polynomial identity over the atoms reduces to
//!   the literal zero;
//! * negation is a `-1` coefficient, division is a `-1` power.
//!
//! Sums of quotients are deliberately not put over a common denominator
//! and no trigonometric rewriting happens; identities that hinge on such
//! facts are settled numerically by [`ZeroTester`].

mod numeric;
mod parse;

pub use numeric::{central_difference, Point, SampleDomain, ZeroCheck, ZeroPath, ZeroTester};
pub use parse::parse;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Exact rational scalar used for all constant arithmetic.
pub type Rational = BigRational;

/// Errors raised by expression parsing, evaluation, and zero testing.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    /// The source text does not match the expression grammar.
    #[error("malformed expression at byte {at}: {reason}")]
    MalformedExpression { at: usize, reason: String },
    /// A name is neither a registered variable nor a known function.
    #[error("unknown variable `{name}`")]
    UnknownVariable { name: String },
    /// Evaluation hit a pole: division by zero, `log` of a non-positive
    /// value, `sqrt` of a negative value, or a non-finite intermediate.
    #[error("evaluation singularity in `{context}`")]
    EvaluationSingularity { context: String },
    /// A variable had no value assigned at evaluation time.
    #[error("unbound variable `{name}` at evaluation")]
    UnboundVariable { name: String },
    /// Repeated resampling failed to find a pole-free sample point.
    #[error("sampling exhausted: {attempts} attempts per point all hit singularities")]
    SampleExhausted { attempts: usize },
    /// A substitution produced an exact zero base under a negative power.
    #[error("substitution produced a zero denominator")]
    ZeroDenominator,
}

/// The elementary functions the expression language knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Expression node. Canonical-form invariants, maintained by the smart
/// constructors and relied on everywhere:
///
/// * `Add`: at least two terms, no nested `Add`, at most one constant term,
///   distinct monomial parts, sorted;
/// * `Mul`: at least two factors, an optional leading constant not in
///   {0, 1}, remaining factors sorted with distinct bases, none of which is
///   a constant, a product, or a sum (sums are expanded away);
/// * `Pow`: exponent not in {0, 1}; base is a variable, a function
///   application, or (for negative exponents only) a sum;
/// * `Num(0)` and `Num(1)` appear only as a whole expression or as an
///   `Add` constant term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Num(Rational),
    Var(String),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, i64),
    Func(Func, Expr),
}

/// Immutable, freely shareable symbolic expression in canonical form.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Eq for Expr {}

/// Total order on canonical expressions: by node kind, then contents.
/// Only used for deterministic sorting; carries no semantic meaning.
impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        fn rank(n: &Node) -> u8 {
            match n {
                Node::Num(_) => 0,
                Node::Var(_) => 1,
                Node::Func(..) => 2,
                Node::Pow(..) => 3,
                Node::Mul(_) => 4,
                Node::Add(_) => 5,
            }
        }
        let (a, b) = (&*self.0, &*other.0);
        rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
            (Node::Num(x), Node::Num(y)) => x.cmp(y),
            (Node::Var(x), Node::Var(y)) => x.cmp(y),
            (Node::Func(f, x), Node::Func(g, y)) => f.cmp(g).then_with(|| x.cmp(y)),
            (Node::Pow(x, n), Node::Pow(y, m)) => x.cmp(y).then_with(|| n.cmp(m)),
            (Node::Mul(xs), Node::Mul(ys)) | (Node::Add(xs), Node::Add(ys)) => xs.cmp(ys),
            _ => unreachable!("equal ranks imply equal variants"),
        })
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn new(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn zero() -> Expr {
        Expr::from_int(0)
    }

    pub fn one() -> Expr {
        Expr::from_int(1)
    }

    pub fn from_int(n: i64) -> Expr {
        Expr::from_rational(Rational::from(BigInt::from(n)))
    }

    /// Exact fraction `num/den`. Panics if `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Expr {
        assert!(den != 0, "rational constant with zero denominator");
        Expr::from_rational(Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(q: Rational) -> Expr {
        Expr::new(Node::Num(q))
    }

    /// A bare variable. The name is not validated here; `parse` and the
    /// scene loader are the checked entry points.
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(Node::Var(name.into()))
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self.node(), Node::Num(q) if q.is_zero())
    }

    pub fn is_one_literal(&self) -> bool {
        matches!(self.node(), Node::Num(q) if q.is_one())
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(q) => Some(q),
            _ => None,
        }
    }

    /// Sum of the given terms, flattened, with like terms collected.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut constant = Rational::zero();
        // Monomial part -> accumulated coefficient.
        let mut by_monomial: BTreeMap<Expr, Rational> = BTreeMap::new();
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        stack.reverse();
        while let Some(term) = stack.pop() {
            match term.node() {
                Node::Add(parts) => stack.extend(parts.iter().rev().cloned()),
                Node::Num(q) => constant += q,
                _ => {
                    let (coef, monomial) = term.coefficient_split();
                    *by_monomial.entry(monomial).or_insert_with(Rational::zero) += coef;
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(by_monomial.len() + 1);
        if !constant.is_zero() {
            out.push(Expr::from_rational(constant));
        }
        for (monomial, coef) in by_monomial {
            if !coef.is_zero() {
                out.push(Expr::rescale(coef, monomial));
            }
        }
        out.sort();
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::new(Node::Add(out)),
        }
    }

    /// Splits a non-sum term into (rational coefficient, monomial part).
    /// The monomial of a constant is `1`.
    fn coefficient_split(&self) -> (Rational, Expr) {
        match self.node() {
            Node::Num(q) => (q.clone(), Expr::one()),
            Node::Mul(factors) => match factors[0].node() {
                Node::Num(q) => {
                    let rest: Vec<Expr> = factors[1..].to_vec();
                    let monomial = if rest.len() == 1 {
                        rest.into_iter().next().unwrap()
                    } else {
                        Expr::new(Node::Mul(rest))
                    };
                    (q.clone(), monomial)
                }
                _ => (Rational::one(), self.clone()),
            },
            _ => (Rational::one(), self.clone()),
        }
    }

    /// `coef * monomial` where `monomial` carries no constant factor.
    fn rescale(coef: Rational, monomial: Expr) -> Expr {
        if coef.is_zero() {
            return Expr::zero();
        }
        if monomial.is_one_literal() {
            return Expr::from_rational(coef);
        }
        if coef.is_one() {
            return monomial;
        }
        let mut factors = vec![Expr::from_rational(coef)];
        match monomial.node() {
            Node::Mul(fs) => factors.extend(fs.iter().cloned()),
            _ => factors.push(monomial),
        }
        Expr::new(Node::Mul(factors))
    }

    /// Product of the given factors, flattened and expanded over sums,
    /// with equal bases merged into powers.
    ///
    /// Panics on an exact zero base under a negative exponent; callers
    /// that substitute user input must pre-validate (see
    /// [`Expr::substitute`]).
    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut coef = Rational::one();
        // Base -> accumulated integer exponent.
        let mut powers: BTreeMap<Expr, i64> = BTreeMap::new();
        // Sum factors pending distribution.
        let mut sums: Vec<Vec<Expr>> = Vec::new();
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        stack.reverse();
        while let Some(factor) = stack.pop() {
            match factor.node() {
                Node::Mul(parts) => stack.extend(parts.iter().rev().cloned()),
                Node::Num(q) => {
                    if q.is_zero() {
                        return Expr::zero();
                    }
                    coef *= q;
                }
                Node::Pow(base, k) => *powers.entry(base.clone()).or_insert(0) += k,
                _ => *powers.entry(factor).or_insert(0) += 1,
            }
        }
        let mut monomial_factors: Vec<Expr> = Vec::new();
        for (base, k) in powers {
            if k == 0 {
                continue;
            }
            match base.node() {
                Node::Add(terms) if k > 0 => {
                    let expanded = expand_sum_power(terms, k as u64);
                    match expanded.node() {
                        Node::Add(ts) => sums.push(ts.clone()),
                        Node::Num(q) => coef *= q,
                        _ => monomial_factors.push(expanded),
                    }
                }
                _ => monomial_factors.push(if k == 1 {
                    base
                } else {
                    Expr::new(Node::Pow(base, k))
                }),
            }
        }
        monomial_factors.sort();
        let monomial = match monomial_factors.len() {
            0 => Expr::one(),
            1 => monomial_factors.pop().unwrap(),
            _ => Expr::new(Node::Mul(monomial_factors)),
        };
        let base_term = Expr::rescale(coef, monomial);
        if sums.is_empty() {
            return base_term;
        }
        // Distribute every pending sum over the accumulated terms.
        let mut acc: Vec<Expr> = vec![base_term];
        for sum in sums {
            let mut next = Vec::with_capacity(acc.len() * sum.len());
            for lhs in &acc {
                for rhs in &sum {
                    next.push(Expr::product([lhs.clone(), rhs.clone()]));
                }
            }
            acc = next;
        }
        Expr::sum(acc)
    }

    /// Integer power with exact folding and expansion rules.
    ///
    /// Panics on an exact zero base under a negative exponent.
    pub fn powi(&self, k: i64) -> Expr {
        if k == 0 {
            return Expr::one();
        }
        if k == 1 {
            return self.clone();
        }
        match self.node() {
            Node::Num(q) => {
                assert!(
                    !(q.is_zero() && k < 0),
                    "zero base under negative power; validate denominators first"
                );
                Expr::from_rational(rational_powi(q, k))
            }
            Node::Pow(base, j) => base.powi(j.checked_mul(k).expect("power exponent overflow")),
            Node::Mul(factors) => Expr::product(factors.iter().map(|f| f.powi(k))),
            Node::Add(terms) if k > 0 => expand_sum_power(terms, k as u64),
            _ => Expr::new(Node::Pow(self.clone(), k)),
        }
    }

    pub fn apply(func: Func, arg: Expr) -> Expr {
        Expr::new(Node::Func(func, arg))
    }

    pub fn sin(arg: Expr) -> Expr {
        Expr::apply(Func::Sin, arg)
    }

    pub fn cos(arg: Expr) -> Expr {
        Expr::apply(Func::Cos, arg)
    }

    pub fn exp(arg: Expr) -> Expr {
        Expr::apply(Func::Exp, arg)
    }

    pub fn log(arg: Expr) -> Expr {
        Expr::apply(Func::Log, arg)
    }

    pub fn sqrt(arg: Expr) -> Expr {
        Expr::apply(Func::Sqrt, arg)
    }

    pub fn neg(&self) -> Expr {
        Expr::product([Expr::from_int(-1), self.clone()])
    }

    /// Multiplicative inverse. Panics if `self` folds to the literal zero.
    pub fn inv(&self) -> Expr {
        self.powi(-1)
    }

    /// Partial derivative with respect to the named variable.
    pub fn differentiate(&self, var: &str) -> Expr {
        match self.node() {
            Node::Num(_) => Expr::zero(),
            Node::Var(v) => {
                if v == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(terms) => Expr::sum(terms.iter().map(|t| t.differentiate(var))),
            Node::Mul(factors) => Expr::sum((0..factors.len()).map(|i| {
                let mut parts: Vec<Expr> = Vec::with_capacity(factors.len());
                for (j, f) in factors.iter().enumerate() {
                    parts.push(if i == j {
                        f.differentiate(var)
                    } else {
                        f.clone()
                    });
                }
                Expr::product(parts)
            })),
            Node::Pow(base, k) => {
                let db = base.differentiate(var);
                if db.is_zero_literal() {
                    return Expr::zero();
                }
                Expr::product([Expr::from_int(*k), base.powi(k - 1), db])
            }
            Node::Func(f, u) => {
                let du = u.differentiate(var);
                if du.is_zero_literal() {
                    return Expr::zero();
                }
                let chain = match f {
                    Func::Sin => Expr::cos(u.clone()),
                    Func::Cos => Expr::sin(u.clone()).neg(),
                    Func::Tan => {
                        Expr::sum([Expr::one(), Expr::apply(Func::Tan, u.clone()).powi(2)])
                    }
                    Func::Exp => Expr::exp(u.clone()),
                    Func::Log => u.inv(),
                    Func::Sqrt => Expr::product([Expr::ratio(1, 2), Expr::sqrt(u.clone()).inv()]),
                    Func::Sinh => Expr::apply(Func::Cosh, u.clone()),
                    Func::Cosh => Expr::apply(Func::Sinh, u.clone()),
                };
                Expr::product([chain, du])
            }
        }
    }

    /// Simultaneous substitution of variables by expressions. Rebuilds
    /// bottom-up through the canonicalizing constructors; a substitution
    /// that collapses a denominator to the literal zero is an error.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Result<Expr, ExprError> {
        match self.node() {
            Node::Num(_) => Ok(self.clone()),
            Node::Var(v) => Ok(map.get(v).cloned().unwrap_or_else(|| self.clone())),
            Node::Add(terms) => {
                let parts: Result<Vec<Expr>, ExprError> =
                    terms.iter().map(|t| t.substitute(map)).collect();
                Ok(Expr::sum(parts?))
            }
            Node::Mul(factors) => {
                let parts: Result<Vec<Expr>, ExprError> =
                    factors.iter().map(|f| f.substitute(map)).collect();
                Ok(Expr::product(parts?))
            }
            Node::Pow(base, k) => {
                let b = base.substitute(map)?;
                if *k < 0 && b.is_zero_literal() {
                    return Err(ExprError::ZeroDenominator);
                }
                Ok(b.powi(*k))
            }
            Node::Func(f, u) => Ok(Expr::apply(*f, u.substitute(map)?)),
        }
    }

    /// Substitution of a single variable.
    pub fn substitute_one(&self, var: &str, value: &Expr) -> Result<Expr, ExprError> {
        let mut map = BTreeMap::new();
        map.insert(var.to_string(), value.clone());
        self.substitute(&map)
    }

    /// Re-canonicalizes bottom-up. Idempotent; canonical inputs come back
    /// structurally equal.
    pub fn simplify(&self) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Var(_) => self.clone(),
            Node::Add(terms) => Expr::sum(terms.iter().map(|t| t.simplify())),
            Node::Mul(factors) => Expr::product(factors.iter().map(|f| f.simplify())),
            Node::Pow(base, k) => base.simplify().powi(*k),
            Node::Func(f, u) => Expr::apply(*f, u.simplify()),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Var(v) => {
                out.insert(v.clone());
            }
            Node::Add(es) | Node::Mul(es) => es.iter().for_each(|e| e.collect_vars(out)),
            Node::Pow(b, _) => b.collect_vars(out),
            Node::Func(_, u) => u.collect_vars(out),
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Var(v) => v == var,
            Node::Add(es) | Node::Mul(es) => es.iter().any(|e| e.depends_on(var)),
            Node::Pow(b, _) => b.depends_on(var),
            Node::Func(_, u) => u.depends_on(var),
        }
    }
}

/// `(t_1 + ... + t_m)^k` for `k >= 1` by repeated distribution over the
/// term lists, collecting like terms between rounds. Terms of a canonical
/// sum are never sums themselves, so the pairwise products cannot recurse
/// back into sum expansion.
fn expand_sum_power(terms: &[Expr], k: u64) -> Expr {
    let mut acc: Vec<Expr> = terms.to_vec();
    for _ in 1..k {
        let mut next = Vec::with_capacity(acc.len() * terms.len());
        for a in &acc {
            for b in terms {
                next.push(Expr::product([a.clone(), b.clone()]));
            }
        }
        let collected = Expr::sum(next);
        acc = match collected.node() {
            Node::Add(ts) => ts.clone(),
            _ => vec![collected.clone()],
        };
    }
    Expr::sum(acc)
}

fn rational_powi(q: &Rational, k: i64) -> Rational {
    let mag = k.unsigned_abs() as u32;
    let num = q.numer().pow(mag);
    let den = q.denom().pow(mag);
    if k >= 0 {
        Rational::new(num, den)
    } else {
        Rational::new(den, num)
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::sum([self.clone(), rhs.clone()])
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sum([self.clone(), rhs.neg()])
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::product([self.clone(), rhs.clone()])
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs.neg()])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs])
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

// Rendering. The printed form re-parses to a structurally identical
// expression: negative constants only ever appear where the grammar's
// unary minus or the sum separator reproduces them exactly.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Num(q) => write_rational(f, q),
            Node::Var(v) => write!(f, "{v}"),
            Node::Func(func, u) => write!(f, "{}({u})", func.name()),
            Node::Pow(base, k) => {
                match base.node() {
                    Node::Var(v) => write!(f, "{v}")?,
                    Node::Func(func, u) => write!(f, "{}({u})", func.name())?,
                    _ => write!(f, "({base})")?,
                }
                write!(f, "^{k}")
            }
            Node::Mul(factors) => {
                for (i, factor) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    match factor.node() {
                        Node::Add(_) => write!(f, "({factor})")?,
                        Node::Num(q) if i > 0 => {
                            // Only the leading factor may be a constant in
                            // canonical form; keep the guard for safety.
                            write_rational(f, q)?;
                        }
                        _ => write!(f, "{factor}")?,
                    }
                }
                Ok(())
            }
            Node::Add(terms) => {
                for (i, term) in terms.iter().enumerate() {
                    if i == 0 {
                        write!(f, "{term}")?;
                        continue;
                    }
                    let (coef, monomial) = term.coefficient_split();
                    if coef.is_negative() {
                        write!(f, " - {}", Expr::rescale(-coef, monomial))?;
                    } else {
                        write!(f, " + {term}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, q: &Rational) -> fmt::Result {
    if q.denom().is_one() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars() -> BTreeSet<String> {
        ["t", "x1", "x2", "y1_1", "y1_2", "c"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn p(src: &str) -> Expr {
        parse(src, &vars()).unwrap()
    }

    #[test]
    fn constants_fold_exactly() {
        assert_eq!(p("1/3 + 1/6"), Expr::ratio(1, 2));
        assert_eq!(p("2^10"), Expr::from_int(1024));
        assert_eq!(p("2^-2"), Expr::ratio(1, 4));
        assert_eq!(p("0.25*4"), Expr::one());
    }

    #[test]
    fn identity_elements_absorb() {
        assert_eq!(p("0*x1 + y1_1"), p("y1_1"));
        assert_eq!(p("1*sin(x1)"), p("sin(x1)"));
        assert_eq!(p("x1 - x1"), Expr::zero());
        assert_eq!(p("x1^0"), Expr::one());
    }

    #[test]
    fn like_terms_collect() {
        assert_eq!(p("x1*y1_1 + 2*y1_1*x1"), p("3*x1*y1_1"));
        assert_eq!(p("t*t*t"), p("t^3"));
        assert_eq!(p("t^3/t"), p("t^2"));
        assert_eq!(p("(x1+1)*(x1-1) - x1^2 + 1"), Expr::zero());
    }

    #[test]
    fn sums_expand_under_products_and_powers() {
        assert_eq!(p("(x1+1)^2"), p("x1^2 + 2*x1 + 1"));
        assert_eq!(p("(t+x1)*(t-x1)"), p("t^2 - x1^2"));
        assert_eq!(
            p("(x1 + x2)^3 - x1^3 - 3*x1^2*x2 - 3*x1*x2^2 - x2^3"),
            Expr::zero()
        );
    }

    #[test]
    fn negative_powers_of_sums_stay_atomic() {
        let e = p("1/(t^2+1)");
        assert!(matches!(e.node(), Node::Pow(b, -1) if matches!(b.node(), Node::Add(_))));
        assert_eq!(p("(t^2+1)/(t^2+1)"), Expr::one());
        assert_eq!(p("(t^2+1)^-1 * (t^2+1)^-1"), p("(t^2+1)^-2"));
    }

    #[test]
    fn derivative_rules() {
        assert_eq!(p("t^3").differentiate("t"), p("3*t^2"));
        assert_eq!(p("sin(x1)").differentiate("x1"), p("cos(x1)"));
        assert_eq!(p("cos(x1)").differentiate("x1"), p("-sin(x1)"));
        assert_eq!(p("exp(2*t)").differentiate("t"), p("2*exp(2*t)"));
        assert_eq!(p("log(t)").differentiate("t"), p("1/t"));
        assert_eq!(p("sqrt(t)").differentiate("t"), p("1/2*sqrt(t)^-1"));
        assert_eq!(p("tan(t)").differentiate("t"), p("1 + tan(t)^2"));
        assert_eq!(p("sinh(t)").differentiate("t"), p("cosh(t)"));
        assert_eq!(p("x1*y1_1").differentiate("x1"), p("y1_1"));
        assert_eq!(p("x2").differentiate("x1"), Expr::zero());
    }

    #[test]
    fn quotient_derivative() {
        // d/dt [t/(t^2+1)] = (1 - t^2) / (t^2+1)^2, expanded form.
        let d = p("t/(t^2+1)").differentiate("t");
        let want = p("(t^2+1)^-1 - 2*t^2*(t^2+1)^-2");
        assert_eq!(d, want);
    }

    #[test]
    fn substitution_rebuilds_canonically() {
        let e = p("x1^2 + y1_1");
        let got = e.substitute_one("x1", &p("t+1")).unwrap();
        assert_eq!(got, p("t^2 + 2*t + 1 + y1_1"));
        let bad = p("1/x1").substitute_one("x1", &Expr::zero());
        assert_eq!(bad, Err(ExprError::ZeroDenominator));
    }

    #[test]
    fn simplify_is_idempotent() {
        for src in ["(x1+1)^3/(x1+1)", "sin(x1)^2*cos(x1)*t - t", "2*t - t - t"] {
            let e = p(src);
            let s = e.simplify();
            assert_eq!(s, e);
            assert_eq!(s.simplify(), s);
        }
    }

    #[test]
    fn display_reparses_structurally() {
        for src in [
            "x1^2 + t",
            "-3/4*x1^2 + 2*t - 1",
            "sin(x1)^2*cos(x2)",
            "(t^2+1)^-2*x1",
            "exp(2*t)*y1_1 - sqrt(x1)",
            "1 - tan(t)^2",
            "t*(x1+x2)^-1",
        ] {
            let e = p(src);
            let rendered = e.to_string();
            assert_eq!(p(&rendered), e, "round-trip failed for `{rendered}`");
        }
    }

    #[test]
    fn free_vars_and_depends() {
        let e = p("sin(x1)*y1_2 + t");
        let vs = e.free_vars();
        assert!(vs.contains("x1") && vs.contains("y1_2") && vs.contains("t"));
        assert!(!vs.contains("x2"));
        assert!(e.depends_on("y1_2"));
        assert!(!e.depends_on("y1_1"));
    }
}
