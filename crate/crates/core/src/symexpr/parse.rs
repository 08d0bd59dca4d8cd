//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' integer)?
//! atom   := number | name | name '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//!
//! Whitespace is insignificant. Numbers are unsigned integer or decimal
//! literals and become exact rationals. A name followed by `(` must be a
//! known function; any other name must be registered in `allowed`.

use super::{Expr, ExprError, Func, Rational};
use num_bigint::BigInt;

use std::collections::BTreeSet;

/// Parses `source` into a canonical expression. Every variable name must
/// be present in `allowed`.
pub fn parse(source: &str, allowed: &BTreeSet<String>) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
        allowed,
    };
    p.skip_ws();
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    allowed: &'a BTreeSet<String>,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: &str) -> ExprError {
        ExprError::MalformedExpression {
            at: self.pos,
            reason: reason.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, byte: u8) -> bool {
        if self.peek() == Some(byte) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(self.term()?.neg());
            } else {
                break;
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.factor()?];
        loop {
            if self.eat(b'*') {
                factors.push(self.factor()?);
            } else if self.eat(b'/') {
                let at = self.pos;
                let divisor = self.factor()?;
                if divisor.is_zero_literal() {
                    return Err(ExprError::MalformedExpression {
                        at,
                        reason: "division by zero".to_string(),
                    });
                }
                factors.push(divisor.inv());
            } else {
                break;
            }
        }
        Ok(Expr::product(factors))
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let at = self.pos;
            let k = self.signed_integer()?;
            if k < 0 && base.is_zero_literal() {
                return Err(ExprError::MalformedExpression {
                    at,
                    reason: "zero raised to a negative power".to_string(),
                });
            }
            return Ok(base.powi(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.skip_ws();
                Ok(self.atom()?.neg())
            }
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            _ => Err(self.err("expected a number, name, `(`, or `-`")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let mut denom_digits = 0usize;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let frac_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            denom_digits = self.pos - frac_start;
            if denom_digits == 0 {
                return Err(self.err("expected digits after decimal point"));
            }
        }
        let text: String = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii digits")
            .replace('.', "");
        let numer: BigInt = text.parse().expect("digit string");
        let denom = BigInt::from(10u32).pow(denom_digits as u32);
        self.skip_ws();
        Ok(Expr::from_rational(Rational::new(numer, denom)))
    }

    fn name(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii name")
            .to_string();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            let func =
                Func::from_name(&name).ok_or(ExprError::UnknownVariable { name: name.clone() })?;
            self.pos += 1;
            self.skip_ws();
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected `)` after function argument"));
            }
            return Ok(Expr::apply(func, arg));
        }
        if self.allowed.contains(&name) {
            Ok(Expr::var(name))
        } else {
            Err(ExprError::UnknownVariable { name })
        }
    }

    fn signed_integer(&mut self) -> Result<i64, ExprError> {
        let negative = self.eat(b'-');
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected an integer exponent"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let mag: i64 = text
            .parse()
            .map_err(|_| self.err("integer exponent out of range"))?;
        self.skip_ws();
        Ok(if negative { -mag } else { mag })
    }
}
