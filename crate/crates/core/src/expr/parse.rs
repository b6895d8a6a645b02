//! Infix expression literals.
//!
//! Grammar: sums and differences of products and quotients of powers.
//! Exponents are integers or parenthesized rationals (`^(3/2)`). Decimal
//! literals are read exactly (`0.25` is `1/4`). Names in the parameter table
//! become rational constants; `@name(t)` and `@name''(t)` refer to a registered
//! opaque function and its derivatives.

use std::collections::{BTreeMap, HashSet};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use super::poly::{OpaqueFn, Symbol, Q};
use super::{Expr, ExprError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("unexpected {found} at offset {pos}, expected {expected}")]
    Unexpected {
        pos: usize,
        found: String,
        expected: &'static str,
    },
    #[error("unknown opaque function `@{0}`")]
    UnknownFunction(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("bad number `{0}`")]
    BadNumber(String),
    #[error("{0}")]
    Expr(#[from] ExprError),
}

/// Named opaque functions available to `@name(...)` references.
#[derive(Clone, Debug, Default)]
pub struct OpaqueRegistry {
    funcs: BTreeMap<String, Arc<OpaqueFn>>,
}

impl OpaqueRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, f: Arc<OpaqueFn>) {
        self.funcs.insert(f.name().to_string(), f);
    }

    pub fn with(mut self, f: Arc<OpaqueFn>) -> Self {
        self.insert(f);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Arc<OpaqueFn>> {
        self.funcs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.funcs.keys().map(String::as_str)
    }
}

/// Parameters, registry and (optionally) the allowed symbol set.
#[derive(Clone, Debug, Default)]
pub struct ParseContext {
    pub params: BTreeMap<String, Q>,
    pub registry: OpaqueRegistry,
    pub symbols: Option<HashSet<String>>,
}

impl ParseContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn param(mut self, name: &str, value: Q) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn restrict_symbols<'a>(mut self, names: impl IntoIterator<Item = &'a str>) -> Self {
        self.symbols = Some(names.into_iter().map(str::to_string).collect());
        self
    }

    pub fn parse(&self, src: &str) -> Result<Expr, ParseError> {
        parse_expr(src, self)
    }
}

/// Parse a rational literal such as `-3/2`, `0.125` or `7`.
pub fn parse_rational(s: &str) -> Result<Q, ParseError> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest.trim()),
        None => (false, s),
    };
    let v = if let Some((n, d)) = body.split_once('/') {
        let n = parse_decimal(n.trim())?;
        let d = parse_decimal(d.trim())?;
        if d.is_zero() {
            return Err(ParseError::BadNumber(s.to_string()));
        }
        n / d
    } else {
        parse_decimal(body)?
    };
    Ok(if neg { -v } else { v })
}

fn parse_decimal(s: &str) -> Result<Q, ParseError> {
    let bad = || ParseError::BadNumber(s.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
        || (int_part.is_empty() && frac_part.is_empty())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let n = BigInt::from_str(&digits).map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        Q::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Q::new(n, num_traits::pow(ten, (-scale) as usize))
    })
}

pub fn parse_expr(src: &str, ctx: &ParseContext) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        ctx,
    };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.unexpected("operator or end of input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    ctx: &'a ParseContext,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        let found = match self.src.get(self.pos) {
            Some(c) => format!("`{}`", *c as char),
            None => "end of input".to_string(),
        };
        ParseError::Unexpected {
            pos: self.pos,
            found,
            expected,
        }
    }

    fn expect(&mut self, c: u8, what: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc + self.product()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc - self.product()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc * self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d = self.unary()?;
                    acc = acc.checked_div(&d)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let exponent = self.exponent()?;
        Ok(base.pow_rational(&exponent)?)
    }

    fn exponent(&mut self) -> Result<Q, ParseError> {
        let neg = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let v = if self.peek() == Some(b'(') {
            self.pos += 1;
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos] != b')' {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            self.expect(b')', "`)`")?;
            parse_rational(text)?
        } else {
            let text = self.number_text();
            if text.is_empty() {
                return Err(self.unexpected("exponent"));
            }
            parse_decimal(&text)?
        };
        Ok(if neg { -v } else { v })
    }

    fn number_text(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        // scientific notation
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).replace("e+", "e")
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(b')', "`)`")?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let text = self.number_text();
                Ok(Expr::rational(parse_decimal(&text)?))
            }
            Some(b'@') => {
                self.pos += 1;
                let name = self.ident();
                if name.is_empty() {
                    return Err(self.unexpected("function name"));
                }
                let mut order = 0;
                while self.src.get(self.pos) == Some(&b'\'') {
                    order += 1;
                    self.pos += 1;
                }
                let func = self
                    .ctx
                    .registry
                    .get(&name)
                    .cloned()
                    .ok_or_else(|| ParseError::UnknownFunction(name.clone()))?;
                self.expect(b'(', "`(`")?;
                self.skip_ws();
                let arg = self.ident();
                if arg.is_empty() {
                    return Err(self.unexpected("argument symbol"));
                }
                self.check_symbol(&arg)?;
                self.expect(b')', "`)`")?;
                if order > func.max_order() {
                    return Err(ExprError::OpaqueNoDerivative {
                        name: func.name().to_string(),
                        order,
                    }
                    .into());
                }
                Ok(Expr::opaque_derivative(&func, &Symbol::new(&arg), order))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.ident();
                if let Some(v) = self.ctx.params.get(&name) {
                    return Ok(Expr::rational(v.clone()));
                }
                self.check_symbol(&name)?;
                Ok(Expr::var(&name))
            }
            _ => Err(self.unexpected("number, symbol or `(`")),
        }
    }

    fn check_symbol(&self, name: &str) -> Result<(), ParseError> {
        match &self.ctx.symbols {
            Some(set) if !set.contains(name) => Err(ParseError::UnknownSymbol(name.to_string())),
            _ => Ok(()),
        }
    }
}

/// Render a rational as `p/q` (or `p`), the inverse of [`parse_rational`].
pub fn format_rational(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{q_frac, q_int};

    #[test]
    fn kummer_schwarz_component() {
        let ctx = ParseContext::new().param("c0", q_int(1));
        let e = ctx.parse("3/2*v^2/x - 2*c0*x^3").unwrap();
        let x = Expr::var("x");
        let v = Expr::var("v");
        let expected = (&v * &v).scale(&q_frac(3, 2)).checked_div(&x).unwrap()
            - x.powi(3).unwrap().scale(&q_int(2));
        assert!(e.equals(&expected));
    }

    #[test]
    fn decimals_are_exact() {
        let e = ParseContext::new().parse("0.25*x + 1e-2").unwrap();
        let expected = Expr::var("x").scale(&q_frac(1, 4)) + Expr::frac(1, 100);
        assert!(e.equals(&expected));
    }

    #[test]
    fn opaque_references() {
        let eta = OpaqueFn::new("eta", vec![Arc::new(|t: f64| t), Arc::new(|_| 1.0)]);
        let mut ctx = ParseContext::new();
        ctx.registry.insert(eta);
        let e = ctx.parse("@eta(t)*t + @eta'(t)").unwrap();
        assert!(e.has_opaque());
        assert!(matches!(ctx.parse("@zeta(t)"), Err(ParseError::UnknownFunction(_))));
        assert!(matches!(
            ctx.parse("@eta''(t)"),
            Err(ParseError::Expr(ExprError::OpaqueNoDerivative { .. }))
        ));
    }

    #[test]
    fn rational_exponents_and_errors() {
        let e = ParseContext::new().parse("(t + 1)^(3/2)").unwrap();
        let d = e.differentiate(&Symbol::new("t")).unwrap();
        let expected = ParseContext::new().parse("3/2*(t+1)^(1/2)").unwrap();
        assert!(d.equals(&expected));
        assert!(ParseContext::new().parse("x +").is_err());
        assert!(ParseContext::new().parse("(x").is_err());
        assert!(ParseContext::new().parse("x $ y").is_err());
        let restricted = ParseContext::new().restrict_symbols(["x"]);
        assert!(matches!(restricted.parse("y"), Err(ParseError::UnknownSymbol(_))));
    }

    #[test]
    fn display_round_trips() {
        let ctx = ParseContext::new();
        for src in ["x^2 - 3/2*x*y + 1", "(t + 1)^(1/2)*t", "1/(x + 1)", "-v^2/x^2"] {
            let e = ctx.parse(src).unwrap();
            let back = ctx.parse(&e.to_string()).unwrap();
            assert!(e.equals(&back), "{src} -> {e}");
        }
    }

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("-3/2").unwrap(), q_frac(-3, 2));
        assert_eq!(parse_rational("0.5").unwrap(), q_frac(1, 2));
        assert_eq!(format_rational(&q_frac(-3, 2)), "-3/2");
        assert!(parse_rational("1/0").is_err());
    }
}
