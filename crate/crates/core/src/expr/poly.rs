//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Indeterminates are [`Atom`]s: plain symbols, opaque function leaves and
//! radicals `(v + c)^(1/q)`. A radical atom never appears with an exponent
//! `>= q` inside a stored monomial; products are reduced with `rho^q = v + c`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational scalar used throughout the crate.
pub type Q = BigRational;

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Interned variable name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function known only through numeric evaluators.
///
/// `derivs[k]` evaluates the k-th derivative; `derivs[0]` is the value.
pub struct OpaqueFn {
    name: String,
    derivs: Vec<ScalarFn>,
}

impl OpaqueFn {
    pub fn new(name: &str, derivs: Vec<ScalarFn>) -> Arc<Self> {
        assert!(!derivs.is_empty(), "opaque function needs a value evaluator");
        Arc::new(OpaqueFn {
            name: name.to_string(),
            derivs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Highest derivative order with an evaluator.
    pub fn max_order(&self) -> usize {
        self.derivs.len() - 1
    }

    pub fn eval(&self, order: usize, x: f64) -> Option<f64> {
        self.derivs.get(order).map(|f| f(x))
    }
}

impl fmt::Debug for OpaqueFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OpaqueFn({}, {} evaluators)", self.name, self.derivs.len())
    }
}

/// `order`-th derivative of an opaque function applied to a symbol.
#[derive(Clone, Debug)]
pub struct OpaqueLeaf {
    pub func: Arc<OpaqueFn>,
    pub order: usize,
    pub arg: Symbol,
}

impl OpaqueLeaf {
    fn key(&self) -> (&str, usize, &Symbol) {
        (self.func.name(), self.order, &self.arg)
    }
}

impl PartialEq for OpaqueLeaf {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for OpaqueLeaf {}
impl PartialOrd for OpaqueLeaf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpaqueLeaf {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// `(var + shift)^(1/q)` with `q >= 2`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Radical {
    pub var: Symbol,
    pub shift: Q,
    pub q: u32,
}

impl Radical {
    /// The polynomial `var + shift`.
    pub fn base(&self) -> Poly {
        let mut p = Poly::atom(Atom::Var(self.var.clone()));
        if !self.shift.is_zero() {
            p = p.add(&Poly::constant(self.shift.clone()));
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    Var(Symbol),
    Opaque(OpaqueLeaf),
    Radical(Arc<Radical>),
}

impl Atom {
    pub fn is_opaque(&self) -> bool {
        matches!(self, Atom::Opaque(_))
    }

    /// Symbol this atom depends on.
    pub fn symbol(&self) -> &Symbol {
        match self {
            Atom::Var(s) => s,
            Atom::Opaque(o) => &o.arg,
            Atom::Radical(r) => &r.var,
        }
    }
}

/// Product of atom powers, sorted by atom, no zero exponents.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Monomial(pub Vec<(Atom, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| *e).sum()
    }

    pub fn exponent_of(&self, atom: &Atom) -> u32 {
        self.0
            .iter()
            .find(|(a, _)| a == atom)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    /// Raw product without radical reduction.
    fn mul_raw(&self, other: &Monomial) -> Monomial {
        let mut out: Vec<(Atom, u32)> = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// `self / other` when every exponent of `other` is covered.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (a, e) in &self.0 {
            if j < other.0.len() && &other.0[j].0 == a {
                let oe = other.0[j].1;
                if oe > *e {
                    return None;
                }
                if *e > oe {
                    out.push((a.clone(), e - oe));
                }
                j += 1;
            } else if j < other.0.len() && other.0[j].0 < *a {
                return None;
            } else {
                out.push((a.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Graded lexicographic term order (a true monomial order).
    pub fn grlex_cmp(&self, other: &Monomial) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let (mut i, mut j) = (0, 0);
            loop {
                match (self.0.get(i), other.0.get(j)) {
                    (None, None) => return Ordering::Equal,
                    (Some(_), None) => return Ordering::Greater,
                    (None, Some(_)) => return Ordering::Less,
                    (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                        Ordering::Equal => {
                            if ea != eb {
                                return ea.cmp(eb);
                            }
                            i += 1;
                            j += 1;
                        }
                    },
                }
            }
        })
    }
}

/// Sparse polynomial: monomial -> nonzero coefficient.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Poly {
    pub terms: BTreeMap<Monomial, Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn atom(a: Atom) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial(vec![(a, 1)]), Q::one());
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value, if the polynomial has no non-constant terms.
    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|(a, _)| a))
    }

    pub fn has_opaque(&self) -> bool {
        self.atoms().any(Atom::is_opaque)
    }

    pub fn has_radical(&self) -> bool {
        self.atoms().any(|a| matches!(a, Atom::Radical(_)))
    }

    fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, k: &Q) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * k))
                .collect(),
        }
    }

    /// Product of a monomial pair, reducing radical exponents.
    fn mul_monomials(a: &Monomial, b: &Monomial) -> Poly {
        let raw = a.mul_raw(b);
        let needs_reduction = raw
            .0
            .iter()
            .any(|(at, e)| matches!(at, Atom::Radical(r) if *e >= r.q));
        if !needs_reduction {
            let mut terms = BTreeMap::new();
            terms.insert(raw, Q::one());
            return Poly { terms };
        }
        let mut kept = Vec::new();
        let mut factor = Poly::one();
        for (at, e) in raw.0 {
            if let Atom::Radical(r) = &at {
                let (whole, rest) = (e / r.q, e % r.q);
                if whole > 0 {
                    factor = factor.mul(&r.base().pow(whole));
                }
                if rest > 0 {
                    kept.push((at, rest));
                }
            } else {
                kept.push((at, e));
            }
        }
        let mut terms = BTreeMap::new();
        terms.insert(Monomial(kept), Q::one());
        Poly { terms }.mul(&factor)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let prod = Poly::mul_monomials(ma, mb);
                let c = ca * cb;
                for (m, k) in prod.terms {
                    out.add_term(m, &c * k);
                }
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Leading term under graded lex order.
    pub fn leading(&self) -> Option<(&Monomial, &Q)> {
        self.terms.iter().max_by(|a, b| a.0.grlex_cmp(b.0))
    }

    /// Exact quotient `self / divisor`, or `None` when the division leaves a
    /// remainder. `divisor` must not contain radical atoms.
    pub fn exact_div(&self, divisor: &Poly) -> Option<Poly> {
        let (lm, lc) = divisor.leading()?;
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some((m, c)) = rem.leading() {
            let qm = m.div(&lm)?;
            let qc = c / &lc;
            let mut qterm = Poly::zero();
            qterm.add_term(qm, qc);
            rem = rem.sub(&qterm.mul(divisor));
            quot = quot.add(&qterm);
        }
        Some(quot)
    }

    /// Greatest common monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut iter = self.terms.keys();
        let Some(first) = iter.next() else {
            return Monomial::one();
        };
        let mut acc: Vec<(Atom, u32)> = first.0.clone();
        for m in iter {
            acc.retain_mut(|(a, e)| {
                let oe = m.exponent_of(a);
                *e = (*e).min(oe);
                *e > 0
            });
            if acc.is_empty() {
                break;
            }
        }
        Monomial(acc)
    }

    pub fn div_monomial(&self, m: &Monomial) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.div(m).expect("monomial content divides"), c.clone()))
                .collect(),
        }
    }

    /// Substitute polynomial values for atoms via a callback.
    pub fn map_atoms<E>(
        &self,
        mut f: impl FnMut(&Atom) -> Result<Option<Poly>, E>,
    ) -> Result<Poly, E> {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut term = Poly::constant(c.clone());
            for (a, e) in &m.0 {
                let factor = match f(a)? {
                    Some(p) => p.pow(*e),
                    None => Poly::mul_monomials(&Monomial::one(), &Monomial(vec![(a.clone(), *e)])),
                };
                term = term.mul(&factor);
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Rational content making the leading coefficient one.
    pub fn monic(&self) -> (Q, Poly) {
        match self.leading() {
            None => (Q::zero(), Poly::zero()),
            Some((_, lc)) => {
                let lc = lc.clone();
                let inv = lc.recip();
                (lc, self.scale(&inv))
            }
        }
    }

    pub fn max_abs_coeff(&self) -> Q {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Q::zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::atom(Atom::Var(Symbol::new("x")))
    }
    fn y() -> Poly {
        Poly::atom(Atom::Var(Symbol::new("y")))
    }

    #[test]
    fn exact_division_recovers_factor() {
        let a = x().add(&y()).add(&Poly::one());
        let b = x().sub(&y().scale(&q_int(2)));
        let prod = a.mul(&b);
        assert_eq!(prod.exact_div(&a), Some(b.clone()));
        assert_eq!(prod.exact_div(&b), Some(a));
        assert_eq!(x().add(&Poly::one()).exact_div(&x()), None);
    }

    #[test]
    fn radical_squares_to_base() {
        let r = Arc::new(Radical {
            var: Symbol::new("t"),
            shift: q_int(1),
            q: 2,
        });
        let rho = Poly::atom(Atom::Radical(r.clone()));
        assert_eq!(rho.mul(&rho), r.base());
        assert_eq!(rho.pow(3), r.base().mul(&rho));
    }

    #[test]
    fn monomial_content_is_gcd() {
        let p = x().pow(2).mul(&y()).add(&x().pow(3));
        assert_eq!(p.monomial_content(), Monomial(vec![(Atom::Var(Symbol::new("x")), 2)]));
    }
}
