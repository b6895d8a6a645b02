//! Exact symbolic scalars.
//!
//! An [`Expr`] is stored directly in normal form: a polynomial numerator over
//! a denominator kept as a product of monic factor polynomials with
//! multiplicities. Polynomials have exact rational coefficients; opaque
//! function leaves and radicals are treated as atomic indeterminates.
//!
//! Two expressions with equal normal forms evaluate identically. The converse
//! holds on the polynomial fragment; for rational expressions the denominator
//! is only reduced by exact cancellation of its stored factors, so equality
//! should be tested with `(a - b).is_zero()`, which is always exact on the
//! opaque-free fragment.

mod compile;
mod display;
pub mod parse;
pub mod poly;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use compile::CompiledExpr;
pub use parse::{parse_expr, OpaqueRegistry, ParseContext, ParseError};
pub use poly::{q_frac, q_int, Atom, Monomial, OpaqueFn, OpaqueLeaf, Poly, Radical, ScalarFn, Symbol, Q};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("opaque function `{name}` has no evaluator for derivative order {order}")]
    OpaqueNoDerivative { name: String, order: usize },
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("value outside the domain of `{0}`")]
    OutsideDomain(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

/// Outcome of a semantic zero test.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroTest {
    Zero,
    NonZero,
    /// Opaque leaves present; the normal form is not structurally zero.
    /// `max_abs` is the largest magnitude seen over `samples` random points.
    Unknown { samples: usize, max_abs: f64 },
}

/// Number of random evaluations backing an `Unknown` verdict.
pub const ZERO_TEST_SAMPLES: usize = 32;

type Denominator = BTreeMap<Poly, u32>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Expr {
    num: Poly,
    den: Denominator,
}

impl Expr {
    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn one() -> Self {
        Expr::from_poly(Poly::one())
    }

    pub fn from_poly(p: Poly) -> Self {
        Expr {
            num: p,
            den: BTreeMap::new(),
        }
    }

    pub fn rational(c: Q) -> Self {
        Expr::from_poly(Poly::constant(c))
    }

    pub fn int(n: i64) -> Self {
        Expr::rational(q_int(n))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        Expr::rational(q_frac(n, d))
    }

    pub fn sym(s: &Symbol) -> Self {
        Expr::from_poly(Poly::atom(Atom::Var(s.clone())))
    }

    pub fn var(name: &str) -> Self {
        Expr::sym(&Symbol::new(name))
    }

    /// `func(arg)` as an opaque leaf.
    pub fn opaque(func: &Arc<OpaqueFn>, arg: &Symbol) -> Self {
        Expr::opaque_derivative(func, arg, 0)
    }

    pub fn opaque_derivative(func: &Arc<OpaqueFn>, arg: &Symbol, order: usize) -> Self {
        Expr::from_poly(Poly::atom(Atom::Opaque(OpaqueLeaf {
            func: func.clone(),
            order,
            arg: arg.clone(),
        })))
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator_factors(&self) -> impl Iterator<Item = (&Poly, u32)> {
        self.den.iter().map(|(p, k)| (p, *k))
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_empty()
    }

    /// Structural zero (the normal form numerator vanishes).
    pub fn is_structurally_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_rational(&self) -> Option<Q> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn has_opaque(&self) -> bool {
        self.num.has_opaque() || self.den.keys().any(Poly::has_opaque)
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.num
            .atoms()
            .chain(self.den.keys().flat_map(|p| p.atoms()))
            .cloned()
            .collect()
    }

    /// Symbols the expression depends on, including opaque and radical arguments.
    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        self.atoms().iter().map(|a| a.symbol().clone()).collect()
    }

    pub fn depends_on(&self, v: &Symbol) -> bool {
        self.atoms().iter().any(|a| a.symbol() == v)
    }

    /// Product of the denominator factors as a polynomial.
    pub fn denominator_poly(&self) -> Poly {
        den_product(&self.den)
    }

    /// Numerator after bringing the expression over `common`, which must
    /// contain every factor of this expression's denominator.
    pub fn numerator_over(&self, common: &BTreeMap<Poly, u32>) -> Poly {
        let mut extra = Poly::one();
        for (g, k) in common {
            let own = self.den.get(g).copied().unwrap_or(0);
            assert!(own <= *k, "common denominator does not cover expression");
            if *k > own {
                extra = extra.mul(&g.pow(k - own));
            }
        }
        for g in self.den.keys() {
            assert!(common.contains_key(g), "common denominator does not cover expression");
        }
        self.num.mul(&extra)
    }

    /// Least common multiple of the stored denominator factors.
    pub fn common_denominator<'a>(exprs: impl IntoIterator<Item = &'a Expr>) -> BTreeMap<Poly, u32> {
        let mut acc: BTreeMap<Poly, u32> = BTreeMap::new();
        for e in exprs {
            for (g, k) in &e.den {
                let slot = acc.entry(g.clone()).or_insert(0);
                *slot = (*slot).max(*k);
            }
        }
        acc
    }

    fn normalized(mut num: Poly, mut den: Denominator) -> Expr {
        if num.is_zero() {
            return Expr::zero();
        }
        den.retain(|_, k| *k > 0);
        let keys: Vec<Poly> = den.keys().cloned().collect();
        for g in keys {
            let k = den.get_mut(&g).unwrap();
            while *k > 0 {
                match num.exact_div(&g) {
                    Some(q) => {
                        num = q;
                        *k -= 1;
                    }
                    None => break,
                }
            }
        }
        den.retain(|_, k| *k > 0);
        Expr { num, den }
    }

    /// Split a polynomial into (rational content, monic factor list) suitable
    /// for a denominator. Radical atoms are moved to the numerator.
    fn factorize_for_den(p: &Poly) -> Result<(Q, Poly, Denominator), ExprError> {
        if p.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        let content = p.monomial_content();
        let rest = p.div_monomial(&content);
        let mut den: Denominator = BTreeMap::new();
        let mut num_extra = Poly::one();
        for (a, e) in &content.0 {
            match a {
                Atom::Radical(r) => {
                    // rho^-e = rho^(m*q - e) / base^m
                    let m = e.div_ceil(r.q);
                    let up = m * r.q - e;
                    if up > 0 {
                        num_extra = num_extra.mul(&Poly::atom(a.clone()).pow(up));
                    }
                    *den.entry(r.base()).or_insert(0) += m;
                }
                _ => {
                    *den.entry(Poly::atom(a.clone())).or_insert(0) += e;
                }
            }
        }
        if rest.has_radical() && rest.len() > 1 {
            return Err(ExprError::Unsupported(
                "division by a multi-term expression containing radicals".into(),
            ));
        }
        let (lc, monic) = rest.monic();
        if monic.as_constant().is_none() {
            *den.entry(monic).or_insert(0) += 1;
        }
        Ok((lc, num_extra, den))
    }

    pub fn checked_div(&self, other: &Expr) -> Result<Expr, ExprError> {
        let (lc, extra, den_b) = Expr::factorize_for_den(&other.num)?;
        let mut num = self
            .num
            .mul(&den_product(&other.den))
            .mul(&extra)
            .scale(&lc.recip());
        let mut den = self.den.clone();
        for (g, k) in den_b {
            *den.entry(g).or_insert(0) += k;
        }
        if num.is_zero() {
            num = Poly::zero();
        }
        Ok(Expr::normalized(num, den))
    }

    pub fn recip(&self) -> Result<Expr, ExprError> {
        Expr::one().checked_div(self)
    }

    pub fn scale(&self, k: &Q) -> Expr {
        if k.is_zero() {
            return Expr::zero();
        }
        Expr {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn powi(&self, n: i32) -> Result<Expr, ExprError> {
        if n >= 0 {
            let num = self.num.pow(n as u32);
            let den = self.den.iter().map(|(g, k)| (g.clone(), k * n as u32)).collect();
            Ok(Expr::normalized(num, den))
        } else {
            self.powi(-n)?.recip()
        }
    }

    /// `self^(exponent)` for a rational exponent. Fractional powers require the
    /// base to be `c*(v + s)` with `c^exponent` rational and positive `c`.
    pub fn pow_rational(&self, exponent: &Q) -> Result<Expr, ExprError> {
        if exponent.is_integer() {
            let n = exponent
                .to_integer()
                .to_i32()
                .ok_or_else(|| ExprError::Unsupported("exponent too large".into()))?;
            return self.powi(n);
        }
        if !self.den.is_empty() {
            return Err(ExprError::Unsupported("fractional power of a rational expression".into()));
        }
        if let Some(c) = self.num.as_constant() {
            return rational_root(&c, exponent)
                .map(Expr::rational)
                .ok_or_else(|| ExprError::Unsupported(format!("irrational constant power {c}^{exponent}")));
        }
        let (lc, monic) = self.num.monic();
        let mut var = None;
        let mut shift = Q::zero();
        for (m, c) in &monic.terms {
            match m.0.as_slice() {
                [] => shift = c.clone(),
                [(Atom::Var(s), 1)] if c.is_one() => var = Some(s.clone()),
                _ => {
                    return Err(ExprError::Unsupported(
                        "fractional powers need a base linear in one symbol".into(),
                    ))
                }
            }
        }
        let var = var.ok_or_else(|| ExprError::Unsupported("fractional power base".into()))?;
        let scale = rational_root(&lc, exponent).ok_or_else(|| {
            ExprError::Unsupported(format!("leading coefficient {lc} has no rational power {exponent}"))
        })?;
        let q = exponent.denom().to_u32().ok_or_else(|| ExprError::Unsupported("radical index".into()))?;
        let p = exponent.numer().to_i64().ok_or_else(|| ExprError::Unsupported("exponent".into()))?;
        let rad = Arc::new(Radical { var, shift, q });
        let rho = Expr::from_poly(Poly::atom(Atom::Radical(rad.clone())));
        let whole = p.div_euclid(q as i64);
        let rest = p.rem_euclid(q as i64) as i32;
        let base = Expr::from_poly(rad.base());
        let mut out = rho.powi(rest)? * base.powi(whole as i32)?;
        out = out.scale(&scale);
        Ok(out)
    }

    /// Exact partial derivative.
    pub fn differentiate(&self, v: &Symbol) -> Result<Expr, ExprError> {
        if !self.depends_on(v) {
            return Ok(Expr::zero());
        }
        let dnum = diff_poly(&self.num, v)?;
        if self.den.is_empty() {
            return Ok(dnum);
        }
        let den_expr = Expr {
            num: Poly::one(),
            den: self.den.clone(),
        };
        // d(N/D) = dN/D - (N/D) * sum_k m_k g_k'/g_k
        let mut log_deriv = Expr::zero();
        for (g, k) in &self.den {
            let dg = diff_poly(g, v)?;
            if dg.is_structurally_zero() {
                continue;
            }
            let ge = Expr::from_poly(g.clone());
            log_deriv = log_deriv + dg.checked_div(&ge)?.scale(&q_int(*k as i64));
        }
        let this = Expr {
            num: self.num.clone(),
            den: self.den.clone(),
        };
        Ok(dnum * den_expr - this * log_deriv)
    }

    /// n-th derivative.
    pub fn differentiate_n(&self, v: &Symbol, n: usize) -> Result<Expr, ExprError> {
        let mut e = self.clone();
        for _ in 0..n {
            e = e.differentiate(v)?;
        }
        Ok(e)
    }

    /// Replace symbol `v` by `value`. Opaque and radical atoms with argument
    /// `v` can only be renamed to another bare symbol.
    pub fn substitute(&self, v: &Symbol, value: &Expr) -> Result<Expr, ExprError> {
        let mut map = HashMap::new();
        map.insert(v.clone(), value.clone());
        self.substitute_many(&map)
    }

    pub fn substitute_many(&self, map: &HashMap<Symbol, Expr>) -> Result<Expr, ExprError> {
        if !self.free_symbols().iter().any(|s| map.contains_key(s)) {
            return Ok(self.clone());
        }
        let num = subst_poly(&self.num, map)?;
        let mut out = num;
        for (g, k) in &self.den {
            let ge = subst_poly(g, map)?;
            out = out.checked_div(&ge.powi(*k as i32)?)?;
        }
        Ok(out)
    }

    /// Tri-state semantic zero test; see [`ZeroTest`].
    pub fn is_zero(&self) -> ZeroTest {
        if self.num.is_zero() {
            return ZeroTest::Zero;
        }
        if !self.has_opaque() {
            return ZeroTest::NonZero;
        }
        let syms: Vec<Symbol> = self.free_symbols().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2e20);
        let mut max_abs: f64 = 0.0;
        let mut samples = 0;
        let mut attempts = 0;
        while samples < ZERO_TEST_SAMPLES && attempts < 4 * ZERO_TEST_SAMPLES {
            attempts += 1;
            let point: HashMap<Symbol, f64> =
                syms.iter().map(|s| (s.clone(), rng.gen_range(0.25..1.25))).collect();
            if let Ok(v) = self.eval(&point) {
                if v.is_finite() {
                    max_abs = max_abs.max(v.abs());
                    samples += 1;
                }
            }
        }
        ZeroTest::Unknown { samples, max_abs }
    }

    /// Exact equality on the opaque-free fragment.
    pub fn equals(&self, other: &Expr) -> bool {
        (self.clone() - other.clone()).is_zero() == ZeroTest::Zero
    }

    pub fn eval(&self, point: &HashMap<Symbol, f64>) -> Result<f64, ExprError> {
        self.eval_with(|s| point.get(s).copied())
    }

    pub fn eval_with(&self, lookup: impl Fn(&Symbol) -> Option<f64>) -> Result<f64, ExprError> {
        if let Some(c) = self.as_rational() {
            return Ok(c.to_f64().unwrap_or(f64::NAN));
        }
        let n = eval_poly(&self.num, &lookup)?;
        let mut d = 1.0;
        for (g, k) in &self.den {
            d *= eval_poly(g, &lookup)?.powi(*k as i32);
        }
        if d == 0.0 {
            return Err(ExprError::DivisionByZero);
        }
        Ok(n / d)
    }

    pub fn compile(&self, vars: &[Symbol]) -> Result<CompiledExpr, ExprError> {
        CompiledExpr::new(self, vars)
    }

    /// Maximum |coefficient| of the numerator; zero iff structurally zero.
    pub fn max_abs_coeff(&self) -> Q {
        self.num.max_abs_coeff()
    }
}

fn den_product(den: &Denominator) -> Poly {
    den.iter().fold(Poly::one(), |acc, (g, k)| acc.mul(&g.pow(*k)))
}

/// `c^exponent` when it is rational.
fn rational_root(c: &Q, exponent: &Q) -> Option<Q> {
    if c.is_zero() {
        return if exponent.is_positive() { Some(Q::zero()) } else { None };
    }
    if c.is_negative() {
        return None;
    }
    let q = exponent.denom().to_u32()?;
    let p = exponent.numer().to_i32()?;
    let root_int = |n: &BigInt| -> Option<BigInt> {
        let r = n.nth_root(q);
        if num_traits::pow::pow(r.clone(), q as usize) == *n {
            Some(r)
        } else {
            None
        }
    };
    let rn = root_int(c.numer())?;
    let rd = root_int(c.denom())?;
    let base = Q::new(rn, rd);
    Some(if p >= 0 {
        num_traits::pow::pow(base, p as usize)
    } else {
        num_traits::pow::pow(base.recip(), (-p) as usize)
    })
}

fn atom_derivative(a: &Atom, v: &Symbol) -> Result<Expr, ExprError> {
    match a {
        Atom::Var(s) => Ok(if s == v { Expr::one() } else { Expr::zero() }),
        Atom::Opaque(o) => {
            if &o.arg != v {
                return Ok(Expr::zero());
            }
            let order = o.order + 1;
            if order > o.func.max_order() {
                return Err(ExprError::OpaqueNoDerivative {
                    name: o.func.name().to_string(),
                    order,
                });
            }
            Ok(Expr::opaque_derivative(&o.func, &o.arg, order))
        }
        Atom::Radical(r) => {
            if &r.var != v {
                return Ok(Expr::zero());
            }
            // d rho = rho / (q * base)
            let rho = Expr::from_poly(Poly::atom(a.clone()));
            let base = Expr::from_poly(r.base());
            rho.checked_div(&base.scale(&q_int(r.q as i64)))
        }
    }
}

fn diff_poly(p: &Poly, v: &Symbol) -> Result<Expr, ExprError> {
    let mut out = Expr::zero();
    for (m, c) in &p.terms {
        for (idx, (a, e)) in m.0.iter().enumerate() {
            if a.symbol() != v {
                continue;
            }
            let da = atom_derivative(a, v)?;
            if da.is_structurally_zero() {
                continue;
            }
            let mut rest: Vec<(Atom, u32)> = m.0.clone();
            if *e == 1 {
                rest.remove(idx);
            } else {
                rest[idx].1 -= 1;
            }
            let mut rest_poly = Poly::zero();
            rest_poly.terms.insert(Monomial(rest), c * q_int(*e as i64));
            out = out + Expr::from_poly(rest_poly) * da;
        }
    }
    Ok(out)
}

fn subst_poly(p: &Poly, map: &HashMap<Symbol, Expr>) -> Result<Expr, ExprError> {
    let mut out = Expr::zero();
    for (m, c) in &p.terms {
        let mut term = Expr::rational(c.clone());
        for (a, e) in &m.0 {
            let sym = a.symbol();
            let factor = match map.get(sym) {
                None => Expr::from_poly(Poly::atom(a.clone())),
                Some(value) => match a {
                    Atom::Var(_) => value.clone(),
                    _ => {
                        let renamed = rename_target(value).ok_or_else(|| {
                            ExprError::Unsupported(format!(
                                "substituting a non-symbol into the argument of `{sym}`"
                            ))
                        })?;
                        Expr::from_poly(Poly::atom(rename_atom(a, &renamed)))
                    }
                },
            };
            term = term * factor.powi(*e as i32)?;
        }
        out = out + term;
    }
    Ok(out)
}

fn rename_target(value: &Expr) -> Option<Symbol> {
    if !value.den.is_empty() || value.num.len() != 1 {
        return None;
    }
    let (m, c) = value.num.terms.iter().next()?;
    match (m.0.as_slice(), c.is_one()) {
        ([(Atom::Var(s), 1)], true) => Some(s.clone()),
        _ => None,
    }
}

fn rename_atom(a: &Atom, to: &Symbol) -> Atom {
    match a {
        Atom::Var(_) => Atom::Var(to.clone()),
        Atom::Opaque(o) => Atom::Opaque(OpaqueLeaf {
            func: o.func.clone(),
            order: o.order,
            arg: to.clone(),
        }),
        Atom::Radical(r) => Atom::Radical(Arc::new(Radical {
            var: to.clone(),
            shift: r.shift.clone(),
            q: r.q,
        })),
    }
}

pub(crate) fn eval_atom(a: &Atom, x: f64) -> Result<f64, ExprError> {
    match a {
        Atom::Var(_) => Ok(x),
        Atom::Opaque(o) => o.func.eval(o.order, x).ok_or_else(|| ExprError::OpaqueNoDerivative {
            name: o.func.name().to_string(),
            order: o.order,
        }),
        Atom::Radical(r) => {
            let base = x + r.shift.to_f64().unwrap_or(f64::NAN);
            if base < 0.0 && r.q % 2 == 0 {
                return Err(ExprError::OutsideDomain(format!("{}", Expr::from_poly(r.base()))));
            }
            Ok(base.signum() * base.abs().powf(1.0 / r.q as f64))
        }
    }
}

fn eval_poly(p: &Poly, lookup: &impl Fn(&Symbol) -> Option<f64>) -> Result<f64, ExprError> {
    let mut total = 0.0;
    for (m, c) in &p.terms {
        let mut term = c.to_f64().unwrap_or(f64::NAN);
        for (a, e) in &m.0 {
            let s = a.symbol();
            let x = lookup(s).ok_or_else(|| ExprError::UnboundSymbol(s.name().to_string()))?;
            term *= eval_atom(a, x)?.powi(*e as i32);
        }
        total += term;
    }
    Ok(total)
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        &self + &rhs
    }
}

impl<'a> Add<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn add(self, rhs: &'a Expr) -> Expr {
        if rhs.num.is_zero() {
            return self.clone();
        }
        if self.num.is_zero() {
            return rhs.clone();
        }
        if self.den == rhs.den {
            return Expr::normalized(self.num.add(&rhs.num), self.den.clone());
        }
        let common = Expr::common_denominator([self, rhs]);
        let num = self.numerator_over(&common).add(&rhs.numerator_over(&common));
        Expr::normalized(num, common)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        &self - &rhs
    }
}

impl<'a> Sub<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn sub(self, rhs: &'a Expr) -> Expr {
        self + &(-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        &self * &rhs
    }
}

impl<'a> Mul<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn mul(self, rhs: &'a Expr) -> Expr {
        if self.num.is_zero() || rhs.num.is_zero() {
            return Expr::zero();
        }
        let num = self.num.mul(&rhs.num);
        let mut den = self.den.clone();
        for (g, k) in &rhs.den {
            *den.entry(g.clone()).or_insert(0) += k;
        }
        if self.den.is_empty() || rhs.den.is_empty() {
            // cancellation can only happen across operands
            if self.den.is_empty() && rhs.den.is_empty() {
                return Expr { num, den };
            }
        }
        Expr::normalized(num, den)
    }
}

macro_rules! forward_mixed {
    ($tr:ident, $m:ident) => {
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                (&self).$m(rhs)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                self.$m(&rhs)
            }
        }
    };
}

forward_mixed!(Add, add);
forward_mixed!(Sub, sub);
forward_mixed!(Mul, mul);

/// Panics on division by zero or by unsupported radical denominators; use
/// [`Expr::checked_div`] for a fallible version.
impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        self.checked_div(&rhs).expect("expression division")
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Q> for Expr {
    fn from(c: Q) -> Self {
        Expr::rational(c)
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |acc, e| acc + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var("x")
    }
    fn y() -> Expr {
        Expr::var("y")
    }

    fn eta_fn() -> Arc<OpaqueFn> {
        OpaqueFn::new(
            "eta",
            vec![Arc::new(|t: f64| t.sin()), Arc::new(|t: f64| t.cos())],
        )
    }

    #[test]
    fn power_rule() {
        let d = (x() * x()).differentiate(&Symbol::new("x")).unwrap();
        assert!(d.equals(&(Expr::int(2) * x())));
    }

    #[test]
    fn product_rule_with_opaque() {
        let t = Symbol::new("t");
        let eta = Expr::opaque(&eta_fn(), &t);
        let d = (eta.clone() * Expr::sym(&t)).differentiate(&t).unwrap();
        let expected = eta + Expr::sym(&t) * Expr::opaque_derivative(&eta_fn(), &t, 1);
        assert!((d - expected).is_structurally_zero());
    }

    #[test]
    fn missing_opaque_derivative_is_reported() {
        let t = Symbol::new("t");
        let eta = Expr::opaque(&eta_fn(), &t);
        let err = eta.differentiate_n(&t, 2).unwrap_err();
        assert_eq!(
            err,
            ExprError::OpaqueNoDerivative {
                name: "eta".into(),
                order: 2
            }
        );
    }

    #[test]
    fn partial_in_second_variable() {
        let e = x() * x() * y() + y().powi(3).unwrap();
        let d = e.differentiate(&Symbol::new("y")).unwrap();
        assert!(d.equals(&(x() * x() + Expr::int(3) * y() * y())));
    }

    #[test]
    fn evaluation_and_division_by_zero() {
        let mut p = HashMap::new();
        p.insert(Symbol::new("x"), 3.0);
        p.insert(Symbol::new("y"), 4.0);
        assert_eq!((x() * x() + y() * y()).eval(&p).unwrap(), 25.0);
        let inv = x().recip().unwrap();
        let mut z = HashMap::new();
        z.insert(Symbol::new("x"), 0.0);
        assert_eq!(inv.eval(&z), Err(ExprError::DivisionByZero));
        assert_eq!(
            x().eval(&HashMap::new()),
            Err(ExprError::UnboundSymbol("x".into()))
        );
    }

    #[test]
    fn quaternion_drift_vanishes_at_point() {
        let q: Vec<Expr> = (0..4).map(|i| Expr::var(&format!("q{i}"))).collect();
        let e = &q[0] * &q[0] - &q[1] * &q[1] - &q[2] * &q[2] - &q[3] * &q[3];
        let vals = [1.0, 1.0, 0.0, 0.0];
        let p: HashMap<Symbol, f64> =
            (0..4).map(|i| (Symbol::new(&format!("q{i}")), vals[i])).collect();
        assert_eq!(e.eval(&p).unwrap(), 0.0);
    }

    #[test]
    fn zero_tests() {
        assert_eq!((x() * y() - y() * x()).is_zero(), ZeroTest::Zero);
        assert_eq!((x() * x() - x()).is_zero(), ZeroTest::NonZero);
        let t = Symbol::new("t");
        let eta = Expr::opaque(&eta_fn(), &t);
        assert_eq!((eta.clone() * Expr::zero()).is_zero(), ZeroTest::Zero);
        match (eta.clone() - Expr::int(2)).is_zero() {
            ZeroTest::Unknown { samples, max_abs } => {
                assert_eq!(samples, ZERO_TEST_SAMPLES);
                assert!(max_abs > 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rational_expressions_cancel() {
        let e = (x() * x() - Expr::one()).checked_div(&(x() - Expr::one())).unwrap();
        assert!(e.is_polynomial());
        assert!(e.equals(&(x() + Expr::one())));
        let s = x().recip().unwrap() + x().powi(-2).unwrap();
        let back = s * x().powi(2).unwrap();
        assert!(back.equals(&(x() + Expr::one())));
    }

    #[test]
    fn quotient_rule() {
        // d/dx (v^2 / x) = -v^2 / x^2
        let v = Expr::var("v");
        let e = (&v * &v).checked_div(&x()).unwrap();
        let d = e.differentiate(&Symbol::new("x")).unwrap();
        let expected = -(&v * &v).checked_div(&(x() * x())).unwrap();
        assert!(d.equals(&expected));
    }

    #[test]
    fn radicals_differentiate_and_multiply() {
        let t = Symbol::new("t");
        let u = Expr::sym(&t) + Expr::one();
        let half = u.pow_rational(&q_frac(1, 2)).unwrap();
        assert!((&half * &half).equals(&u));
        let three_halves = u.pow_rational(&q_frac(3, 2)).unwrap();
        let d = three_halves.differentiate(&t).unwrap();
        assert!(d.equals(&half.scale(&q_frac(3, 2))));
        let mut p = HashMap::new();
        p.insert(t.clone(), 3.0);
        assert!((three_halves.eval(&p).unwrap() - 8.0).abs() < 1e-12);
        // (4t + 4)^(1/2) = 2 (t + 1)^(1/2)
        let scaled = (u.scale(&q_int(4))).pow_rational(&q_frac(1, 2)).unwrap();
        assert!(scaled.equals(&half.scale(&q_int(2))));
        assert!(matches!(
            u.scale(&q_int(2)).pow_rational(&q_frac(1, 2)),
            Err(ExprError::Unsupported(_))
        ));
        // negative fractional exponent
        let inv_half = u.pow_rational(&q_frac(-1, 2)).unwrap();
        assert!((inv_half * half).equals(&Expr::one()));
    }

    #[test]
    fn substitution() {
        let e = x() * x() + y();
        let s = e.substitute(&Symbol::new("x"), &(y() + Expr::one())).unwrap();
        assert!(s.equals(&(y() * y() + Expr::int(3) * y() + Expr::one())));
        let t = Symbol::new("t");
        let eta = Expr::opaque(&eta_fn(), &t);
        let renamed = eta.substitute(&t, &Expr::var("s")).unwrap();
        assert!(renamed.depends_on(&Symbol::new("s")));
        assert!(eta.substitute(&t, &(Expr::var("s") * Expr::int(2))).is_err());
    }
}
