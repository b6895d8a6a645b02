//! Vector fields with symbolic components, Lie brackets and first prolongation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::expr::{Expr, ExprError, Symbol, ZeroTest, Q};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VfError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("field is not vertical: component along `{0}` is nonzero")]
    NotVertical(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// How partial derivatives are taken inside brackets.
///
/// The default differentiates symbolically. [`ChainRule`] additionally treats
/// some symbols as functions of others, which lets sampled coefficient
/// functions enter brackets through placeholder symbols.
pub trait Derivation {
    fn partial(&self, e: &Expr, v: &Symbol) -> Result<Expr, ExprError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Plain;

impl Derivation for Plain {
    fn partial(&self, e: &Expr, v: &Symbol) -> Result<Expr, ExprError> {
        e.differentiate(v)
    }
}

/// `d/dv = ∂/∂v + Σ D ∂/∂F` over registered `(F, D)` pairs for each `v`.
#[derive(Clone, Debug, Default)]
pub struct ChainRule {
    rules: BTreeMap<Symbol, Vec<(Symbol, Symbol)>>,
}

impl ChainRule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare `dF/dv = D`.
    pub fn depends(mut self, v: &Symbol, f: &Symbol, d: &Symbol) -> Self {
        self.rules.entry(v.clone()).or_default().push((f.clone(), d.clone()));
        self
    }
}

impl Derivation for ChainRule {
    fn partial(&self, e: &Expr, v: &Symbol) -> Result<Expr, ExprError> {
        let mut out = e.differentiate(v)?;
        if let Some(pairs) = self.rules.get(v) {
            for (f, d) in pairs {
                if e.depends_on(f) {
                    out = out + Expr::sym(d) * e.differentiate(f)?;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    vars: Vec<Symbol>,
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(vars: Vec<Symbol>, comps: Vec<Expr>) -> Result<Self, VfError> {
        if vars.len() != comps.len() {
            return Err(VfError::DimensionMismatch(format!(
                "{} variables but {} components",
                vars.len(),
                comps.len()
            )));
        }
        Ok(VectorField { vars, comps })
    }

    /// Convenience constructor from variable names.
    pub fn from_names(vars: &[&str], comps: Vec<Expr>) -> Result<Self, VfError> {
        VectorField::new(vars.iter().map(|v| Symbol::new(v)).collect(), comps)
    }

    pub fn zero(vars: &[Symbol]) -> Self {
        VectorField {
            vars: vars.to_vec(),
            comps: vec![Expr::zero(); vars.len()],
        }
    }

    /// `∂/∂vars[i]`.
    pub fn coordinate(vars: &[Symbol], i: usize) -> Self {
        let mut f = VectorField::zero(vars);
        f.comps[i] = Expr::one();
        f
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[Symbol] {
        &self.vars
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.comps[i]
    }

    pub fn component_of(&self, v: &Symbol) -> Option<&Expr> {
        self.vars.iter().position(|s| s == v).map(|i| &self.comps[i])
    }

    fn check_same(&self, other: &VectorField) -> Result<(), VfError> {
        if self.vars != other.vars {
            return Err(VfError::DimensionMismatch(format!(
                "variables {:?} vs {:?}",
                self.vars, other.vars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, VfError> {
        self.check_same(other)?;
        Ok(VectorField {
            vars: self.vars.clone(),
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField, VfError> {
        self.check_same(other)?;
        Ok(VectorField {
            vars: self.vars.clone(),
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect(),
        })
    }

    /// `g X` for a scalar expression `g`.
    pub fn scale(&self, g: &Expr) -> VectorField {
        VectorField {
            vars: self.vars.clone(),
            comps: self.comps.iter().map(|c| g * c).collect(),
        }
    }

    pub fn scale_q(&self, k: &Q) -> VectorField {
        VectorField {
            vars: self.vars.clone(),
            comps: self.comps.iter().map(|c| c.scale(k)).collect(),
        }
    }

    /// `Σ coeffs[a] fields[a]` over fields sharing `vars`.
    pub fn combination(vars: &[Symbol], coeffs: &[Expr], fields: &[VectorField]) -> Result<VectorField, VfError> {
        let mut acc = VectorField::zero(vars);
        for (c, f) in coeffs.iter().zip(fields) {
            if c.is_structurally_zero() {
                continue;
            }
            acc = acc.add(&f.scale(c))?;
        }
        Ok(acc)
    }

    /// Directional derivative `X(g)`.
    pub fn apply(&self, g: &Expr) -> Result<Expr, ExprError> {
        self.apply_with(g, &Plain)
    }

    pub fn apply_with(&self, g: &Expr, d: &dyn Derivation) -> Result<Expr, ExprError> {
        let mut out = Expr::zero();
        for (v, c) in self.vars.iter().zip(&self.comps) {
            if c.is_structurally_zero() {
                continue;
            }
            let dg = d.partial(g, v)?;
            if !dg.is_structurally_zero() {
                out = out + c * &dg;
            }
        }
        Ok(out)
    }

    /// `[X, Y]^i = Σ_j X^j ∂_j Y^i − Y^j ∂_j X^i`.
    pub fn lie_bracket(&self, other: &VectorField) -> Result<VectorField, VfError> {
        self.lie_bracket_with(other, &Plain)
    }

    pub fn lie_bracket_with(&self, other: &VectorField, d: &dyn Derivation) -> Result<VectorField, VfError> {
        self.check_same(other)?;
        let comps = (0..self.dim())
            .map(|i| Ok(self.apply_with(&other.comps[i], d)? - other.apply_with(&self.comps[i], d)?))
            .collect::<Result<Vec<_>, ExprError>>()?;
        Ok(VectorField {
            vars: self.vars.clone(),
            comps,
        })
    }

    /// `∂/∂t + X` on `(t, x)`. If `t` is already a variable its component is
    /// increased by one.
    pub fn autonomize(&self, t: &Symbol) -> VectorField {
        if let Some(i) = self.vars.iter().position(|v| v == t) {
            let mut out = self.clone();
            out.comps[i] = &out.comps[i] + &Expr::one();
            return out;
        }
        let mut vars = vec![t.clone()];
        vars.extend(self.vars.iter().cloned());
        let mut comps = vec![Expr::one()];
        comps.extend(self.comps.iter().cloned());
        VectorField { vars, comps }
    }

    /// Same components viewed on a larger variable list (new components zero).
    pub fn embed(&self, vars: &[Symbol]) -> Result<VectorField, VfError> {
        let mut out = VectorField::zero(vars);
        for (v, c) in self.vars.iter().zip(&self.comps) {
            let i = vars
                .iter()
                .position(|s| s == v)
                .ok_or_else(|| VfError::DimensionMismatch(format!("`{v}` missing from target variables")))?;
            out.comps[i] = c.clone();
        }
        Ok(out)
    }

    pub fn is_zero_exact(&self) -> bool {
        self.comps.iter().all(Expr::is_structurally_zero)
    }

    /// Aggregated zero test: `Zero` iff every component is zero.
    pub fn is_zero(&self) -> ZeroTest {
        let mut unknown: Option<ZeroTest> = None;
        for c in &self.comps {
            match c.is_zero() {
                ZeroTest::Zero => {}
                ZeroTest::NonZero => return ZeroTest::NonZero,
                u @ ZeroTest::Unknown { .. } => {
                    unknown = Some(match (unknown, u) {
                        (Some(ZeroTest::Unknown { samples, max_abs: a }), ZeroTest::Unknown { max_abs: b, .. }) => {
                            ZeroTest::Unknown {
                                samples,
                                max_abs: a.max(b),
                            }
                        }
                        (_, u) => u,
                    })
                }
            }
        }
        unknown.unwrap_or(ZeroTest::Zero)
    }

    pub fn substitute_many(&self, map: &HashMap<Symbol, Expr>) -> Result<VectorField, ExprError> {
        Ok(VectorField {
            vars: self.vars.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| c.substitute_many(map))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn eval(&self, point: &HashMap<Symbol, f64>) -> Result<Vec<f64>, ExprError> {
        self.comps.iter().map(|c| c.eval(point)).collect()
    }

    pub fn has_opaque(&self) -> bool {
        self.comps.iter().any(Expr::has_opaque)
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in self.vars.iter().zip(&self.comps) {
            if c.is_structurally_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({c})*d/d{v}")?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Name of the first-order jet coordinate `∂x/∂t`.
pub fn jet_symbol(x: &Symbol, t: &Symbol) -> Symbol {
    Symbol::new(&format!("{x}_{t}"))
}

/// A vector field on the first jet space with coordinates
/// `(t_1..t_s, x_1..x_n, x_{1,1}..x_{n,s})`, jet coordinates ordered by
/// dependent variable first.
#[derive(Clone, Debug, PartialEq)]
pub struct JetVectorField {
    s: usize,
    n: usize,
    field: VectorField,
}

impl JetVectorField {
    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn times(&self) -> &[Symbol] {
        &self.field.vars[..self.s]
    }

    pub fn deps(&self) -> &[Symbol] {
        &self.field.vars[self.s..self.s + self.n]
    }

    pub fn jet_vars(&self) -> &[Symbol] {
        &self.field.vars[self.s + self.n..]
    }

    /// Component along `x_{j,l}`.
    pub fn jet_component(&self, j: usize, l: usize) -> &Expr {
        &self.field.comps[self.s + self.n + j * self.s + l]
    }

    /// Drop the jet components.
    pub fn project(&self) -> VectorField {
        VectorField {
            vars: self.field.vars[..self.s + self.n].to_vec(),
            comps: self.field.comps[..self.s + self.n].to_vec(),
        }
    }

    pub fn lie_bracket(&self, other: &JetVectorField) -> Result<JetVectorField, VfError> {
        if self.s != other.s || self.n != other.n {
            return Err(VfError::DimensionMismatch("jet orders differ".into()));
        }
        Ok(JetVectorField {
            s: self.s,
            n: self.n,
            field: self.field.lie_bracket(&other.field)?,
        })
    }
}

/// First prolongation of a vertical field on `(t_1..t_s, x_1..x_n)`.
pub fn prolong_first(y: &VectorField, s: usize) -> Result<JetVectorField, VfError> {
    prolong_first_with(y, s, &Plain)
}

pub fn prolong_first_with(y: &VectorField, s: usize, d: &dyn Derivation) -> Result<JetVectorField, VfError> {
    if s > y.dim() {
        return Err(VfError::DimensionMismatch(format!("{s} independent variables in a {}-dimensional field", y.dim())));
    }
    for l in 0..s {
        if y.comps[l].is_zero() != ZeroTest::Zero {
            return Err(VfError::NotVertical(y.vars[l].to_string()));
        }
    }
    let times = &y.vars[..s];
    let deps = &y.vars[s..];
    let n = deps.len();
    let mut vars = y.vars.clone();
    let mut comps = y.comps.clone();
    let jets: Vec<Vec<Symbol>> = deps
        .iter()
        .map(|x| times.iter().map(|t| jet_symbol(x, t)).collect())
        .collect();
    for k in 0..n {
        let eta = &y.comps[s + k];
        for (q, tq) in times.iter().enumerate() {
            let mut c = d.partial(eta, tq)?;
            for (j, xj) in deps.iter().enumerate() {
                let de = d.partial(eta, xj)?;
                if !de.is_structurally_zero() {
                    c = c + de * Expr::sym(&jets[j][q]);
                }
            }
            vars.push(jets[k][q].clone());
            comps.push(c);
        }
    }
    Ok(JetVectorField {
        s,
        n,
        field: VectorField { vars, comps },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::ParseContext;

    fn p(s: &str) -> Expr {
        ParseContext::new().parse(s).unwrap()
    }

    fn f1(c: &str) -> VectorField {
        VectorField::from_names(&["x"], vec![p(c)]).unwrap()
    }

    fn assert_field_eq(a: &VectorField, b: &VectorField) {
        assert_eq!(a.sub(b).unwrap().is_zero(), ZeroTest::Zero, "{a} != {b}");
    }

    #[test]
    fn riccati_brackets() {
        assert_field_eq(&f1("1").lie_bracket(&f1("x")).unwrap(), &f1("1"));
        assert_field_eq(&f1("x^2").lie_bracket(&f1("x")).unwrap(), &f1("-x^2"));
    }

    #[test]
    fn mismatched_variables() {
        let a = f1("x");
        let b = VectorField::from_names(&["y"], vec![p("y")]).unwrap();
        assert!(matches!(a.lie_bracket(&b), Err(VfError::DimensionMismatch(_))));
        assert!(VectorField::from_names(&["x", "y"], vec![p("1")]).is_err());
    }

    #[test]
    fn autonomization() {
        let t = Symbol::new("t");
        let x = VectorField::from_names(&["x", "v"], vec![p("v"), p("0")]).unwrap();
        let a = x.autonomize(&t);
        assert_eq!(a.vars()[0], t);
        assert!(a.component(0).equals(&Expr::one()));
        assert!(a.component(1).equals(&p("v")));
        let z = VectorField::zero(&[Symbol::new("x")]).autonomize(&t);
        assert!(z.component(0).equals(&Expr::one()) && z.component(1).is_structurally_zero());
    }

    #[test]
    fn prolongation_examples() {
        let y = VectorField::from_names(&["t", "x"], vec![p("0"), p("x")]).unwrap();
        let j = prolong_first(&y, 1).unwrap();
        assert_eq!(j.jet_vars()[0].name(), "x_t");
        assert!(j.jet_component(0, 0).equals(&p("x_t")));
        let y = VectorField::from_names(&["t", "x"], vec![p("0"), p("t^3")]).unwrap();
        let j = prolong_first(&y, 1).unwrap();
        assert!(j.jet_component(0, 0).equals(&p("3*t^2")));
        assert_eq!(j.project(), y);
        let bad = VectorField::from_names(&["t", "x"], vec![p("1"), p("x")]).unwrap();
        assert!(matches!(prolong_first(&bad, 1), Err(VfError::NotVertical(_))));
    }

    #[test]
    fn chain_rule_brackets() {
        // Y = F(t) d/dx against d/dt: [d/dt, Y] = F'(t) d/dx
        let t = Symbol::new("t");
        let f = Symbol::new("F");
        let d = Symbol::new("D");
        let y = VectorField::from_names(&["t", "x"], vec![p("0"), p("F*x")]).unwrap();
        let dt = VectorField::coordinate(y.vars(), 0);
        let rule = ChainRule::new().depends(&t, &f, &d);
        let b = dt.lie_bracket_with(&y, &rule).unwrap();
        assert!(b.component(1).equals(&p("D*x")));
    }
}
