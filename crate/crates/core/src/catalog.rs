//! Named Lie systems with their algebras, singular loci and known symmetries.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::expr::parse::{parse_rational, ParseContext, ParseError};
use crate::expr::{q_frac, q_int, Expr, ExprError, OpaqueFn, OpaqueRegistry, ScalarFn, Symbol, Q};
use crate::liealg::{LieAlgError, LieAlgebraBasis, StructureTensor};
use crate::liesys::{LieSysError, LieSystemDef, SymmetryCandidate};
use crate::pdesys::{PDELieSystemDef, PdeError};
use crate::vectorfield::{VectorField, VfError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CatalogError {
    #[error("unknown catalog entry `{0}` (see `liesym list`)")]
    UnknownName(String),
    #[error("bad parameter: {0}")]
    BadParams(String),
    #[error("special-function fixture missing: {0}")]
    FixtureMissing(&'static str),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Algebra(#[from] LieAlgError),
    #[error(transparent)]
    Field(#[from] VfError),
    #[error(transparent)]
    System(#[from] LieSysError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

pub const NAMES: [&str; 10] = [
    "riccati",
    "cayley_klein",
    "quaternionic",
    "dbh",
    "kummer_schwarz",
    "buchdahl",
    "aff_generic",
    "painleve_ince",
    "partial_riccati",
    "sl2_generic",
];

/// String-valued parameters plus opaque functions referenced as `@name(t)`.
///
/// The functions of [`default_registry`] are always available unless
/// overridden.
#[derive(Clone, Debug, Default)]
pub struct Params {
    pub values: BTreeMap<String, String>,
    pub registry: OpaqueRegistry,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, key: &str, value: &str) -> Self {
        self.values.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_fn(mut self, f: Arc<OpaqueFn>) -> Self {
        self.registry.insert(f);
        self
    }

    fn expr(&self, key: &str, default: &str, symbols: &[&str]) -> Result<Expr, CatalogError> {
        let src = self.values.get(key).map_or(default, String::as_str);
        let mut registry = default_registry();
        for name in self.registry.names() {
            registry.insert(self.registry.get(name).expect("listed").clone());
        }
        let ctx = ParseContext {
            registry,
            ..ParseContext::new()
        }
        .restrict_symbols(symbols.iter().copied());
        ctx.parse(src)
            .map_err(|e| CatalogError::BadParams(format!("{key} = `{src}`: {e}")))
    }

    fn rational(&self, key: &str, default: &str) -> Result<Q, CatalogError> {
        let src = self.values.get(key).map_or(default, String::as_str);
        parse_rational(src).map_err(|e| CatalogError::BadParams(format!("{key} = `{src}`: {e}")))
    }

    fn check_known(&self, allowed: &[&str]) -> Result<(), CatalogError> {
        for k in self.values.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(CatalogError::BadParams(format!(
                    "unknown parameter `{k}` (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum System {
    Ode(LieSystemDef),
    Pde(PDELieSystemDef),
}

/// A closed-form symmetry valid for the entry's system under `gauge`.
#[derive(Clone, Debug)]
pub struct Family {
    pub label: String,
    pub gauge: Expr,
    pub candidate: SymmetryCandidate,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub system: System,
    /// `None` when only closure is asserted.
    pub expected: Option<StructureTensor>,
    pub excluded: Vec<String>,
    /// Box for state-space sampling.
    pub sample_box: Vec<(f64, f64)>,
    pub families: Vec<Family>,
}

impl CatalogEntry {
    pub fn ode(&self) -> Option<&LieSystemDef> {
        match &self.system {
            System::Ode(s) => Some(s),
            System::Pde(_) => None,
        }
    }

    pub fn pde(&self) -> Option<&PDELieSystemDef> {
        match &self.system {
            System::Pde(s) => Some(s),
            System::Ode(_) => None,
        }
    }

    pub fn basis_fields(&self) -> &[VectorField] {
        match &self.system {
            System::Ode(s) => s.basis.fields(),
            System::Pde(s) => s.fields(),
        }
    }

    pub fn tensor(&self) -> &StructureTensor {
        match &self.system {
            System::Ode(s) => s.tensor(),
            System::Pde(s) => s.tensor(),
        }
    }
}

pub fn summary(name: &str) -> Option<&'static str> {
    Some(match name {
        "riccati" => "Riccati equation dx/dt = b1 + b2 x + b3 x^2",
        "cayley_klein" => "Cayley-Klein Riccati equation on the plane, iota^2 in {-1, 0, 1}",
        "quaternionic" => "quaternionic Riccati equation with real coefficients",
        "dbh" => "generalised Darboux-Brioschi-Halphen system",
        "kummer_schwarz" => "second-order Kummer-Schwarz equation in first-order form",
        "buchdahl" => "Buchdahl equation in first-order form",
        "aff_generic" => "affine-line system a(t) d/dx + b(t) x d/dx",
        "painleve_ince" => "Painleve-Ince equation x'' + 3 x x' + x^3 = 0 in first-order form",
        "partial_riccati" => "partial Riccati equation in two times (integrable fixture)",
        "sl2_generic" => "generic sl(2) system with opaque coefficients",
        _ => return None,
    })
}

fn field(vars: &[&str], comps: &[&str]) -> Result<VectorField, CatalogError> {
    let ctx = ParseContext::new().restrict_symbols(vars.iter().copied());
    let comps = comps.iter().map(|c| ctx.parse(c)).collect::<Result<Vec<_>, _>>()?;
    Ok(VectorField::from_names(vars, comps)?)
}

fn t() -> Symbol {
    Symbol::new("t")
}

/// Smooth functions used as generic coefficients: `cos`, `sin`, `exp`, with
/// derivatives of every order up to 6.
pub fn default_registry() -> OpaqueRegistry {
    let cyc = |phase: usize| -> Vec<ScalarFn> {
        (0..=6)
            .map(|k| {
                let f: ScalarFn = match (phase + k) % 4 {
                    0 => Arc::new(f64::cos),
                    1 => Arc::new(|x: f64| -x.sin()),
                    2 => Arc::new(|x: f64| -x.cos()),
                    _ => Arc::new(f64::sin),
                };
                f
            })
            .collect()
    };
    let exp: Vec<ScalarFn> = (0..=6).map(|_| Arc::new(f64::exp) as ScalarFn).collect();
    OpaqueRegistry::new()
        .with(OpaqueFn::new("eta", cyc(0)))
        .with(OpaqueFn::new("b1", cyc(0)))
        // sin = cos shifted by three quarter turns
        .with(OpaqueFn::new("b2", cyc(3)))
        .with(OpaqueFn::new("b3", exp))
}

fn sl2_coeffs(p: &Params, defaults: [&str; 3]) -> Result<Vec<Expr>, CatalogError> {
    Ok(vec![
        p.expr("b1", defaults[0], &["t"])?,
        p.expr("b2", defaults[1], &["t"])?,
        p.expr("b3", defaults[2], &["t"])?,
    ])
}

fn gauge(p: &Params) -> Result<Expr, CatalogError> {
    p.expr("b0", "0", &["t"])
}

/// Build a catalog entry.
pub fn make(name: &str, params: &Params) -> Result<CatalogEntry, CatalogError> {
    let summary = summary(name).ok_or_else(|| CatalogError::UnknownName(name.to_string()))?;
    let sl2_keys = ["b1", "b2", "b3", "b0", "eta"];
    let mut expected = Some(StructureTensor::sl2());
    let mut excluded = Vec::new();
    let mut families = Vec::new();
    let (system, sample_box): (System, Vec<(f64, f64)>) = match name {
        "riccati" => {
            params.check_known(&sl2_keys)?;
            let eta = params.values.get("eta").map_or("t", String::as_str).to_string();
            let basis = LieAlgebraBasis::new(vec![
                field(&["x"], &["1"])?,
                field(&["x"], &["x"])?,
                field(&["x"], &["x^2"])?,
            ])?;
            let sys = LieSystemDef::new(basis, sl2_coeffs(params, [&eta, "0", "1"])?, t())?.with_gauge(gauge(params)?);
            (System::Ode(sys), vec![(-1.0, 1.0)])
        }
        "cayley_klein" => {
            let mut keys = sl2_keys.to_vec();
            keys.push("iota2");
            params.check_known(&keys)?;
            let i2 = params.rational("iota2", "-1")?;
            if ![q_int(-1), q_int(0), q_int(1)].contains(&i2) {
                return Err(CatalogError::BadParams(format!("iota2 must be -1, 0 or 1, got {i2}")));
            }
            let x3 = format!("x^2 + ({i2})*y^2");
            let basis = LieAlgebraBasis::new(vec![
                field(&["x", "y"], &["1", "0"])?,
                field(&["x", "y"], &["x", "y"])?,
                field(&["x", "y"], &[&x3, "2*x*y"])?,
            ])?;
            let eta = params.values.get("eta").map_or("t", String::as_str).to_string();
            let sys = LieSystemDef::new(basis, sl2_coeffs(params, [&eta, "0", "1"])?, t())?.with_gauge(gauge(params)?);
            (System::Ode(sys), vec![(-1.0, 1.0); 2])
        }
        "quaternionic" => {
            params.check_known(&sl2_keys)?;
            let q = ["q0", "q1", "q2", "q3"];
            let basis = LieAlgebraBasis::new(vec![
                field(&q, &["1", "0", "0", "0"])?,
                field(&q, &["q0", "q1", "q2", "q3"])?,
                field(&q, &["q0^2 - q1^2 - q2^2 - q3^2", "2*q0*q1", "2*q0*q2", "2*q0*q3"])?,
            ])?;
            let eta = params.values.get("eta").map_or("t", String::as_str).to_string();
            let sys = LieSystemDef::new(basis, sl2_coeffs(params, [&eta, "0", "1"])?, t())?.with_gauge(gauge(params)?);
            (System::Ode(sys), vec![(-1.0, 1.0); 4])
        }
        "dbh" => {
            let mut keys = sl2_keys.to_vec();
            keys.extend(["alpha1", "alpha2", "alpha3"]);
            params.check_known(&keys)?;
            let al: Vec<Q> = ["alpha1", "alpha2", "alpha3"]
                .iter()
                .map(|k| params.rational(k, "0"))
                .collect::<Result<_, _>>()?;
            let tau2 = format!(
                "({})*(w1 - w2)*(w3 - w1) + ({})*(w2 - w3)*(w1 - w2) + ({})*(w3 - w1)*(w2 - w3)",
                &al[0] * &al[0],
                &al[1] * &al[1],
                &al[2] * &al[2]
            );
            let w = ["w1", "w2", "w3"];
            let x3 = [
                format!("-(w3*w2 - w1*(w3 + w2) + {tau2})"),
                format!("-(w1*w3 - w2*(w1 + w3) + {tau2})"),
                format!("-(w2*w1 - w3*(w2 + w1) + {tau2})"),
            ];
            let basis = LieAlgebraBasis::new(vec![
                field(&w, &["1", "1", "1"])?,
                field(&w, &["w1", "w2", "w3"])?,
                field(&w, &[&x3[0], &x3[1], &x3[2]])?,
            ])?;
            let sys = LieSystemDef::new(basis, sl2_coeffs(params, ["0", "0", "-1"])?, t())?.with_gauge(gauge(params)?);
            let default_b = sys.coeffs.iter().zip(["0", "0", "-1"]).all(|(c, d)| c.equals(&d.parse::<i64>().map(Expr::int).unwrap()));
            if default_b {
                for (label, mode) in [
                    ("b0 = 0", DbhMode::B0Zero),
                    ("b0 = c0", DbhMode::B0Const),
                    ("b0 = c0 t", DbhMode::B0Linear),
                ] {
                    let ps = [q_int(1), q_int(-1), q_frac(1, 2), q_int(2), q_int(1)];
                    families.push(Family {
                        label: format!("{label}: lambda = (1, -1, 1/2), t0 = 2, c0 = 1"),
                        gauge: mode.gauge(&ps[4]),
                        candidate: dbh_symmetry_family(mode, &ps[0], &ps[1], &ps[2], &ps[3], &ps[4]),
                    });
                }
            }
            (System::Ode(sys), vec![(1.0, 2.0); 3])
        }
        "kummer_schwarz" => {
            let mut keys = sl2_keys.to_vec();
            keys.push("c0");
            params.check_known(&keys)?;
            let c0 = params.rational("c0", "1")?;
            let m3 = format!("3/2*v^2/x - 2*({c0})*x^3");
            let basis = LieAlgebraBasis::new(vec![
                field(&["x", "v"], &["0", "2*x"])?,
                field(&["x", "v"], &["x", "2*v"])?,
                field(&["x", "v"], &["v", &m3])?,
            ])?;
            let eta = params.values.get("eta").map_or("t", String::as_str).to_string();
            let sys = LieSystemDef::new(basis, sl2_coeffs(params, [&eta, "0", "1"])?, t())?
                .with_gauge(gauge(params)?)
                .with_excluded(vec![Expr::var("x")]);
            excluded.push("x = 0".to_string());
            (System::Ode(sys), vec![(1.0, 2.0), (-1.0, 1.0)])
        }
        "buchdahl" => {
            params.check_known(&["f", "a2", "b0"])?;
            let f = params.expr("f", "x", &["x"])?;
            let x1v = format!("({f})*v^2");
            let basis = LieAlgebraBasis::new(vec![field(&["x", "v"], &["v", &x1v])?, field(&["x", "v"], &["0", "-v"])?])?;
            let a2 = params.expr("a2", "t", &["t"])?;
            let sys = LieSystemDef::new(basis, vec![Expr::one(), -a2], t())?.with_gauge(gauge(params)?);
            expected = Some(StructureTensor::aff());
            (System::Ode(sys), vec![(0.5, 1.5), (-1.0, 1.0)])
        }
        "aff_generic" => {
            params.check_known(&["a", "b", "b0"])?;
            let basis = LieAlgebraBasis::new(vec![field(&["x"], &["1"])?, field(&["x"], &["x"])?])?;
            let coeffs = vec![params.expr("a", "1", &["t"])?, params.expr("b", "t", &["t"])?];
            let sys = LieSystemDef::new(basis, coeffs, t())?.with_gauge(gauge(params)?);
            expected = Some(StructureTensor::aff());
            (System::Ode(sys), vec![(-1.0, 1.0)])
        }
        "painleve_ince" => {
            params.check_known(&[])?;
            let xv = ["x", "v"];
            let fields = vec![
                field(&xv, &["v", "-(3*x*v + x^3)"])?,
                field(&xv, &["0", "1"])?,
                field(&xv, &["-1", "3*x"])?,
                field(&xv, &["x", "-2*x^2"])?,
                field(&xv, &["v + 2*x^2", "-x*(v + 3*x^2)"])?,
                field(&xv, &["2*x*(v + x^2)", "2*(v^2 - x^4)"])?,
                field(&xv, &["1", "-x"])?,
                field(&xv, &["2*x", "4*v"])?,
            ];
            let basis = LieAlgebraBasis::new(fields)?;
            let mut coeffs = vec![Expr::zero(); 8];
            coeffs[0] = Expr::one();
            let sys = LieSystemDef::new(basis, coeffs, t())?;
            let mut f = vec![Expr::zero(); 9];
            f[6] = Expr::one();
            families.push(Family {
                label: "X6 (commutes with the drift X1)".into(),
                gauge: Expr::zero(),
                candidate: SymmetryCandidate::closed(f),
            });
            expected = None;
            (System::Ode(sys), vec![(-1.0, 1.0); 2])
        }
        "partial_riccati" => {
            params.check_known(&["lambda", "perturb"])?;
            let lam = params.rational("lambda", "1/2")?;
            let eps = params.rational("perturb", "0")?;
            let basis = LieAlgebraBasis::new(vec![
                field(&["x"], &["1"])?,
                field(&["x"], &["x"])?,
                field(&["x"], &["x^2"])?,
            ])?;
            let ctx = ParseContext::new().restrict_symbols(["t1", "t2"]);
            let u = format!("(t1 + ({lam})*t2)");
            let g = [format!("1/2 + 1/4*{u}"), format!("-{u}"), format!("1/4*{u}")];
            let mut coeffs = Vec::new();
            for gi in &g {
                let e = ctx.parse(gi)?;
                coeffs.push(vec![e.clone(), e.scale(&lam)]);
            }
            if !eps.is_zero() {
                coeffs[0][1] = &coeffs[0][1] + &Expr::var("t1").scale(&eps);
            }
            let sys = PDELieSystemDef::new(&basis, coeffs, vec![Symbol::new("t1"), Symbol::new("t2")])?;
            (System::Pde(sys), vec![(-1.0, 1.0)])
        }
        "sl2_generic" => {
            params.check_known(&["b1", "b2", "b3", "b0"])?;
            let basis = LieAlgebraBasis::new(vec![
                field(&["x"], &["1"])?,
                field(&["x"], &["x"])?,
                field(&["x"], &["x^2"])?,
            ])?;
            let sys = LieSystemDef::new(basis, sl2_coeffs(params, ["@b1(t)", "@b2(t)", "@b3(t)"])?, t())?
                .with_gauge(gauge(params)?);
            (System::Ode(sys), vec![(-1.0, 1.0)])
        }
        _ => unreachable!("summary() covers every name"),
    };
    Ok(CatalogEntry {
        name: NAMES.iter().find(|n| **n == name).expect("known name"),
        summary,
        system,
        expected,
        excluded,
        sample_box,
        families,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbhMode {
    B0Zero,
    B0Const,
    B0Linear,
}

impl DbhMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "b0_zero" => Some(DbhMode::B0Zero),
            "b0_const" => Some(DbhMode::B0Const),
            "b0_linear" => Some(DbhMode::B0Linear),
            _ => None,
        }
    }

    /// The gauge `b_0(t)` the family belongs to.
    pub fn gauge(self, c0: &Q) -> Expr {
        match self {
            DbhMode::B0Zero => Expr::zero(),
            DbhMode::B0Const => Expr::rational(c0.clone()),
            DbhMode::B0Linear => Expr::var("t").scale(c0),
        }
    }
}

impl fmt::Display for DbhMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DbhMode::B0Zero => "b0_zero",
            DbhMode::B0Const => "b0_const",
            DbhMode::B0Linear => "b0_linear",
        })
    }
}

/// Closed-form DBH symmetries `f_0 ∂_t + λ_1 X_1 - (2λ_1 t - λ_2) X_2 + f_3 X_3`:
///
/// ```text
/// b0 = 0      f0 = t0             f3 = λ1 t² - λ2 t + λ3
/// b0 = c0     f0 = c0 t + t0      f3 = λ1 t² - (λ2 + c0) t + λ3
/// b0 = c0 t   f0 = t0 + c0 t²/2   f3 = λ1 t² - (λ2 + c0 t/2) t + λ3
/// ```
pub fn dbh_symmetry_family(mode: DbhMode, l1: &Q, l2: &Q, l3: &Q, t0: &Q, c0: &Q) -> SymmetryCandidate {
    let t = Expr::var("t");
    let q = |v: &Q| Expr::rational(v.clone());
    let t2 = &t * &t;
    let f1 = q(l1);
    let f2 = q(l2) - t.scale(&(l1 * q_int(2)));
    let base3 = t2.scale(l1) - t.scale(l2) + q(l3);
    let (f0, f3) = match mode {
        DbhMode::B0Zero => (q(t0), base3),
        DbhMode::B0Const => (t.scale(c0) + q(t0), base3 - t.scale(c0)),
        DbhMode::B0Linear => (q(t0) + t2.scale(&(c0 * q_frac(1, 2))), base3 - t2.scale(&(c0 * q_frac(1, 2)))),
    };
    SymmetryCandidate::closed(vec![f0, f1, f2, f3])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Table1Row {
    /// `η = k/(at+b)`, Bessel functions.
    RationalPole,
    /// `η = k/(at+b)²`, powers.
    RationalPoleSq,
    /// `η = at+b`, Airy functions.
    Linear,
}

impl Table1Row {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rational_pole" => Some(Table1Row::RationalPole),
            "rational_pole_sq" => Some(Table1Row::RationalPoleSq),
            "linear" => Some(Table1Row::Linear),
            _ => None,
        }
    }
}

/// Evaluators `(value, derivative)` for the special functions used by the
/// Bessel and Airy rows.
#[derive(Clone, Default)]
pub struct SpecialFunctions {
    pub bessel_j1: Option<(ScalarFn, ScalarFn)>,
    pub bessel_y1: Option<(ScalarFn, ScalarFn)>,
    pub airy_ai: Option<(ScalarFn, ScalarFn)>,
    pub airy_bi: Option<(ScalarFn, ScalarFn)>,
}

impl fmt::Debug for SpecialFunctions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpecialFunctions")
            .field("bessel_j1", &self.bessel_j1.is_some())
            .field("bessel_y1", &self.bessel_y1.is_some())
            .field("airy_ai", &self.airy_ai.is_some())
            .field("airy_bi", &self.airy_bi.is_some())
            .finish()
    }
}

/// `η(t)` of a row.
pub fn table1_eta(row: Table1Row, a: &Q, b: &Q, k: &Q) -> Result<Expr, CatalogError> {
    let u = Expr::var("t").scale(a) + Expr::rational(b.clone());
    Ok(match row {
        Table1Row::RationalPole => u.recip()?.scale(k),
        Table1Row::RationalPoleSq => u.powi(-2)?.scale(k),
        Table1Row::Linear => u,
    })
}

fn to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Exact square root of a non-negative rational, if it is rational.
fn rational_sqrt(q: &Q) -> Option<Q> {
    if q.is_negative() {
        return None;
    }
    let (n, d) = (q.numer(), q.denom());
    let (rn, rd) = (n.sqrt(), d.sqrt());
    (&rn * &rn == *n && &rd * &rd == *d).then(|| Q::new(rn, rd))
}

/// Solution `y` of `y'' + η y = 0` as an opaque function with derivatives up
/// to order 4, from `y`, `y'` and `η, η', η''`.
fn ode_solution_fn(
    name: &str,
    y: impl Fn(f64) -> f64 + Send + Sync + 'static,
    dy: impl Fn(f64) -> f64 + Send + Sync + 'static,
    eta: [Arc<dyn Fn(f64) -> f64 + Send + Sync>; 3],
) -> Arc<OpaqueFn> {
    let y = Arc::new(y);
    let dy = Arc::new(dy);
    let [e0, e1, e2] = eta;
    let d2 = {
        let (y, e0) = (y.clone(), e0.clone());
        Arc::new(move |t: f64| -e0(t) * y(t))
    };
    let d3 = {
        let (y, dy, e0, e1) = (y.clone(), dy.clone(), e0.clone(), e1.clone());
        Arc::new(move |t: f64| -e1(t) * y(t) - e0(t) * dy(t))
    };
    let d4 = {
        let (y, dy, d2c) = (y.clone(), dy.clone(), d2.clone());
        Arc::new(move |t: f64| -e2(t) * y(t) - 2.0 * e1(t) * dy(t) - e0(t) * d2c(t))
    };
    OpaqueFn::new(name, vec![y, dy, d2, d3, d4])
}

/// `f_3(t)` of a row with `f_0 = k`, `b_0 = 0`.
///
/// The power row is symbolic when its exponents are rational and uses an
/// opaque power otherwise; the Bessel and Airy rows use the fixtures. For
/// the Bessel row the argument is `2 sqrt(k (at+b)) / a`.
#[allow(clippy::too_many_arguments)]
pub fn table1_f3(
    row: Table1Row,
    a: &Q,
    b: &Q,
    k: &Q,
    c: [&Q; 3],
    fixtures: &SpecialFunctions,
) -> Result<Expr, CatalogError> {
    if a.is_zero() {
        return Err(CatalogError::BadParams("a must be nonzero".into()));
    }
    let ts = Symbol::new("t");
    let kk = Expr::rational(k.clone());
    let (af, bf, kf) = (to_f64(a), to_f64(b), to_f64(k));
    match row {
        Table1Row::RationalPoleSq => {
            if b.is_zero() {
                return Err(CatalogError::BadParams("b must be nonzero for the particular term".into()));
            }
            let disc = a * a - k * q_int(4);
            if disc.is_negative() {
                return Err(CatalogError::BadParams("a^2 - 4k must be non-negative".into()));
            }
            let base = Expr::var("t") + Expr::rational(b / a);
            let particular = Expr::var("t").scale(&(-(k * a) / b));
            let mut out = particular + (Expr::var("t").scale(a) + Expr::rational(b.clone())).scale(c[2]);
            match rational_sqrt(&disc) {
                Some(root) => {
                    for (ci, e) in [(c[0], (a + &root) / a), (c[1], (a - &root) / a)] {
                        if !ci.is_zero() {
                            out = out + base.pow_rational(&e)?.scale(ci);
                        }
                    }
                }
                None => {
                    let root = to_f64(&disc).sqrt();
                    let shift = bf / af;
                    for (i, (ci, e)) in [(c[0], (af + root) / af), (c[1], (af - root) / af)].into_iter().enumerate() {
                        if ci.is_zero() {
                            continue;
                        }
                        let derivs: Vec<ScalarFn> = (0..=5)
                            .map(|n| {
                                let coef: f64 = (0..n).map(|j| e - j as f64).product();
                                Arc::new(move |t: f64| coef * (t + shift).powf(e - n as f64)) as ScalarFn
                            })
                            .collect();
                        let leaf = OpaqueFn::new(&format!("pow{}", i + 1), derivs);
                        out = out + Expr::opaque(&leaf, &ts).scale(ci);
                    }
                }
            }
            Ok(out)
        }
        Table1Row::RationalPole => {
            if c.iter().all(|v| v.is_zero()) {
                return Ok(kk);
            }
            let (j, jp) = fixtures.bessel_j1.clone().ok_or(CatalogError::FixtureMissing("Bessel J1"))?;
            let (y, yp) = fixtures.bessel_y1.clone().ok_or(CatalogError::FixtureMissing("Bessel Y1"))?;
            if !(kf > 0.0) {
                return Err(CatalogError::BadParams("k must be positive for the Bessel row".into()));
            }
            let eta: [Arc<dyn Fn(f64) -> f64 + Send + Sync>; 3] = [
                Arc::new(move |t: f64| kf / (af * t + bf)),
                Arc::new(move |t: f64| -kf * af / (af * t + bf).powi(2)),
                Arc::new(move |t: f64| 2.0 * kf * af * af / (af * t + bf).powi(3)),
            ];
            let mk = |name: &str, z: ScalarFn, zp: ScalarFn| {
                let (z2, zp2) = (z.clone(), zp);
                ode_solution_fn(
                    name,
                    move |t| {
                        let u = af * t + bf;
                        u.sqrt() * z(2.0 * (kf * u).sqrt() / af)
                    },
                    move |t| {
                        let u = af * t + bf;
                        let arg = 2.0 * (kf * u).sqrt() / af;
                        af * z2(arg) / (2.0 * u.sqrt()) + kf.sqrt() * zp2(arg)
                    },
                    eta.clone(),
                )
            };
            let y1 = Expr::opaque(&mk("besselJ", j, jp), &ts);
            let y2 = Expr::opaque(&mk("besselY", y, yp), &ts);
            Ok(kk + (&y1 * &y1).scale(c[0]) + (&y2 * &y2).scale(c[1]) + (&y1 * &y2).scale(c[2]))
        }
        Table1Row::Linear => {
            if c.iter().all(|v| v.is_zero()) {
                return Ok(kk);
            }
            let (ai, aip) = fixtures.airy_ai.clone().ok_or(CatalogError::FixtureMissing("Airy Ai"))?;
            let (bi, bip) = fixtures.airy_bi.clone().ok_or(CatalogError::FixtureMissing("Airy Bi"))?;
            let eta: [Arc<dyn Fn(f64) -> f64 + Send + Sync>; 3] = [
                Arc::new(move |t: f64| af * t + bf),
                Arc::new(move |_| af),
                Arc::new(|_| 0.0),
            ];
            let a13 = af.cbrt();
            let s = move |t: f64| -(af * t + bf) / (a13 * a13);
            let mk = |name: &str, z: ScalarFn, zp: ScalarFn| {
                ode_solution_fn(name, move |t| z(s(t)), move |t| -a13 * zp(s(t)), eta.clone())
            };
            let y1 = Expr::opaque(&mk("airyA", ai, aip), &ts);
            let y2 = Expr::opaque(&mk("airyB", bi, bip), &ts);
            Ok(kk + (&y1 * &y1).scale(c[0]) + (&y2 * &y2).scale(c[1]) + (&y1 * &y2).scale(c[2]))
        }
    }
}

/// `(f_0, f_1, f_2, f_3) = (k, (f_3'' + 2η f_3)/2, f_3', f_3)`.
pub fn table1_candidate(f3: &Expr, eta: &Expr, k: &Q) -> Result<SymmetryCandidate, CatalogError> {
    let ts = Symbol::new("t");
    let f2 = f3.differentiate(&ts)?;
    let f1 = (f2.differentiate(&ts)? + (eta * f3).scale(&q_int(2))).scale(&q_frac(1, 2));
    Ok(SymmetryCandidate::closed(vec![Expr::rational(k.clone()), f1, f2, f3.clone()]))
}

/// Entries reporting the sl(2) tensor in the same basis ordering.
pub const SL2_FAMILY: [&str; 6] = ["riccati", "cayley_klein", "quaternionic", "dbh", "kummer_schwarz", "sl2_generic"];
