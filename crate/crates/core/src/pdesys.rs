//! PDE Lie systems `∂x/∂t_l = Σ_α b_{αl}(t) X_α(x)` over multi-time `ℝ^s`.
//!
//! The system is integrable when the zero-curvature condition
//!
//! ```text
//! ∂b_{γk}/∂t_l - ∂b_{γl}/∂t_k + Σ_{α,β} b_{αl} b_{βk} c_{αβγ} = 0
//! ```
//!
//! holds for all `k, l`. Vertical symmetries `Σ f_β(t) X_β` then solve
//! `∂f_π/∂t_l = Σ_{α,δ} b_{αl} f_δ c_{δαπ}`.

use std::collections::HashMap;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{CompiledExpr, Expr, ExprError, Symbol, ZeroTest};
use crate::liealg::{LieAlgError, LieAlgebraBasis, StructureTensor};
use crate::liesys::{fold_dependent, linspace, ResidualMode, ResidualReport};
use crate::ode::{self, FnRhs, OdeError, Trajectory};
use crate::vectorfield::{jet_symbol, prolong_first_with, ChainRule, Derivation, Plain, VectorField, VfError};

/// Default curvature tolerance.
pub const CURVATURE_TOL: f64 = 1e-9;
/// Lattice points per time direction for curvature checks.
pub const CURVATURE_LATTICE: usize = 5;
pub const MAX_TIMES: usize = 3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PdeError {
    #[error("system is not integrable (curvature residual {0:e})")]
    NotIntegrable(f64),
    #[error("candidate is not vertical: component along {0} does not vanish")]
    NotVertical(String),
    #[error("coefficient is not differentiable: {0}")]
    MissingDerivative(String),
    #[error("sample grid is empty")]
    GridEmpty,
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Algebra(#[from] LieAlgError),
    #[error(transparent)]
    Field(VfError),
    #[error(transparent)]
    Expr(ExprError),
}

impl From<ExprError> for PdeError {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::OpaqueNoDerivative { name, order } => {
                PdeError::MissingDerivative(format!("`{name}` has no derivative of order {order}"))
            }
            other => PdeError::Expr(other),
        }
    }
}

impl From<VfError> for PdeError {
    fn from(e: VfError) -> Self {
        match e {
            VfError::NotVertical(v) => PdeError::NotVertical(v),
            VfError::Expr(x) => x.into(),
            other => PdeError::Field(other),
        }
    }
}

/// `∂x/∂t_l = Σ_α b_{αl}(t) X_α(x)`.
#[derive(Clone, Debug)]
pub struct PDELieSystemDef {
    vars: Vec<Symbol>,
    fields: Vec<VectorField>,
    tensor: StructureTensor,
    /// `coeffs[α][l] = b_{αl}`.
    pub coeffs: Vec<Vec<Expr>>,
    pub times: Vec<Symbol>,
    /// Box in `t`-space used for grid checks.
    pub domain: Vec<(f64, f64)>,
    pub tol: f64,
}

impl PDELieSystemDef {
    pub fn new(basis: &LieAlgebraBasis, coeffs: Vec<Vec<Expr>>, times: Vec<Symbol>) -> Result<Self, PdeError> {
        Self::from_parts(
            basis.vars().to_vec(),
            basis.fields().to_vec(),
            basis.tensor().clone(),
            coeffs,
            times,
        )
    }

    fn from_parts(
        vars: Vec<Symbol>,
        fields: Vec<VectorField>,
        tensor: StructureTensor,
        coeffs: Vec<Vec<Expr>>,
        times: Vec<Symbol>,
    ) -> Result<Self, PdeError> {
        let s = times.len();
        if s == 0 || s > MAX_TIMES {
            return Err(PdeError::BadInput(format!("need 1..={MAX_TIMES} time variables, got {s}")));
        }
        if coeffs.len() != fields.len() || coeffs.iter().any(|row| row.len() != s) {
            return Err(PdeError::BadInput(format!(
                "coefficient matrix must be {}x{s}",
                fields.len()
            )));
        }
        if times.iter().any(|t| vars.contains(t)) {
            return Err(PdeError::BadInput("time and state variables overlap".into()));
        }
        Ok(PDELieSystemDef {
            vars,
            fields,
            tensor,
            coeffs,
            times,
            domain: vec![(0.0, 1.0); s],
            tol: CURVATURE_TOL,
        })
    }

    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Result<Self, PdeError> {
        if domain.len() != self.s() {
            return Err(PdeError::BadInput("domain dimension differs from s".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn s(&self) -> usize {
        self.times.len()
    }

    pub fn r(&self) -> usize {
        self.fields.len()
    }

    pub fn vars(&self) -> &[Symbol] {
        &self.vars
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn tensor(&self) -> &StructureTensor {
        &self.tensor
    }

    /// `X^l = Σ_α b_{αl} X_α` on `x`.
    pub fn direction_field(&self, l: usize) -> VectorField {
        let coeffs: Vec<Expr> = self.coeffs.iter().map(|row| row[l].clone()).collect();
        VectorField::combination(&self.vars, &coeffs, &self.fields).expect("fields share variables")
    }

    /// Variables `(t_1..t_s, x_1..x_n)`.
    pub fn time_state_vars(&self) -> Vec<Symbol> {
        self.times.iter().chain(&self.vars).cloned().collect()
    }

    /// `X̄^l = ∂/∂t_l + X^l` on `(t, x)`.
    pub fn autonomized(&self, l: usize) -> Result<VectorField, PdeError> {
        let tv = self.time_state_vars();
        Ok(VectorField::coordinate(&tv, l).add(&self.direction_field(l).embed(&tv)?)?)
    }
}

/// Curvature expressions for `γ` and `k < l`, in that order.
pub fn curvature_exprs(sys: &PDELieSystemDef) -> Result<Vec<Expr>, PdeError> {
    let (r, s) = (sys.r(), sys.s());
    let c = sys.tensor();
    let mut out = Vec::new();
    for g in 0..r {
        for k in 0..s {
            for l in k + 1..s {
                let mut e = sys.coeffs[g][k].differentiate(&sys.times[l])? - sys.coeffs[g][l].differentiate(&sys.times[k])?;
                for a in 0..r {
                    for b in 0..r {
                        let cv = c.get(a, b, g);
                        if !cv.is_zero() {
                            e = e + (&sys.coeffs[a][l] * &sys.coeffs[b][k]).scale(cv);
                        }
                    }
                }
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// Points of the `n^s` lattice on a box.
pub fn lattice(domain: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = domain.iter().map(|(a, b)| linspace(*a, *b, n)).collect();
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    pts
}

/// Max curvature over `γ, k < l` and the `5^s` lattice on the domain; exact
/// zero when the expressions vanish identically.
pub fn curvature_residual(sys: &PDELieSystemDef) -> Result<ResidualReport, PdeError> {
    let exprs = curvature_exprs(sys)?;
    if exprs.iter().all(|e| e.is_zero() == ZeroTest::Zero) {
        return Ok(ResidualReport {
            max_abs: 0.0,
            exact_zero: true,
            evaluations: 0,
            mode: ResidualMode::Symbolic,
        });
    }
    let compiled = exprs
        .iter()
        .map(|e| e.compile(&sys.times))
        .collect::<Result<Vec<_>, _>>()?;
    let pts = lattice(&sys.domain, CURVATURE_LATTICE);
    let mut worst: f64 = 0.0;
    for p in &pts {
        for c in &compiled {
            worst = worst.max(c.eval(p)?.abs());
        }
    }
    Ok(ResidualReport {
        max_abs: worst,
        exact_zero: false,
        evaluations: pts.len(),
        mode: ResidualMode::Numeric,
    })
}

pub fn is_integrable(sys: &PDELieSystemDef) -> Result<bool, PdeError> {
    Ok(curvature_residual(sys)?.passes(sys.tol))
}

fn require_integrable(sys: &PDELieSystemDef) -> Result<(), PdeError> {
    let rep = curvature_residual(sys)?;
    if rep.passes(sys.tol) {
        Ok(())
    } else {
        Err(PdeError::NotIntegrable(rep.max_abs))
    }
}

/// Symbols `f1..fr`.
pub fn pde_f_symbols(r: usize) -> Vec<Symbol> {
    (1..=r).map(|i| Symbol::new(&format!("f{i}"))).collect()
}

/// `∂f_π/∂t_l = Σ_{α,δ} b_{αl} f_δ c_{δαπ}` as a PDE Lie system on
/// `(f_1..f_r)`, with basis a maximal independent subset of
/// `Y_α = Σ f_δ c_{δαπ} ∂/∂f_π`.
pub fn build_pde_symmetry_system(sys: &PDELieSystemDef) -> Result<PDELieSystemDef, PdeError> {
    require_integrable(sys)?;
    let r = sys.r();
    let c = sys.tensor();
    let vars = pde_f_symbols(r);
    let y: Vec<VectorField> = (0..r)
        .map(|a| {
            let comps = (0..r)
                .map(|p| {
                    (0..r).fold(Expr::zero(), |acc, d| {
                        let k = c.get(d, a, p);
                        if k.is_zero() {
                            acc
                        } else {
                            acc + Expr::sym(&vars[d]).scale(k)
                        }
                    })
                })
                .collect();
            VectorField::new(vars.clone(), comps).expect("matching lengths")
        })
        .collect();
    let (kept, coeffs) = fold_dependent(&y, &sys.coeffs);
    let tensor = if kept.is_empty() {
        StructureTensor::zero(0)
    } else {
        LieAlgebraBasis::new(kept.clone())?.tensor().clone()
    };
    let mut out = PDELieSystemDef::from_parts(vars, kept, tensor, coeffs, sys.times.clone())?;
    out.domain = sys.domain.clone();
    out.tol = sys.tol;
    require_integrable(&out)?;
    Ok(out)
}

/// Right-hand sides `∂f_π/∂t_l` written directly from the formula,
/// `rhs[l][π]`.
pub fn pde_symmetry_rhs(sys: &PDELieSystemDef) -> Vec<Vec<Expr>> {
    let (r, s) = (sys.r(), sys.s());
    let c = sys.tensor();
    let f = pde_f_symbols(r);
    (0..s)
        .map(|l| {
            (0..r)
                .map(|p| {
                    let mut e = Expr::zero();
                    for a in 0..r {
                        for d in 0..r {
                            let k = c.get(d, a, p);
                            if !k.is_zero() {
                                e = e + (&sys.coeffs[a][l] * &Expr::sym(&f[d])).scale(k);
                            }
                        }
                    }
                    e
                })
                .collect()
        })
        .collect()
}

/// Piecewise-linear path through `t`-space.
#[derive(Clone, Debug, PartialEq)]
pub struct TimePath {
    pub waypoints: Vec<Vec<f64>>,
    /// Steps per segment.
    pub steps: usize,
}

impl TimePath {
    pub fn new(waypoints: Vec<Vec<f64>>, steps: usize) -> Result<Self, PdeError> {
        if waypoints.len() < 2 {
            return Err(PdeError::BadInput("a path needs at least two waypoints".into()));
        }
        let s = waypoints[0].len();
        if waypoints.iter().any(|w| w.len() != s) {
            return Err(PdeError::BadInput("waypoints differ in dimension".into()));
        }
        if waypoints.windows(2).any(|w| w[0] == w[1]) {
            return Err(PdeError::BadInput("consecutive waypoints coincide".into()));
        }
        if steps == 0 {
            return Err(PdeError::BadInput("steps must be positive".into()));
        }
        Ok(TimePath { waypoints, steps })
    }

    pub fn segments(&self) -> usize {
        self.waypoints.len() - 1
    }

    /// Point at path parameter `σ ∈ [0, segments]`.
    pub fn point(&self, sigma: f64) -> Vec<f64> {
        let j = (sigma.floor() as usize).min(self.segments() - 1);
        let u = sigma - j as f64;
        let (a, b) = (&self.waypoints[j], &self.waypoints[j + 1]);
        a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect()
    }
}

struct DirectionRhs {
    comps: Vec<Vec<CompiledExpr>>,
}

impl DirectionRhs {
    fn new(sys: &PDELieSystemDef) -> Result<Self, PdeError> {
        let tv = sys.time_state_vars();
        let comps = (0..sys.s())
            .map(|l| {
                sys.direction_field(l)
                    .components()
                    .iter()
                    .map(|c| c.compile(&tv))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(DirectionRhs { comps })
    }

    fn eval(&self, t: &[f64], x: &[f64], dir: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let mut p = t.to_vec();
        p.extend_from_slice(x);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (l, comps) in self.comps.iter().enumerate() {
            if dir[l] == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(comps) {
                *o += dir[l] * c.eval(&p)?;
            }
        }
        Ok(())
    }
}

/// Integrate along a path after checking integrability.
pub fn integrate_along_path(sys: &PDELieSystemDef, x0: &[f64], path: &TimePath) -> Result<Trajectory, PdeError> {
    require_integrable(sys)?;
    integrate_along_path_unchecked(sys, x0, path)
}

/// Integrate the pull-back `dx/dσ = Σ_l (dt_l/dσ) X^l(t(σ), x)` along the
/// path without checking integrability. The result depends on the path
/// when the curvature does not vanish.
pub fn integrate_along_path_unchecked(
    sys: &PDELieSystemDef,
    x0: &[f64],
    path: &TimePath,
) -> Result<Trajectory, PdeError> {
    if path.waypoints[0].len() != sys.s() {
        return Err(PdeError::BadInput("path dimension differs from s".into()));
    }
    let dr = DirectionRhs::new(sys)?;
    let n = sys.vars().len();
    let mut out: Option<Trajectory> = None;
    let mut x = x0.to_vec();
    for j in 0..path.segments() {
        let a = path.waypoints[j].clone();
        let b = &path.waypoints[j + 1];
        let dir: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
        let base = j as f64;
        let rhs = FnRhs {
            dim: n,
            f: |sigma: f64, xs: &[f64], o: &mut [f64]| {
                let u = sigma - base;
                let t: Vec<f64> = a.iter().zip(&dir).map(|(p, d)| p + u * d).collect();
                dr.eval(&t, xs, &dir, o).map_err(|e| e.to_string())
            },
        };
        let seg = ode::integrate(&rhs, &x, base, base + 1.0, 1.0 / path.steps as f64)?;
        x = seg.final_state().to_vec();
        out = Some(match out {
            None => seg,
            Some(mut acc) => {
                acc.times.extend_from_slice(&seg.times[1..]);
                acc.states.extend_from_slice(&seg.states[1..]);
                acc.err_est.extend_from_slice(&seg.err_est[1..]);
                acc
            }
        });
    }
    Ok(out.expect("at least one segment"))
}

/// Largest pairwise distance (max norm) between path endpoints.
pub fn path_disagreement(
    sys: &PDELieSystemDef,
    x0: &[f64],
    paths: &[TimePath],
    checked: bool,
) -> Result<f64, PdeError> {
    let ends: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| {
            let tr = if checked {
                integrate_along_path(sys, x0, p)?
            } else {
                integrate_along_path_unchecked(sys, x0, p)?
            };
            Ok(tr.final_state().to_vec())
        })
        .collect::<Result<_, PdeError>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            for (a, b) in ends[i].iter().zip(&ends[j]) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

/// Vertical symmetry candidate `Σ f_β(t) X_β`.
#[derive(Clone, Debug)]
pub enum PdeCandidate {
    /// A field on `(t_1..t_s, x)`; must have no `∂/∂t_l` part.
    Field(VectorField),
    /// Values `f_β` and partials `∂f_β/∂t_l` at given times.
    Sampled {
        times: Vec<Vec<f64>>,
        values: Vec<Vec<f64>>,
        /// `derivs[i][β][l]`.
        derivs: Vec<Vec<Vec<f64>>>,
    },
}

impl PdeCandidate {
    /// `Σ f_β X_β` on `(t, x)` from closed-form coefficients.
    pub fn from_coefficients(sys: &PDELieSystemDef, f: &[Expr]) -> Result<Self, PdeError> {
        if f.len() != sys.r() {
            return Err(PdeError::BadInput("one coefficient per basis field".into()));
        }
        let tv = sys.time_state_vars();
        let mut acc = VectorField::zero(&tv);
        for (fb, x) in f.iter().zip(sys.fields()) {
            acc = acc.add(&x.embed(&tv)?.scale(fb))?;
        }
        Ok(PdeCandidate::Field(acc))
    }
}

/// Sample a symmetry by integrating the symmetry system from `f_init` at
/// `base` to each requested time along the straight segment; partials come
/// from the symmetry-system right-hand side.
pub fn sample_pde_symmetry(
    symsys: &PDELieSystemDef,
    f_init: &[f64],
    base: &[f64],
    times: &[Vec<f64>],
    steps: usize,
) -> Result<PdeCandidate, PdeError> {
    let dr = DirectionRhs::new(symsys)?;
    let rows: Vec<(Vec<f64>, Vec<Vec<f64>>)> = times
        .par_iter()
        .map(|t| {
            let f = if t.as_slice() == base {
                f_init.to_vec()
            } else {
                let path = TimePath::new(vec![base.to_vec(), t.clone()], steps)?;
                integrate_along_path(symsys, f_init, &path)?.final_state().to_vec()
            };
            let r = f.len();
            let mut d = vec![vec![0.0; symsys.s()]; r];
            let mut buf = vec![0.0; r];
            for l in 0..symsys.s() {
                let mut dir = vec![0.0; symsys.s()];
                dir[l] = 1.0;
                dr.eval(t, &f, &dir, &mut buf)?;
                for b in 0..r {
                    d[b][l] = buf[b];
                }
            }
            Ok((f, d))
        })
        .collect::<Result<_, PdeError>>()?;
    let (values, derivs) = rows.into_iter().unzip();
    Ok(PdeCandidate::Sampled {
        times: times.to_vec(),
        values,
        derivs,
    })
}

/// Times × state points for PDE residuals.
#[derive(Clone, Debug, Default)]
pub struct PdeGrid {
    pub times: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
}

impl PdeGrid {
    pub fn new(domain: &[(f64, f64)], per_axis: usize, bbox: &[(f64, f64)], n_x: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n_x)
            .map(|_| bbox.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect())
            .collect();
        PdeGrid {
            times: lattice(domain, per_axis),
            points,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeResidualReport {
    /// Max component of `[X̄^l, Y]` over `l` and the grid.
    pub bracket_max: f64,
    /// Max of `Ŷ F^i_l` restricted to the solution submanifold.
    pub jet_max: f64,
    /// Max difference between the two oracles.
    pub agreement: f64,
    pub evaluations: usize,
}

/// Oracle agreement tolerance.
pub const ORACLE_AGREEMENT_TOL: f64 = 1e-9;

/// Evaluate both symmetry oracles on the grid.
///
/// The bracket oracle computes `[∂/∂t_l + X^l, Y]`. The jet oracle prolongs
/// `Y`, applies it to `F^i_l = x_{i,l} - Σ_α b_{αl} X_α^i` and restricts to
/// `x_{i,l} = Σ_α b_{αl} X_α^i`.
pub fn pde_symmetry_residual(
    y: &PdeCandidate,
    sys: &PDELieSystemDef,
    grid: &PdeGrid,
) -> Result<PdeResidualReport, PdeError> {
    if grid.times.is_empty() || grid.points.is_empty() {
        return Err(PdeError::GridEmpty);
    }
    let (s, r, n) = (sys.s(), sys.r(), sys.vars().len());
    let tv = sys.time_state_vars();

    let (field, rule, extra): (VectorField, Box<dyn Derivation>, Vec<Symbol>) = match y {
        PdeCandidate::Field(f) => {
            if f.vars() != tv.as_slice() {
                return Err(PdeError::BadInput("candidate must live on (t, x)".into()));
            }
            (f.clone(), Box::new(Plain), Vec::new())
        }
        PdeCandidate::Sampled { values, derivs, times } => {
            if values.len() != times.len() || derivs.len() != times.len() || values.iter().any(|v| v.len() != r) {
                return Err(PdeError::BadInput("sampled candidate has inconsistent shape".into()));
            }
            let fs: Vec<Symbol> = (0..r).map(|b| Symbol::new(&format!("__F{b}"))).collect();
            let ds: Vec<Vec<Symbol>> = (0..r)
                .map(|b| (0..s).map(|l| Symbol::new(&format!("__D{b}_{l}"))).collect())
                .collect();
            let mut rule = ChainRule::new();
            for b in 0..r {
                for l in 0..s {
                    rule = rule.depends(&sys.times[l], &fs[b], &ds[b][l]);
                }
            }
            let mut acc = VectorField::zero(&tv);
            for (fb, x) in fs.iter().zip(sys.fields()) {
                acc = acc.add(&x.embed(&tv)?.scale(&Expr::sym(fb)))?;
            }
            let mut extra = fs.clone();
            extra.extend(ds.into_iter().flatten());
            (acc, Box::new(rule), extra)
        }
    };

    // jet oracle
    let jet = prolong_first_with(&field, s, rule.as_ref())?;
    let dirs: Vec<VectorField> = (0..s).map(|l| sys.direction_field(l)).collect();
    let mut on_s: HashMap<Symbol, Expr> = HashMap::new();
    for (i, x) in sys.vars().iter().enumerate() {
        for (l, t) in sys.times.iter().enumerate() {
            on_s.insert(jet_symbol(x, t), dirs[l].components()[i].clone());
        }
    }
    let mut jet_exprs = Vec::with_capacity(s * n);
    let mut bracket_exprs = Vec::with_capacity(s * (s + n));
    for l in 0..s {
        let xbar = sys.autonomized(l)?;
        let br = xbar.lie_bracket_with(&field, rule.as_ref())?;
        for i in 0..n {
            let big_f = Expr::sym(&jet_symbol(&sys.vars()[i], &sys.times[l])) - dirs[l].components()[i].clone();
            let applied = jet.field().apply_with(&big_f, rule.as_ref())?;
            jet_exprs.push(applied.substitute_many(&on_s)?);
        }
        // time components first, then x; the x part is compared with the jet oracle
        bracket_exprs.extend(br.components().iter().cloned());
    }

    let mut vars = tv.clone();
    vars.extend(extra.iter().cloned());
    let cj = jet_exprs.iter().map(|e| e.compile(&vars)).collect::<Result<Vec<_>, _>>()?;
    let cb = bracket_exprs.iter().map(|e| e.compile(&vars)).collect::<Result<Vec<_>, _>>()?;

    let per_time: Vec<Vec<f64>> = match y {
        PdeCandidate::Field(_) => vec![Vec::new(); grid.times.len()],
        PdeCandidate::Sampled { times, values, derivs } => grid
            .times
            .iter()
            .map(|t| {
                let i = times
                    .iter()
                    .position(|u| u == t)
                    .ok_or_else(|| PdeError::BadInput(format!("candidate not sampled at {t:?}")))?;
                let mut v = values[i].clone();
                for row in &derivs[i] {
                    v.extend_from_slice(row);
                }
                Ok(v)
            })
            .collect::<Result<_, PdeError>>()?,
    };
    let results: Vec<Result<(f64, f64, f64), ExprError>> = grid
        .times
        .par_iter()
        .zip(per_time.par_iter())
        .flat_map_iter(|(t, extra_vals)| {
            let (cj, cb) = (&cj, &cb);
            grid.points.iter().map(move |x| {
                let mut p = t.clone();
                p.extend_from_slice(x);
                p.extend_from_slice(extra_vals);
                let (mut bm, mut jm, mut ag): (f64, f64, f64) = (0.0, 0.0, 0.0);
                for l in 0..s {
                    for k in 0..s + n {
                        let v = cb[l * (s + n) + k].eval(&p)?;
                        bm = bm.max(v.abs());
                        if k >= s {
                            let j = cj[l * n + (k - s)].eval(&p)?;
                            jm = jm.max(j.abs());
                            ag = ag.max((j - v).abs());
                        }
                    }
                }
                Ok((bm, jm, ag))
            })
        })
        .collect();
    let mut rep = PdeResidualReport {
        bracket_max: 0.0,
        jet_max: 0.0,
        agreement: 0.0,
        evaluations: results.len(),
    };
    for v in results {
        let (b, j, a) = v?;
        rep.bracket_max = rep.bracket_max.max(b);
        rep.jet_max = rep.jet_max.max(j);
        rep.agreement = rep.agreement.max(a);
    }
    Ok(rep)
}
