//! Lie systems, their symmetry systems and symmetry verification.
//!
//! A Lie system is `dx/dt = Σ_α b_α(t) X_α(x)` over a closed Lie algebra of
//! vector fields. A Lie symmetry of the form `Y = f_0 ∂_t + Σ f_α X_α`
//! satisfies `[Y, X̄] = h X̄` with `h = -b_0`, where `X̄ = ∂_t + X` and `b_0`
//! is the gauge; the coefficient functions then solve the symmetry system
//!
//! ```text
//! df_0/dt = b_0
//! df_α/dt = f_0 b_α' + b_α b_0 + Σ_{β,γ} b_β f_γ c_{γβα}
//! ```

use std::collections::HashMap;
use std::fmt;

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{CompiledExpr, Expr, ExprError, Symbol, ZeroTest, Q};
use crate::liealg::{decompose_exact, LieAlgError, LieAlgebraBasis, StructureTensor};
use crate::linalg;
use crate::ode::{self, OdeError, Rhs, Trajectory, EXCLUDED_TOL};
use crate::vectorfield::{ChainRule, VectorField, VfError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LieSysError {
    #[error("coefficient is not differentiable: {0}")]
    MissingDerivative(String),
    #[error("sample grid is empty")]
    GridEmpty,
    #[error("transported curve left the domain at t = {t}: {reason}")]
    TransportLeftDomain { t: f64, reason: String },
    #[error("quadrature diverged at t = {0}")]
    QuadratureDiverged(f64),
    #[error("initial conditions are linearly dependent")]
    DependentInitialConditions,
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Algebra(#[from] LieAlgError),
    #[error(transparent)]
    Field(#[from] VfError),
    #[error(transparent)]
    Expr(ExprError),
}

impl From<ExprError> for LieSysError {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::OpaqueNoDerivative { name, order } => {
                LieSysError::MissingDerivative(format!("`{name}` has no derivative of order {order}"))
            }
            other => LieSysError::Expr(other),
        }
    }
}

/// `dx/dt = Σ b_α(t) X_α(x)` with optional gauge `b_0(t)`.
#[derive(Clone, Debug)]
pub struct LieSystemDef {
    pub basis: LieAlgebraBasis,
    pub coeffs: Vec<Expr>,
    pub gauge: Expr,
    pub time: Symbol,
    /// Loci `g(x) = 0` where the fields are singular.
    pub excluded: Vec<Expr>,
}

impl LieSystemDef {
    pub fn new(basis: LieAlgebraBasis, coeffs: Vec<Expr>, time: Symbol) -> Result<Self, LieSysError> {
        if coeffs.len() != basis.dim() {
            return Err(LieSysError::BadInput(format!(
                "{} coefficients for a {}-dimensional algebra",
                coeffs.len(),
                basis.dim()
            )));
        }
        Ok(LieSystemDef {
            basis,
            coeffs,
            gauge: Expr::zero(),
            time,
            excluded: Vec::new(),
        })
    }

    pub fn with_gauge(mut self, b0: Expr) -> Self {
        self.gauge = b0;
        self
    }

    pub fn with_excluded(mut self, loci: Vec<Expr>) -> Self {
        self.excluded = loci;
        self
    }

    pub fn r(&self) -> usize {
        self.basis.dim()
    }

    pub fn vars(&self) -> &[Symbol] {
        self.basis.vars()
    }

    pub fn tensor(&self) -> &StructureTensor {
        self.basis.tensor()
    }

    /// `X(t, x) = Σ b_α(t) X_α(x)`.
    pub fn field(&self) -> VectorField {
        VectorField::combination(self.vars(), &self.coeffs, self.basis.fields()).expect("basis shares variables")
    }

    /// `X̄ = ∂_t + X` on `(t, x)`.
    pub fn autonomized(&self) -> VectorField {
        self.field().autonomize(&self.time)
    }

    /// Variables `(t, x_1..x_n)` used by compiled right-hand sides.
    pub fn time_state_vars(&self) -> Vec<Symbol> {
        let mut v = vec![self.time.clone()];
        v.extend(self.vars().iter().cloned());
        v
    }

    pub fn compile(&self) -> Result<CompiledSystem, LieSysError> {
        CompiledSystem::new(&self.field(), &self.time, &self.excluded)
    }
}

/// Numeric right-hand side of a first-order system in `(t, x)`.
pub struct CompiledSystem {
    comps: Vec<CompiledExpr>,
    excluded: Vec<CompiledExpr>,
    scratch_len: usize,
}

impl CompiledSystem {
    pub fn new(field: &VectorField, time: &Symbol, excluded: &[Expr]) -> Result<Self, LieSysError> {
        let mut vars = vec![time.clone()];
        vars.extend(field.vars().iter().cloned());
        let comps = field
            .components()
            .iter()
            .map(|c| c.compile(&vars))
            .collect::<Result<Vec<_>, _>>()?;
        let excluded = excluded.iter().map(|g| g.compile(&vars)).collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledSystem {
            comps,
            excluded,
            scratch_len: vars.len(),
        })
    }

    fn point(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.scratch_len);
        p.push(t);
        p.extend_from_slice(x);
        p
    }

    pub fn eval_vec(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        let p = self.point(t, x);
        self.comps.iter().map(|c| c.eval(&p)).collect()
    }

    /// Name of the excluded locus hit, if any.
    pub fn excluded_hit(&self, t: f64, x: &[f64]) -> Option<String> {
        let p = self.point(t, x);
        for (i, g) in self.excluded.iter().enumerate() {
            match g.eval(&p) {
                Ok(v) if v.abs() >= EXCLUDED_TOL => {}
                Ok(v) => return Some(format!("excluded locus #{} reached (value {v:e})", i + 1)),
                Err(e) => return Some(e.to_string()),
            }
        }
        None
    }

    /// Reason if an excluded locus changes sign between two states.
    pub fn excluded_crossed(&self, t0: f64, x0: &[f64], t1: f64, x1: &[f64]) -> Option<String> {
        let (p0, p1) = (self.point(t0, x0), self.point(t1, x1));
        for (i, g) in self.excluded.iter().enumerate() {
            if let (Ok(a), Ok(b)) = (g.eval(&p0), g.eval(&p1)) {
                if a.signum() != b.signum() {
                    return Some(format!("excluded locus #{} crossed between t = {t0} and t = {t1}", i + 1));
                }
            }
        }
        None
    }
}

impl Rhs for CompiledSystem {
    fn dim(&self) -> usize {
        self.comps.len()
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), String> {
        let p = self.point(t, x);
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.eval(&p).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn excluded(&self, t: f64, x: &[f64]) -> Option<String> {
        self.excluded_hit(t, x)
    }

    fn crossed(&self, t0: f64, x0: &[f64], t1: f64, x1: &[f64]) -> Option<String> {
        self.excluded_crossed(t0, x0, t1, x1)
    }
}

/// Integrate the Lie system with fixed-step RK4.
pub fn integrate(sys: &LieSystemDef, x0: &[f64], t0: f64, t1: f64, step: f64) -> Result<Trajectory, LieSysError> {
    let rhs = sys.compile()?;
    Ok(ode::integrate(&rhs, x0, t0, t1, step)?)
}

/// Symbols `f0..fr` of the symmetry system.
pub fn f_symbols(r: usize) -> Vec<Symbol> {
    (0..=r).map(|i| Symbol::new(&format!("f{i}"))).collect()
}

/// The fields `Z_0..Z_r`, `W_1..W_r`, `Y_1..Y_r` on `(f_0..f_r)`.
#[derive(Clone, Debug)]
pub struct SymmetrySystemBasis {
    pub vars: Vec<Symbol>,
    pub z: Vec<VectorField>,
    pub w: Vec<VectorField>,
    pub y: Vec<VectorField>,
}

impl SymmetrySystemBasis {
    /// All fields in the order `Z_0..Z_r, W_1..W_r, Y_1..Y_r`.
    pub fn all(&self) -> Vec<VectorField> {
        self.z.iter().chain(&self.w).chain(&self.y).cloned().collect()
    }

    /// Dimension of `span{Y_α}`.
    pub fn y_span_dim(&self) -> usize {
        crate::liealg::basis_rank(&self.y)
    }
}

/// `Z_α = ∂/∂f_α`, `W_α = f_0 ∂/∂f_α`, `Y_α = Σ_{β,γ} f_β c_{βαγ} ∂/∂f_γ`.
pub fn symmetry_system_basis(c: &StructureTensor) -> SymmetrySystemBasis {
    let r = c.dim();
    let vars = f_symbols(r);
    let f0 = Expr::sym(&vars[0]);
    let z: Vec<VectorField> = (0..=r).map(|a| VectorField::coordinate(&vars, a)).collect();
    let w: Vec<VectorField> = (1..=r).map(|a| VectorField::coordinate(&vars, a).scale(&f0)).collect();
    let y: Vec<VectorField> = (0..r)
        .map(|a| {
            let mut comps = vec![Expr::zero(); r + 1];
            for (g, comp) in comps.iter_mut().enumerate().skip(1) {
                let mut acc = Expr::zero();
                for b in 0..r {
                    let k = c.get(b, a, g - 1);
                    if !k.is_zero() {
                        acc = acc + Expr::sym(&vars[b + 1]).scale(k);
                    }
                }
                *comp = acc;
            }
            VectorField::new(vars.clone(), comps).expect("matching lengths")
        })
        .collect();
    SymmetrySystemBasis { vars, z, w, y }
}

/// Build the symmetry system of `sys` as a Lie system on `(f_0..f_r)`.
///
/// Its basis is `Z_0..Z_r, W_1..W_r` followed by a maximal independent
/// subset of the `Y_α`; coefficients of dependent `Y_α` are redistributed.
pub fn build_symmetry_system(sys: &LieSystemDef) -> Result<LieSystemDef, LieSysError> {
    let sb = symmetry_system_basis(sys.tensor());
    let t = &sys.time;
    let b0 = &sys.gauge;
    let dbs = sys
        .coeffs
        .iter()
        .map(|b| b.differentiate(t))
        .collect::<Result<Vec<_>, _>>()?;

    let per_dir: Vec<Vec<Expr>> = sys.coeffs.iter().map(|b| vec![b.clone()]).collect();
    let (kept_fields, folded) = fold_dependent(&sb.y, &per_dir);
    let y_coeffs: Vec<Expr> = folded.into_iter().map(|mut v| v.remove(0)).collect();

    let mut fields = sb.z.clone();
    fields.extend(sb.w.iter().cloned());
    fields.extend(kept_fields);
    let mut coeffs = vec![b0.clone()];
    coeffs.extend(sys.coeffs.iter().map(|b| b0 * b));
    coeffs.extend(dbs);
    coeffs.extend(y_coeffs);
    let basis = LieAlgebraBasis::new(fields)?;
    LieSystemDef::new(basis, coeffs, t.clone())
}

/// Keep a maximal independent subset of `fields` and fold the coefficients
/// of the dropped fields into it. `coeffs[a]` holds one coefficient per time
/// direction.
pub fn fold_dependent(fields: &[VectorField], coeffs: &[Vec<Expr>]) -> (Vec<VectorField>, Vec<Vec<Expr>>) {
    let mut kept: Vec<usize> = Vec::new();
    for a in 0..fields.len() {
        let mut trial: Vec<VectorField> = kept.iter().map(|&k| fields[k].clone()).collect();
        trial.push(fields[a].clone());
        if crate::liealg::basis_rank(&trial) == trial.len() {
            kept.push(a);
        }
    }
    let kept_fields: Vec<VectorField> = kept.iter().map(|&k| fields[k].clone()).collect();
    let mut out: Vec<Vec<Expr>> = kept.iter().map(|&k| coeffs[k].clone()).collect();
    for a in 0..fields.len() {
        if kept.contains(&a) {
            continue;
        }
        let mu = decompose_exact(&fields[a], &kept_fields).expect("dropped field lies in the kept span");
        for (slot, m) in out.iter_mut().zip(mu) {
            if m.is_zero() {
                continue;
            }
            for (c, b) in slot.iter_mut().zip(&coeffs[a]) {
                *c = &*c + &b.scale(&m);
            }
        }
    }
    (kept_fields, out)
}

/// Right-hand sides `df_i/dt` written directly from the symmetry-system
/// formula, without going through the basis.
pub fn symmetry_system_rhs(sys: &LieSystemDef) -> Result<Vec<Expr>, LieSysError> {
    let r = sys.r();
    let f = f_symbols(r);
    let c = sys.tensor();
    let mut out = vec![sys.gauge.clone()];
    for a in 0..r {
        let mut e = Expr::sym(&f[0]) * sys.coeffs[a].differentiate(&sys.time)? + &sys.coeffs[a] * &sys.gauge;
        for b in 0..r {
            for g in 0..r {
                let k = c.get(g, b, a);
                if !k.is_zero() {
                    e = e + (&sys.coeffs[b] * &Expr::sym(&f[g + 1])).scale(k);
                }
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Multiplier convention of `[Y, X̄] = h X̄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Multiplier {
    /// `h = -b_0`, with `b_0 = df_0/dt`.
    #[default]
    NegGauge,
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("h = -b0")
    }
}

#[derive(Clone, Debug)]
pub enum CandidateForm {
    /// `f_0..f_r` as expressions in the time symbol.
    Closed(Vec<Expr>),
    /// Values and first derivatives on an increasing time grid.
    Sampled {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
        derivs: Vec<Vec<f64>>,
    },
}

/// `Y = f_0 ∂_t + Σ f_α X_α`.
#[derive(Clone, Debug)]
pub struct SymmetryCandidate {
    pub form: CandidateForm,
    pub multiplier: Multiplier,
}

impl SymmetryCandidate {
    pub fn closed(fs: Vec<Expr>) -> Self {
        SymmetryCandidate {
            form: CandidateForm::Closed(fs),
            multiplier: Multiplier::NegGauge,
        }
    }

    pub fn sampled(times: Vec<f64>, values: Vec<Vec<f64>>, derivs: Vec<Vec<f64>>) -> Result<Self, LieSysError> {
        if times.len() != values.len() || times.len() != derivs.len() {
            return Err(LieSysError::BadInput("sample lengths differ".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LieSysError::BadInput("sample times must increase".into()));
        }
        Ok(SymmetryCandidate {
            form: CandidateForm::Sampled { times, values, derivs },
            multiplier: Multiplier::NegGauge,
        })
    }

    /// Sampled candidate with derivatives taken from the symmetry-system
    /// right-hand side along `traj`.
    pub fn from_trajectory(symsys: &LieSystemDef, traj: &Trajectory) -> Result<Self, LieSysError> {
        let rhs = symsys.compile()?;
        let derivs = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(t, s)| rhs.eval_vec(*t, s))
            .collect::<Result<Vec<_>, _>>()?;
        SymmetryCandidate::sampled(traj.times.clone(), traj.states.clone(), derivs)
    }

    /// Sampled candidate on a uniform grid with derivatives from the
    /// five-point difference stencil.
    pub fn sampled_fd(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, LieSysError> {
        if times.len() < 5 {
            return Err(LieSysError::BadInput("finite differences need at least 5 samples".into()));
        }
        let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let m = values[0].len();
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|i| five_point_derivative(&values.iter().map(|v| v[i]).collect::<Vec<_>>(), h))
            .collect();
        let derivs = (0..times.len()).map(|k| cols.iter().map(|c| c[k]).collect()).collect();
        SymmetryCandidate::sampled(times, values, derivs)
    }

    pub fn len(&self) -> usize {
        match &self.form {
            CandidateForm::Closed(f) => f.len(),
            CandidateForm::Sampled { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(f, df/dt)` at time `t`. Sampled forms use the exact sample when `t`
    /// is a grid point and cubic Hermite interpolation otherwise.
    pub fn at(&self, time: &Symbol, t: f64) -> Result<(Vec<f64>, Vec<f64>), LieSysError> {
        match &self.form {
            CandidateForm::Closed(fs) => {
                let mut p = HashMap::new();
                p.insert(time.clone(), t);
                let vals = fs.iter().map(|f| f.eval(&p)).collect::<Result<Vec<_>, _>>()?;
                let ders = fs
                    .iter()
                    .map(|f| f.differentiate(time)?.eval(&p))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((vals, ders))
            }
            CandidateForm::Sampled { times, values, derivs } => {
                let n = times.len();
                if t < times[0] - 1e-12 || t > times[n - 1] + 1e-12 {
                    return Err(LieSysError::BadInput(format!("t = {t} outside the sampled range")));
                }
                let k = times.partition_point(|&s| s < t);
                if k < n && (times[k] - t).abs() <= 1e-12 {
                    return Ok((values[k].clone(), derivs[k].clone()));
                }
                if k > 0 && (times[k - 1] - t).abs() <= 1e-12 {
                    return Ok((values[k - 1].clone(), derivs[k - 1].clone()));
                }
                let (i, j) = (k - 1, k);
                let h = times[j] - times[i];
                let s = (t - times[i]) / h;
                let (h00, h10, h01, h11) = (
                    2.0 * s.powi(3) - 3.0 * s * s + 1.0,
                    s.powi(3) - 2.0 * s * s + s,
                    -2.0 * s.powi(3) + 3.0 * s * s,
                    s.powi(3) - s * s,
                );
                let (d00, d10, d01, d11) = (
                    (6.0 * s * s - 6.0 * s) / h,
                    3.0 * s * s - 4.0 * s + 1.0,
                    (-6.0 * s * s + 6.0 * s) / h,
                    3.0 * s * s - 2.0 * s,
                );
                let m = values[i].len();
                let vals = (0..m)
                    .map(|a| {
                        h00 * values[i][a] + h10 * h * derivs[i][a] + h01 * values[j][a] + h11 * h * derivs[j][a]
                    })
                    .collect();
                let ders = (0..m)
                    .map(|a| d00 * values[i][a] + d10 * derivs[i][a] + d01 * values[j][a] + d11 * derivs[j][a])
                    .collect();
                Ok((vals, ders))
            }
        }
    }

    /// Grid times for sampled forms.
    pub fn sample_times(&self) -> Option<&[f64]> {
        match &self.form {
            CandidateForm::Sampled { times, .. } => Some(times),
            CandidateForm::Closed(_) => None,
        }
    }

    /// The symmetry field on `(t, x)` for closed forms.
    pub fn field(&self, sys: &LieSystemDef) -> Result<VectorField, LieSysError> {
        let CandidateForm::Closed(fs) = &self.form else {
            return Err(LieSysError::BadInput("closed form required".into()));
        };
        let vars = sys.time_state_vars();
        let mut acc = VectorField::coordinate(&vars, 0).scale(&fs[0]);
        for (f, x) in fs[1..].iter().zip(sys.basis.fields()) {
            acc = acc.add(&x.embed(&vars)?.scale(f))?;
        }
        Ok(acc)
    }
}

/// Derivative of a uniformly sampled series with fourth-order stencils.
pub fn five_point_derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 5, "five-point stencil needs 5 samples");
    (0..n)
        .map(|k| {
            let v = if k >= 2 && k + 2 < n {
                y[k - 2] - 8.0 * y[k - 1] + 8.0 * y[k + 1] - y[k + 2]
            } else if k == 0 {
                -25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]
            } else if k == 1 {
                -3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]
            } else if k == n - 2 {
                3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5]
            } else {
                25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4] + 3.0 * y[n - 5]
            };
            v / (12.0 * h)
        })
        .collect()
}

/// Points `(t, x)` at which residuals are evaluated: every time is paired
/// with every point.
#[derive(Clone, Debug, Default)]
pub struct SampleGrid {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl SampleGrid {
    /// `n_t` uniform times over `t_range` and `n_x` seeded random points in
    /// the box.
    pub fn new(t_range: (f64, f64), n_t: usize, bbox: &[(f64, f64)], n_x: usize, seed: u64) -> Self {
        let times = linspace(t_range.0, t_range.1, n_t);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n_x)
            .map(|_| bbox.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect())
            .collect();
        SampleGrid { times, points }
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty() || self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.times.len() * self.points.len()
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualMode {
    /// Residual reduced to the exact zero expression.
    Symbolic,
    Numeric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub exact_zero: bool,
    pub evaluations: usize,
    pub mode: ResidualMode,
}

impl ResidualReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.exact_zero || self.max_abs <= tol
    }
}

fn placeholder_symbols(m: usize) -> (Vec<Symbol>, Vec<Symbol>) {
    (
        (0..m).map(|i| Symbol::new(&format!("__F{i}"))).collect(),
        (0..m).map(|i| Symbol::new(&format!("__D{i}"))).collect(),
    )
}

/// `[Y, X̄] - h X̄` with `h = -D_0`, where `Y = F_0 ∂_t + Σ F_α X_α` and the
/// placeholders `F_i` are functions of `t` with derivatives `D_i`.
fn symmetry_defect_field(sys: &LieSystemDef) -> Result<(VectorField, Vec<Symbol>, Vec<Symbol>), LieSysError> {
    let r = sys.r();
    let (fs, ds) = placeholder_symbols(r + 1);
    let vars = sys.time_state_vars();
    let mut y = VectorField::coordinate(&vars, 0).scale(&Expr::sym(&fs[0]));
    for (a, x) in sys.basis.fields().iter().enumerate() {
        y = y.add(&x.embed(&vars)?.scale(&Expr::sym(&fs[a + 1])))?;
    }
    let xbar = sys.autonomized();
    let mut rule = ChainRule::new();
    for (f, d) in fs.iter().zip(&ds) {
        rule = rule.depends(&sys.time, f, d);
    }
    let br = y.lie_bracket_with(&xbar, &rule)?;
    // h = -b0 = -dF0/dt
    let h = -Expr::sym(&ds[0]);
    let defect = br.sub(&xbar.scale(&h))?;
    Ok((defect, fs, ds))
}

/// Max component of `[Y, X̄] - h X̄` over the grid.
///
/// Closed-form candidates on opaque-free systems are first checked
/// symbolically; an exactly vanishing residual is reported as such.
pub fn symmetry_residual(
    y: &SymmetryCandidate,
    sys: &LieSystemDef,
    grid: &SampleGrid,
) -> Result<ResidualReport, LieSysError> {
    if grid.is_empty() {
        return Err(LieSysError::GridEmpty);
    }
    if y.len() != sys.r() + 1 {
        return Err(LieSysError::BadInput(format!(
            "candidate has {} functions, expected {}",
            y.len(),
            sys.r() + 1
        )));
    }
    let (defect, fs, ds) = symmetry_defect_field(sys)?;
    let tv = sys.time_state_vars();

    if let CandidateForm::Closed(cf) = &y.form {
        let mut map = HashMap::new();
        for (i, f) in cf.iter().enumerate() {
            map.insert(fs[i].clone(), f.clone());
            map.insert(ds[i].clone(), f.differentiate(&sys.time)?);
        }
        let concrete = defect.substitute_many(&map)?;
        if concrete.is_zero() == ZeroTest::Zero {
            return Ok(ResidualReport {
                max_abs: 0.0,
                exact_zero: true,
                evaluations: 0,
                mode: ResidualMode::Symbolic,
            });
        }
        let compiled = concrete
            .components()
            .iter()
            .map(|c| c.compile(&tv))
            .collect::<Result<Vec<_>, _>>()?;
        let max_abs = grid_max(grid, |t, x, buf| {
            buf.clear();
            buf.push(t);
            buf.extend_from_slice(x);
            let mut m: f64 = 0.0;
            for c in &compiled {
                m = m.max(c.eval(buf)?.abs());
            }
            Ok(m)
        })?;
        return Ok(ResidualReport {
            max_abs,
            exact_zero: false,
            evaluations: grid.len(),
            mode: ResidualMode::Numeric,
        });
    }

    let mut vars = tv.clone();
    vars.extend(fs.iter().cloned());
    vars.extend(ds.iter().cloned());
    let compiled = defect
        .components()
        .iter()
        .map(|c| c.compile(&vars))
        .collect::<Result<Vec<_>, _>>()?;
    let per_time: Vec<(Vec<f64>, Vec<f64>)> = grid
        .times
        .iter()
        .map(|&t| y.at(&sys.time, t))
        .collect::<Result<_, _>>()?;
    let index: HashMap<u64, usize> = grid.times.iter().enumerate().map(|(i, t)| (t.to_bits(), i)).collect();
    let max_abs = grid_max(grid, |t, x, buf| {
        let (v, d) = &per_time[index[&t.to_bits()]];
        buf.clear();
        buf.push(t);
        buf.extend_from_slice(x);
        buf.extend_from_slice(v);
        buf.extend_from_slice(d);
        let mut m: f64 = 0.0;
        for c in &compiled {
            m = m.max(c.eval(buf)?.abs());
        }
        Ok(m)
    })?;
    Ok(ResidualReport {
        max_abs,
        exact_zero: false,
        evaluations: grid.len(),
        mode: ResidualMode::Numeric,
    })
}

/// Evaluate over all `(t, x)` pairs in parallel and reduce in grid order.
fn grid_max<F>(grid: &SampleGrid, f: F) -> Result<f64, LieSysError>
where
    F: Fn(f64, &[f64], &mut Vec<f64>) -> Result<f64, ExprError> + Sync,
{
    let values: Vec<Result<f64, ExprError>> = grid
        .times
        .par_iter()
        .flat_map_iter(|&t| {
            let f = &f;
            grid.points.iter().map(move |x| {
                let mut buf = Vec::new();
                f(t, x, &mut buf)
            })
        })
        .collect();
    let mut m: f64 = 0.0;
    for v in values {
        let v = v?;
        if v.is_nan() {
            return Ok(f64::NAN);
        }
        m = m.max(v);
    }
    Ok(m)
}

/// Ratio below which a transport defect is considered first order.
pub const FIRST_ORDER_RATIO: f64 = 2.6;
/// Accepted band for second-order vanishing.
pub const SECOND_ORDER_BAND: (f64, f64) = (3.2, 4.8);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportVerdict {
    /// `Y` vanishes on the solution; nothing moves.
    Exact,
    SecondOrder,
    /// Defect halves with `ε`: not a symmetry.
    Flagged,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportReport {
    pub ratio: f64,
    pub defect_eps: f64,
    pub defect_half: f64,
    pub base_defect: f64,
    pub verdict: TransportVerdict,
}

/// Transport `sol` by the Euler step of `Y`'s flow at `ε` and `ε/2` and
/// compare how far the images are from being solutions.
pub fn flow_transport_check(
    sys: &LieSystemDef,
    y: &SymmetryCandidate,
    sol: &Trajectory,
    eps: f64,
) -> Result<TransportReport, LieSysError> {
    if sol.len() < 7 {
        return Err(LieSysError::BadInput("solution needs at least 7 samples".into()));
    }
    if y.len() != sys.r() + 1 {
        return Err(LieSysError::BadInput("candidate size does not match the system".into()));
    }
    let rhs = sys.compile()?;
    let xs = sys.vars().to_vec();
    let basis: Vec<Vec<CompiledExpr>> = sys
        .basis
        .fields()
        .iter()
        .map(|f| f.components().iter().map(|c| c.compile(&xs)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let n = xs.len();
    // displacement (dt, dx) of Y at each sample
    let mut disp: Vec<(f64, Vec<f64>)> = Vec::with_capacity(sol.len());
    let mut y_max: f64 = 0.0;
    for (t, x) in sol.times.iter().zip(&sol.states) {
        let (f, _) = y.at(&sys.time, *t)?;
        let mut dx = vec![0.0; n];
        for (a, comps) in basis.iter().enumerate() {
            if f[a + 1] == 0.0 {
                continue;
            }
            for i in 0..n {
                dx[i] += f[a + 1] * comps[i].eval(x)?;
            }
        }
        y_max = y_max.max(f[0].abs()).max(dx.iter().fold(0.0, |m, v| m.max(v.abs())));
        disp.push((f[0], dx));
    }
    let base_defect = transport_defect(&rhs, sol, &disp, 0.0)?;
    if y_max == 0.0 {
        return Ok(TransportReport {
            ratio: f64::NAN,
            defect_eps: 0.0,
            defect_half: 0.0,
            base_defect,
            verdict: TransportVerdict::Exact,
        });
    }
    let defect_eps = transport_defect(&rhs, sol, &disp, eps)?;
    let defect_half = transport_defect(&rhs, sol, &disp, eps / 2.0)?;
    let ratio = defect_eps / defect_half;
    let verdict = if ratio <= FIRST_ORDER_RATIO {
        TransportVerdict::Flagged
    } else if (SECOND_ORDER_BAND.0..=SECOND_ORDER_BAND.1).contains(&ratio) {
        TransportVerdict::SecondOrder
    } else {
        TransportVerdict::Inconclusive
    };
    Ok(TransportReport {
        ratio,
        defect_eps,
        defect_half,
        base_defect,
        verdict,
    })
}

fn transport_defect(
    rhs: &CompiledSystem,
    sol: &Trajectory,
    disp: &[(f64, Vec<f64>)],
    eps: f64,
) -> Result<f64, LieSysError> {
    let m = sol.len();
    let n = sol.states[0].len();
    let tt: Vec<f64> = sol.times.iter().zip(disp).map(|(t, d)| t + eps * d.0).collect();
    let xx: Vec<Vec<f64>> = sol
        .states
        .iter()
        .zip(disp)
        .map(|(x, d)| x.iter().zip(&d.1).map(|(a, b)| a + eps * b).collect())
        .collect();
    let h = sol.step;
    let stencil = |s: &dyn Fn(usize) -> f64, k: usize| (s(k - 2) - 8.0 * s(k - 1) + 8.0 * s(k + 1) - s(k + 2)) / (12.0 * h);
    let mut worst: f64 = 0.0;
    for k in 2..m - 2 {
        if let Some(reason) = rhs.excluded_hit(tt[k], &xx[k]) {
            return Err(LieSysError::TransportLeftDomain { t: tt[k], reason });
        }
        let field = rhs
            .eval_vec(tt[k], &xx[k])
            .map_err(|e| LieSysError::TransportLeftDomain {
                t: tt[k],
                reason: e.to_string(),
            })?;
        let dt = stencil(&|j| tt[j], k);
        for i in 0..n {
            let dx = stencil(&|j| xx[j][i], k);
            let d = (dx / dt - field[i]).abs();
            if !d.is_finite() {
                return Err(LieSysError::TransportLeftDomain {
                    t: tt[k],
                    reason: "non-finite transported derivative".into(),
                });
            }
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// A scalar function of time given symbolically or by samples of its first
/// three derivatives.
#[derive(Clone, Debug)]
pub enum Curve {
    Expr(Expr),
    /// `derivs[k][i]` is the k-th derivative (k = 0..=3) at `times[i]`.
    Sampled { times: Vec<f64>, derivs: [Vec<f64>; 4] },
}

impl Curve {
    fn derivatives(&self, t: &Symbol) -> Result<Option<[Expr; 4]>, LieSysError> {
        match self {
            Curve::Expr(e) => {
                let d1 = e.differentiate(t)?;
                let d2 = d1.differentiate(t)?;
                let d3 = d2.differentiate(t)?;
                Ok(Some([e.clone(), d1, d2, d3]))
            }
            Curve::Sampled { .. } => Ok(None),
        }
    }

    fn sample(&self, t_sym: &Symbol, t: f64, i: usize) -> Result<[f64; 4], LieSysError> {
        match self {
            Curve::Expr(e) => {
                let ds = self.derivatives(t_sym)?.expect("symbolic");
                let _ = e;
                let mut p = HashMap::new();
                p.insert(t_sym.clone(), t);
                Ok([ds[0].eval(&p)?, ds[1].eval(&p)?, ds[2].eval(&p)?, ds[3].eval(&p)?])
            }
            Curve::Sampled { derivs, .. } => Ok([derivs[0][i], derivs[1][i], derivs[2][i], derivs[3][i]]),
        }
    }
}

/// Residual of `f3''' = f0''' + 4 b0 η + 2 η' f0 - 2 η' f3 - 4 η f3'`.
///
/// With all inputs symbolic and opaque-free the residual is decided exactly;
/// otherwise it is evaluated at `times` (the sample grid of any sampled
/// input takes precedence).
pub fn riccati_f3_ode_residual(
    f0: &Curve,
    f3: &Curve,
    eta: &Expr,
    b0: &Expr,
    t: &Symbol,
    times: &[f64],
) -> Result<ResidualReport, LieSysError> {
    let deta = eta.differentiate(t)?;
    if let (Some(a), Some(b)) = (f0.derivatives(t)?, f3.derivatives(t)?) {
        let two = Q::from_integer(2.into());
        let four = Q::from_integer(4.into());
        let res = &b[3]
            - &(&a[3] + &(b0 * eta).scale(&four) + (&deta * &a[0]).scale(&two)
                - (&deta * &b[0]).scale(&two)
                - (eta * &b[1]).scale(&four));
        match res.is_zero() {
            ZeroTest::Zero => {
                return Ok(ResidualReport {
                    max_abs: 0.0,
                    exact_zero: true,
                    evaluations: 0,
                    mode: ResidualMode::Symbolic,
                })
            }
            ZeroTest::NonZero | ZeroTest::Unknown { .. } => {}
        }
    }
    let grid: Vec<f64> = match (f0, f3) {
        (Curve::Sampled { times, .. }, _) | (_, Curve::Sampled { times, .. }) => times.clone(),
        _ => times.to_vec(),
    };
    if grid.is_empty() {
        return Err(LieSysError::GridEmpty);
    }
    let mut worst: f64 = 0.0;
    for (i, &tv) in grid.iter().enumerate() {
        let a = f0.sample(t, tv, i)?;
        let b = f3.sample(t, tv, i)?;
        let mut p = HashMap::new();
        p.insert(t.clone(), tv);
        let (e, de, g) = (eta.eval(&p)?, deta.eval(&p)?, b0.eval(&p)?);
        let r = b[3] - (a[3] + 4.0 * g * e + 2.0 * de * a[0] - 2.0 * de * b[0] - 4.0 * e * b[1]);
        worst = worst.max(r.abs());
    }
    Ok(ResidualReport {
        max_abs: worst,
        exact_zero: false,
        evaluations: grid.len(),
        mode: ResidualMode::Numeric,
    })
}

/// Default number of quadrature intervals per unit time.
pub const AFF_QUADRATURE_STEPS: usize = 1000;

/// Closed-form symmetry of `a(t) X_1 + b(t) X_2` on the affine algebra with
/// `b_0 = 0`:
///
/// ```text
/// f_0 = k
/// f_2 = k b(t) + c_1
/// f_1 = [∫_0^t (k a' - a (k b + c_1)) e^{-B} dt' + c_2] e^{B},  B = ∫_0^t b
/// ```
///
/// The quadratures use a composite Simpson rule on `[0, t_end]`; derivatives
/// of the sampled result come from finite differences.
pub fn aff_closed_form(
    a: &Expr,
    b: &Expr,
    t: &Symbol,
    k: f64,
    c1: f64,
    c2: f64,
    t_end: f64,
    steps: usize,
) -> Result<SymmetryCandidate, LieSysError> {
    if !(t_end > 0.0) || steps < 4 {
        return Err(LieSysError::BadInput("need t_end > 0 and at least 4 steps".into()));
    }
    let da = a.differentiate(t)?;
    let vars = [t.clone()];
    let (ca, cda, cb) = (a.compile(&vars)?, da.compile(&vars)?, b.compile(&vars)?);
    let bf = |s: f64| cb.eval(&[s]);
    let h = t_end / steps as f64;
    // B at grid points and midpoints
    let simpson = |f: &dyn Fn(f64) -> Result<f64, ExprError>, lo: f64, hi: f64| -> Result<f64, ExprError> {
        let m = 0.5 * (lo + hi);
        Ok((hi - lo) / 6.0 * (f(lo)? + 4.0 * f(m)? + f(hi)?))
    };
    let mut big_b = vec![0.0; steps + 1];
    let mut big_b_mid = vec![0.0; steps];
    for i in 0..steps {
        let lo = i as f64 * h;
        big_b_mid[i] = big_b[i] + simpson(&bf, lo, lo + 0.5 * h)?;
        big_b[i + 1] = big_b[i] + simpson(&bf, lo, lo + h)?;
    }
    let integrand = |s: f64, bb: f64| -> Result<f64, ExprError> {
        let av = ca.eval(&[s])?;
        Ok((k * cda.eval(&[s])? - av * (k * cb.eval(&[s])? + c1)) * (-bb).exp())
    };
    let mut inner = vec![0.0; steps + 1];
    for i in 0..steps {
        let lo = i as f64 * h;
        let v = h / 6.0
            * (integrand(lo, big_b[i])? + 4.0 * integrand(lo + 0.5 * h, big_b_mid[i])? + integrand(lo + h, big_b[i + 1])?);
        inner[i + 1] = inner[i] + v;
        if !inner[i + 1].is_finite() || !big_b[i + 1].is_finite() {
            return Err(LieSysError::QuadratureDiverged(lo + h));
        }
    }
    let times = linspace(0.0, t_end, steps + 1);
    let values = times
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f1 = (inner[i] + c2) * big_b[i].exp();
            let f2 = k * bf(s)? + c1;
            Ok(vec![k, f1, f2])
        })
        .collect::<Result<Vec<_>, ExprError>>()?;
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LieSysError::QuadratureDiverged(t_end));
    }
    SymmetryCandidate::sampled_fd(times, values)
}

/// `{f, g} = f g' - g f'`.
pub fn function_bracket(f: &Expr, g: &Expr, t: &Symbol) -> Result<Expr, LieSysError> {
    Ok(f * &g.differentiate(t)? - g * &f.differentiate(t)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureReport {
    /// `μ` with `[Y_i, Y_j] = Σ_k μ_{ijk} Y_k`, fixed at the initial time.
    pub constants: StructureTensor,
    pub max_residual: f64,
    pub samples: usize,
}

/// Integrate `df_α/dt = Σ b_β f_γ c_{γβα}` (`f_0 = 0`, `b_0 = 0`) from the
/// given initial vectors and check that the brackets of the resulting
/// symmetries close with constants fixed at the initial time.
pub fn symmetry_algebra_f0_zero(
    sys: &LieSystemDef,
    inits: &[Vec<f64>],
    t_span: (f64, f64),
    step: f64,
    bbox: &[(f64, f64)],
    seed: u64,
) -> Result<ClosureReport, LieSysError> {
    let r = sys.r();
    if inits.len() != r || inits.iter().any(|v| v.len() != r) {
        return Err(LieSysError::BadInput(format!("need {r} initial vectors of length {r}")));
    }
    let m: Vec<Vec<Q>> = inits
        .iter()
        .map(|v| v.iter().map(|x| Q::from_float(*x).unwrap_or_else(Q::zero)).collect())
        .collect();
    if linalg::rank(&m) < r {
        return Err(LieSysError::DependentInitialConditions);
    }
    let reduced = sys.clone().with_gauge(Expr::zero());
    let symsys = build_symmetry_system(&reduced)?;
    let trajs: Vec<Trajectory> = inits
        .par_iter()
        .map(|v| {
            let mut x0 = vec![0.0];
            x0.extend_from_slice(v);
            ode::integrate(&symsys.compile()?, &x0, t_span.0, t_span.1, step).map_err(LieSysError::from)
        })
        .collect::<Result<_, _>>()?;

    // closure constants from the initial data
    let c = sys.tensor();
    let inv = linalg::inverse(&transpose(&m)).ok_or(LieSysError::DependentInitialConditions)?;
    let mut mu = StructureTensor::zero(r);
    for i in 0..r {
        for j in i + 1..r {
            let mut e = vec![Q::zero(); r];
            for (g, eg) in e.iter_mut().enumerate() {
                for a in 0..r {
                    for b in 0..r {
                        let cv = c.get(a, b, g);
                        if !cv.is_zero() {
                            *eg += &m[i][a] * &m[j][b] * cv;
                        }
                    }
                }
            }
            for kk in 0..r {
                let v = (0..r).fold(Q::zero(), |acc, g| acc + &inv[kk][g] * &e[g]);
                mu.set(i, j, kk, v);
            }
        }
    }

    // bracket fields [X_a, X_b] evaluated numerically at sample points
    let xs = sys.vars().to_vec();
    let fields = sys.basis.fields();
    let comp = |f: &VectorField| -> Result<Vec<CompiledExpr>, ExprError> {
        f.components().iter().map(|c| c.compile(&xs)).collect()
    };
    let base: Vec<Vec<CompiledExpr>> = fields.iter().map(comp).collect::<Result<_, _>>()?;
    let mut brackets: Vec<Vec<Vec<CompiledExpr>>> = Vec::with_capacity(r);
    for a in 0..r {
        let mut row = Vec::with_capacity(r);
        for b in 0..r {
            row.push(comp(&fields[a].lie_bracket(&fields[b])?)?);
        }
        brackets.push(row);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..8)
        .map(|_| bbox.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect())
        .collect();
    let n_steps = trajs[0].len();
    let sample_idx: Vec<usize> = linspace(0.0, (n_steps - 1) as f64, 11).iter().map(|v| v.round() as usize).collect();
    let n = xs.len();
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    let muf: Vec<f64> = (0..r * r * r)
        .map(|idx| mu.get(idx / (r * r), (idx / r) % r, idx % r).to_f64().unwrap_or(f64::NAN))
        .collect();
    for &k in &sample_idx {
        let fvals: Vec<&[f64]> = trajs.iter().map(|tr| &tr.states[k][1..]).collect();
        for x in &points {
            let bx: Vec<Vec<f64>> = base
                .iter()
                .map(|cs| cs.iter().map(|c| c.eval(x)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()?;
            let bb: Vec<Vec<Vec<f64>>> = brackets
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|cs| cs.iter().map(|c| c.eval(x)).collect::<Result<Vec<_>, _>>())
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()?;
            for i in 0..r {
                for j in i + 1..r {
                    for comp_i in 0..n {
                        let mut lhs = 0.0;
                        for a in 0..r {
                            for b in 0..r {
                                lhs += fvals[i][a] * fvals[j][b] * bb[a][b][comp_i];
                            }
                        }
                        let mut rhs = 0.0;
                        for kk in 0..r {
                            let mk = muf[(i * r + j) * r + kk];
                            if mk == 0.0 {
                                continue;
                            }
                            for a in 0..r {
                                rhs += mk * fvals[kk][a] * bx[a][comp_i];
                            }
                        }
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
            samples += 1;
        }
    }
    Ok(ClosureReport {
        constants: mu,
        max_residual: worst,
        samples,
    })
}

fn transpose(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = m.len();
    let c = m.first().map_or(0, Vec::len);
    (0..c).map(|j| (0..n).map(|i| m[i][j].clone()).collect()).collect()
}

/// Coefficients of `[Y, Y']` for `Y = f_0 ∂_t + Σ f_α X_α`,
/// `Y' = g_0 ∂_t + Σ g_α X_α`:
/// `h_0 = f_0 g_0' - g_0 f_0'`, `h_γ = f_0 g_γ' - g_0 f_γ' + Σ f_α g_β c_{αβγ}`.
///
/// Sampled inputs must share their time grid; the result carries
/// finite-difference derivatives.
pub fn candidate_bracket(
    y1: &SymmetryCandidate,
    y2: &SymmetryCandidate,
    c: &StructureTensor,
    t: &Symbol,
) -> Result<SymmetryCandidate, LieSysError> {
    let r = c.dim();
    match (&y1.form, &y2.form) {
        (CandidateForm::Closed(f), CandidateForm::Closed(g)) => {
            let df = f.iter().map(|e| e.differentiate(t)).collect::<Result<Vec<_>, _>>()?;
            let dg = g.iter().map(|e| e.differentiate(t)).collect::<Result<Vec<_>, _>>()?;
            let mut h = vec![&f[0] * &dg[0] - &g[0] * &df[0]];
            for gi in 0..r {
                let mut e = &f[0] * &dg[gi + 1] - &g[0] * &df[gi + 1];
                for a in 0..r {
                    for b in 0..r {
                        let cv = c.get(a, b, gi);
                        if !cv.is_zero() {
                            e = e + (&f[a + 1] * &g[b + 1]).scale(cv);
                        }
                    }
                }
                h.push(e);
            }
            Ok(SymmetryCandidate::closed(h))
        }
        (
            CandidateForm::Sampled {
                times: t1,
                values: v1,
                derivs: d1,
            },
            CandidateForm::Sampled {
                times: t2,
                values: v2,
                derivs: d2,
            },
        ) => {
            if t1 != t2 {
                return Err(LieSysError::BadInput("candidates sampled on different grids".into()));
            }
            let cf: Vec<f64> = (0..r * r * r)
                .map(|idx| c.get(idx / (r * r), (idx / r) % r, idx % r).to_f64().unwrap_or(f64::NAN))
                .collect();
            let values = (0..t1.len())
                .map(|k| {
                    let (f, g, df, dg) = (&v1[k], &v2[k], &d1[k], &d2[k]);
                    let mut h = vec![f[0] * dg[0] - g[0] * df[0]];
                    for gi in 0..r {
                        let mut e = f[0] * dg[gi + 1] - g[0] * df[gi + 1];
                        for a in 0..r {
                            for b in 0..r {
                                e += f[a + 1] * g[b + 1] * cf[(a * r + b) * r + gi];
                            }
                        }
                        h.push(e);
                    }
                    h
                })
                .collect();
            SymmetryCandidate::sampled_fd(t1.clone(), values)
        }
        _ => Err(LieSysError::BadInput("cannot bracket closed and sampled candidates".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::ParseContext;
    use crate::expr::{q_int, OpaqueFn};
    use std::sync::Arc;

    fn p(s: &str) -> Expr {
        ParseContext::new().parse(s).unwrap()
    }

    fn field(vars: &[&str], comps: &[&str]) -> VectorField {
        VectorField::from_names(vars, comps.iter().map(|c| p(c)).collect()).unwrap()
    }

    fn riccati(eta: &str) -> LieSystemDef {
        let basis =
            LieAlgebraBasis::new(vec![field(&["x"], &["1"]), field(&["x"], &["x"]), field(&["x"], &["x^2"])]).unwrap();
        LieSystemDef::new(basis, vec![p(eta), p("0"), p("1")], Symbol::new("t")).unwrap()
    }

    #[test]
    fn sl2_symmetry_fields_match_the_display() {
        let sb = symmetry_system_basis(&StructureTensor::sl2());
        let f = |i: usize| Expr::var(&format!("f{i}"));
        let vars = sb.vars.clone();
        let mk = |comps: Vec<Expr>| VectorField::new(vars.clone(), comps).unwrap();
        let y1 = mk(vec![Expr::zero(), -f(2), f(3).scale(&q_int(-2)), Expr::zero()]);
        let y2 = mk(vec![Expr::zero(), f(1), Expr::zero(), -f(3)]);
        let y3 = mk(vec![Expr::zero(), Expr::zero(), f(1).scale(&q_int(2)), f(2)]);
        for (got, want) in sb.y.iter().zip([y1, y2, y3]) {
            assert_eq!(got.sub(&want).unwrap().is_zero(), ZeroTest::Zero);
        }
    }

    #[test]
    fn riccati_symmetry_system() {
        let sys = riccati("t");
        let built = build_symmetry_system(&sys).unwrap();
        let rhs = built.field();
        let expected = ["0", "f0 - t*f2", "2*f1 - 2*t*f3", "f2"];
        for (c, e) in rhs.components().iter().zip(expected) {
            assert!(c.equals(&p(e)), "{c} vs {e}");
        }
        let direct = symmetry_system_rhs(&sys).unwrap();
        for (a, b) in rhs.components().iter().zip(&direct) {
            assert!(a.equals(b));
        }
    }

    #[test]
    fn missing_derivative_is_reported() {
        let eta = OpaqueFn::new("eta", vec![Arc::new(|t: f64| t)]);
        let mut sys = riccati("0");
        sys.coeffs[0] = Expr::opaque(&eta, &Symbol::new("t"));
        assert!(matches!(build_symmetry_system(&sys), Err(LieSysError::MissingDerivative(_))));
    }

    #[test]
    fn abelian_symmetry_fields_vanish() {
        let sb = symmetry_system_basis(&StructureTensor::zero(2));
        assert!(sb.y.iter().all(VectorField::is_zero_exact));
        assert_eq!(sb.y_span_dim(), 0);
    }

    #[test]
    fn autonomous_field_is_its_own_symmetry() {
        let sys = riccati("1");
        let y = SymmetryCandidate::closed(vec![p("1"), p("1"), p("0"), p("1")]);
        let grid = SampleGrid::new((0.0, 1.0), 5, &[(-1.0, 1.0)], 5, 1);
        assert!(symmetry_residual(&y, &sys, &grid).unwrap().exact_zero);
        let sys = riccati("t");
        let y = SymmetryCandidate::closed(vec![p("1"), p("t"), p("0"), p("1")]);
        assert!(symmetry_residual(&y, &sys, &grid).unwrap().exact_zero);
        let y = SymmetryCandidate::closed(vec![p("1"), p("0"), p("0"), p("1")]);
        let rep = symmetry_residual(&y, &sys, &grid).unwrap();
        assert!(!rep.exact_zero && rep.max_abs > 0.1);
        assert!(matches!(
            symmetry_residual(&y, &sys, &SampleGrid::default()),
            Err(LieSysError::GridEmpty)
        ));
    }

    #[test]
    fn function_bracket_examples() {
        let t = Symbol::new("t");
        assert!(function_bracket(&p("1"), &p("t"), &t).unwrap().equals(&p("1")));
        assert!(function_bracket(&p("t"), &p("t^2"), &t).unwrap().equals(&p("t^2")));
    }

    #[test]
    fn constant_affine_closed_form() {
        let t = Symbol::new("t");
        let y = aff_closed_form(&p("1"), &p("0"), &t, 0.5, 2.0, 3.0, 1.0, 200).unwrap();
        let (v, d) = y.at(&t, 0.75).unwrap();
        assert!((v[1] - (-2.0 * 0.75 + 3.0)).abs() < 1e-12);
        assert!((v[2] - 2.0).abs() < 1e-12);
        assert!((d[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn five_point_is_exact_on_quartics() {
        let h = 0.1;
        let y: Vec<f64> = (0..9).map(|i| (i as f64 * h).powi(4)).collect();
        let d = five_point_derivative(&y, h);
        for (i, v) in d.iter().enumerate() {
            let x = i as f64 * h;
            assert!((v - 4.0 * x.powi(3)).abs() < 1e-10, "{i}: {v}");
        }
    }
}
