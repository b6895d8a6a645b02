//! Finite-dimensional Lie algebras of vector fields.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;
use thiserror::Error;

use crate::expr::parse::{format_rational, parse_rational};
use crate::expr::{q_int, Expr, ExprError, Monomial, Poly, Symbol, Q};
use crate::linalg::{self, Matrix};
use crate::vectorfield::{VectorField, VfError};

/// Random sample points used by the numerical fallback.
pub const NUMERIC_SAMPLES: usize = 64;
/// Least-squares residual accepted by the numerical fallback.
pub const NUMERIC_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LieAlgError {
    #[error("bracket [X{a}, X{b}] is not in the span of the basis; residual {residual}")]
    NotClosed {
        a: usize,
        b: usize,
        residual: VectorField,
    },
    #[error("basis is linearly dependent (rank {rank} < {r})")]
    DependentBasis { rank: usize, r: usize },
    #[error("empty basis")]
    Empty,
    #[error("bad structure tensor: {0}")]
    BadTensor(String),
    #[error(transparent)]
    Field(#[from] VfError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// `c[a][b][g]` with `[X_a, X_b] = Σ_g c_{abg} X_g` (0-based storage).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureTensor {
    r: usize,
    c: Vec<Q>,
}

impl StructureTensor {
    pub fn zero(r: usize) -> Self {
        StructureTensor {
            r,
            c: vec![Q::zero(); r * r * r],
        }
    }

    /// Build from 1-based `(a, b, g, value)` entries with `a < b`; the
    /// antisymmetric partners are filled in.
    pub fn from_entries(r: usize, entries: &[(usize, usize, usize, Q)]) -> Result<Self, LieAlgError> {
        let mut t = StructureTensor::zero(r);
        for (a, b, g, v) in entries {
            if *a == 0 || *b == 0 || *g == 0 || *a > r || *b > r || *g > r {
                return Err(LieAlgError::BadTensor(format!("index ({a},{b},{g}) out of range 1..{r}")));
            }
            if a == b {
                if !v.is_zero() {
                    return Err(LieAlgError::BadTensor(format!("diagonal entry ({a},{a},{g}) nonzero")));
                }
                continue;
            }
            t.set(a - 1, b - 1, g - 1, v.clone());
        }
        Ok(t)
    }

    /// sl(2,R): c121 = 1, c132 = 2, c233 = 1.
    pub fn sl2() -> Self {
        StructureTensor::from_entries(
            3,
            &[(1, 2, 1, q_int(1)), (1, 3, 2, q_int(2)), (2, 3, 3, q_int(1))],
        )
        .expect("static tensor")
    }

    /// Affine line algebra: [X1, X2] = X1.
    pub fn aff() -> Self {
        StructureTensor::from_entries(2, &[(1, 2, 1, q_int(1))]).expect("static tensor")
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    fn idx(&self, a: usize, b: usize, g: usize) -> usize {
        (a * self.r + b) * self.r + g
    }

    /// 0-based access.
    pub fn get(&self, a: usize, b: usize, g: usize) -> &Q {
        &self.c[self.idx(a, b, g)]
    }

    /// 0-based; also sets `c_{bag} = -v`.
    pub fn set(&mut self, a: usize, b: usize, g: usize, v: Q) {
        let i = self.idx(b, a, g);
        self.c[i] = -v.clone();
        let i = self.idx(a, b, g);
        self.c[i] = v;
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..self.r).all(|a| {
            (0..self.r).all(|b| (0..self.r).all(|g| (self.get(a, b, g) + self.get(b, a, g)).is_zero()))
        })
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(Zero::is_zero)
    }

    /// Max over (i, a, b, n) of |Σ_m c_{iam} c_{mbn} + c_{abm} c_{min} + c_{bim} c_{man}|.
    pub fn jacobi_residual(&self) -> Q {
        let r = self.r;
        let mut worst = Q::zero();
        for i in 0..r {
            for a in 0..r {
                for b in 0..r {
                    for n in 0..r {
                        let mut s = Q::zero();
                        for m in 0..r {
                            s += self.get(i, a, m) * self.get(m, b, n);
                            s += self.get(a, b, m) * self.get(m, i, n);
                            s += self.get(b, i, m) * self.get(m, a, n);
                        }
                        let s = s.abs();
                        if s > worst {
                            worst = s;
                        }
                    }
                }
            }
        }
        worst
    }

    /// Matrix of `ad_{X_a}` in the basis: `(ad_a)_{g b} = c_{abg}`.
    pub fn adjoint(&self, a: usize) -> Matrix {
        (0..self.r)
            .map(|g| (0..self.r).map(|b| self.get(a, b, g).clone()).collect())
            .collect()
    }

    /// `K_{ab} = tr(ad_a ad_b)`.
    pub fn killing_form(&self) -> Matrix {
        let ads: Vec<Matrix> = (0..self.r).map(|a| self.adjoint(a)).collect();
        (0..self.r)
            .map(|a| {
                (0..self.r)
                    .map(|b| {
                        let prod = linalg::mat_mul(&ads[a], &ads[b]);
                        (0..self.r).fold(Q::zero(), |acc, i| acc + &prod[i][i])
                    })
                    .collect()
            })
            .collect()
    }

    /// Basis of the center as coefficient vectors.
    pub fn center(&self) -> Vec<Vec<Q>> {
        let r = self.r;
        // Σ_a v_a c_{abg} = 0 for every (b, g)
        let rows: Matrix = (0..r)
            .flat_map(|b| (0..r).map(move |g| (b, g)))
            .map(|(b, g)| (0..r).map(|a| self.get(a, b, g).clone()).collect())
            .collect();
        linalg::nullspace(&rows, r)
    }

    /// Tensor of the basis `X'_i = Σ_j P_{ij} X_j`.
    pub fn change_basis(&self, p: &Matrix) -> Result<StructureTensor, LieAlgError> {
        let r = self.r;
        let pinv = linalg::inverse(p).ok_or_else(|| LieAlgError::BadTensor("singular change of basis".into()))?;
        let mut out = StructureTensor::zero(r);
        for i in 0..r {
            for j in 0..r {
                // bracket coefficients in the old basis
                let mut old = vec![Q::zero(); r];
                for a in 0..r {
                    if p[i][a].is_zero() {
                        continue;
                    }
                    for b in 0..r {
                        if p[j][b].is_zero() {
                            continue;
                        }
                        let w = &p[i][a] * &p[j][b];
                        for (m, o) in old.iter_mut().enumerate() {
                            let c = self.get(a, b, m);
                            if !c.is_zero() {
                                *o += &w * c;
                            }
                        }
                    }
                }
                for k in 0..r {
                    let v = (0..r).fold(Q::zero(), |acc, m| acc + &old[m] * &pinv[m][k]);
                    let idx = out.idx(i, j, k);
                    out.c[idx] = v;
                }
            }
        }
        Ok(out)
    }

    /// 1-based entries `(a, b, g, c)` with `a < b` and `c != 0`.
    pub fn entries(&self) -> Vec<(usize, usize, usize, Q)> {
        let mut out = Vec::new();
        for a in 0..self.r {
            for b in a + 1..self.r {
                for g in 0..self.r {
                    let v = self.get(a, b, g);
                    if !v.is_zero() {
                        out.push((a + 1, b + 1, g + 1, v.clone()));
                    }
                }
            }
        }
        out
    }

    /// `[[a, b, g, "p/q"], ...]`, 1-based, `a < b` only.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.entries()
                .into_iter()
                .map(|(a, b, g, v)| serde_json::json!([a, b, g, format_rational(&v)]))
                .collect(),
        )
    }

    pub fn from_json(r: usize, v: &Value) -> Result<Self, LieAlgError> {
        let bad = |m: &str| LieAlgError::BadTensor(m.to_string());
        let arr = v.as_array().ok_or_else(|| bad("expected an array of entries"))?;
        let mut entries = Vec::with_capacity(arr.len());
        for e in arr {
            let e = e.as_array().filter(|e| e.len() == 4).ok_or_else(|| bad("entry must be [a,b,g,value]"))?;
            let ix = |k: usize| e[k].as_u64().map(|x| x as usize).ok_or_else(|| bad("index must be a positive integer"));
            let value = match &e[3] {
                Value::String(s) => parse_rational(s).map_err(|e| bad(&e.to_string()))?,
                Value::Number(n) => parse_rational(&n.to_string()).map_err(|e| bad(&e.to_string()))?,
                _ => return Err(bad("value must be a rational string")),
            };
            let (a, b, g) = (ix(0)?, ix(1)?, ix(2)?);
            if a >= b {
                return Err(bad("entries must satisfy a < b"));
            }
            entries.push((a, b, g, value));
        }
        StructureTensor::from_entries(r, &entries)
    }
}

impl fmt::Display for StructureTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let entries = self.entries();
        if entries.is_empty() {
            return f.write_str("0");
        }
        for (i, (a, b, g, v)) in entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "c{a}{b}{g}={}", format_rational(v))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractionMode {
    Exact,
    /// Least squares on random points; see [`NUMERIC_SAMPLES`].
    Numerical,
}

impl fmt::Display for ExtractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtractionMode::Exact => "exact",
            ExtractionMode::Numerical => "numerical",
        })
    }
}

/// Ordered basis of a closed Lie algebra of vector fields.
#[derive(Clone, Debug)]
pub struct LieAlgebraBasis {
    fields: Vec<VectorField>,
    tensor: StructureTensor,
    mode: ExtractionMode,
}

impl LieAlgebraBasis {
    pub fn new(fields: Vec<VectorField>) -> Result<Self, LieAlgError> {
        let (tensor, mode) = extract_structure_constants(&fields)?;
        Ok(LieAlgebraBasis { fields, tensor, mode })
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn tensor(&self) -> &StructureTensor {
        &self.tensor
    }

    pub fn mode(&self) -> ExtractionMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    pub fn vars(&self) -> &[Symbol] {
        self.fields[0].vars()
    }
}

/// Rows (component, monomial) -> coefficient vector over `exprs`, with each
/// component brought over a common denominator.
fn monomial_rows(columns: &[Vec<&Expr>]) -> Matrix {
    let ncols = columns.len();
    let ncomp = columns.first().map_or(0, Vec::len);
    let mut rows = Vec::new();
    for i in 0..ncomp {
        let exprs: Vec<&Expr> = columns.iter().map(|c| c[i]).collect();
        let common = Expr::common_denominator(exprs.iter().copied());
        let nums: Vec<Poly> = exprs.iter().map(|e| e.numerator_over(&common)).collect();
        let monos: BTreeSet<&Monomial> = nums.iter().flat_map(|p| p.terms.keys()).collect();
        for m in monos {
            rows.push(
                (0..ncols)
                    .map(|j| nums[j].terms.get(m).cloned().unwrap_or_else(Q::zero))
                    .collect(),
            );
        }
    }
    rows
}

/// Exact coordinates of `target` in `basis` (atoms treated as independent
/// indeterminates), or `None` if it is outside their span.
pub fn decompose_exact(target: &VectorField, basis: &[VectorField]) -> Option<Vec<Q>> {
    let mut columns: Vec<Vec<&Expr>> = basis.iter().map(|f| f.components().iter().collect()).collect();
    columns.push(target.components().iter().collect());
    let rows = monomial_rows(&columns);
    let r = basis.len();
    if rows.is_empty() {
        return Some(vec![Q::zero(); r]);
    }
    let a: Matrix = rows.iter().map(|row| row[..r].to_vec()).collect();
    let b: Vec<Q> = rows.iter().map(|row| row[r].clone()).collect();
    linalg::solve(&a, &b)
}

/// Exact rank of the basis in the monomial coefficient representation.
pub fn basis_rank(basis: &[VectorField]) -> usize {
    let columns: Vec<Vec<&Expr>> = basis.iter().map(|f| f.components().iter().collect()).collect();
    let rows = monomial_rows(&columns);
    if rows.is_empty() {
        0
    } else {
        linalg::rank(&rows)
    }
}

fn rationalize(x: f64) -> Q {
    // continued fraction expansion, stopped once within the fallback threshold
    let sign = if x < 0.0 { -1 } else { 1 };
    let mut v = x.abs();
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    for _ in 0..40 {
        let a = v.floor();
        if a > 1e12 {
            break;
        }
        let a = a as i64;
        let (h2, k2) = (a.saturating_mul(h1).saturating_add(h0), a.saturating_mul(k1).saturating_add(k0));
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if ((h1 as f64) / (k1 as f64) - x.abs()).abs() <= NUMERIC_THRESHOLD * 1e-2 {
            break;
        }
        let frac = v - a as f64;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1 == 0 {
        return Q::zero();
    }
    Q::new((sign * h1).into(), k1.into())
}

fn decompose_numeric(
    target: &VectorField,
    basis: &[VectorField],
    seed: u64,
) -> Result<Option<Vec<Q>>, ExprError> {
    let mut syms: BTreeSet<Symbol> = BTreeSet::new();
    for f in basis.iter().chain(std::iter::once(target)) {
        for c in f.components() {
            syms.extend(c.free_symbols());
        }
    }
    let syms: Vec<Symbol> = syms.into_iter().collect();
    let n = target.dim();
    let r = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::<f64>::zeros(NUMERIC_SAMPLES * n, r);
    let mut b = DVector::<f64>::zeros(NUMERIC_SAMPLES * n);
    for s in 0..NUMERIC_SAMPLES {
        let point: HashMap<Symbol, f64> = syms.iter().map(|v| (v.clone(), rng.gen_range(0.5..1.5))).collect();
        let tv = target.eval(&point)?;
        for i in 0..n {
            b[s * n + i] = tv[i];
        }
        for (j, f) in basis.iter().enumerate() {
            let fv = f.eval(&point)?;
            for i in 0..n {
                a[(s * n + i, j)] = fv[i];
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let Ok(x) = svd.solve(&b, 1e-12) else {
        return Ok(None);
    };
    let resid = (&a * &x - &b).amax();
    if resid > NUMERIC_THRESHOLD * (1.0 + b.amax()) {
        return Ok(None);
    }
    Ok(Some(x.iter().map(|v| rationalize(*v)).collect()))
}

/// Structure constants of `basis`. Exact monomial matching is used first;
/// fields with opaque leaves fall back to sampled least squares when the
/// exact match fails.
pub fn extract_structure_constants(basis: &[VectorField]) -> Result<(StructureTensor, ExtractionMode), LieAlgError> {
    let r = basis.len();
    if r == 0 {
        return Err(LieAlgError::Empty);
    }
    for f in &basis[1..] {
        if f.vars() != basis[0].vars() {
            return Err(VfError::DimensionMismatch("basis fields on different variables".into()).into());
        }
    }
    let rank = basis_rank(basis);
    if rank < r {
        return Err(LieAlgError::DependentBasis { rank, r });
    }
    let opaque = basis.iter().any(VectorField::has_opaque);
    let pairs: Vec<(usize, usize)> = (0..r).flat_map(|a| (a + 1..r).map(move |b| (a, b))).collect();
    let results: Vec<Result<(Vec<Q>, bool), LieAlgError>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let br = basis[a].lie_bracket(&basis[b])?;
            if br.is_zero_exact() {
                return Ok((vec![Q::zero(); r], false));
            }
            if let Some(c) = decompose_exact(&br, basis) {
                return Ok((c, false));
            }
            if opaque {
                let seed = 0x11e5_a19e ^ ((a * r + b) as u64);
                if let Some(c) = decompose_numeric(&br, basis, seed)? {
                    return Ok((c, true));
                }
            }
            Err(LieAlgError::NotClosed {
                a: a + 1,
                b: b + 1,
                residual: br,
            })
        })
        .collect();
    let mut t = StructureTensor::zero(r);
    let mut mode = ExtractionMode::Exact;
    for (&(a, b), res) in pairs.iter().zip(results) {
        let (c, numeric) = res?;
        if numeric {
            mode = ExtractionMode::Numerical;
        }
        for (g, v) in c.into_iter().enumerate() {
            t.set(a, b, g, v);
        }
    }
    Ok((t, mode))
}

/// `[X_a, X_b] - Σ c_{abg} X_g` for every pair, as an exactness check.
pub fn reconstruction_residual(basis: &[VectorField], t: &StructureTensor) -> Result<Vec<VectorField>, LieAlgError> {
    let r = basis.len();
    let vars = basis[0].vars().to_vec();
    let mut out = Vec::new();
    for a in 0..r {
        for b in a + 1..r {
            let br = basis[a].lie_bracket(&basis[b])?;
            let coeffs: Vec<Expr> = (0..r).map(|g| Expr::rational(t.get(a, b, g).clone())).collect();
            let rec = VectorField::combination(&vars, &coeffs, basis)?;
            out.push(br.sub(&rec)?);
        }
    }
    Ok(out)
}

/// Numerical view of a tensor for float-valued checks.
pub fn tensor_f64(t: &StructureTensor) -> Vec<f64> {
    t.c.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
}

/// Group entries by bracket pair for display: `[Xa,Xb] = ...`.
pub fn bracket_table(t: &StructureTensor) -> BTreeMap<(usize, usize), String> {
    let mut out = BTreeMap::new();
    for a in 0..t.r {
        for b in a + 1..t.r {
            let mut terms = Vec::new();
            for g in 0..t.r {
                let v = t.get(a, b, g);
                if !v.is_zero() {
                    terms.push(format!("{}*X{}", format_rational(v), g + 1));
                }
            }
            let rhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
            out.insert((a + 1, b + 1), rhs);
        }
    }
    out
}
