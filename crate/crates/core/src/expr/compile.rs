use num_traits::ToPrimitive;

use super::poly::{Atom, Poly, Symbol};
use super::{eval_atom, Expr, ExprError};

#[derive(Clone, Debug)]
struct CompiledPoly {
    terms: Vec<(f64, Vec<(Atom, usize, i32)>)>,
}

impl CompiledPoly {
    fn new(p: &Poly, vars: &[Symbol]) -> Result<Self, ExprError> {
        let mut terms = Vec::with_capacity(p.len());
        for (m, c) in &p.terms {
            let mut factors = Vec::with_capacity(m.0.len());
            for (a, e) in &m.0 {
                let s = a.symbol();
                let idx = vars
                    .iter()
                    .position(|v| v == s)
                    .ok_or_else(|| ExprError::UnboundSymbol(s.name().to_string()))?;
                factors.push((a.clone(), idx, *e as i32));
            }
            terms.push((c.to_f64().unwrap_or(f64::NAN), factors));
        }
        Ok(CompiledPoly { terms })
    }

    fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        let mut total = 0.0;
        for (c, factors) in &self.terms {
            let mut term = *c;
            for (a, idx, e) in factors {
                let v = match a {
                    Atom::Var(_) => x[*idx],
                    _ => eval_atom(a, x[*idx])?,
                };
                term *= if *e == 1 { v } else { v.powi(*e) };
            }
            total += term;
        }
        Ok(total)
    }
}

/// An expression lowered to f64 arithmetic over a fixed variable order.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    num: CompiledPoly,
    den: Vec<(CompiledPoly, i32)>,
    arity: usize,
}

impl CompiledExpr {
    pub fn new(e: &Expr, vars: &[Symbol]) -> Result<Self, ExprError> {
        let num = CompiledPoly::new(e.numerator(), vars)?;
        let den = e
            .denominator_factors()
            .map(|(g, k)| Ok((CompiledPoly::new(g, vars)?, k as i32)))
            .collect::<Result<Vec<_>, ExprError>>()?;
        Ok(CompiledExpr {
            num,
            den,
            arity: vars.len(),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        assert_eq!(x.len(), self.arity, "compiled expression arity");
        let n = self.num.eval(x)?;
        if self.den.is_empty() {
            return Ok(n);
        }
        let mut d = 1.0;
        for (g, k) in &self.den {
            d *= g.eval(x)?.powi(*k);
        }
        if d == 0.0 {
            return Err(ExprError::DivisionByZero);
        }
        Ok(n / d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn compiled_matches_interpreted() {
        let x = Expr::var("x");
        let y = Expr::var("y");
        let e = (&x * &x + Expr::int(3) * &y).checked_div(&(&y + Expr::one())).unwrap();
        let vars = [Symbol::new("x"), Symbol::new("y")];
        let c = e.compile(&vars).unwrap();
        let mut p = HashMap::new();
        p.insert(vars[0].clone(), 0.7);
        p.insert(vars[1].clone(), 1.9);
        assert!((c.eval(&[0.7, 1.9]).unwrap() - e.eval(&p).unwrap()).abs() < 1e-15);
        assert!(matches!(
            e.compile(&vars[..1]),
            Err(ExprError::UnboundSymbol(_))
        ));
    }
}
