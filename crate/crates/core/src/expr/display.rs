//! Deterministic, re-parseable rendering.

use std::fmt::{self, Write};

use num_traits::{One, Signed};

use super::poly::{Atom, Monomial, Poly, Q};
use super::Expr;

fn write_atom(out: &mut String, a: &Atom) {
    match a {
        Atom::Var(s) => out.push_str(s.name()),
        Atom::Opaque(o) => {
            let _ = write!(out, "@{}{}({})", o.func.name(), "'".repeat(o.order), o.arg);
        }
        Atom::Radical(r) => {
            let _ = write!(out, "({})^(1/{})", Poly::render(&r.base()), r.q);
        }
    }
}

fn write_monomial(out: &mut String, m: &Monomial) {
    for (i, (a, e)) in m.0.iter().enumerate() {
        if i > 0 {
            out.push('*');
        }
        write_atom(out, a);
        if *e != 1 {
            let _ = write!(out, "^{e}");
        }
    }
}

fn write_rational(out: &mut String, c: &Q) {
    if c.is_integer() {
        let _ = write!(out, "{}", c.numer());
    } else {
        let _ = write!(out, "{}/{}", c.numer(), c.denom());
    }
}

impl Poly {
    /// Terms in descending graded order, e.g. `x^2 - 3/2*x*y + 1`.
    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut terms: Vec<(&Monomial, &Q)> = self.terms.iter().collect();
        terms.sort_by(|a, b| b.0.grlex_cmp(a.0));
        let mut out = String::new();
        for (i, (m, c)) in terms.into_iter().enumerate() {
            let neg = c.is_negative();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let abs = c.abs();
            if m.is_one() {
                write_rational(&mut out, &abs);
            } else {
                if !abs.is_one() {
                    write_rational(&mut out, &abs);
                    out.push('*');
                }
                write_monomial(&mut out, m);
            }
        }
        out
    }

    fn is_single_term(&self) -> bool {
        self.len() == 1 && self.terms.values().all(|c| !c.is_negative())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = self.num.render();
        if self.den.is_empty() {
            return f.write_str(&num);
        }
        let mut den = String::new();
        for (i, (g, k)) in self.den.iter().enumerate() {
            if i > 0 {
                den.push('*');
            }
            let gs = g.render();
            let atomic = g.is_single_term() && g.terms.keys().all(|m| m.0.len() == 1);
            if atomic {
                den.push_str(&gs);
            } else {
                let _ = write!(den, "({gs})");
            }
            if *k != 1 {
                let _ = write!(den, "^{k}");
            }
        }
        let num = if self.num.is_single_term() || self.num.len() == 1 && !num.contains(' ') {
            num
        } else {
            format!("({num})")
        };
        if self.den.len() == 1 && !den.contains('*') {
            write!(f, "{num}/{den}")
        } else {
            write!(f, "{num}/({den})")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_in_stable_order() {
        let x = Expr::var("x");
        let y = Expr::var("y");
        let e = &x * &x - (&x * &y).scale(&super::super::q_frac(3, 2)) + Expr::one();
        assert_eq!(e.to_string(), "x^2 - 3/2*x*y + 1");
        let r = Expr::one().checked_div(&(&x + Expr::one())).unwrap();
        assert_eq!(r.to_string(), "1/(x + 1)");
    }
}
