mod support;

use std::collections::HashMap;

use liesym::expr::{q_frac, Expr, ParseContext, Symbol, ZeroTest};
use proptest::prelude::*;

/// Small expression tree with a plain f64 evaluator used as the oracle.
#[derive(Clone, Debug)]
enum Tree {
    X,
    Y,
    Const(i64, i64),
    Add(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    /// `a / (1 + b^2)`, never singular.
    Div(Box<Tree>, Box<Tree>),
}

impl Tree {
    fn expr(&self) -> Expr {
        match self {
            Tree::X => Expr::var("x"),
            Tree::Y => Expr::var("y"),
            Tree::Const(n, d) => Expr::rational(q_frac(*n, *d)),
            Tree::Add(a, b) => a.expr() + b.expr(),
            Tree::Mul(a, b) => a.expr() * b.expr(),
            Tree::Div(a, b) => {
                let den = Expr::int(1) + b.expr() * b.expr();
                a.expr().checked_div(&den).unwrap()
            }
        }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Tree::X => x,
            Tree::Y => y,
            Tree::Const(n, d) => *n as f64 / *d as f64,
            Tree::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Tree::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Tree::Div(a, b) => a.eval(x, y) / (1.0 + b.eval(x, y).powi(2)),
        }
    }
}

fn tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        Just(Tree::X),
        Just(Tree::Y),
        (-5i64..=5, 1i64..=4).prop_map(|(n, d)| Tree::Const(n, d)),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Tree::Div(Box::new(a), Box::new(b))),
        ]
    })
}

fn point(x: f64, y: f64) -> HashMap<Symbol, f64> {
    HashMap::from([(Symbol::new("x"), x), (Symbol::new("y"), y)])
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eval_matches_tree(t in tree(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let got = t.expr().eval(&point(x, y)).unwrap();
        prop_assert!(close(got, t.eval(x, y), 1e-10), "{got} vs {}", t.eval(x, y));
    }

    #[test]
    fn compiled_matches_eval(t in tree(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let e = t.expr();
        let c = e.compile(&[Symbol::new("x"), Symbol::new("y")]).unwrap();
        prop_assert!(close(c.eval(&[x, y]).unwrap(), e.eval(&point(x, y)).unwrap(), 1e-12));
    }

    #[test]
    fn derivative_matches_finite_difference(t in tree(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let d = t.expr().differentiate(&Symbol::new("x")).unwrap();
        let h = 1e-4;
        let fd = (-t.eval(x + 2.0 * h, y) + 8.0 * t.eval(x + h, y) - 8.0 * t.eval(x - h, y) + t.eval(x - 2.0 * h, y))
            / (12.0 * h);
        let got = d.eval(&point(x, y)).unwrap();
        prop_assert!(close(got, fd, 1e-6), "{got} vs {fd}");
    }

    #[test]
    fn differentiation_is_linear(f in tree(), g in tree(), a in -4i64..=4, b in 1i64..=3) {
        let x = Symbol::new("x");
        let k = q_frac(a, b);
        let lhs = (f.expr().scale(&k) + g.expr()).differentiate(&x).unwrap();
        let rhs = f.expr().differentiate(&x).unwrap().scale(&k) + g.expr().differentiate(&x).unwrap();
        prop_assert_eq!((lhs - rhs).is_zero(), ZeroTest::Zero);
    }

    #[test]
    fn product_rule(f in tree(), g in tree()) {
        let x = Symbol::new("x");
        let (fe, ge) = (f.expr(), g.expr());
        let lhs = (&fe * &ge).differentiate(&x).unwrap();
        let rhs = fe.differentiate(&x).unwrap() * ge.clone() + fe * ge.differentiate(&x).unwrap();
        prop_assert_eq!((lhs - rhs).is_zero(), ZeroTest::Zero);
    }

    #[test]
    fn display_round_trips(t in tree()) {
        let e = t.expr();
        let back = ParseContext::new().parse(&e.to_string()).unwrap();
        prop_assert_eq!((back - e).is_zero(), ZeroTest::Zero);
    }
}

#[test]
fn substitution_then_derivative() {
    let e = support::parse("x^3*y + x/(1 + y^2)");
    let sub = e.substitute(&Symbol::new("y"), &support::parse("2*x")).unwrap();
    let want = support::parse("2*x^4 + x/(1 + 4*x^2)");
    assert_eq!((sub.clone() - want).is_zero(), ZeroTest::Zero);
    let d = sub.differentiate(&Symbol::new("x")).unwrap();
    let dwant = support::parse("8*x^3 + (1 - 4*x^2)/(1 + 4*x^2)^2");
    assert_eq!((d - dwant).is_zero(), ZeroTest::Zero);
}
