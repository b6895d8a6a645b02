mod support;

use liesym::catalog::{self, Params};
use liesym::expr::{q_frac, Expr, Symbol};
use liesym::liealg::LieAlgebraBasis;
use liesym::ode::OdeError;
use liesym::pdesys::{
    build_pde_symmetry_system, curvature_residual, integrate_along_path, integrate_along_path_unchecked,
    is_integrable, path_disagreement, pde_symmetry_residual, sample_pde_symmetry, PDELieSystemDef, PdeCandidate,
    PdeError, PdeGrid, TimePath,
};
use liesym::vectorfield::VectorField;
use proptest::prelude::*;

fn sl2_basis() -> LieAlgebraBasis {
    let f = |c: &str| VectorField::from_names(&["x"], vec![support::parse(c)]).unwrap();
    LieAlgebraBasis::new(vec![f("1"), f("x"), f("x^2")]).unwrap()
}

/// `b_{α2} = λ b_{α1}`, both functions of `t1 + λ t2`: always flat.
fn proportional(lam: (i64, i64), g: &[(i64, i64)]) -> PDELieSystemDef {
    let lam = q_frac(lam.0, lam.1);
    let s = support::parse(&format!("t1 + ({lam})*t2"));
    let coeffs = (0..3)
        .map(|a| {
            let c = |i: usize| q_frac(g[3 * a + i].0, g[3 * a + i].1);
            let ga = Expr::rational(c(0)) + s.scale(&c(1)) + (&s * &s).scale(&c(2));
            vec![ga.clone(), ga.scale(&lam)]
        })
        .collect();
    PDELieSystemDef::new(&sl2_basis(), coeffs, vec![Symbol::new("t1"), Symbol::new("t2")])
        .unwrap()
        .with_domain(vec![(0.0, 0.5), (0.0, 0.5)])
        .unwrap()
}

fn nonzero() -> impl Strategy<Value = (i64, i64)> {
    (prop_oneof![-3i64..=-1, 1i64..=3], 1i64..=3)
}

fn coeffs() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-2i64..=2, 1i64..=3), 9)
}

fn paths() -> Vec<TimePath> {
    vec![
        TimePath::new(vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.5, 0.5]], 200).unwrap(),
        TimePath::new(vec![vec![0.0, 0.0], vec![0.5, 0.5]], 200).unwrap(),
        TimePath::new(vec![vec![0.0, 0.0], vec![0.0, 0.5], vec![0.5, 0.5]], 200).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn proportional_ansatz_is_flat_and_path_independent(lam in nonzero(), g in coeffs(), x0 in -0.3f64..0.3) {
        let sys = proportional(lam, &g);
        prop_assert!(curvature_residual(&sys).unwrap().exact_zero);
        let d = match path_disagreement(&sys, &[x0], &paths(), true) {
            // random coefficients can send x to a pole inside the domain
            Err(PdeError::Ode(OdeError::PoleEncountered { .. })) => return Err(TestCaseError::reject("pole")),
            r => r.unwrap(),
        };
        prop_assert!(d <= 1e-6, "disagreement {d}");
    }

    #[test]
    fn symmetry_oracles_agree(lam in nonzero(), g in coeffs(), f in prop::collection::vec(-1.0f64..1.0, 3), seed in 0u64..1000) {
        let sys = proportional(lam, &g);
        let sym = build_pde_symmetry_system(&sys).unwrap();
        prop_assert!(curvature_residual(&sym).unwrap().passes(1e-9));
        let grid = PdeGrid::new(&[(0.0, 0.5), (0.0, 0.5)], 3, &[(-1.0, 1.0)], 6, seed);
        let cand = sample_pde_symmetry(&sym, &f, &[0.0, 0.0], &grid.times, 100).unwrap();
        let rep = pde_symmetry_residual(&cand, &sys, &grid).unwrap();
        prop_assert!(rep.agreement <= 1e-9, "gap {}", rep.agreement);
        prop_assert!(rep.bracket_max <= 1e-6, "bracket {}", rep.bracket_max);
    }
}

#[test]
fn non_symmetry_fails_both_oracles() {
    let sys = proportional((1, 2), &[(1, 1); 9]);
    let f = vec![Expr::int(1), Expr::zero(), Expr::zero()];
    let cand = PdeCandidate::from_coefficients(&sys, &f).unwrap();
    let grid = PdeGrid::new(&[(0.0, 0.5), (0.0, 0.5)], 3, &[(-1.0, 1.0)], 6, 1);
    let rep = pde_symmetry_residual(&cand, &sys, &grid).unwrap();
    assert!(rep.bracket_max > 1e-3 && rep.jet_max > 1e-3, "{rep:?}");
    assert!(rep.agreement <= 1e-9);
}

#[test]
fn perturbed_fixture_is_refused() {
    let en = catalog::make("partial_riccati", &Params::new().set("perturb", "1/10")).unwrap();
    let sys = en.pde().unwrap();
    assert!(!is_integrable(sys).unwrap());
    let path = TimePath::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 100).unwrap();
    assert!(matches!(integrate_along_path(sys, &[0.3], &path), Err(PdeError::NotIntegrable(_))));
    assert!(matches!(build_pde_symmetry_system(sys), Err(PdeError::NotIntegrable(_))));
    assert!(integrate_along_path_unchecked(sys, &[0.3], &path).is_ok());
}

#[test]
fn fixture_endpoints_agree() {
    let en = catalog::make("partial_riccati", &Params::new()).unwrap();
    let sys = en.pde().unwrap();
    assert!(curvature_residual(sys).unwrap().exact_zero);
    let p = vec![
        TimePath::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]], 200).unwrap(),
        TimePath::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 200).unwrap(),
    ];
    assert!(path_disagreement(sys, &[0.1], &p, true).unwrap() <= 1e-6);
}

#[test]
fn bad_paths_rejected() {
    assert!(TimePath::new(vec![vec![0.0, 0.0]], 10).is_err());
    assert!(TimePath::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 0).is_err());
    assert!(TimePath::new(vec![vec![0.0, 0.0], vec![1.0]], 10).is_err());
}
