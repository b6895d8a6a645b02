mod support;

use liesym::catalog::{self, dbh_symmetry_family, DbhMode, Params};
use liesym::expr::{q_frac, q_int, Expr, ZeroTest};
use liesym::liesys::{
    self, build_symmetry_system, candidate_bracket, flow_transport_check, symmetry_algebra_f0_zero,
    symmetry_residual, symmetry_system_rhs, LieSysError, SampleGrid, SymmetryCandidate, TransportVerdict,
};
use liesym::ode::{linear_convergence_ratio, OdeError};
use proptest::prelude::*;

fn poly_t() -> impl Strategy<Value = String> {
    prop::collection::vec((-3i64..=3, 1i64..=3), 3)
        .prop_map(|c| format!("({}/{}) + ({}/{})*t + ({}/{})*t^2", c[0].0, c[0].1, c[1].0, c[1].1, c[2].0, c[2].1))
}

fn sl2_params(b: &[String; 3], b0: &str) -> Params {
    Params::new().set("b1", &b[0]).set("b2", &b[1]).set("b3", &b[2]).set("b0", b0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn symmetry_system_is_a_lie_system(b1 in poly_t(), b2 in poly_t(), b3 in poly_t(), b0 in poly_t()) {
        let en = catalog::make("sl2_generic", &sl2_params(&[b1, b2, b3], &b0)).unwrap();
        let sys = en.ode().unwrap();
        let once = build_symmetry_system(sys).unwrap();
        prop_assert_eq!(once.tensor().jacobi_residual(), q_int(0));
        // the basis decomposition reproduces the direct formula
        let direct = symmetry_system_rhs(sys).unwrap();
        for (a, b) in once.field().components().iter().zip(&direct) {
            prop_assert_eq!((a - b).is_zero(), ZeroTest::Zero);
        }
    }

    #[test]
    fn isomorphic_systems_share_symmetry_systems(b1 in poly_t(), b2 in poly_t(), b3 in poly_t()) {
        let b = [b1, b2, b3];
        let reference = catalog::make("riccati", &sl2_params(&b, "0")).unwrap();
        let want: Vec<String> = build_symmetry_system(reference.ode().unwrap())
            .unwrap()
            .field()
            .components()
            .iter()
            .map(|c| c.to_string())
            .collect();
        for name in ["cayley_klein", "quaternionic", "dbh", "kummer_schwarz"] {
            let en = catalog::make(name, &sl2_params(&b, "0")).unwrap();
            let got: Vec<String> = build_symmetry_system(en.ode().unwrap())
                .unwrap()
                .field()
                .components()
                .iter()
                .map(|c| c.to_string())
                .collect();
            prop_assert_eq!(&got, &want, "{}", name);
        }
    }

    #[test]
    fn rk4_is_fourth_order(n in 5usize..=50) {
        // h = 1/n so that halving stays on a uniform grid
        let h = 1.0 / n as f64;
        let ratio = linear_convergence_ratio(h).unwrap();
        prop_assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} at h {h}");
    }
}

#[test]
fn symmetry_system_of_symmetry_system() {
    let en = catalog::make("aff_generic", &Params::new().set("b0", "t")).unwrap();
    let once = build_symmetry_system(en.ode().unwrap()).unwrap();
    let twice = build_symmetry_system(&once).unwrap();
    assert_eq!(twice.tensor().jacobi_residual(), q_int(0));
    assert_eq!(twice.vars().len(), once.r() + 1);
}

#[test]
fn riccati_pole_is_reported() {
    // x' = x^2 from x(0) = 1 blows up at t = 1
    let en = catalog::make("riccati", &Params::new().set("eta", "0")).unwrap();
    let err = liesys::integrate(en.ode().unwrap(), &[1.0], 0.0, 2.0, 1e-3).unwrap_err();
    match err {
        LieSysError::Ode(OdeError::PoleEncountered { t, .. }) => assert!((t - 1.0).abs() < 0.05, "t = {t}"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn trajectory_candidate_passes_residual() {
    let en = catalog::make("dbh", &Params::new().set("b0", "1")).unwrap();
    let sys = en.ode().unwrap();
    let symsys = build_symmetry_system(sys).unwrap();
    let tr = liesys::integrate(&symsys, &[2.0, 1.0, 1.0, 0.5], 0.0, 1.0, 1e-3).unwrap();
    let cand = SymmetryCandidate::from_trajectory(&symsys, &tr).unwrap();
    let grid = SampleGrid::new((0.0, 1.0), 20, &en.sample_box, 20, 7);
    assert!(symmetry_residual(&cand, sys, &grid).unwrap().passes(1e-6));
}

#[test]
fn non_symmetry_is_rejected() {
    let en = catalog::make("riccati", &Params::new()).unwrap();
    let cand = SymmetryCandidate::closed(vec![Expr::int(1), Expr::zero(), Expr::zero(), Expr::int(1)]);
    let grid = SampleGrid::new((0.0, 1.0), 5, &en.sample_box, 5, 1);
    let rep = symmetry_residual(&cand, en.ode().unwrap(), &grid).unwrap();
    assert!(!rep.passes(1e-6));
}

#[test]
fn empty_grid_is_an_error() {
    let en = catalog::make("riccati", &Params::new()).unwrap();
    let cand = SymmetryCandidate::closed(vec![Expr::zero(); 4]);
    let grid = SampleGrid::new((0.0, 1.0), 0, &en.sample_box, 5, 1);
    assert!(matches!(
        symmetry_residual(&cand, en.ode().unwrap(), &grid),
        Err(LieSysError::GridEmpty)
    ));
}

#[test]
fn dbh_family_brackets_stay_symmetries() {
    let en = catalog::make("dbh", &Params::new()).unwrap();
    let sys = en.ode().unwrap();
    let y1 = dbh_symmetry_family(DbhMode::B0Zero, &q_int(1), &q_int(0), &q_int(0), &q_int(1), &q_int(0));
    let y2 = dbh_symmetry_family(DbhMode::B0Zero, &q_int(0), &q_int(1), &q_frac(1, 2), &q_int(0), &q_int(0));
    let br = candidate_bracket(&y1, &y2, sys.tensor(), &support::t()).unwrap();
    let grid = SampleGrid::new((0.0, 1.0), 10, &en.sample_box, 10, 3);
    let rep = symmetry_residual(&br, sys, &grid).unwrap();
    assert!(rep.exact_zero, "{rep:?}");
}

#[test]
fn f0_zero_symmetries_close() {
    let en = catalog::make("riccati", &Params::new()).unwrap();
    let inits = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let rep = symmetry_algebra_f0_zero(en.ode().unwrap(), &inits, (0.0, 1.0), 1e-3, &en.sample_box, 5).unwrap();
    assert!(rep.max_residual < 1e-8, "{rep:?}");
    assert!(matches!(
        symmetry_algebra_f0_zero(en.ode().unwrap(), &vec![vec![1.0, 0.0, 0.0]; 3], (0.0, 1.0), 1e-3, &en.sample_box, 5),
        Err(LieSysError::DependentInitialConditions)
    ));
}

#[test]
fn transport_exact_when_candidate_vanishes() {
    let en = catalog::make("dbh", &Params::new()).unwrap();
    let sys = en.ode().unwrap();
    let sol = liesys::integrate(sys, &[1.2, 1.5, 1.8], 0.0, 0.1, 1e-3).unwrap();
    let zero = SymmetryCandidate::closed(vec![Expr::zero(); 4]);
    let rep = flow_transport_check(sys, &zero, &sol, 0.05).unwrap();
    assert_eq!(rep.verdict, TransportVerdict::Exact);
}
