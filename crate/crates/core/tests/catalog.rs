mod support;

use liesym::catalog::{self, table1_candidate, table1_eta, table1_f3, CatalogError, Params, Table1Row, NAMES};
use liesym::expr::{q_frac, q_int, Expr};
use liesym::liealg::extract_structure_constants;
use liesym::liealg::LieAlgebraBasis;
use liesym::liesys::{
    self, riccati_f3_ode_residual, symmetry_residual, Curve, LieSysError, LieSystemDef, SampleGrid,
};
use liesym::ode::OdeError;
use liesym::vectorfield::VectorField;

#[test]
fn every_entry_builds_and_closes() {
    for name in NAMES {
        let en = catalog::make(name, &Params::new()).unwrap();
        assert!(catalog::summary(name).is_some());
        let (c, _) = extract_structure_constants(en.basis_fields()).unwrap();
        assert_eq!(&c, en.tensor(), "{name}");
    }
}

#[test]
fn kummer_schwarz_excludes_x_zero() {
    let en = catalog::make("kummer_schwarz", &Params::new()).unwrap();
    assert!(!en.excluded.is_empty());
    let sys = en.ode().unwrap();
    assert!(liesys::integrate(sys, &[0.0, 1.0], 0.0, 1.0, 1e-3).is_err());
    // x = 1/y^2 with y affine: approaches the locus without crossing
    let tr = liesys::integrate(sys, &[0.01, -1.0], 0.0, 1.0, 1e-3).unwrap();
    assert!(tr.series(0).iter().all(|&x| x > 0.0));
}

#[test]
fn stepping_across_an_excluded_locus_is_refused() {
    let basis = LieAlgebraBasis::new(vec![VectorField::from_names(&["x"], vec![Expr::int(1)]).unwrap()]).unwrap();
    let sys = LieSystemDef::new(basis, vec![Expr::int(1)], support::t())
        .unwrap()
        .with_excluded(vec![support::parse("x - 10003/20000")]);
    match liesys::integrate(&sys, &[0.0], 0.0, 1.0, 1e-3) {
        Err(LieSysError::Ode(OdeError::PoleEncountered { t, .. })) => assert!((t - 0.501).abs() < 1e-9, "t = {t}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bessel_row_candidate_is_a_symmetry() {
    // the closed form is symmetric to rounding: sampled residual only
    let fx = support::special_functions();
    let (a, b, k) = (q_int(1), q_int(1), q_int(1));
    let eta = table1_eta(Table1Row::RationalPole, &a, &b, &k).unwrap();
    let f3 = table1_f3(Table1Row::RationalPole, &a, &b, &k, [&q_int(1), &q_int(0), &q_frac(1, 2)], &fx).unwrap();
    let cand = table1_candidate(&f3, &eta, &k).unwrap();
    let mut en = catalog::make("riccati", &Params::new()).unwrap();
    let sys = match &mut en.system {
        catalog::System::Ode(s) => {
            s.coeffs[0] = eta.clone();
            s.clone()
        }
        _ => unreachable!(),
    };
    let grid = SampleGrid::new((0.1, 1.0), 10, &[(-1.0, 1.0)], 10, 3);
    let rep = symmetry_residual(&cand, &sys, &grid).unwrap();
    assert!(rep.passes(1e-9), "{rep:?}");
    let times: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let r = riccati_f3_ode_residual(&Curve::Expr(Expr::int(1)), &Curve::Expr(f3), &eta, &Expr::zero(), &support::t(), &times)
        .unwrap();
    assert!(r.max_abs < 1e-9, "{r:?}");
}

#[test]
fn irrational_power_row_uses_opaque_leaves() {
    // a^2 - 4k = 1/2 is not a square
    let (a, b, k) = (q_int(1), q_int(1), q_frac(1, 8));
    let eta = table1_eta(Table1Row::RationalPoleSq, &a, &b, &k).unwrap();
    let f3 = table1_f3(
        Table1Row::RationalPoleSq,
        &a,
        &b,
        &k,
        [&q_int(1), &q_int(1), &q_int(0)],
        &Default::default(),
    )
    .unwrap();
    assert!(f3.has_opaque());
    let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let r = riccati_f3_ode_residual(
        &Curve::Expr(Expr::rational(k)),
        &Curve::Expr(f3),
        &eta,
        &Expr::zero(),
        &support::t(),
        &times,
    )
    .unwrap();
    assert!(r.max_abs < 1e-10, "{r:?}");
}

#[test]
fn parameter_errors() {
    assert!(matches!(
        catalog::make("riccati", &Params::new().set("eta", "@nosuch(t)")),
        Err(CatalogError::Parse(_)) | Err(CatalogError::BadParams(_))
    ));
    assert!(matches!(
        catalog::make("aff_generic", &Params::new().set("a", "x")),
        Err(CatalogError::Parse(_)) | Err(CatalogError::BadParams(_))
    ));
}
