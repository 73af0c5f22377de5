mod common;

use std::sync::OnceLock;

use approx::assert_relative_eq;
use common::{blocks, dense_schur};
use icdd::fem::FemConfig;
use icdd::icdd::{assemble_problem, IcddGeometry, IcddProblem, Physics, Provenance};
use icdd::linalg::{norm2, KrylovConfig};
use icdd::presets::{TestCase, TestCasePreset, C1};
use icdd::IcddError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Small cavity instance, well under 300 unknowns.
fn tiny() -> &'static IcddProblem {
    static P: OnceLock<IcddProblem> = OnceLock::new();
    P.get_or_init(|| {
        let preset = TestCasePreset::new(TestCase::Cavity);
        let geometry = IcddGeometry { domain: preset.domain, y_p: 0.0, delta: 0.25, h: 0.25 };
        let physics = Physics { preset, permeability: 1e-3 };
        assemble_problem(geometry, physics, &FemConfig::default()).unwrap()
    })
}

#[test]
fn dense_schur_matches_column_probing() {
    let p = tiny();
    let b = blocks(p);
    assert!(b.a.nrows() + b.r.nrows() <= 300, "{} unknowns", b.a.nrows() + b.r.nrows());
    let s = dense_schur(&b);
    let m = p.n_interface();
    let mut probed = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        probed.set_column(j, &DVector::from_vec(p.schur_apply(&e).unwrap()));
    }
    let diff = (&probed - &s).abs().max();
    assert!(diff <= 1e-10 * s.abs().max(), "max difference {diff:e}");
}

#[test]
fn dense_rhs_and_interface_solution() {
    let p = tiny();
    let b = blocks(p);
    let lu = b.a.clone().lu();
    let u = lu.solve(&b.f).unwrap();
    let w = lu.solve(&(&b.a_gamma * &b.r * &u)).unwrap();
    let rhs = &b.r * &u - &b.r * &w;
    let got = DVector::from_vec(p.schur_rhs().unwrap());
    assert!((&got - &rhs).norm() <= 1e-10 * rhs.norm());

    // the coupled system eliminated directly
    let (n, m) = (b.a.nrows(), b.r.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&b.a);
    k.view_mut((0, n), (n, m)).copy_from(&b.a_gamma);
    k.view_mut((n, 0), (m, n)).copy_from(&(-&b.r));
    k.view_mut((n, n), (m, m)).fill_with_identity();
    let mut f = DVector::zeros(n + m);
    f.rows_mut(0, n).copy_from(&b.f);
    let x = k.lu().solve(&f).unwrap();
    let g_exact = x.rows(n, m).into_owned();

    let sol = p.solve(&KrylovConfig::default()).unwrap();
    let g = DVector::from_vec(sol.interface.g.clone());
    assert!((&g - &g_exact).norm() <= 1e-6 * g_exact.norm());
    let mono = p.monolithic_solve().unwrap();
    assert!((DVector::from_vec(mono.g) - &g_exact).norm() <= 1e-10 * g_exact.norm());
}

#[test]
fn icdd_agrees_with_monolithic() {
    let p = tiny();
    let sol = p.solve(&KrylovConfig::default()).unwrap();
    let mono = p.monolithic_solve().unwrap();
    for (a, b) in [(&sol.composite.stokes, &mono.composite.stokes), (&sol.composite.darcy, &mono.composite.darcy)] {
        for c in 0..3 {
            let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x[c] - y[c]).collect();
            let r: Vec<f64> = b.values.iter().map(|y| y[c]).collect();
            assert!(norm2(&d) <= 1e-6 * norm2(&r).max(f64::MIN_POSITIVE), "component {c}");
        }
    }
    assert!(sol.matching.iter().chain(&sol.dual).all(|v| *v <= 1e-6), "{:?} {:?}", sol.matching, sol.dual);
}

#[test]
fn composite_provenance() {
    let p = tiny();
    let sol = p.solve(&KrylovConfig::default()).unwrap();
    let c = &sol.composite;
    assert_eq!(c.y_f, -0.25);
    assert_eq!(c.provenance(0.1), Provenance::Stokes);
    assert_eq!(c.provenance(-0.25), Provenance::Stokes);
    assert_eq!(c.provenance(-0.3), Provenance::Darcy);
    assert_eq!(c.eval(0.0, -0.4), sol.composite.darcy.eval(0.0, -0.4));
    let mut csv = vec![];
    c.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,y,u1,u2,p,provenance");
    assert!(text.contains(",stokes") && text.contains(",darcy"));
}

#[test]
fn zero_data_gives_zero_interface() {
    let preset = TestCasePreset::new(TestCase::ObliqueFiltration).scaled(0.0);
    let geometry = IcddGeometry { domain: preset.domain, y_p: 0.0, delta: 0.25, h: 0.25 };
    let p = assemble_problem(geometry, Physics { preset, permeability: 1e-3 }, &FemConfig::default()).unwrap();
    let sol = p.solve(&KrylovConfig::default()).unwrap();
    assert!(sol.interface.g.iter().all(|v| *v == 0.0));
    assert_eq!(sol.interface.iterations, 0);
}

#[test]
fn rejected_geometries() {
    let preset = TestCasePreset::new(TestCase::Cavity);
    let physics = Physics { preset, permeability: 1e-3 };
    let fem = FemConfig::default();
    let geo = |delta, h| IcddGeometry { domain: preset.domain, y_p: 0.0, delta, h };
    assert!(matches!(assemble_problem(geo(0.0, 0.25), physics, &fem), Err(IcddError::InterfacesNotDisjoint(_))));
    assert!(assemble_problem(geo(0.6, 0.25), physics, &fem).is_err());
    assert!(assemble_problem(geo(0.1, -1.0), physics, &fem).is_err());
    let bad = Physics { permeability: 0.0, ..physics };
    assert!(assemble_problem(geo(0.25, 0.25), bad, &fem).is_err());
    let p = tiny();
    assert!(matches!(p.schur_apply(&[1.0]), Err(IcddError::DimensionMismatch { .. })));
}

#[test]
fn short_overlap_snaps_to_one_row() {
    let preset = TestCasePreset::new(TestCase::Cavity);
    let geometry = IcddGeometry { domain: preset.domain, y_p: 0.0, delta: C1.delta_star(0.1).unwrap(), h: 0.1 };
    let p = assemble_problem(
        geometry,
        Physics { preset, permeability: C1.permeability(0.1).unwrap() },
        &FemConfig::default(),
    )
    .unwrap();
    assert_relative_eq!(p.y_f(), -0.1, epsilon = 1e-12);
    assert_relative_eq!(p.overlap(), 0.1, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schur_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, seed in 0u64..1000) {
        let p = tiny();
        let m = p.n_interface();
        let g1: Vec<f64> = (0..m).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let g2: Vec<f64> = (0..m).map(|i| ((i as u64 * 7 + seed * 3) % 11) as f64 - 5.0).collect();
        let mix: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
        let (s1, s2, sm) = (p.schur_apply(&g1).unwrap(), p.schur_apply(&g2).unwrap(), p.schur_apply(&mix).unwrap());
        let expect: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
        let d: Vec<f64> = sm.iter().zip(&expect).map(|(x, y)| x - y).collect();
        prop_assert!(norm2(&d) <= 1e-9 * (1.0 + norm2(&expect)));
    }

    #[test]
    fn data_scaling_is_linear(s in 0.1..10.0f64) {
        let base = tiny();
        let preset = base.physics.preset.scaled(s);
        let p = assemble_problem(base.geometry, Physics { preset, ..base.physics }, &FemConfig::default()).unwrap();
        let (b0, b1) = (base.schur_rhs().unwrap(), p.schur_rhs().unwrap());
        let d: Vec<f64> = b1.iter().zip(&b0).map(|(x, y)| x - s * y).collect();
        prop_assert!(norm2(&d) <= 1e-10 * s * norm2(&b0));
    }
}
