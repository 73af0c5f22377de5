use std::sync::{Arc, OnceLock};

use approx::assert_relative_eq;
use icdd::dns::{porous_lattice, solve_dns, trivial_extension, DnsSolution};
use icdd::fem::FemConfig;
use icdd::homogenization::{solve_cell_problem, CellSolution};
use icdd::mesh::{build_rect_mesh, ObstacleLattice, RectDomain, StructuredMesh};
use icdd::presets::{TestCase, TestCasePreset};
use icdd::validation::*;
use proptest::prelude::*;

fn cell() -> &'static CellSolution {
    static C: OnceLock<CellSolution> = OnceLock::new();
    C.get_or_init(|| solve_cell_problem(&ObstacleLattice::unit_cell(0.6).unwrap(), 20, &FemConfig::default()).unwrap())
}

fn unit_grid(h: f64) -> StructuredMesh {
    build_rect_mesh(RectDomain::new(0.0, 1.0, 0.0, 1.0).unwrap(), h).unwrap()
}

/// Cell average of a field by two-point Gauss on a grid of `n` squares,
/// exact for bilinear pieces aligned with that grid.
fn cell_average(f: &dyn PointField, origin: [f64; 2], l: f64, n: usize) -> [f64; 3] {
    let g = 0.5 / 3f64.sqrt();
    let h = l / n as f64;
    let mut s = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            for (a, b) in [(-g, -g), (-g, g), (g, -g), (g, g)] {
                let x = origin[0] + (i as f64 + 0.5 + a) * h;
                let y = origin[1] + (j as f64 + 0.5 + b) * h;
                let v = f.value(x, y).unwrap();
                for c in 0..3 {
                    s[c] += v[c] / (4 * n * n) as f64;
                }
            }
        }
    }
    s
}

#[test]
fn reconstruction_average_is_darcy_velocity() {
    let darcy = |_: f64, _: f64| [2.0, -0.5, 7.0];
    let c = cell();
    let l = 0.1;
    let origin = [-0.5, -0.5];
    let rec = reconstruct_porous_velocity(&darcy, c, l, origin, Normalization::InversePermeability).unwrap();
    // any lattice cell, not only the first
    let avg = cell_average(&rec, [origin[0] + 3.0 * l, origin[1] + 2.0 * l], l, 20);
    assert_relative_eq!(avg[0], 2.0, max_relative = 1e-6);
    assert_relative_eq!(avg[1], -0.5, max_relative = 1e-6);
    assert_relative_eq!(avg[2], 7.0, max_relative = 1e-13);

    let lit = reconstruct_porous_velocity(&darcy, c, l, origin, Normalization::Literal).unwrap();
    let avg = cell_average(&lit, origin, l, 20);
    let k = c.permeability;
    assert_relative_eq!(avg[0], 2.0 * k[0][0] - 0.5 * k[1][0], max_relative = 1e-6);
}

#[test]
fn reconstruction_vanishes_in_obstacles() {
    let darcy = |_: f64, _: f64| [1.0, 1.0, 0.0];
    let rec = reconstruct_porous_velocity(&darcy, cell(), 0.1, [0.0, 0.0], Normalization::InversePermeability).unwrap();
    let v = rec.value(0.25, 0.35).unwrap();
    assert_eq!([v[0], v[1]], [0.0, 0.0]);
    assert!(reconstruct_porous_velocity(&darcy, cell(), 0.0, [0.0, 0.0], Normalization::Literal).is_err());
}

#[test]
fn linear_error_against_exact_integral() {
    // ||x - 0||^2 over [0,1] x [0.25,0.75] = 1/3 * 1/2
    let f = |x: f64, _: f64| [x, 0.0, 0.0];
    let zero = |_: f64, _: f64| [0.0; 3];
    let r = RegionSpec::new(RegionKind::Custom, 0.25, 0.75).unwrap();
    let e = l2_error(&f, &zero, &r, &unit_grid(0.125), Components::Velocity).unwrap();
    assert_relative_eq!(e, (1.0f64 / 6.0).sqrt(), max_relative = 1e-13);
}

#[test]
fn pressure_gauge_alignment() {
    let a = |x: f64, y: f64| [0.0, 0.0, x * y];
    let b = |x: f64, y: f64| [0.0, 0.0, x * y + 3.5];
    let r = RegionSpec::new(RegionKind::Custom, 0.0, 1.0).unwrap();
    let g = unit_grid(0.25);
    let c = pressure_offset(&a, &b, &r, &g).unwrap();
    assert_relative_eq!(c, 3.5, max_relative = 1e-13);
    let shifted = PressureShift { field: &a, shift: c };
    assert!(l2_error(&shifted, &b, &r, &g, Components::Pressure).unwrap() < 1e-12);
}

#[test]
fn perforated_grid_restricts_to_fluid() {
    let lattice = ObstacleLattice::new(0.5, 0.5, RectDomain::new(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
    let g = icdd::mesh::build_perforated_mesh(lattice.extent, lattice, 4).unwrap();
    let one = |_: f64, _: f64| [0.0, 0.0, 1.0];
    let zero = |_: f64, _: f64| [0.0; 3];
    let r = RegionSpec::new(RegionKind::Custom, 0.0, 1.0).unwrap();
    let e = l2_error(&one, &zero, &r, &g, Components::Pressure).unwrap();
    assert_relative_eq!(e * e, 0.75, max_relative = 1e-13);
}

fn small_dns() -> &'static DnsSolution {
    static D: OnceLock<DnsSolution> = OnceLock::new();
    D.get_or_init(|| {
        let mut p = TestCasePreset::new(TestCase::Cavity);
        p.domain = RectDomain::new(-0.5, 0.5, -0.5, 0.5).unwrap();
        let obs = porous_lattice(&p, 0.25, 0.5).unwrap();
        solve_dns(&p, obs, 4, &FemConfig::default()).unwrap()
    })
}

#[test]
fn extension_and_point_evaluation_agree() {
    let d = small_dns();
    let full = Arc::new(full_grid(d).unwrap());
    let ext = trivial_extension(d, full.clone()).unwrap();
    let fluid = RegionSpec::new(RegionKind::Custom, 0.0, 0.5).unwrap();
    assert!(l2_error(d, &ext, &fluid, &full, Components::Velocity).unwrap() < 1e-18);
}

#[test]
fn self_comparison_is_zero() {
    let d = small_dns();
    let full = full_grid(d).unwrap();
    let r = RegionSpec::fluid_star(-0.125).unwrap();
    assert_eq!(l2_error(d, d, &r, &full, Components::Velocity).unwrap(), 0.0);
    assert_eq!(trace_error(d, d, 0.0, &full).unwrap(), [0.0; 3]);
}

#[test]
fn sweep_minimizer_picks_smallest() {
    let rows: Vec<SweepRow> = [3.0, 1.0, 2.0]
        .iter()
        .enumerate()
        .map(|(i, &e)| SweepRow { delta: i as f64, y_f: 0.0, error: e, iterations: 1 })
        .collect();
    assert_eq!(sweep_minimizer(&rows), Some(1));
    assert_eq!(sweep_minimizer(&[]), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn region_split_is_pythagorean(a in -2.0..2.0f64, b in -2.0..2.0f64, k in 1usize..7) {
        let f = move |x: f64, y: f64| [a * x * y, b * y, a - x];
        let zero = |_: f64, _: f64| [0.0; 3];
        let g = unit_grid(0.125);
        let cut = k as f64 * 0.125;
        let all = RegionSpec::new(RegionKind::Custom, 0.0, 1.0).unwrap();
        let lo = RegionSpec::new(RegionKind::Custom, 0.0, cut).unwrap();
        let hi = RegionSpec::new(RegionKind::Custom, cut, 1.0).unwrap();
        for c in [Components::Velocity, Components::Pressure] {
            let e = l2_error(&f, &zero, &all, &g, c).unwrap();
            let e1 = l2_error(&f, &zero, &lo, &g, c).unwrap();
            let e2 = l2_error(&f, &zero, &hi, &g, c).unwrap();
            prop_assert!((e * e - e1 * e1 - e2 * e2).abs() <= 1e-12 * (1.0 + e * e));
        }
    }

    #[test]
    fn error_is_symmetric_and_homogeneous(a in -3.0..3.0f64, s in -4.0..4.0f64) {
        let f = move |x: f64, y: f64| [a * x, y * y, x - y];
        let g = |x: f64, _: f64| [x * x, 1.0, 0.5];
        let fs = move |x: f64, y: f64| { let v = f(x, y); [s * v[0], s * v[1], s * v[2]] };
        let gs = move |x: f64, y: f64| { let v = g(x, y); [s * v[0], s * v[1], s * v[2]] };
        let grid = unit_grid(0.25);
        let r = RegionSpec::new(RegionKind::Custom, 0.0, 1.0).unwrap();
        let e = l2_error(&f, &g, &r, &grid, Components::Velocity).unwrap();
        prop_assert!((e - l2_error(&g, &f, &r, &grid, Components::Velocity).unwrap()).abs() <= 1e-14 * (1.0 + e));
        let es = l2_error(&fs, &gs, &r, &grid, Components::Velocity).unwrap();
        prop_assert!((es - s.abs() * e).abs() <= 1e-12 * (1.0 + es));
    }

    #[test]
    fn slope_is_scale_invariant(p in 0.5..3.0f64, c in 1e-6..1e3f64, h0 in 0.01..1.0f64) {
        let h = [h0, h0 / 2.0, h0 / 4.0];
        let e: Vec<f64> = h.iter().map(|v| c * v.powf(p)).collect();
        let s = convergence_slope(&h, &e).unwrap();
        prop_assert!((s - p).abs() < 1e-9);
        let scaled: Vec<f64> = e.iter().map(|v| v * 7.0).collect();
        prop_assert!((convergence_slope(&h, &scaled).unwrap() - s).abs() < 1e-9);
    }
}
