use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectra_core::closedform::{cubic_h_roots, quadratic_h, semicircle_density, two_value_density};
use spectra_core::model::{build_model, build_two_community_model};
use spectra_core::resolvent::{
    density_at, density_curve, density_from_h_squared, find_band_edges, g_real, solve_h,
    stieltjes_g, stieltjes_g_direct, BandSearch, Grid, SolverOptions,
};
use spectra_core::{Complex64, Exec, ModelSpec, ParamAtom};

fn semicircle() -> ModelSpec {
    build_model(vec![ParamAtom::new(vec![100.0], 1.0)], 1000).unwrap()
}

fn fig1() -> ModelSpec {
    build_two_community_model(&[(60.0, 0.5), (120.0, 0.5)], 50.0, 4000).unwrap()
}

fn random_points(seed: u64, count: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Complex64::new(rng.gen_range(-40.0..40.0), 10f64.powf(rng.gen_range(-3.0..1.5))))
        .collect()
}

#[test]
fn quadratic_oracle() {
    let m = semicircle();
    let opts = SolverOptions::default();
    for z in random_points(1, 100) {
        let sol = solve_h(z, &m, None, &opts).unwrap();
        let h = sol.h[0];
        let err = (h - quadratic_h(z, 100.0)).norm();
        assert!(err <= 1e-10, "z={z}: {h} vs {}", quadratic_h(z, 100.0));
        assert!(sol.residual <= 1e-12);
    }
}

#[test]
fn cubic_oracle_for_two_value_family() {
    let m = fig1();
    let opts = SolverOptions::default();
    for z in random_points(2, 100) {
        let sol = solve_h(z, &m, None, &opts).unwrap();
        let cubic = cubic_h_roots(z, 60.0, 120.0);
        let h1 = sol.h[0];
        assert!((h1 - cubic.physical_root()).norm() <= 1e-8, "z={z}: {h1} vs {:?}", cubic);
        assert!(sol.h[1].norm() <= 1e-10, "z={z}: h2={}", sol.h[1]);
    }
}

#[test]
fn semicircle_point_values() {
    let m = semicircle();
    let opts = SolverOptions::default();
    let (rho, _) = density_at(10.0, &m, 1e-9, None, &opts).unwrap();
    assert!((rho - 300f64.sqrt() / (200.0 * std::f64::consts::PI)).abs() < 1e-6, "{rho}");
    let (rho, _) = density_at(0.0, &m, 1e-9, None, &opts).unwrap();
    assert!((rho - 1.0 / (10.0 * std::f64::consts::PI)).abs() < 1e-6, "{rho}");
    let (rho, _) = density_at(25.0, &m, 1e-4, None, &opts).unwrap();
    assert!(rho <= 1e-3);

    let sol = solve_h(Complex64::new(25.0, 1e-12), &m, None, &opts).unwrap();
    assert!((sol.h[0] - 0.05).norm() < 1e-9);
    let sol = solve_h(Complex64::new(10.0, 1e-12), &m, None, &opts).unwrap();
    assert!((sol.h[0] - Complex64::new(0.05, -300f64.sqrt() / 200.0)).norm() < 1e-8);
}

#[test]
fn stieltjes_forms_agree() {
    let opts = SolverOptions::default();
    for m in [semicircle(), fig1()] {
        for z in random_points(3, 40) {
            let sol = solve_h(z, &m, None, &opts).unwrap();
            let g = stieltjes_g(&sol, &m);
            let gd = stieltjes_g_direct(&sol, &m);
            assert!((g - gd).norm() <= 1e-8 * gd.norm().max(1.0), "z={z}");
            assert!(gd.im <= 1e-9);
        }
    }
    // On the axis the h·h form agrees with −Im g/π away from the origin.
    for m in [semicircle(), fig1()] {
        for x in [-30.0, -17.5, -4.0, 0.5, 9.0, 20.0, 22.0] {
            let (rho, sol) = density_at(x, &m, 1e-10, None, &opts).unwrap();
            assert!((density_from_h_squared(&sol, &m) - rho).abs() <= 1e-8, "x={x}");
        }
    }
    // Single atom: g and h coincide.
    let m = semicircle();
    for z in random_points(4, 20) {
        let sol = solve_h(z, &m, None, &opts).unwrap();
        assert!((stieltjes_g(&sol, &m) - sol.h[0]).norm() <= 1e-10);
    }
}

#[test]
fn real_axis_values() {
    let m = build_two_community_model(&[(100.0, 1.0)], 0.0, 1000).unwrap();
    assert!((g_real(&m, 101.0).unwrap() - 0.01).abs() < 1e-12);
    let z = Complex64::new(1e6, 1e-3);
    let sol = solve_h(z, &fig1(), None, &SolverOptions::default()).unwrap();
    let g = stieltjes_g_direct(&sol, &fig1());
    assert!((g * z - 1.0).norm() < 1e-9);
    let expect = fig1().mean_vector()[0] / (fig1().c * z);
    assert!((sol.h[0] - expect).norm() <= 1e-9 * expect.norm());
}

#[test]
fn lower_half_plane_rejected() {
    assert!(solve_h(Complex64::new(1.0, -1.0), &semicircle(), None, &SolverOptions::default()).is_err());
    assert!(solve_h(Complex64::new(1.0, 0.0), &semicircle(), None, &SolverOptions::default()).is_err());
}

#[test]
fn semicircle_curve() {
    let m = semicircle();
    let curve = density_curve(&m, &Grid::new(-22.0, 22.0, 2001).unwrap(), 1e-4, Exec::default()).unwrap();
    assert!(curve.failures.is_empty());
    for (x, r) in curve.xs.iter().zip(&curve.rho) {
        assert!(*r >= 0.0);
        if x.abs() <= 18.0 {
            assert!((r - semicircle_density(*x, 100.0)).abs() <= 5e-4, "x={x}");
        }
        assert!((r - curve.rho[curve.xs.len() - 1 - curve.xs.iter().position(|y| y == x).unwrap()]).abs() <= 1e-8);
    }
}

#[test]
fn fig1_curve_matches_cubic_oracle() {
    let m = fig1();
    let curve = density_curve(&m, &Grid::new(-24.0, 24.0, 1201).unwrap(), 1e-5, Exec::default()).unwrap();
    for (x, r) in curve.xs.iter().zip(&curve.rho) {
        if x.abs() <= 0.95 * 20.58 {
            let exact = two_value_density(*x, 60.0, 120.0);
            assert!((r - exact).abs() <= 5e-4, "x={x}: {r} vs {exact}");
        }
    }
}

#[test]
fn normalization() {
    for m in [semicircle(), fig1()] {
        let band = find_band_edges(&m, &BandSearch::for_model(&m)).unwrap();
        let pad = 0.1 * band.width();
        let eps = 1e-3 * band.width();
        let grid = Grid::new(band.lower() - pad, band.upper() + pad, 4001).unwrap();
        let total = density_curve(&m, &grid, eps, Exec::default()).unwrap().integral();
        assert!((0.98..=1.0).contains(&total), "{total}");
    }
}

#[test]
fn outside_band_is_empty() {
    let curve = density_curve(&semicircle(), &Grid::new(25.0, 60.0, 200).unwrap(), 1e-4, Exec::Sequential).unwrap();
    assert!(curve.rho.iter().all(|&r| r <= 1e-3));
}

#[test]
fn band_edges() {
    let b = find_band_edges(&semicircle(), &BandSearch::for_model(&semicircle())).unwrap();
    assert_eq!(b.intervals.len(), 1);
    assert!((b.lower() + 20.0).abs() <= 0.05 && (b.upper() - 20.0).abs() <= 0.05, "{b:?}");

    let f = fig1();
    let b = find_band_edges(&f, &BandSearch::for_model(&f)).unwrap();
    assert!((b.upper() - (7.058 * 60f64).sqrt()).abs() <= 0.05, "{b:?}");
    assert!((b.lower() + b.upper()).abs() <= 1e-6);
}

#[test]
fn band_edges_scale_with_root_of_degree_scale() {
    // k -> s k multiplies c by s, so the edges move by sqrt(s).
    let f = fig1();
    let s = f.scaled(2.0).unwrap();
    let b1 = find_band_edges(&f, &BandSearch::for_model(&f)).unwrap();
    let b2 = find_band_edges(&s, &BandSearch::for_model(&s)).unwrap();
    let tol = 1e-3 * s.c.sqrt();
    assert!((b2.upper() - 2f64.sqrt() * b1.upper()).abs() <= tol, "{b1:?} {b2:?}");
    assert!((b2.lower() - 2f64.sqrt() * b1.lower()).abs() <= tol);
}

#[test]
fn policies_agree() {
    let m = fig1();
    let g = Grid::new(-25.0, 25.0, 301).unwrap();
    let a = density_curve(&m, &g, 1e-3, Exec::Sequential).unwrap();
    let b = density_curve(&m, &g, 1e-3, Exec::default()).unwrap();
    assert_eq!(a, b);
}
