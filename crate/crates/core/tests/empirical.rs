use spectra_core::closedform::semicircle_density;
use spectra_core::empirical::{
    adjacency, count_above, detect_communities, eigen_spectrum, interlacing_check,
    spectral_histogram, top_eigenpairs, EigenMode,
};
use spectra_core::model::{build_simplex_model, build_two_community_model};
use spectra_core::{sample_graph, SampledGraph};

fn trace_identities(g: &SampledGraph, eigenvalues: &[f64]) {
    let sum: f64 = eigenvalues.iter().sum();
    let sq: f64 = eigenvalues.iter().map(|x| x * x).sum();
    let expect_sq: f64 = g.edges.iter().map(|e| 2.0 * (e.multiplicity as f64).powi(2)).sum();
    assert!(sum.abs() <= 1e-6 * g.n as f64, "trace {sum}");
    assert!((sq - expect_sq).abs() <= 1e-6 * expect_sq.max(1.0), "{sq} vs {expect_sq}");
}

#[test]
fn trace_and_square_identities() {
    for (theta, seed) in [(0.0f64, 1u64), (3.0, 2), (5.5, 3)] {
        let m = build_two_community_model(&[(6.0, 0.5), (12.0, 0.5)], theta, 300).unwrap();
        let g = sample_graph(&m, seed);
        let s = eigen_spectrum(&g, EigenMode::Full).unwrap();
        assert_eq!(s.eigenvalues.len(), 300);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        trace_identities(&g, &s.eigenvalues);
        let a = adjacency(&g);
        assert!(a.trace().abs() < 1e-12);
        assert!((a.frobenius_sq() - s.eigenvalues.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-6 * a.frobenius_sq());
    }
}

#[test]
fn top_k_agrees_with_dense() {
    let m = build_two_community_model(&[(20.0, 0.5), (40.0, 0.5)], 18.0, 800).unwrap();
    let g = sample_graph(&m, 4);
    let full = eigen_spectrum(&g, EigenMode::Full).unwrap();
    let pairs = top_eigenpairs(&g, 5).unwrap();
    for (i, v) in pairs.values.iter().enumerate() {
        assert!((v - full.eigenvalues[i]).abs() <= 1e-8 * full.eigenvalues[0], "{i}");
        assert!(pairs.residuals[i] <= 1e-8 * pairs.norm_estimate);
    }
}

#[test]
fn interlacing() {
    let m = build_two_community_model(&[(8.0, 0.5), (16.0, 0.5)], 6.0, 100).unwrap();
    assert!(interlacing_check(100, &m, 0.0, 1).unwrap());
    for seed in 0..10 {
        assert!(interlacing_check(100, &m, 5.0, seed).unwrap(), "seed {seed}");
    }
    assert!(interlacing_check(100, &m, 1e3, 7).unwrap());
    assert!(interlacing_check(201, &m, 1.0, 7).is_err());
}

#[test]
fn semicircle_sample_histogram() {
    let m = build_two_community_model(&[(100.0, 1.0)], 50.0, 4000).unwrap();
    let g = sample_graph(&m, 21);
    let s = eigen_spectrum(&g, EigenMode::Full).unwrap();
    trace_identities(&g, &s.eigenvalues);
    let h = spectral_histogram(&s, 40, 2).unwrap();
    let l1 = h.l1_distance(|x| semicircle_density(x, 100.0));
    assert!(l1 <= 0.05, "{l1}");
    assert!((s.eigenvalues[0] - 101.0).abs() <= 0.03 * 101.0);
    assert!((s.eigenvalues[1] - 29.0).abs() <= 0.03 * 29.0);
    assert_eq!(count_above(&s.eigenvalues, 20.0 * 1.02), 2);
}

#[test]
fn three_group_recovery() {
    let m = build_simplex_model(3, 1.4, &[(60.0, 1.0)], 1500).unwrap();
    let strong = detect_communities(&sample_graph(&m, 9), 3).unwrap();
    assert!(strong.accuracy >= 0.9, "{}", strong.accuracy);
    assert_eq!(strong.assignments.len(), 1500);
    let none = build_simplex_model(3, 0.0, &[(60.0, 1.0)], 1500).unwrap();
    let weak = detect_communities(&sample_graph(&none, 9), 3).unwrap();
    assert!(weak.accuracy < 0.5, "{}", weak.accuracy);
}
