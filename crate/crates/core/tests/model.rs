use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use spectra_core::model::{
    build_model, build_simplex_model, build_two_community_model, simplex_directions,
};
use spectra_core::{Error, ModelSpec, ParamAtom};

/// Eigenvalues of the dense mean adjacency matrix, built entry by entry. The
/// models below have integral `w_a n`, so the block sizes match the weights.
fn dense_mean_eigenvalues(model: &ModelSpec) -> Vec<f64> {
    let counts = model.vertex_counts();
    let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(a, &c)| vec![a; c]).collect();
    let n = labels.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let ki = &model.atoms[labels[i]].k;
            let kj = &model.atoms[labels[j]].k;
            let dot: f64 = ki.iter().zip(kj).map(|(a, b)| a * b).sum();
            m[(i, j)] = dot / model.two_m;
        }
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

#[test]
fn gram_matches_dense_mean_matrix() {
    let models = [
        build_two_community_model(&[(60.0, 0.5), (120.0, 0.5)], 50.0, 400).unwrap(),
        build_simplex_model(4, 1.1, &[(30.0, 0.25), (80.0, 0.75)], 400).unwrap(),
        build_model(
            vec![
                ParamAtom::new(vec![10.0, 2.0, 0.0], 0.25),
                ParamAtom::new(vec![3.0, 9.0, 1.0], 0.5),
                ParamAtom::new(vec![1.0, 1.0, 12.0], 0.25),
            ],
            400,
        )
        .unwrap(),
    ];
    for model in &models {
        let alphas = model.rank_structure().alphas;
        let dense = dense_mean_eigenvalues(model);
        for (r, a) in alphas.iter().enumerate() {
            assert!((a - dense[r]).abs() <= 1e-8, "r={r}: gram {a} dense {}", dense[r]);
        }
        // Everything past rank q vanishes.
        assert!(dense[alphas.len()..].iter().all(|v| v.abs() <= 1e-8));
    }
}

#[test]
fn fig1_constants() {
    let m = build_two_community_model(&[(60.0, 0.5), (120.0, 0.5)], 50.0, 4000).unwrap();
    assert!((m.c - 90.0).abs() < 1e-12);
    assert!((m.two_m - 360_000.0).abs() < 1e-6);
    let a = m.rank_structure().alphas;
    assert!((a[0] - 100.0).abs() < 1e-10);
    assert!((a[1] - 2500.0 / 90.0).abs() < 1e-10);
}

#[test]
fn theta_zero_is_rank_one() {
    let m = build_two_community_model(&[(90.0, 1.0)], 0.0, 100).unwrap();
    let a = m.rank_structure().alphas;
    assert!((a[0] - 91.0 + 1.0).abs() < 1e-10);
    assert_eq!(a[1], 0.0);
}

#[test]
fn simplex_dot_products() {
    let phi = 0.9;
    let mags = [(20.0, 0.5), (45.0, 0.5)];
    let m = build_simplex_model(4, phi, &mags, 800).unwrap();
    let dirs = simplex_directions(4, phi).unwrap();
    for a in &m.atoms {
        for b in &m.atoms {
            let ka: f64 = a.k.iter().map(|x| x * x).sum::<f64>().sqrt();
            let kb: f64 = b.k.iter().map(|x| x * x).sum::<f64>().sqrt();
            let expect = ka * kb * if a.community == b.community { 1.0 } else { phi.cos() };
            let dot: f64 = a.k.iter().zip(&b.k).map(|(x, y)| x * y).sum();
            assert!((dot - expect).abs() <= 1e-10 * expect.max(1.0));
        }
    }
    assert_eq!(dirs.len(), 4);
}

#[test]
fn invalid_models_are_rejected() {
    let neg = build_model(
        vec![ParamAtom::new(vec![1.0, 2.0], 0.5), ParamAtom::new(vec![1.0, -2.0], 0.5)],
        10,
    );
    assert!(matches!(neg, Err(Error::NegativeProduct { .. })));
    let sum = build_model(vec![ParamAtom::new(vec![1.0], 0.7)], 10);
    assert!(matches!(sum, Err(Error::WeightSum { .. })));
    assert!(matches!(
        build_two_community_model(&[(30.0, 1.0)], 40.0, 10),
        Err(Error::ThetaTooLarge { .. })
    ));
    assert!(build_simplex_model(3, 2.0, &[(10.0, 1.0)], 10).is_err());
}

#[test]
fn scaling_multiplies_alphas() {
    let m = build_two_community_model(&[(60.0, 0.5), (120.0, 0.5)], 40.0, 400).unwrap();
    let s = m.scaled(2.5).unwrap();
    assert!((s.c - 2.5 * m.c).abs() < 1e-9);
    for (a, b) in m.rank_structure().alphas.iter().zip(s.rank_structure().alphas) {
        assert!((b - 2.5 * a).abs() < 1e-9);
    }
}

fn atom_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.1f64..50.0, 0.0f64..50.0, 0.05f64..1.0), 1..6)
}

proptest! {
    #[test]
    fn alphas_nonnegative_and_sum_to_gram_trace(raw in atom_strategy()) {
        let total: f64 = raw.iter().map(|r| r.2).sum();
        let atoms: Vec<ParamAtom> = raw
            .iter()
            .map(|&(x, y, w)| ParamAtom::new(vec![x, y], w / total))
            .collect();
        // Renormalized weights may miss 1 by a few ulps; fix up the last one.
        let mut atoms = atoms;
        let rest: f64 = atoms[..atoms.len() - 1].iter().map(|a| a.weight).sum();
        let last = atoms.len() - 1;
        atoms[last].weight = 1.0 - rest;
        prop_assume!(atoms[last].weight > 0.0);
        let m = build_model(atoms, 50).unwrap();
        let rs = m.rank_structure();
        prop_assert!(rs.alphas.iter().all(|&a| a >= 0.0));
        let trace: f64 = m.atoms.iter().map(|a| a.weight * a.k.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / m.c;
        let sum: f64 = rs.alphas.iter().sum();
        prop_assert!((sum - trace).abs() <= 1e-9 * trace.max(1.0));
        prop_assert!(rs.alphas.windows(2).all(|w| w[0] >= w[1]));
    }
}
