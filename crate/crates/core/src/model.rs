//! Finite-atom parameter distributions and the rank-`q` structure of the mean
//! adjacency matrix.
//!
//! A model is a list of [`ParamAtom`]s: a fraction `weight` of the `n`
//! vertices carries the vector `k`. Vertices `i`, `j` are joined by a
//! Poisson(`k_i · k_j / 2m`) number of edges, where `2m = n · |E[k]|`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total atom weight.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Relative slack allowed on nonnegative products, so that vectors built from
/// trigonometric functions (e.g. `cos(pi/2)`) are not rejected for rounding.
const PRODUCT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamAtom {
    pub k: Vec<f64>,
    pub weight: f64,
    /// Planted community the atom belongs to; used only to score community
    /// recovery on sampled graphs.
    #[serde(default)]
    pub community: usize,
}

impl ParamAtom {
    pub fn new(k: Vec<f64>, weight: f64) -> Self {
        Self { k, weight, community: 0 }
    }

    pub fn with_community(mut self, community: usize) -> Self {
        self.community = community;
        self
    }
}

/// A validated model with its derived constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub n: usize,
    pub q: usize,
    pub atoms: Vec<ParamAtom>,
    pub two_m: f64,
    pub c: f64,
}

/// Eigenvalues of the mean adjacency matrix, obtained from the `q x q` Gram
/// matrix `(1/c) Σ_a w_a k_a k_aᵀ` instead of the `n x n` matrix itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RankQStructure {
    /// Sorted descending, all nonnegative.
    pub alphas: Vec<f64>,
    pub gram: DMatrix<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Validates `atoms` and computes `2m` and `c`.
pub fn build_model(atoms: Vec<ParamAtom>, n: usize) -> Result<ModelSpec> {
    if n == 0 {
        return Err(Error::InvalidModel("n must be positive".into()));
    }
    if atoms.is_empty() {
        return Err(Error::InvalidModel("at least one atom is required".into()));
    }
    let q = atoms[0].k.len();
    if q == 0 {
        return Err(Error::InvalidModel("parameter vectors must be nonempty".into()));
    }
    for (idx, atom) in atoms.iter().enumerate() {
        if atom.k.len() != q {
            return Err(Error::InvalidModel(format!(
                "atom {idx} has dimension {}, expected {q}",
                atom.k.len()
            )));
        }
        if atom.k.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel(format!("atom {idx} has a non-finite component")));
        }
        if !(atom.weight > 0.0 && atom.weight <= 1.0) {
            return Err(Error::InvalidModel(format!(
                "atom {idx} weight {} is outside (0, 1]",
                atom.weight
            )));
        }
    }
    let sum: f64 = atoms.iter().map(|a| a.weight).sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightSum { sum });
    }
    for a in 0..atoms.len() {
        for b in a..atoms.len() {
            let d = dot(&atoms[a].k, &atoms[b].k);
            let scale = norm(&atoms[a].k) * norm(&atoms[b].k);
            if d < -PRODUCT_SLACK * scale {
                return Err(Error::NegativeProduct { a, b, dot: d });
            }
        }
    }

    let mut mean = vec![0.0; q];
    for atom in &atoms {
        for (m, x) in mean.iter_mut().zip(&atom.k) {
            *m += atom.weight * x;
        }
    }
    let c = norm(&mean);
    if !(c > 0.0) {
        return Err(Error::ZeroDegree);
    }
    let two_m = n as f64 * c;
    Ok(ModelSpec { n, q, atoms, two_m, c: two_m / n as f64 })
}

/// Two groups with vectors `(κ, +θ)` and `(κ, −θ)`; each κ atom's weight is
/// split evenly between the groups. Community 0 is `+θ`, community 1 is `−θ`.
pub fn build_two_community_model(
    kappa_atoms: &[(f64, f64)],
    theta: f64,
    n: usize,
) -> Result<ModelSpec> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidModel(format!("theta must be nonnegative, got {theta}")));
    }
    for &(kappa, _) in kappa_atoms {
        if !(kappa > 0.0) {
            return Err(Error::InvalidModel(format!("kappa must be positive, got {kappa}")));
        }
        if kappa < theta {
            return Err(Error::ThetaTooLarge { kappa, theta });
        }
    }
    let mut atoms = Vec::with_capacity(2 * kappa_atoms.len());
    for (sign, community) in [(1.0, 0), (-1.0, 1)] {
        for &(kappa, w) in kappa_atoms {
            atoms.push(ParamAtom::new(vec![kappa, sign * theta], 0.5 * w).with_community(community));
        }
    }
    build_model(atoms, n)
}

/// `q` unit vectors with every pair separated by the angle `phi`.
///
/// `v_r = a e_r + b (1, …, 1)` with `a = sqrt(1 − cos φ)` and `b` the positive
/// root of `q b² + 2ab − cos φ = 0`, which gives `|v_r| = 1` and
/// `v_r · v_s = cos φ`.
pub fn simplex_directions(q: usize, phi: f64) -> Result<Vec<Vec<f64>>> {
    let cos = phi.cos();
    if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-15).contains(&phi) || cos < -1e-15 {
        return Err(Error::BadAngle { phi });
    }
    if q == 0 {
        return Err(Error::InvalidModel("q must be positive".into()));
    }
    let cos = cos.max(0.0);
    let a = (1.0 - cos).sqrt();
    let qf = q as f64;
    let b = (-a + (a * a + qf * cos).sqrt()) / qf;
    Ok((0..q)
        .map(|r| (0..q).map(|s| if r == s { a + b } else { b }).collect())
        .collect())
}

/// `q` equal-size groups along simplex directions separated by `phi`, each
/// group carrying the same magnitude distribution. Community `r` is group `r`.
pub fn build_simplex_model(
    q: usize,
    phi: f64,
    magnitude_atoms: &[(f64, f64)],
    n: usize,
) -> Result<ModelSpec> {
    let group_weights = vec![1.0 / q as f64; q];
    build_weighted_simplex_model(&group_weights, phi, &vec![magnitude_atoms.to_vec(); q], n)
}

/// Simplex model with per-group weights and per-group magnitude atoms.
pub fn build_weighted_simplex_model(
    group_weights: &[f64],
    phi: f64,
    magnitudes: &[Vec<(f64, f64)>],
    n: usize,
) -> Result<ModelSpec> {
    let q = group_weights.len();
    if magnitudes.len() != q {
        return Err(Error::InvalidModel(format!(
            "{} magnitude lists for {q} groups",
            magnitudes.len()
        )));
    }
    let dirs = simplex_directions(q, phi)?;
    let mut atoms = Vec::new();
    for (r, dir) in dirs.iter().enumerate() {
        for &(mag, w) in &magnitudes[r] {
            if !(mag > 0.0) {
                return Err(Error::InvalidModel(format!("magnitude must be positive, got {mag}")));
            }
            let k = dir.iter().map(|x| mag * x).collect();
            atoms.push(ParamAtom::new(k, group_weights[r] * w).with_community(r));
        }
    }
    build_model(atoms, n)
}

impl ModelSpec {
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// `Σ_a w_a k_a`.
    pub fn mean_vector(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.q];
        for atom in &self.atoms {
            for (m, x) in mean.iter_mut().zip(&atom.k) {
                *m += atom.weight * x;
            }
        }
        mean
    }

    pub fn dot(&self, a: usize, b: usize) -> f64 {
        dot(&self.atoms[a].k, &self.atoms[b].k).max(0.0)
    }

    /// Expected number of edges between one vertex of atom `a` and one of `b`.
    pub fn edge_mean(&self, a: usize, b: usize) -> f64 {
        self.dot(a, b) / self.two_m
    }

    /// Atom-by-atom products `k_a · k_b`, row-major.
    pub fn products(&self) -> Vec<f64> {
        let na = self.num_atoms();
        let mut g = vec![0.0; na * na];
        for a in 0..na {
            for b in 0..na {
                g[a * na + b] = self.dot(a, b);
            }
        }
        g
    }

    pub fn max_norm(&self) -> f64 {
        self.atoms.iter().map(|a| norm(&a.k)).fold(0.0, f64::max)
    }

    pub fn num_communities(&self) -> usize {
        self.atoms.iter().map(|a| a.community).max().map_or(1, |m| m + 1)
    }

    /// Same atoms with every vector multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<ModelSpec> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| ParamAtom {
                k: a.k.iter().map(|x| s * x).collect(),
                ..a.clone()
            })
            .collect();
        build_model(atoms, self.n)
    }

    /// Same atoms with a different vertex count.
    pub fn with_n(&self, n: usize) -> Result<ModelSpec> {
        build_model(self.atoms.clone(), n)
    }

    /// Vertices per atom by largest-remainder rounding of `weight · n`; the
    /// counts sum to exactly `n`. Ties go to the lower atom index.
    pub fn vertex_counts(&self) -> Vec<usize> {
        let n = self.n;
        let quotas: Vec<f64> = self.atoms.iter().map(|a| a.weight * n as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|x| x.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut remaining = n.saturating_sub(assigned);
        for &idx in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            counts[idx] += 1;
            remaining -= 1;
        }
        counts
    }

    pub fn rank_structure(&self) -> RankQStructure {
        rank_structure(self)
    }
}

pub fn rank_structure(model: &ModelSpec) -> RankQStructure {
    let q = model.q;
    let mut gram = DMatrix::<f64>::zeros(q, q);
    for atom in &model.atoms {
        for r in 0..q {
            for s in 0..q {
                gram[(r, s)] += atom.weight * atom.k[r] * atom.k[s];
            }
        }
    }
    gram /= model.c;
    let eig = SymmetricEigen::new(gram.clone());
    let scale = gram.trace().abs().max(f64::MIN_POSITIVE);
    let mut alphas: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&x| if x.abs() < 1e-14 * scale { 0.0 } else { x.max(0.0) })
        .collect();
    alphas.sort_by(|a, b| b.total_cmp(a));
    RankQStructure { alphas, gram }
}
