//! Empirical spectra of sampled graphs: eigenvalues, histograms, spectral
//! community recovery and the rank-one interlacing check.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::generator::{sample_graph, SampledGraph};
use crate::linalg::{dense_eigenvalues_desc, lanczos_top_k, CsrMatrix, EigenPairs, LanczosOptions};
use crate::model::ModelSpec;

/// Largest `n` diagonalized densely by default.
pub const DEFAULT_DENSE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EigenMode {
    Full,
    TopK(usize),
}

impl std::str::FromStr for EigenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(EigenMode::Full);
        }
        s.strip_prefix("topk:")
            .and_then(|k| k.parse().ok())
            .filter(|&k: &usize| k > 0)
            .map(EigenMode::TopK)
            .ok_or_else(|| Error::InvalidArgument(format!("mode must be full or topk:K, got {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSpectrum {
    /// Descending. All `n` eigenvalues in full mode, the top `k` otherwise.
    pub eigenvalues: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    pub mode: EigenMode,
    /// `‖A v − λ v‖` per eigenpair in top-k mode.
    pub residuals: Option<Vec<f64>>,
}

pub fn adjacency(graph: &SampledGraph) -> CsrMatrix {
    let triples: Vec<(usize, usize, f64)> =
        graph.edges.iter().map(|e| (e.i, e.j, e.multiplicity as f64)).collect();
    CsrMatrix::from_symmetric_triples(graph.n, &triples)
}

pub fn dense_adjacency(graph: &SampledGraph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(graph.n, graph.n);
    for e in &graph.edges {
        a[(e.i, e.j)] += e.multiplicity as f64;
        a[(e.j, e.i)] += e.multiplicity as f64;
    }
    a
}

pub fn eigen_spectrum(graph: &SampledGraph, mode: EigenMode) -> Result<EmpiricalSpectrum> {
    eigen_spectrum_with_limit(graph, mode, DEFAULT_DENSE_LIMIT)
}

pub fn eigen_spectrum_with_limit(
    graph: &SampledGraph,
    mode: EigenMode,
    dense_limit: usize,
) -> Result<EmpiricalSpectrum> {
    match mode {
        EigenMode::Full => {
            if graph.n > dense_limit {
                return Err(Error::DenseLimit { n: graph.n, limit: dense_limit });
            }
            Ok(EmpiricalSpectrum {
                eigenvalues: dense_eigenvalues_desc(dense_adjacency(graph)),
                n: graph.n,
                seed: graph.seed,
                mode,
                residuals: None,
            })
        }
        EigenMode::TopK(k) => {
            let pairs = top_eigenpairs(graph, k)?;
            Ok(EmpiricalSpectrum {
                eigenvalues: pairs.values,
                n: graph.n,
                seed: graph.seed,
                mode,
                residuals: Some(pairs.residuals),
            })
        }
    }
}

/// Top `k` eigenpairs of the sparse adjacency matrix.
pub fn top_eigenpairs(graph: &SampledGraph, k: usize) -> Result<EigenPairs> {
    let a = adjacency(graph);
    lanczos_top_k(&a, &LanczosOptions { k, tol: 1e-8, seed: graph.seed ^ 0x1a2c })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` ascending bin boundaries.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Counts normalized to unit area.
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self, b: usize) -> f64 {
        self.edges[b + 1] - self.edges[b]
    }

    /// `Σ_b |ĥ_b − ρ̄_b| · width_b`, with `ρ̄_b` the bin average of `density`
    /// by Simpson's rule on 9 nodes.
    pub fn l1_distance<F: Fn(f64) -> f64>(&self, density: F) -> f64 {
        (0..self.bins())
            .map(|b| (self.density[b] - self.bin_average(b, &density)).abs() * self.width(b))
            .sum()
    }

    pub fn bin_average<F: Fn(f64) -> f64>(&self, b: usize, density: F) -> f64 {
        let (lo, hi) = (self.edges[b], self.edges[b + 1]);
        let m = 8;
        let h = (hi - lo) / m as f64;
        let sum: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * density(lo + h * i as f64)
            })
            .sum();
        sum * h / 3.0 / (hi - lo)
    }
}

/// Density-normalized histogram of the spectrum without its `exclude_top`
/// largest eigenvalues, over the range of the remaining ones.
pub fn spectral_histogram(
    spectrum: &EmpiricalSpectrum,
    bins: usize,
    exclude_top: usize,
) -> Result<Histogram> {
    if bins < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 bins, got {bins}")));
    }
    let vals = spectrum.eigenvalues.get(exclude_top..).unwrap_or(&[]);
    if vals.is_empty() {
        return Err(Error::InvalidArgument("no eigenvalues left to histogram".into()));
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // A degenerate spectrum gets a unit-width window around its single value.
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|b| if b == bins { hi } else { lo + width * b as f64 })
        .collect();
    let mut counts = vec![0usize; bins];
    for &v in vals {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = vals.len() as f64;
    let density = (0..bins).map(|b| counts[b] as f64 / (total * (edges[b + 1] - edges[b]))).collect();
    Ok(Histogram { edges, counts, density })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    /// Fraction of vertices whose recovered community matches the planted
    /// one, maximized over relabelings.
    pub accuracy: f64,
    pub assignments: Vec<usize>,
}

/// Best agreement between `assigned` and `planted` over all relabelings of the
/// assigned communities (exhaustive for `q ≤ 5`, greedy above).
pub fn best_accuracy(assigned: &[usize], planted: &[usize], q: usize) -> f64 {
    let n = assigned.len();
    if n == 0 {
        return 0.0;
    }
    let qp = planted.iter().copied().max().map_or(0, |m| m + 1).max(q);
    let mut table = vec![vec![0usize; qp]; q];
    for (&a, &p) in assigned.iter().zip(planted) {
        table[a][p] += 1;
    }
    let best = if q <= 5 {
        permutations(qp, q)
            .into_iter()
            .map(|perm| (0..q).map(|a| table[a][perm[a]]).sum::<usize>())
            .max()
            .unwrap_or(0)
    } else {
        let mut used = vec![false; qp];
        let mut total = 0;
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by_key(|&a| std::cmp::Reverse(table[a].iter().max().copied().unwrap_or(0)));
        for a in order {
            if let Some(p) = (0..qp).filter(|&p| !used[p]).max_by_key(|&p| table[a][p]) {
                used[p] = true;
                total += table[a][p];
            }
        }
        total
    };
    best as f64 / n as f64
}

/// Injective maps `0..k -> 0..m`.
fn permutations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for p in 0..m {
            if !used[p] {
                used[p] = true;
                cur.push(p);
                rec(m, k, cur, used, out);
                cur.pop();
                used[p] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(m, k, &mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

/// Spectral community recovery. For `q = 2` vertices are split by the sign of
/// the eigenvector of the second-largest eigenvalue; for `q > 2` the rows of
/// the top-`q` eigenvector matrix are clustered with k-means.
pub fn detect_communities(graph: &SampledGraph, q: usize) -> Result<RecoveryResult> {
    if q < 2 {
        return Err(Error::InvalidArgument(format!("q must be at least 2, got {q}")));
    }
    let pairs = top_eigenpairs(graph, q)?;
    let assignments: Vec<usize> = if q == 2 {
        pairs.vectors[1].iter().map(|&x| usize::from(x < 0.0)).collect()
    } else {
        let rows: Vec<Vec<f64>> =
            (0..graph.n).map(|i| pairs.vectors.iter().map(|v| v[i]).collect()).collect();
        kmeans(&rows, q, graph.seed)
    };
    let accuracy = best_accuracy(&assignments, &graph.communities(), q);
    Ok(RecoveryResult { accuracy, assignments })
}

/// Lloyd's algorithm with k-means++ seeding.
fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.len());
    let dist2 = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b6d);
    let mut centers: Vec<Vec<f64>> = vec![rows[rng.gen_range(0..n)].clone()];
    while centers.len() < k {
        let d: Vec<f64> = rows
            .iter()
            .map(|r| centers.iter().map(|c| dist2(r, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            d.iter().position(|&x| {
                t -= x;
                t <= 0.0
            })
            .unwrap_or(n - 1)
        } else {
            rng.gen_range(0..n)
        };
        centers.push(rows[pick].clone());
    }
    let mut assign = vec![0usize; n];
    for _ in 0..200 {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| dist2(r, &centers[a]).total_cmp(&dist2(r, &centers[b])))
                .unwrap();
            if best != assign[i] {
                assign[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &a) in rows.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(r) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

/// Samples a graph of `n_small` vertices, centers it by the mean adjacency
/// matrix, and checks that the spectra of `X` and `X + α u uᵀ` (with `u` the
/// normalized all-ones vector) interlace: `z₁ ≥ λ₁ ≥ z₂ ≥ … ≥ z_n ≥ λ_n`.
pub fn interlacing_check(n_small: usize, model: &ModelSpec, alpha: f64, seed: u64) -> Result<bool> {
    if n_small == 0 || n_small > 200 {
        return Err(Error::InvalidArgument(format!("n_small must be in 1..=200, got {n_small}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be nonnegative, got {alpha}")));
    }
    let small = model.with_n(n_small)?;
    let graph = sample_graph(&small, seed);
    let mut x = dense_adjacency(&graph);
    for i in 0..n_small {
        for j in 0..n_small {
            x[(i, j)] -= small.edge_mean(graph.labels[i], graph.labels[j]);
        }
    }
    let perturbed = &x + DMatrix::from_element(n_small, n_small, alpha / n_small as f64);
    let lam = dense_eigenvalues_desc(x.clone());
    let zs = dense_eigenvalues_desc(perturbed);
    let tol = 1e-9 * (x.norm() + alpha + 1.0);
    Ok((0..n_small).all(|i| {
        zs[i] >= lam[i] - tol && (i + 1 >= n_small || lam[i] >= zs[i + 1] - tol)
    }))
}

/// Eigenvalues above `threshold`.
pub fn count_above(eigenvalues: &[f64], threshold: f64) -> usize {
    eigenvalues.iter().filter(|&&v| v > threshold).count()
}

/// Runs `f(seed)` for every seed under `exec`, returning results in seed order.
pub fn ensemble<T, F>(seeds: &[u64], exec: Exec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    exec.map(seeds.len(), |i| f(seeds[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Edge;

    fn graph(n: usize, edges: &[(usize, usize, u32)]) -> SampledGraph {
        SampledGraph {
            n,
            edges: edges.iter().map(|&(i, j, m)| Edge { i, j, multiplicity: m }).collect(),
            labels: vec![0; n],
            atom_communities: vec![0],
            seed: 0,
        }
    }

    #[test]
    fn path_p3_spectrum() {
        let g = graph(3, &[(0, 1, 1), (1, 2, 1)]);
        let s = eigen_spectrum(&g, EigenMode::Full).unwrap();
        let r = 2f64.sqrt();
        assert!((s.eigenvalues[0] - r).abs() < 1e-12);
        assert!(s.eigenvalues[1].abs() < 1e-12);
        assert!((s.eigenvalues[2] + r).abs() < 1e-12);
    }

    #[test]
    fn triangle_with_double_edge() {
        // [[0,2,1],[2,0,1],[1,1,0]]: characteristic polynomial
        // -(λ + 2)(λ² − 2λ − 2), roots −2 and 1 ± √3.
        let g = graph(3, &[(0, 1, 2), (1, 2, 1), (0, 2, 1)]);
        let s = eigen_spectrum(&g, EigenMode::Full).unwrap();
        let r3 = 3f64.sqrt();
        let expect = [1.0 + r3, 1.0 - r3, -2.0];
        for (a, b) in s.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("full".parse::<EigenMode>().unwrap(), EigenMode::Full);
        assert_eq!("topk:5".parse::<EigenMode>().unwrap(), EigenMode::TopK(5));
        assert!("topk:0".parse::<EigenMode>().is_err());
        assert!("dense".parse::<EigenMode>().is_err());
    }

    #[test]
    fn dense_limit_enforced() {
        let g = graph(10, &[(0, 1, 1)]);
        assert!(matches!(
            eigen_spectrum_with_limit(&g, EigenMode::Full, 5),
            Err(Error::DenseLimit { n: 10, limit: 5 })
        ));
    }

    #[test]
    fn histogram_of_constant_spectrum_is_a_delta() {
        let s = EmpiricalSpectrum {
            eigenvalues: vec![0.0; 50],
            n: 50,
            seed: 0,
            mode: EigenMode::Full,
            residuals: None,
        };
        let h = spectral_histogram(&s, 10, 0).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 50);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        let area: f64 = (0..h.bins()).map(|b| h.density[b] * h.width(b)).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!(spectral_histogram(&s, 5, 0).is_err());
    }

    #[test]
    fn accuracy_is_label_invariant() {
        let planted = [0, 0, 1, 1, 2, 2];
        assert_eq!(best_accuracy(&[2, 2, 0, 0, 1, 1], &planted, 3), 1.0);
        assert_eq!(best_accuracy(&[1, 1, 0, 0], &[0, 0, 1, 1], 2), 1.0);
        assert_eq!(best_accuracy(&[0, 1, 0, 1], &[0, 0, 1, 1], 2), 0.5);
    }

    #[test]
    fn kmeans_separates_clusters() {
        let mut rows = Vec::new();
        for c in 0..3 {
            for i in 0..20 {
                rows.push(vec![10.0 * c as f64 + 0.01 * i as f64, -5.0 * c as f64]);
            }
        }
        let a = kmeans(&rows, 3, 1);
        let planted: Vec<usize> = (0..60).map(|i| i / 20).collect();
        assert_eq!(best_accuracy(&a, &planted, 3), 1.0);
    }
}
