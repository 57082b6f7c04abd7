//! Reproducible sampling of sparse multigraphs from a [`ModelSpec`].
//!
//! Vertices are laid out block by block (block `a` holds the vertices of atom
//! `a`). For every unordered block pair the total edge count is drawn once from
//! a Poisson distribution with the summed pair mean, and endpoints are then
//! placed uniformly at random. By Poisson superposition this is the same
//! distribution as drawing every vertex pair independently, in
//! `O(#edges + #blocks²)` time.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub multiplicity: u32,
}

/// Undirected multigraph without self-loops. Each edge is stored once with
/// `i < j`, sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledGraph {
    pub n: usize,
    pub edges: Vec<Edge>,
    /// Atom index of every vertex.
    pub labels: Vec<usize>,
    /// Planted community of every atom.
    pub atom_communities: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub label: usize,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Index of the unordered block pair `(a, b)`, `a <= b`, among `blocks` blocks.
fn pair_stream(a: usize, b: usize, blocks: usize) -> u64 {
    (a * blocks + b) as u64
}

fn block_pair_rng(seed: u64, a: usize, b: usize, blocks: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair_stream(a, b, blocks));
    rng
}

/// Expected number of edges between blocks `a <= b` with the given sizes.
pub fn block_pair_mean(model: &ModelSpec, counts: &[usize], a: usize, b: usize) -> f64 {
    let pairs = if a == b {
        let na = counts[a] as f64;
        na * (na - 1.0) / 2.0
    } else {
        counts[a] as f64 * counts[b] as f64
    };
    pairs * model.edge_mean(a, b)
}

fn sample_block_pair(
    model: &ModelSpec,
    counts: &[usize],
    starts: &[usize],
    seed: u64,
    a: usize,
    b: usize,
) -> Vec<(usize, usize)> {
    let blocks = counts.len();
    let mean = block_pair_mean(model, counts, a, b);
    if !(mean > 0.0) {
        return Vec::new();
    }
    let mut rng = block_pair_rng(seed, a, b, blocks);
    let total = Poisson::new(mean).map(|p| p.sample(&mut rng)).unwrap_or(0.0) as usize;
    let mut out = Vec::with_capacity(total);
    let (sa, na) = (starts[a], counts[a]);
    let (sb, nb) = (starts[b], counts[b]);
    for _ in 0..total {
        let (i, j) = if a == b {
            loop {
                let i = sa + rng.gen_range(0..na);
                let j = sa + rng.gen_range(0..na);
                if i != j {
                    break (i, j);
                }
            }
        } else {
            (sa + rng.gen_range(0..na), sb + rng.gen_range(0..nb))
        };
        out.push(if i < j { (i, j) } else { (j, i) });
    }
    out
}

pub fn sample_graph(model: &ModelSpec, seed: u64) -> SampledGraph {
    sample_graph_with(model, seed, Exec::default())
}

/// Samples with an explicit execution policy; the output is identical for
/// every policy.
pub fn sample_graph_with(model: &ModelSpec, seed: u64, exec: Exec) -> SampledGraph {
    let counts = model.vertex_counts();
    let blocks = counts.len();
    let mut starts = Vec::with_capacity(blocks);
    let mut acc = 0;
    for &c in &counts {
        starts.push(acc);
        acc += c;
    }
    let pairs: Vec<(usize, usize)> =
        (0..blocks).flat_map(|a| (a..blocks).map(move |b| (a, b))).collect();
    let chunks = exec.map(pairs.len(), |p| {
        let (a, b) = pairs[p];
        sample_block_pair(model, &counts, &starts, seed, a, b)
    });

    let mut all: Vec<(usize, usize)> = chunks.into_iter().flatten().collect();
    all.sort_unstable();
    let mut edges: Vec<Edge> = Vec::new();
    for (i, j) in all {
        match edges.last_mut() {
            Some(e) if e.i == i && e.j == j => e.multiplicity += 1,
            _ => edges.push(Edge { i, j, multiplicity: 1 }),
        }
    }

    let labels = counts
        .iter()
        .enumerate()
        .flat_map(|(a, &c)| std::iter::repeat_n(a, c))
        .collect();
    SampledGraph {
        n: model.n,
        edges,
        labels,
        atom_communities: model.atoms.iter().map(|a| a.community).collect(),
        seed,
    }
}

impl SampledGraph {
    /// Total number of edges counted with multiplicity.
    pub fn total_edges(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity as u64).sum()
    }

    pub fn degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.n];
        for e in &self.edges {
            deg[e.i] += e.multiplicity as u64;
            deg[e.j] += e.multiplicity as u64;
        }
        deg
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.total_edges() as f64 / self.n as f64
    }

    /// Planted community of every vertex.
    pub fn communities(&self) -> Vec<usize> {
        self.labels
            .iter()
            .map(|&l| self.atom_communities.get(l).copied().unwrap_or(l))
            .collect()
    }

    /// Number of edges (with multiplicity) between each unordered label pair,
    /// keyed `(a, b)` with `a <= b`.
    pub fn block_pair_counts(&self) -> std::collections::BTreeMap<(usize, usize), u64> {
        let mut out = std::collections::BTreeMap::new();
        for e in &self.edges {
            let (a, b) = (self.labels[e.i], self.labels[e.j]);
            let key = if a <= b { (a, b) } else { (b, a) };
            *out.entry(key).or_insert(0) += e.multiplicity as u64;
        }
        out
    }
}

/// Per-label degree mean and (population) variance.
pub fn degree_stats(graph: &SampledGraph) -> Vec<DegreeStats> {
    let num_labels = graph
        .labels
        .iter()
        .copied()
        .max()
        .map_or(0, |m| m + 1)
        .max(graph.atom_communities.len());
    let deg = graph.degrees();
    let mut sum = vec![0.0; num_labels];
    let mut sum_sq = vec![0.0; num_labels];
    let mut count = vec![0usize; num_labels];
    for (v, &l) in graph.labels.iter().enumerate() {
        let d = deg[v] as f64;
        sum[l] += d;
        sum_sq[l] += d * d;
        count[l] += 1;
    }
    (0..num_labels)
        .map(|l| {
            let (mean, variance) = if count[l] == 0 {
                (0.0, 0.0)
            } else {
                let m = sum[l] / count[l] as f64;
                (m, (sum_sq[l] / count[l] as f64 - m * m).max(0.0))
            };
            DegreeStats { label: l, count: count[l], mean, variance }
        })
        .collect()
}
