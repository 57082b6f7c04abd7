//! Linear-algebra building blocks: a CSR symmetric operator, a Lanczos
//! eigensolver with full reorthogonalization, and small dense helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;

/// A real symmetric linear operator.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Symmetric matrix in compressed sparse row form (both triangles stored).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub exec: Exec,
}

impl CsrMatrix {
    /// Builds the symmetric matrix with `value` at `(i, j)` and `(j, i)` for
    /// every triple. Duplicate triples are summed.
    pub fn from_symmetric_triples(n: usize, triples: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triples {
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, values, exec: Exec::default() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[p])] = self.values[p];
            }
        }
        m
    }

    /// Frobenius norm squared, `Σ_ij a_ij²`.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (self.indptr[i]..self.indptr[i + 1])
                    .find(|&p| self.indices[p] == i)
                    .map_or(0.0, |p| self.values[p])
            })
            .sum()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        (self.indptr[i]..self.indptr[i + 1])
            .map(|p| self.values[p] * x[self.indices[p]])
            .sum()
    }
}

impl SymOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.exec.for_each_mut(y, |i, yi| *yi = self.row_dot(i, x));
    }
}

impl SymOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let v = self * DVector::from_column_slice(x);
        y.copy_from_slice(v.as_slice());
    }
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Number of algebraically largest eigenpairs wanted.
    pub k: usize,
    /// Residual tolerance relative to the operator norm estimate.
    pub tol: f64,
    /// Seed of the random start vector.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { k: 2, tol: 1e-8, seed: 0x5eed }
    }
}

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖A v − λ v‖` for every pair.
    pub residuals: Vec<f64>,
    /// Norm estimate used to scale the tolerance.
    pub norm_estimate: f64,
    pub krylov_dim: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Krylov basis stored row-major, one basis vector per row.
struct Basis {
    n: usize,
    data: Vec<f64>,
}

impl Basis {
    fn len(&self) -> usize {
        self.data.len() / self.n
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    fn push(&mut self, v: &[f64]) {
        self.data.extend_from_slice(v);
    }

    /// Two passes of classical Gram–Schmidt against every stored vector.
    fn orthogonalize(&self, w: &mut [f64]) {
        for _ in 0..2 {
            for j in 0..self.len() {
                let r = self.row(j);
                let c = dot(r, w);
                axpy(-c, r, w);
            }
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, basis: &Basis) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        basis.orthogonalize(&mut v);
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// Top-`k` eigenpairs of a symmetric operator by Lanczos with full
/// reorthogonalization. The Krylov dimension grows geometrically until every
/// requested pair satisfies `‖A v − λ v‖ ≤ tol · ‖A‖`; at dimension `n` the
/// factorization is exact.
pub fn lanczos_top_k<A: SymOperator + ?Sized>(op: &A, opts: &LanczosOptions) -> Result<EigenPairs> {
    let n = op.dim();
    let k = opts.k.min(n);
    if k == 0 {
        return Ok(EigenPairs {
            values: vec![],
            vectors: vec![],
            residuals: vec![],
            norm_estimate: 0.0,
            krylov_dim: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis { n, data: Vec::new() };
    let mut alpha: Vec<f64> = Vec::new();
    // beta[j] couples basis vectors j and j+1.
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];

    let q0 = random_unit(n, &mut rng, &basis)
        .ok_or_else(|| Error::InvalidArgument("cannot draw a start vector".into()))?;
    basis.push(&q0);

    let mut target = n.min((2 * k + 20).max(60));
    let last;
    loop {
        while alpha.len() < target {
            let j = alpha.len();
            op.apply(basis.row(j), &mut w);
            let a = dot(basis.row(j), &w);
            alpha.push(a);
            basis.orthogonalize(&mut w);
            if j + 1 == n {
                break;
            }
            let b = dot(&w, &w).sqrt();
            let scale = alpha.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if b > 1e-10 * scale {
                w.iter_mut().for_each(|x| *x /= b);
                beta.push(b);
                basis.push(&w);
            } else {
                // Invariant subspace found: restart in the orthogonal complement.
                match random_unit(n, &mut rng, &basis) {
                    Some(v) => {
                        beta.push(0.0);
                        basis.push(&v);
                    }
                    None => break,
                }
            }
        }
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            t[(j, j)] = alpha[j];
            if j + 1 < m {
                t[(j, j + 1)] = beta[j];
                t[(j + 1, j)] = beta[j];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let norm_estimate = eig.eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));

        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let theta = eig.eigenvalues[idx];
            let mut x = vec![0.0; n];
            for j in 0..m {
                axpy(eig.eigenvectors[(j, idx)], basis.row(j), &mut x);
            }
            let nx = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            op.apply(&x, &mut w);
            axpy(-theta, &x, &mut w);
            residuals.push(dot(&w, &w).sqrt());
            values.push(theta);
            vectors.push(x);
        }
        let converged = residuals.iter().all(|&r| r <= opts.tol * norm_estimate.max(1e-300));
        let result = EigenPairs { values, vectors, residuals, norm_estimate, krylov_dim: m };
        if converged {
            return Ok(result);
        }
        if m >= n || basis.len() <= m {
            last = Some(result);
            break;
        }
        target = n.min(m + m / 2 + 10);
    }
    Err(Error::IterativeNoConvergence {
        residuals: last.map(|r| r.residuals).unwrap_or_default(),
    })
}

/// All eigenvalues of a dense symmetric matrix, sorted descending.
pub fn dense_eigenvalues_desc(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Solves the small complex system `a x = b`; `None` if `a` is singular.
pub fn solve_complex(a: DMatrix<Complex64>, b: &[Complex64]) -> Option<Vec<Complex64>> {
    let rhs = DVector::from_column_slice(b);
    let x = a.lu().solve(&rhs)?;
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then(|| x.iter().copied().collect())
}

/// Solves the small real system `a x = b`; `None` if `a` is singular.
pub fn solve_real(a: DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    let x = a.lu().solve(&rhs)?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> CsrMatrix {
        let triples: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        CsrMatrix::from_symmetric_triples(n, &triples)
    }

    #[test]
    fn csr_sums_duplicates_and_matches_dense() {
        let m = CsrMatrix::from_symmetric_triples(3, &[(0, 1, 1.0), (0, 1, 1.0), (1, 2, 1.0)]);
        let d = m.to_dense();
        assert_eq!(d[(0, 1)], 2.0);
        assert_eq!(d[(1, 0)], 2.0);
        assert_eq!(d[(2, 1)], 1.0);
        assert_eq!(m.frobenius_sq(), 2.0 * (4.0 + 1.0));
        assert_eq!(m.trace(), 0.0);
    }

    #[test]
    fn lanczos_path_graph() {
        // Path P_n has eigenvalues 2 cos(pi j / (n + 1)).
        let n = 200;
        let m = path(n);
        let pairs = lanczos_top_k(&m, &LanczosOptions { k: 3, ..Default::default() }).unwrap();
        for (j, v) in pairs.values.iter().enumerate() {
            let exact = 2.0 * (std::f64::consts::PI * (j + 1) as f64 / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
        }
        assert!(pairs.residuals.iter().all(|&r| r <= 1e-8 * pairs.norm_estimate));
    }

    #[test]
    fn lanczos_handles_disconnected_operator() {
        // Two disjoint triangles: the start vector's Krylov space breaks down
        // early and has to be restarted.
        let tri = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)];
        let m = CsrMatrix::from_symmetric_triples(6, &tri);
        let pairs = lanczos_top_k(&m, &LanczosOptions { k: 2, ..Default::default() }).unwrap();
        assert!((pairs.values[0] - 2.0).abs() < 1e-10);
        assert!((pairs.values[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn dense_eigenvalues_sorted() {
        let d = path(3).to_dense();
        let ev = dense_eigenvalues_desc(d);
        let s = 2f64.sqrt();
        assert!((ev[0] - s).abs() < 1e-12 && ev[1].abs() < 1e-12 && (ev[2] + s).abs() < 1e-12);
    }
}
