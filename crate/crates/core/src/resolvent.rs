//! The self-consistent equation for the auxiliary vector `h(z)`,
//!
//! ```text
//! h(z) = (1/c) Σ_a w_a k_a / (z − k_a · h(z)),
//! ```
//!
//! its Stieltjes transform `g(z)`, the spectral density
//! `ρ(x) = −Im g(x + iε) / π` and the band edges.
//!
//! Off the real axis the equation is solved by Newton's method confined to the
//! physical region `Im(k_a · h) ≤ 0`, falling back to damped fixed-point
//! iteration when a Newton step does not reduce the defect. On the real axis
//! above the band the equation is solved in the atom projections
//! `s_a = k_a · h`, where the map is monotone and convex: Newton from `s = 0`
//! climbs to the minimal (physical) root, and the root exists exactly when the
//! linearized map stays a contraction along the way.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, solve_complex};
use crate::model::ModelSpec;

/// Physicality bound on `Im g` for `Im z > 0`.
pub const IM_G_TOL: f64 = 1e-9;

/// Band detection threshold relative to the peak density.
pub const RHO_CUT_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm bound on the fixed-point defect `|h − F(h)|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `d` of `h ← (1 − d) h + d F(h)`.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100_000, damping: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HSolution {
    pub z: Complex64,
    pub h: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Precomputed per-atom data for repeated evaluation of the map.
struct Kernel<'a> {
    model: &'a ModelSpec,
    /// `w_a / c`.
    wc: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(model: &'a ModelSpec) -> Self {
        let wc = model.atoms.iter().map(|a| a.weight / model.c).collect();
        Self { model, wc }
    }

    fn projections(&self, h: &[Complex64]) -> Vec<Complex64> {
        self.model
            .atoms
            .iter()
            .map(|a| a.k.iter().zip(h).map(|(k, x)| x * k).sum())
            .collect()
    }

    /// `F(h)` together with the resolvent factors `1 / (z − k_a · h)`.
    fn map(&self, z: Complex64, h: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let s = self.projections(h);
        let inv: Vec<Complex64> = s.iter().map(|sa| (z - sa).inv()).collect();
        let mut f = vec![Complex64::new(0.0, 0.0); self.model.q];
        for (a, atom) in self.model.atoms.iter().enumerate() {
            let coef = inv[a] * self.wc[a];
            for (fr, k) in f.iter_mut().zip(&atom.k) {
                *fr += coef * k;
            }
        }
        (f, inv)
    }

    fn defect(h: &[Complex64], f: &[Complex64]) -> f64 {
        h.iter().zip(f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    fn is_physical(&self, h: &[Complex64]) -> bool {
        self.projections(h)
            .iter()
            .all(|s| s.re.is_finite() && s.im <= 1e-13 * (1.0 + s.norm()))
    }

    /// Newton step for `h − F(h) = 0`.
    fn newton_direction(
        &self,
        h: &[Complex64],
        f: &[Complex64],
        inv: &[Complex64],
    ) -> Option<Vec<Complex64>> {
        let q = self.model.q;
        let mut jac = DMatrix::<Complex64>::identity(q, q);
        for (a, atom) in self.model.atoms.iter().enumerate() {
            let coef = inv[a] * inv[a] * self.wc[a];
            for r in 0..q {
                for s in 0..q {
                    jac[(r, s)] -= coef * (atom.k[r] * atom.k[s]);
                }
            }
        }
        let rhs: Vec<Complex64> = f.iter().zip(h).map(|(fi, hi)| fi - hi).collect();
        solve_complex(jac, &rhs)
    }
}

/// Leading large-`|z|` behaviour `h ≈ E[k] / (c z)`.
pub fn asymptotic_h(model: &ModelSpec, z: Complex64) -> Vec<Complex64> {
    model
        .mean_vector()
        .iter()
        .map(|m| Complex64::new(*m / model.c, 0.0) / z)
        .collect()
}

/// Heights of the vertical continuation path used when a direct solve fails.
const VERTICAL_STAGES: usize = 40;

/// Solves for `h(z)` with `Im z > 0`.
///
/// Starts from `warm_start` if given (and physical), else from the large-`z`
/// asymptote. If that fails, `z` is approached vertically from
/// `Re z + iH` with `H` well above the spectrum, where the asymptotic start
/// is reliable, warm-starting each stage from the previous one.
pub fn solve_h(
    z: Complex64,
    model: &ModelSpec,
    warm_start: Option<&[Complex64]>,
    opts: &SolverOptions,
) -> Result<HSolution> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidArgument(format!("solve_h needs Im z > 0, got {z}")));
    }
    if let Some(w) = warm_start {
        if w.len() != model.q {
            return Err(Error::InvalidArgument(format!(
                "warm start has length {}, expected {}",
                w.len(),
                model.q
            )));
        }
    }
    let kernel = Kernel::new(model);
    let direct = iterate(&kernel, z, warm_start, opts);
    if direct.is_ok() {
        return direct;
    }
    let top = default_search_radius(model).max(z.im);
    if top <= z.im {
        return direct;
    }
    let mut warm: Option<Vec<Complex64>> = None;
    for stage in 0..VERTICAL_STAGES {
        let frac = (stage as f64 / VERTICAL_STAGES as f64).powi(2);
        let height = top * (z.im / top).powf(frac);
        match iterate(&kernel, Complex64::new(z.re, height), warm.as_deref(), opts) {
            Ok(sol) => warm = Some(sol.h),
            Err(_) if warm.is_none() => return direct,
            Err(_) => {}
        }
    }
    iterate(&kernel, z, warm.as_deref(), opts).or(direct)
}

fn iterate(
    kernel: &Kernel<'_>,
    z: Complex64,
    warm_start: Option<&[Complex64]>,
    opts: &SolverOptions,
) -> Result<HSolution> {
    let model = kernel.model;
    let mut h = match warm_start {
        Some(w) if kernel.is_physical(w) => w.to_vec(),
        _ => asymptotic_h(model, z),
    };

    let mut damping = opts.damping;
    let mut prev = f64::INFINITY;
    let mut rising = 0;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let (f, inv) = kernel.map(z, &h);
        residual = Kernel::defect(&h, &f);
        if residual <= opts.tol {
            return finish(kernel, z, h, residual, it);
        }

        if let Some(dir) = kernel.newton_direction(&h, &f, &inv) {
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let cand: Vec<Complex64> = h.iter().zip(&dir).map(|(x, d)| x + d * step).collect();
                if kernel.is_physical(&cand) {
                    let (fc, _) = kernel.map(z, &cand);
                    if Kernel::defect(&cand, &fc) < residual {
                        h = cand;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if accepted {
                prev = residual;
                continue;
            }
        }

        for (x, fx) in h.iter_mut().zip(&f) {
            *x = *x * (1.0 - damping) + fx * damping;
        }
        if residual > prev {
            rising += 1;
            if rising >= 5 {
                damping *= 0.5;
                rising = 0;
            }
        } else {
            rising = 0;
        }
        prev = residual;
    }
    Err(Error::NoConvergence { max_iter: opts.max_iter, residual })
}

fn finish(
    kernel: &Kernel<'_>,
    z: Complex64,
    h: Vec<Complex64>,
    residual: f64,
    iterations: usize,
) -> Result<HSolution> {
    let sol = HSolution { z, h, residual, iterations };
    let g = stieltjes_g_direct(&sol, kernel.model);
    if g.im > IM_G_TOL {
        return Err(Error::NonPhysicalBranch { z: z.to_string(), im_g: g.im });
    }
    Ok(sol)
}

/// `g = (1 + c h·h) / z` with the unconjugated square `h·h = Σ h_r²`.
pub fn stieltjes_g(sol: &HSolution, model: &ModelSpec) -> Complex64 {
    let hh: Complex64 = sol.h.iter().map(|x| x * x).sum();
    (hh * model.c + 1.0) / sol.z
}

/// `g = Σ_a w_a / (z − k_a · h)`, the atom-average of the resolvent diagonal.
/// Free of the `1/z` factor, so it is the form used for densities at `x = 0`.
pub fn stieltjes_g_direct(sol: &HSolution, model: &ModelSpec) -> Complex64 {
    model
        .atoms
        .iter()
        .map(|a| {
            let s: Complex64 = a.k.iter().zip(&sol.h).map(|(k, x)| x * k).sum();
            (sol.z - s).inv() * a.weight
        })
        .sum()
}

/// `ρ = −(c / π x) Im(h·h)`, defined away from `x = 0`.
pub fn density_from_h_squared(sol: &HSolution, model: &ModelSpec) -> f64 {
    let hh: Complex64 = sol.h.iter().map(|x| x * x).sum();
    -(model.c / std::f64::consts::PI * (hh / sol.z)).im
}

/// Spectral density at `x` with broadening `epsilon`, and the solution used.
pub fn density_at(
    x: f64,
    model: &ModelSpec,
    epsilon: f64,
    warm_start: Option<&[Complex64]>,
    opts: &SolverOptions,
) -> Result<(f64, HSolution)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let sol = solve_h(Complex64::new(x, epsilon), model, warm_start, opts)?;
    let rho = (-stieltjes_g_direct(&sol, model).im / std::f64::consts::PI).max(0.0);
    Ok((rho, sol))
}

/// Like [`density_at`], but if the direct solve fails it walks `ε` down from
/// a heavily broadened value, warm-starting each stage.
pub fn density_at_robust(
    x: f64,
    model: &ModelSpec,
    epsilon: f64,
    warm_start: Option<&[Complex64]>,
    opts: &SolverOptions,
) -> Result<(f64, HSolution)> {
    let quick = SolverOptions { max_iter: opts.max_iter.min(2_000), ..*opts };
    if let Ok(out) = density_at(x, model, epsilon, warm_start, &quick) {
        return Ok(out);
    }
    let mut eps = model.c.sqrt().max(epsilon);
    let mut warm: Option<Vec<Complex64>> = None;
    loop {
        let (_, sol) = density_at(x, model, eps, warm.as_deref(), opts)?;
        if eps <= epsilon {
            return density_at(x, model, epsilon, Some(&sol.h), opts);
        }
        warm = Some(sol.h);
        eps = (eps * 0.1).max(epsilon);
    }
}

/// Uniform grid of `points` values on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi) || points < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs lo < hi and points >= 2, got [{lo}, {hi}] x {points}"
            )));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub rho: Vec<f64>,
    pub epsilon: f64,
    /// Grid indices whose solve failed; their density is reported as 0.
    pub failures: Vec<usize>,
}

impl DensityCurve {
    /// Trapezoid integral of the curve.
    pub fn integral(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.rho.windows(2))
            .map(|(x, r)| 0.5 * (x[1] - x[0]) * (r[0] + r[1]))
            .sum()
    }
}

/// Radius of the default band search window, `2 max|k_a| + 4 sqrt(c)`.
pub fn default_search_radius(model: &ModelSpec) -> f64 {
    2.0 * model.max_norm() + 4.0 * model.c.sqrt()
}

/// Serial continuation sweep from outside the spectrum inwards. Points at or
/// above `mid` are approached from the right, the rest from the left. Returns
/// the solutions in the order of `xs`.
fn continuation_sweep(
    model: &ModelSpec,
    xs: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Vec<Option<HSolution>> {
    let radius = default_search_radius(model);
    let max_step = model.c.sqrt() / 8.0;
    let mut out: Vec<Option<HSolution>> = vec![None; xs.len()];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let split = order.partition_point(|&i| xs[i] < 0.0);
    let (left, right) = order.split_at(split);

    let mut walk = |indices: Vec<usize>, anchor: f64| {
        let mut warm: Option<Vec<Complex64>> = None;
        let mut pos = anchor;
        for idx in indices {
            let target = xs[idx];
            let gap = (target - pos).abs();
            let steps = (gap / max_step).ceil() as usize;
            for s in 1..steps {
                let x = pos + (target - pos) * s as f64 / steps as f64;
                if let Ok((_, sol)) = density_at_robust(x, model, epsilon, warm.as_deref(), opts) {
                    warm = Some(sol.h);
                }
            }
            pos = target;
            match density_at_robust(target, model, epsilon, warm.as_deref(), opts) {
                Ok((_, sol)) => {
                    warm = Some(sol.h.clone());
                    out[idx] = Some(sol);
                }
                Err(_) => out[idx] = None,
            }
        }
    };
    let right_anchor = xs.iter().copied().fold(radius, f64::max) + max_step;
    let left_anchor = xs.iter().copied().fold(-radius, f64::min) - max_step;
    walk(right.iter().rev().copied().collect(), right_anchor);
    walk(left.to_vec(), left_anchor);
    out
}

/// Density on a grid: a serial coarse continuation sweep followed by a fine
/// pass in which every point is warm-started from the nearest coarse solution.
pub fn density_curve(
    model: &ModelSpec,
    grid: &Grid,
    epsilon: f64,
    exec: Exec,
) -> Result<DensityCurve> {
    density_curve_with(model, grid, epsilon, &SolverOptions::default(), exec)
}

pub fn density_curve_with(
    model: &ModelSpec,
    grid: &Grid,
    epsilon: f64,
    opts: &SolverOptions,
    exec: Exec,
) -> Result<DensityCurve> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let xs = grid.xs();
    let stride = (grid.points / 128).max(1);
    let mut coarse_idx: Vec<usize> = (0..grid.points).step_by(stride).collect();
    if *coarse_idx.last().unwrap() != grid.points - 1 {
        coarse_idx.push(grid.points - 1);
    }
    let coarse_x: Vec<f64> = coarse_idx.iter().map(|&i| xs[i]).collect();
    let coarse = continuation_sweep(model, &coarse_x, epsilon, opts);

    let nearest_warm = |x: f64| -> Option<&[Complex64]> {
        coarse
            .iter()
            .zip(&coarse_x)
            .filter_map(|(s, cx)| s.as_ref().map(|s| (s, (cx - x).abs())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(s, _)| s.h.as_slice())
    };
    let fine: Vec<Option<f64>> = exec.map(xs.len(), |i| {
        density_at_robust(xs[i], model, epsilon, nearest_warm(xs[i]), opts)
            .ok()
            .map(|(rho, _)| rho)
    });

    let failures: Vec<usize> = fine
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.is_none().then_some(i))
        .collect();
    if failures.len() * 100 > xs.len() {
        return Err(Error::TooManyFailures { failed: failures.len(), total: xs.len() });
    }
    Ok(DensityCurve {
        xs,
        rho: fine.into_iter().map(|r| r.unwrap_or(0.0)).collect(),
        epsilon,
        failures,
    })
}

/// Disjoint sorted intervals carrying spectral density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub intervals: Vec<(f64, f64)>,
}

impl Band {
    pub fn lower(&self) -> f64 {
        self.intervals.first().map_or(0.0, |iv| iv.0)
    }

    pub fn upper(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.1)
    }

    pub fn width(&self) -> f64 {
        self.upper() - self.lower()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSearch {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Broadenings relative to the search width, coarse first.
    pub epsilon_ladder: Vec<f64>,
}

impl BandSearch {
    pub fn for_model(model: &ModelSpec) -> Self {
        let r = default_search_radius(model);
        Self { lo: -r, hi: r, points: 2001, epsilon_ladder: vec![1e-6, 1e-8, 1e-10] }
    }
}

/// Locates the band as the set where `ρ(x; ε) > 1e-3 · max ρ`: a coarse scan at
/// the first ladder broadening finds the runs above the cut, then each run
/// boundary is bisected at every broadening of the ladder in turn.
pub fn find_band_edges(model: &ModelSpec, search: &BandSearch) -> Result<Band> {
    find_band_edges_with(model, search, &SolverOptions::default())
}

pub fn find_band_edges_with(
    model: &ModelSpec,
    search: &BandSearch,
    opts: &SolverOptions,
) -> Result<Band> {
    let width = search.hi - search.lo;
    let grid = Grid::new(search.lo, search.hi, search.points.max(16))?;
    let ladder: Vec<f64> = if search.epsilon_ladder.is_empty() {
        vec![1e-6 * width]
    } else {
        search.epsilon_ladder.iter().map(|e| e * width).collect()
    };
    let xs = grid.xs();
    let sols = continuation_sweep(model, &xs, ladder[0], opts);
    let rho: Vec<f64> = sols
        .iter()
        .map(|s| {
            s.as_ref()
                .map_or(0.0, |s| (-stieltjes_g_direct(s, model).im / std::f64::consts::PI).max(0.0))
        })
        .collect();
    let peak = rho.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::EmptyBand { lo: search.lo, hi: search.hi });
    }
    let cut = RHO_CUT_FRACTION * peak;
    let above: Vec<bool> = rho.iter().map(|&r| r > cut).collect();

    let mut runs = Vec::new();
    let mut start = None;
    for (i, &a) in above.iter().enumerate() {
        match (a, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, xs.len() - 1));
    }
    if runs.is_empty() {
        return Err(Error::EmptyBand { lo: search.lo, hi: search.hi });
    }

    let step = grid.step();
    let refine = |inside_idx: usize, dir: f64| -> f64 {
        let inside = xs[inside_idx];
        let mut edge = inside + 0.5 * dir * step;
        let mut warm_in = sols[inside_idx].as_ref().map(|s| s.h.clone());
        for &eps in &ladder {
            // Bracket: [inner, outer] with ρ > cut at inner and ≤ cut at outer.
            let mut inner = inside - dir * step;
            let mut outer = inside + 2.0 * dir * step;
            let mut warm_out: Option<Vec<Complex64>> = None;
            let eval = |x: f64, warm: Option<&[Complex64]>| density_at_robust(x, model, eps, warm, opts);
            if let Ok((r, s)) = eval(inner, warm_in.as_deref()) {
                if r > cut {
                    warm_in = Some(s.h);
                }
            }
            for _ in 0..64 {
                if (outer - inner).abs() <= 1e-12 * width {
                    break;
                }
                let mid = 0.5 * (inner + outer);
                let warm = if (mid - inner).abs() < (mid - outer).abs() || warm_out.is_none() {
                    warm_in.as_deref()
                } else {
                    warm_out.as_deref()
                };
                match eval(mid, warm) {
                    Ok((r, s)) if r > cut => {
                        inner = mid;
                        warm_in = Some(s.h);
                    }
                    Ok((_, s)) => {
                        outer = mid;
                        warm_out = Some(s.h);
                    }
                    Err(_) => outer = mid,
                }
            }
            edge = 0.5 * (inner + outer);
        }
        edge
    };

    let mut intervals: Vec<(f64, f64)> = runs
        .iter()
        .map(|&(a, b)| (refine(a, -1.0), refine(b, 1.0)))
        .filter(|(lo, hi)| lo < hi)
        .collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for iv in intervals {
        match merged.last_mut() {
            Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
            _ => merged.push(iv),
        }
    }
    Ok(Band { intervals: merged })
}

/// Real solution above the band, in atom projections `s_a = k_a · h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSolution {
    pub z: f64,
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub g: f64,
    /// Spectral radius of the linearized map at the root; reaches 1 at the
    /// band edge.
    pub stability: f64,
    pub iterations: usize,
}

const REAL_MAX_NEWTON: usize = 500;

/// Solves the fixed point on the real axis at `z > 0` by monotone Newton
/// iteration from `s = 0`. Fails with [`Error::NoRealSolution`] when `z` is
/// inside (or below) the upper part of the band.
pub fn solve_real(model: &ModelSpec, z: f64) -> Result<RealSolution> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::InvalidArgument(format!("real solve needs z > 0, got {z}")));
    }
    let na = model.num_atoms();
    let products = model.products();
    let wc: Vec<f64> = model.atoms.iter().map(|a| a.weight / model.c).collect();
    let mut s = vec![0.0; na];
    let no_root = || Error::NoRealSolution { z };
    let mut stability = 0.0;

    for it in 0..REAL_MAX_NEWTON {
        if s.iter().any(|&sa| !(sa < z)) {
            return Err(no_root());
        }
        let inv: Vec<f64> = s.iter().map(|sa| 1.0 / (z - sa)).collect();
        let f: Vec<f64> = (0..na)
            .map(|b| (0..na).map(|a| wc[a] * products[b * na + a] * inv[a]).sum())
            .collect();
        // F'(s) = G D with D = diag(w_a / c / (z − s_a)²); its spectrum equals
        // that of the symmetric D^½ G D^½.
        let d: Vec<f64> = (0..na).map(|a| wc[a] * inv[a] * inv[a]).collect();
        let sym = DMatrix::from_fn(na, na, |b, a| d[b].sqrt() * products[b * na + a] * d[a].sqrt());
        stability = sym.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
        if stability >= 1.0 {
            return Err(no_root());
        }
        let defect = f.iter().zip(&s).map(|(fi, si)| (fi - si).abs()).fold(0.0, f64::max);
        let scale = s.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if defect <= 1e-14 * scale {
            let h = (0..model.q)
                .map(|r| (0..na).map(|a| wc[a] * model.atoms[a].k[r] * inv[a]).sum())
                .collect();
            let g = (0..na).map(|a| model.atoms[a].weight * inv[a]).sum();
            return Ok(RealSolution { z, s, h, g, stability, iterations: it });
        }
        let jac = DMatrix::from_fn(na, na, |b, a| {
            let delta = if a == b { 1.0 } else { 0.0 };
            delta - products[b * na + a] * d[a]
        });
        let rhs: Vec<f64> = f.iter().zip(&s).map(|(fi, si)| fi - si).collect();
        let step = linalg::solve_real(jac, &rhs).ok_or_else(no_root)?;
        for (sa, da) in s.iter_mut().zip(&step) {
            *sa += da;
        }
    }
    let _ = stability;
    Err(Error::NoConvergence { max_iter: REAL_MAX_NEWTON, residual: f64::NAN })
}

/// Real Stieltjes transform above the band.
pub fn g_real(model: &ModelSpec, z: f64) -> Result<f64> {
    solve_real(model, z).map(|s| s.g)
}

/// Bracket `(inside, outside)` of the upper band edge, `outside − inside`
/// below `1e-13 · |edge|`. A real solution exists at `outside` and not at
/// `inside`.
pub fn upper_edge_bracket(model: &ModelSpec, guess: f64) -> Result<(f64, f64)> {
    let scale = model.c.sqrt();
    let exists = |z: f64| z > 0.0 && solve_real(model, z).is_ok();
    let mut step = 0.05 * scale;
    let mut hi = guess.max(1e-3 * scale) + step;
    while !exists(hi) {
        hi += step;
        step *= 2.0;
        if hi > 1e6 * (scale + model.max_norm()) {
            return Err(Error::EmptyBand { lo: guess, hi });
        }
    }
    let mut step = 0.05 * scale;
    let mut lo = (hi - step).min(guess);
    while lo > 0.0 && exists(lo) {
        hi = lo;
        lo -= step;
        step *= 2.0;
    }
    let mut lo = lo.max(0.0);
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if exists(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, build_two_community_model, ParamAtom};

    fn single(c: f64) -> ModelSpec {
        build_model(vec![ParamAtom::new(vec![c], 1.0)], 1000).unwrap()
    }

    fn quad_root(z: Complex64, c: f64) -> Complex64 {
        // Branch with h ~ 1/z at infinity.
        let r = 2.0 * c.sqrt();
        let s = (z - r).sqrt() * (z + r).sqrt();
        (z - s) / (2.0 * c)
    }

    #[test]
    fn outside_band_matches_decaying_root() {
        let m = single(100.0);
        let sol = solve_h(Complex64::new(25.0, 1e-12), &m, None, &SolverOptions::default()).unwrap();
        assert!((sol.h[0] - Complex64::new(0.05, 0.0)).norm() < 1e-10);
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn inside_band_matches_quadratic() {
        let m = single(100.0);
        let z = Complex64::new(10.0, 1e-9);
        let sol = solve_h(z, &m, None, &SolverOptions::default()).unwrap();
        let expect = Complex64::new(0.05, -300f64.sqrt() / 200.0);
        assert!((sol.h[0] - expect).norm() < 1e-8, "{}", sol.h[0]);
        assert!((sol.h[0] - quad_root(z, 100.0)).norm() < 1e-10);
    }

    #[test]
    fn large_z_asymptotics() {
        let m = build_two_community_model(&[(60.0, 0.5), (120.0, 0.5)], 50.0, 100).unwrap();
        let z = Complex64::new(0.0, 1e6);
        let sol = solve_h(z, &m, None, &SolverOptions::default()).unwrap();
        let asym = asymptotic_h(&m, z);
        assert!((sol.h[0] - asym[0]).norm() <= 1e-9 * asym[0].norm());
        let g = stieltjes_g(&sol, &m);
        assert!((g - z.inv()).norm() <= 1e-9 * z.inv().norm());
    }

    #[test]
    fn g_forms_agree_for_single_atom() {
        let m = single(100.0);
        for &(x, e) in &[(3.0, 0.1), (-15.0, 1e-3), (40.0, 1.0)] {
            let sol = solve_h(Complex64::new(x, e), &m, None, &SolverOptions::default()).unwrap();
            let g = stieltjes_g(&sol, &m);
            assert!((g - sol.h[0]).norm() < 1e-10);
            assert!((g - stieltjes_g_direct(&sol, &m)).norm() < 1e-10);
        }
    }

    #[test]
    fn semicircle_density_points() {
        let m = single(100.0);
        let opts = SolverOptions::default();
        let (r, _) = density_at(10.0, &m, 1e-9, None, &opts).unwrap();
        assert!((r - 300f64.sqrt() / (200.0 * std::f64::consts::PI)).abs() < 1e-7);
        let (r, _) = density_at(0.0, &m, 1e-9, None, &opts).unwrap();
        assert!((r - 1.0 / (10.0 * std::f64::consts::PI)).abs() < 1e-7);
        let (r, _) = density_at(25.0, &m, 1e-4, None, &opts).unwrap();
        assert!(r <= 1e-3);
    }

    #[test]
    fn rejects_lower_half_plane() {
        let m = single(4.0);
        let err = solve_h(Complex64::new(1.0, -0.1), &m, None, &SolverOptions::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn real_solver_semicircle() {
        let m = single(100.0);
        let sol = solve_real(&m, 25.0).unwrap();
        assert!((sol.g - 0.05).abs() < 1e-14);
        assert!(matches!(solve_real(&m, 19.0), Err(Error::NoRealSolution { .. })));
        let (inside, outside) = upper_edge_bracket(&m, 18.0).unwrap();
        assert!(inside < 20.0 + 1e-9 && outside > 20.0 - 1e-9);
        assert!((outside - 20.0).abs() < 1e-9);
    }

    #[test]
    fn real_solver_matches_complex_solver_above_band() {
        let m = build_two_community_model(&[(60.0, 0.5), (120.0, 0.5)], 50.0, 100).unwrap();
        let real = solve_real(&m, 40.0).unwrap();
        let cplx = solve_h(Complex64::new(40.0, 1e-10), &m, None, &SolverOptions::default()).unwrap();
        for (r, c) in real.h.iter().zip(&cplx.h) {
            assert!((r - c.re).abs() < 1e-9 && c.im.abs() < 1e-8);
        }
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(Grid::new(1.0, 0.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        let g = Grid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.xs(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
