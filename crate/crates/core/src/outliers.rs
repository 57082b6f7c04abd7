//! Outlying eigenvalues `g(z_r) = 1/α_r` above the band, the edge value
//! `g_max`, and the detectability thresholds where `1/α_r = g_max`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::solve_real;
use crate::model::{build_two_community_model, ModelSpec};
use crate::resolvent::{default_search_radius, g_real, solve_real as solve_fixed_point_real, upper_edge_bracket, Band};

/// Half-width of the band around `1/α_r = g_max` reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-6;

/// Relative gap below which two `α_r` are flagged as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GMax {
    pub value: f64,
    /// Upper band edge, from the bracket on existence of a real solution.
    pub edge: f64,
}

/// `g_max` from the real Stieltjes transform at `edge + δ` for
/// `δ ∈ {1e-2, 1e-3, 1e-4}·√c`, extrapolated to `δ → 0` through
/// `g(edge + δ) ≈ g_max − a√δ + bδ`.
pub fn g_max(model: &ModelSpec, band: &Band) -> Result<f64> {
    g_max_detail(model, band.upper()).map(|g| g.value)
}

pub fn g_max_detail(model: &ModelSpec, edge_guess: f64) -> Result<GMax> {
    let (_, outside) = upper_edge_bracket(model, edge_guess)?;
    let sc = model.c.sqrt();
    let deltas = [1e-2 * sc, 1e-3 * sc, 1e-4 * sc];
    let mut rows = Vec::with_capacity(9);
    let mut rhs = Vec::with_capacity(3);
    for d in deltas {
        rows.extend_from_slice(&[1.0, -d.sqrt(), d]);
        rhs.push(g_real(model, outside + d)?);
    }
    let a = nalgebra::DMatrix::from_row_slice(3, 3, &rows);
    let coef = solve_real(a, &rhs).ok_or(Error::NoRealSolution { z: outside })?;
    Ok(GMax { value: coef[0], edge: outside })
}

/// Guess of the outer band edge without a density scan: walks down
/// geometrically from the search radius until the real solution disappears.
pub fn outer_edge_guess(model: &ModelSpec) -> Result<f64> {
    let mut z = default_search_radius(model);
    let floor = 1e-6 * model.c.sqrt();
    if solve_fixed_point_real(model, z).is_err() {
        return Err(Error::EmptyBand { lo: 0.0, hi: z });
    }
    while z > floor {
        let next = 0.95 * z;
        if solve_fixed_point_real(model, next).is_err() {
            return Ok(next);
        }
        z = next;
    }
    Err(Error::EmptyBand { lo: 0.0, hi: default_search_radius(model) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierEntry {
    /// 1-based index into the descending `α` list.
    pub r: usize,
    pub alpha: f64,
    pub z: Option<f64>,
    pub visible: bool,
    pub marginal: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierReport {
    pub g_max: f64,
    pub band_edge: f64,
    pub outliers: Vec<OutlierEntry>,
}

impl OutlierReport {
    pub fn visible_count(&self) -> usize {
        self.outliers.iter().filter(|o| o.visible).count()
    }

    /// Positions of the visible outliers, descending.
    pub fn visible_positions(&self) -> Vec<f64> {
        self.outliers.iter().filter_map(|o| o.z.filter(|_| o.visible)).collect()
    }
}

/// Visibility classification of `α` against `g_max`: `(visible, marginal)`.
pub fn classify(alpha: f64, g_max: f64) -> (bool, bool) {
    if !(alpha > 0.0) {
        return (false, false);
    }
    let inv = 1.0 / alpha;
    let marginal = (inv - g_max).abs() <= MARGINAL_TOL;
    (!marginal && inv < g_max, marginal)
}

/// Solves `g(z) = 1/α` for every visible `α_r` by bisection on the real axis
/// above the band, where `g` is strictly decreasing.
pub fn outlier_eigenvalues(model: &ModelSpec, band: &Band) -> Result<OutlierReport> {
    let gm = g_max_detail(model, band.upper())?;
    outliers_with_g_max(model, gm)
}

pub fn outliers_with_g_max(model: &ModelSpec, gm: GMax) -> Result<OutlierReport> {
    let alphas = model.rank_structure().alphas;
    let sc = model.c.sqrt();
    let mut outliers = Vec::with_capacity(alphas.len());
    for (idx, &alpha) in alphas.iter().enumerate() {
        let r = idx + 1;
        let degenerate = alphas.iter().enumerate().any(|(j, &b)| {
            j != idx && alpha > 0.0 && (alpha - b).abs() <= DEGENERATE_TOL * alpha.abs().max(b.abs())
        });
        let (visible, marginal) = classify(alpha, gm.value);
        let z = if visible {
            let target = 1.0 / alpha;
            let mut lo = gm.edge;
            let mut hi = alpha + model.c + 2.0 * sc;
            let g_lo = g_real(model, lo)?;
            while g_real(model, hi)? > target {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::BracketFailure { r, lo, hi });
                }
            }
            if g_lo < target {
                return Err(Error::BracketFailure { r, lo, hi });
            }
            while hi - lo > 1e-15 * hi {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g_real(model, mid)? > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo + hi))
        } else {
            None
        };
        outliers.push(OutlierEntry { r, alpha, z, visible, marginal, degenerate });
    }
    Ok(OutlierReport { g_max: gm.value, band_edge: gm.edge, outliers })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub theta_star: f64,
    pub g_max: f64,
    pub c: f64,
    pub band_edge: f64,
}

/// Detectability threshold of the two-community family `(κ, ±θ)`: the band
/// (hence `g_max`) does not depend on `θ` and `α₂ = θ²/c`, so the second
/// outlier disappears at `θ* = sqrt(c / g_max)`.
pub fn detectability_threshold(kappa_atoms: &[(f64, f64)]) -> Result<Threshold> {
    let model = build_two_community_model(kappa_atoms, 0.0, 1000)?;
    let guess = outer_edge_guess(&model)?;
    let gm = g_max_detail(&model, guess)?;
    Ok(Threshold {
        theta_star: (model.c / gm.value).sqrt(),
        g_max: gm.value,
        c: model.c,
        band_edge: gm.edge,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub r: usize,
    pub strength: f64,
}

/// `α_r · g_max` for every `r` of the model.
fn visibility_ratios(model: &ModelSpec) -> Result<Vec<f64>> {
    let gm = g_max_detail(model, outer_edge_guess(model)?)?;
    Ok(model.rank_structure().alphas.iter().map(|a| a * gm.value).collect())
}

/// Strength values at which outliers `r = 2..q` merge into the band, for a
/// family whose `α_r` grow with the strength parameter. Each crossing of
/// `α_r g_max = 1` between adjacent sweep values is refined by bisection.
/// The list is ordered by disappearance as the structure weakens: smallest
/// `α` (largest `r`) first.
pub fn transition_sequence<F>(family: F, sweep: &[f64], exec: Exec) -> Result<Vec<Transition>>
where
    F: Fn(f64) -> Result<ModelSpec> + Sync + Send,
{
    if sweep.len() < 2 {
        return Err(Error::InvalidArgument("sweep needs at least two values".into()));
    }
    let mut sweep = sweep.to_vec();
    sweep.sort_by(|a, b| a.total_cmp(b));
    let ratios: Vec<Vec<f64>> = exec
        .map(sweep.len(), |i| family(sweep[i]).and_then(|m| visibility_ratios(&m)))
        .into_iter()
        .collect::<Result<_>>()?;
    let q = ratios[0].len();

    let pending: Vec<(usize, usize)> = (2..=q)
        .filter_map(|r| {
            (0..sweep.len() - 1)
                .find(|&i| (ratios[i][r - 1] > 1.0) != (ratios[i + 1][r - 1] > 1.0))
                .map(|i| (r, i))
        })
        .collect();
    let refined: Vec<Result<Transition>> = exec.map(pending.len(), |p| {
        let (r, i) = pending[p];
        let (mut lo, mut hi) = (sweep[i], sweep[i + 1]);
        let lo_visible = ratios[i][r - 1] > 1.0;
        for _ in 0..50 {
            if hi - lo <= 1e-10 * hi.abs().max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let ratio = visibility_ratios(&family(mid)?)?[r - 1];
            if (ratio > 1.0) == lo_visible {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Transition { r, strength: 0.5 * (lo + hi) })
    });
    let mut out: Vec<Transition> = refined.into_iter().collect::<Result<_>>()?;
    out.sort_by_key(|t| std::cmp::Reverse(t.r));
    Ok(out)
}
