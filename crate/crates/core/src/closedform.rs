//! Closed-form special cases: the semicircle, the quadratic and cubic
//! equations for `h`, and the band edge, `g_max` and detectability threshold
//! of the two-value `(κ, 2κ)` family.
//!
//! These are oracles for the general solvers and share no code with them.

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Roots defining the two-value family's band edge and `g_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdConstants {
    /// Sole real root of `27x³ − 216x² + 252x − 512`.
    pub x: f64,
    /// Smallest real root of `2y³ − 3√x y² + (x + 4/3) y − √x`.
    pub y: f64,
}

impl ThresholdConstants {
    pub fn compute() -> Self {
        let x = sole_real_root_x();
        let y = smallest_root_y(x);
        Self { x, y }
    }

    /// `θ* / κ^{3/4} = sqrt(3 √x / (2 + 3y²))`.
    pub fn coefficient(&self) -> f64 {
        (3.0 * self.x.sqrt() / (2.0 + 3.0 * self.y * self.y)).sqrt()
    }
}

fn x_poly(x: f64) -> f64 {
    ((27.0 * x - 216.0) * x + 252.0) * x - 512.0
}

fn sole_real_root_x() -> f64 {
    let roots = cubic_roots([27.0.into(), (-216.0).into(), 252.0.into(), (-512.0).into()]);
    let guess = roots
        .iter()
        .min_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
        .map(|r| r.re)
        .unwrap();
    // Polish by bisection on the sign change around the companion estimate.
    let (mut lo, mut hi) = (guess - 1e-6, guess + 1e-6);
    debug_assert!(x_poly(lo) < 0.0 && x_poly(hi) > 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if x_poly(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The y-cubic touches zero at its smallest real root (a double root, since
/// the band edge is where two roots of the h-cubic merge), so there is no sign
/// change to bisect on. The double root is the smaller critical point, i.e.
/// the smaller root of `6y² − 6√x y + (x + 4/3)`.
fn smallest_root_y(x: f64) -> f64 {
    let sx = x.sqrt();
    let disc = 36.0 * x - 24.0 * (x + 4.0 / 3.0);
    (6.0 * sx - disc.max(0.0).sqrt()) / 12.0
}

/// `2y³ − 3√x y² + (x + 4/3) y − √x`.
pub fn y_poly(x: f64, y: f64) -> f64 {
    let sx = x.sqrt();
    ((2.0 * y - 3.0 * sx) * y + x + 4.0 / 3.0) * y - sx
}

/// Semicircle density `sqrt(4c − x²) / (2πc)`, zero outside `|x| ≤ 2√c`.
pub fn semicircle_density(x: f64, c: f64) -> f64 {
    let r = 4.0 * c - x * x;
    if r <= 0.0 {
        0.0
    } else {
        r.sqrt() / (2.0 * PI * c)
    }
}

/// Root of `c h² − z h + 1 = 0` that behaves as `1/z` at infinity:
/// `h = (z − sqrt(z − 2√c) sqrt(z + 2√c)) / 2c`, with the branch cut on the
/// band. Real `z` inside the band is taken as the limit from above.
pub fn quadratic_h(z: Complex64, c: f64) -> Complex64 {
    let z = if z.im == 0.0 { Complex64::new(z.re, 0.0) } else { z };
    let r = 2.0 * c.sqrt();
    // Principal square roots of z ± r; for real z the +0i imaginary part
    // selects the upper-side limit.
    let s = (z - r).sqrt() * (z + r).sqrt();
    // (z − s)/2c rewritten with the product of the two roots, 1/c, to avoid
    // cancellation at large |z|.
    (z + s).inv() * 2.0
}

/// All roots of `a₃x³ + a₂x² + a₁x + a₀` (coefficients highest first), from
/// the eigenvalues of the companion matrix, each polished by Newton steps
/// that are kept only while they reduce `|p|`.
pub fn cubic_roots(coef: [Complex64; 4]) -> [Complex64; 3] {
    let lead = coef[0];
    let (a2, a1, a0) = (coef[1] / lead, coef[2] / lead, coef[3] / lead);
    let zero = Complex::new(0.0, 0.0);
    let one = Complex::new(1.0, 0.0);
    let companion = DMatrix::from_row_slice(3, 3, &[-a2, -a1, -a0, one, zero, zero, zero, one, zero]);
    let eig = companion
        .clone()
        .schur()
        .eigenvalues()
        .expect("complex Schur form is triangular");
    let p = |x: Complex64| ((x + a2) * x + a1) * x + a0;
    let dp = |x: Complex64| (x * 3.0 + a2 * 2.0) * x + a1;
    let mut roots = [eig[0], eig[1], eig[2]];
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = dp(*r);
            if d.norm() == 0.0 {
                break;
            }
            let cand = *r - p(*r) / d;
            if p(cand).norm() < p(*r).norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    roots
}

/// Coefficients (highest first) of the two-value cubic
/// `κ₁κ₂h³ − (κ₁+κ₂)z h² + [2κ₁κ₂/(κ₁+κ₂) + z²] h − z`.
pub fn h1_cubic_coefficients(z: Complex64, kappa1: f64, kappa2: f64) -> [Complex64; 4] {
    let p = kappa1 * kappa2;
    let s = kappa1 + kappa2;
    [p.into(), -z * s, z * z + 2.0 * p / s, -z]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoots {
    pub roots: [Complex64; 3],
    /// Index of the root continuous with `1/z` at infinity.
    pub physical: usize,
}

impl CubicRoots {
    pub fn physical_root(&self) -> Complex64 {
        self.roots[self.physical]
    }
}

const HOMOTOPY_START: f64 = 1e6;
const HOMOTOPY_STEPS: usize = 64;

/// Roots of the two-value cubic at `z`, with the physical one selected by
/// tracking the `≈ 1/z` root along the vertical segment from
/// `Re z + 10⁶ i` down to `z`. The segment stays in the upper half-plane
/// where the physical branch is analytic; the parameter is spaced
/// geometrically so that steps shrink near the target.
pub fn cubic_h_roots(z: Complex64, kappa1: f64, kappa2: f64) -> CubicRoots {
    if z.im < 0.0 {
        let mut out = cubic_h_roots(z.conj(), kappa1, kappa2);
        out.roots.iter_mut().for_each(|r| *r = r.conj());
        return out;
    }
    let start_height = HOMOTOPY_START.max(10.0 * z.im);
    let span = start_height - z.im;
    let nearest = |roots: &[Complex64; 3], target: Complex64| -> usize {
        (0..3)
            .min_by(|&a, &b| (roots[a] - target).norm().total_cmp(&(roots[b] - target).norm()))
            .unwrap()
    };
    let z0 = Complex64::new(z.re, start_height);
    let mut roots = cubic_roots(h1_cubic_coefficients(z0, kappa1, kappa2));
    let mut tracked = roots[nearest(&roots, z0.inv())];
    for step in 1..=HOMOTOPY_STEPS {
        // Distance to the target shrinks from `span` to `span · 1e-12`.
        let frac = 10f64.powf(-12.0 * step as f64 / HOMOTOPY_STEPS as f64);
        let zi = Complex64::new(z.re, z.im + span * frac);
        roots = cubic_roots(h1_cubic_coefficients(zi, kappa1, kappa2));
        tracked = roots[nearest(&roots, tracked)];
    }
    roots = cubic_roots(h1_cubic_coefficients(z, kappa1, kappa2));
    let physical = nearest(&roots, tracked);
    CubicRoots { roots, physical }
}

/// Spectral density of the two-value model (equal weights on `κ₁`, `κ₂`).
/// Uses `ρ = −(c/πx) Im h₁²` away from the origin and the equivalent
/// atom-average `−Im Σ_a ½ / (x − κ_a h₁) / π` near it.
pub fn two_value_density(x: f64, kappa1: f64, kappa2: f64) -> f64 {
    let c = 0.5 * (kappa1 + kappa2);
    let z = Complex64::new(x, 0.0);
    let h = cubic_h_roots(z, kappa1, kappa2).physical_root();
    let rho = if x.abs() > 1e-6 * c.sqrt() {
        -(c / (PI * x)) * (h * h).im
    } else {
        let g = (z - h * kappa1).inv() * 0.5 + (z - h * kappa2).inv() * 0.5;
        -g.im / PI
    };
    rho.max(0.0)
}

/// Upper band edge `sqrt(x κ)` of the `(κ, 2κ)` family.
pub fn band_edge_two_value(kappa: f64) -> f64 {
    (ThresholdConstants::compute().x * kappa).sqrt()
}

/// `g_max = (2 + 3y²) / (2 sqrt(x κ))` for the `(κ, 2κ)` family.
pub fn g_max_two_value(kappa: f64) -> f64 {
    let t = ThresholdConstants::compute();
    (2.0 + 3.0 * t.y * t.y) / (2.0 * (t.x * kappa).sqrt())
}

/// Detectability threshold `θ* = sqrt(3 sqrt(x κ³) / (2 + 3y²))`.
pub fn threshold_two_value(kappa: f64) -> f64 {
    let t = ThresholdConstants::compute();
    (3.0 * (t.x * kappa.powi(3)).sqrt() / (2.0 + 3.0 * t.y * t.y)).sqrt()
}

/// Constant-degree block model: outliers `z₁ = c + 1` and
/// `z₂ = θ²/c + c²/θ²` (the latter only when `θ > c^{3/4}`).
pub fn sbm_outliers(c: f64, theta: f64) -> (f64, Option<f64>) {
    let a2 = theta * theta / c;
    let z2 = (a2 > c.sqrt()).then(|| a2 + c / a2);
    (c + 1.0, z2)
}
