//! Oracles shared by the integration suites. Nothing here calls the crate's
//! closed forms; the point is to check them against independent arithmetic.

#![allow(dead_code)]

use chaos_tv::quadrature::{adaptive, adaptive_power_singular, Tolerance};
use statrs::function::erf::erf;

/// `Φ(x)` through the error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Exact TV between `N(0, 1)` and `N(shift, 1)`.
pub fn gaussian_shift_tv(shift: f64) -> f64 {
    2.0 * normal_cdf(shift.abs() / 2.0) - 1.0
}

/// Standard error of the sample variance of `Σ λ_k (ξ_k² - 1)`.
///
/// Cumulants: `κ2 = 2Σλ²`, `κ4 = 48Σλ⁴`, so `Var(s²) ≈ (κ4 + 2κ2²)/N`.
pub fn chaos_variance_se(eigenvalues: &[f64], draws: usize) -> f64 {
    let k2: f64 = 2.0 * eigenvalues.iter().map(|l| l * l).sum::<f64>();
    let k4: f64 = 48.0 * eigenvalues.iter().map(|l| l.powi(4)).sum::<f64>();
    ((k4 + 2.0 * k2 * k2) / draws as f64).sqrt()
}

fn tol(rel: f64) -> Tolerance {
    let mut t = Tolerance::new(1e-300, rel);
    t.max_subdivisions = 20_000;
    t
}

/// `∫_{max(x,y,0)}^1 (s-x)^a1 (s-y)^a2 ds` by direct adaptive quadrature.
pub fn limit_kernel(x: f64, y: f64, a1: f64, a2: f64) -> f64 {
    let m = x.max(y).max(0.0);
    limit_kernel_from(m, m - x, m - y, a1, a2)
}

/// The same integral written as `∫_0^{1-m} (r+dx)^a1 (r+dy)^a2 dr`, for
/// callers that know the offsets exactly and must not recover them by
/// subtraction near the diagonal.
pub fn limit_kernel_from(m: f64, dx: f64, dy: f64, a1: f64, a2: f64) -> f64 {
    if m >= 1.0 || (dx == 0.0 && dy == 0.0) {
        // The diagonal inside [0, 1) is a null set where the kernel diverges.
        return 0.0;
    }
    let len = 1.0 - m;
    let g = |r: f64| (r + dx).powf(a1) * (r + dy).powf(a2);
    let t = tol(1e-10);
    let v = if dx == 0.0 {
        adaptive_power_singular(g, len, a1, t)
    } else if dy == 0.0 {
        adaptive_power_singular(g, len, a2, t)
    } else {
        adaptive(g, 0.0, len, t)
    };
    v.expect("kernel quadrature").value
}

/// `∫ φ(x) dx` over `[left, 1]`, with the half line below -1 mapped by
/// `x = -e^u` and extra breakpoints at 0.
fn integrate_line<F: Fn(f64) -> f64>(f: F, left: f64, rel: f64) -> f64 {
    assert!(left < -1.0);
    let far = adaptive(|u: f64| f(-u.exp()) * u.exp(), 0.0, (-left).ln(), tol(rel)).unwrap().value;
    let near = adaptive(&f, -1.0, 0.0, tol(rel)).unwrap().value;
    let inside = adaptive(&f, 0.0, 1.0, tol(rel)).unwrap().value;
    far + near + inside
}

/// `∫∫ f_inf(x, y)² dx dy` over `[left, 1]²` by nested adaptive quadrature.
///
/// For `x ∈ [0, 1)` the inner integral splits at `y = x`, where
/// `f² ~ |x - y|^{2(a1+a2+1)}`.
pub fn limit_norm_sq_by_quadrature(h1: f64, h2: f64, left: f64) -> f64 {
    let (a1, a2) = (h1 - 1.5, h2 - 1.5);
    let nu = 2.0 * (a1 + a2 + 1.0);
    let row = |x: f64| -> f64 {
        let sq = |y: f64| limit_kernel(x, y, a1, a2).powi(2);
        if !(0.0..1.0).contains(&x) {
            return integrate_line(sq, left, 1e-8);
        }
        let far = adaptive(|u: f64| sq(-u.exp()) * u.exp(), 0.0, (-left).ln(), tol(1e-8)).unwrap().value;
        let below = |r: f64| limit_kernel_from(x, 0.0, r, a1, a2).powi(2);
        let above = |r: f64| limit_kernel_from(x + r, r, 0.0, a1, a2).powi(2);
        let below = adaptive_power_singular(below, x + 1.0, nu, tol(1e-8)).unwrap().value;
        let above = adaptive_power_singular(above, 1.0 - x, nu, tol(1e-8)).unwrap().value;
        far + below + above
    };
    integrate_line(row, left, 1e-6)
}

/// Least-squares slope of `log y` on `log x`, computed from scratch.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x.ln() - mx;
        sxy += dx * (y.ln() - my);
        sxx += dx * dx;
    }
    sxy / sxx
}
