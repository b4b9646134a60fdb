//! Inner products of kernels in `L²(ℝ²)`.
//!
//! Integrating `x` against `x` and `y` against `y` leaves two two-sided
//! powers `Px(s - s')`, `Py(t - t')` on the mixing variables; what remains
//! depends only on how each kernel distributes its mixing variable over
//! [0, 1].

use super::{BaseKernel, KernelError, KernelSpec, QuadratureConfig, TwoSidedPower};
use crate::quadrature::{adaptive, GaussLegendre, Tolerance};

/// `⟨a, b⟩` on the raw (unsymmetrized) kernels.
pub fn inner_product(a: &KernelSpec, b: &KernelSpec, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    let h = shared_hurst(a, b)?;
    let px = TwoSidedPower::cross(h.a1(), h.a1())?;
    let py = TwoSidedPower::cross(h.a2(), h.a2())?;
    paired(a, b, px, py, cfg)
}

/// `⟨sym a, sym b⟩` with `sym f(x, y) = (f(x, y) + f(y, x)) / 2`.
pub fn inner_product_sym(a: &KernelSpec, b: &KernelSpec, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    let h = shared_hurst(a, b)?;
    let direct = inner_product(a, b, cfg)?;
    if h.is_diagonal() {
        return Ok(direct);
    }
    // ⟨a, bᵀ⟩: bᵀ carries exponent a2 on x and a1 on y.
    let px = TwoSidedPower::cross(h.a1(), h.a2())?;
    let py = TwoSidedPower::cross(h.a2(), h.a1())?;
    let crossed = paired(a, b, px, py, cfg)?;
    Ok(0.5 * (direct + crossed))
}

pub fn norm_sq(a: &KernelSpec, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    inner_product(a, a, cfg)
}

pub fn norm_sq_sym(a: &KernelSpec, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    inner_product_sym(a, a, cfg)
}

/// `‖a - b‖` on the raw kernels.
pub fn l2_distance(a: &KernelSpec, b: &KernelSpec, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    distance_with(a, b, |u, v| inner_product(u, v, cfg))
}

/// `‖sym a - sym b‖`.
pub fn l2_distance_sym(a: &KernelSpec, b: &KernelSpec, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    distance_with(a, b, |u, v| inner_product_sym(u, v, cfg))
}

fn distance_with<F>(a: &KernelSpec, b: &KernelSpec, ip: F) -> Result<f64, KernelError>
where
    F: Fn(&KernelSpec, &KernelSpec) -> Result<f64, KernelError>,
{
    shared_hurst(a, b)?;
    if a == b {
        return Ok(0.0);
    }
    let (base_a, fa) = a.decompose();
    let (base_b, fb) = b.decompose();
    if base_a == base_b {
        // Same underlying kernel: only the factors differ.
        let unit = KernelSpec {
            variant: match base_a {
                BaseKernel::Limit => super::KernelVariant::FInfinity,
                BaseKernel::Blocks(n) => super::KernelVariant::FN(n),
            },
            hurst: a.hurst,
        };
        return Ok((fa - fb).abs() * ip(&unit, &unit)?.max(0.0).sqrt());
    }
    let sq = ip(a, a)? - 2.0 * ip(a, b)? + ip(b, b)?;
    Ok(sq.max(0.0).sqrt())
}

fn shared_hurst(a: &KernelSpec, b: &KernelSpec) -> Result<super::HurstPair, KernelError> {
    if a.hurst != b.hurst {
        return Err(KernelError::HurstMismatch);
    }
    a.hurst.require_square_integrable()?;
    Ok(a.hurst)
}

fn paired(
    a: &KernelSpec,
    b: &KernelSpec,
    px: TwoSidedPower,
    py: TwoSidedPower,
    cfg: &QuadratureConfig,
) -> Result<f64, KernelError> {
    let (base_a, fa) = a.decompose();
    let (base_b, fb) = b.decompose();
    if fa == 0.0 || fb == 0.0 {
        return Ok(0.0);
    }
    Ok(fa * fb * base_pair(base_a, base_b, px, py, cfg)?)
}

fn base_pair(
    left: BaseKernel,
    right: BaseKernel,
    px: TwoSidedPower,
    py: TwoSidedPower,
    cfg: &QuadratureConfig,
) -> Result<f64, KernelError> {
    match (left, right) {
        (BaseKernel::Limit, BaseKernel::Limit) => Ok(px.product(py).rect((0.0, 1.0), (0.0, 1.0))),
        (BaseKernel::Blocks(n), BaseKernel::Blocks(m)) if n == m => Ok(blocks_same(n, px, py)),
        (BaseKernel::Blocks(n), BaseKernel::Blocks(m)) => Ok(blocks_mixed(n, m, px, py)),
        (BaseKernel::Blocks(n), BaseKernel::Limit) => blocks_limit(n, px, py, cfg),
        (BaseKernel::Limit, BaseKernel::Blocks(n)) => blocks_limit(n, px.flipped(), py.flipped(), cfg),
    }
}

/// `n² Σ_ij Px.rect(I_i, I_j) Py.rect(I_i, I_j)`, Toeplitz in `i - j`.
fn blocks_same(n: usize, px: TwoSidedPower, py: TwoSidedPower) -> f64 {
    let n_i = n as i64;
    let mut sum = 0.0;
    for d in (1 - n_i)..n_i {
        sum += (n_i - d.abs()) as f64 * px.unit_cell(d) * py.unit_cell(d);
    }
    (n as f64).powf(-px.exponent - py.exponent - 2.0) * sum
}

fn blocks_mixed(n: usize, m: usize, px: TwoSidedPower, py: TwoSidedPower) -> f64 {
    let (wn, wm) = (1.0 / n as f64, 1.0 / m as f64);
    let mut sum = 0.0;
    for i in 0..n {
        let s = (i as f64 * wn, (i + 1) as f64 * wn);
        for j in 0..m {
            let t = (j as f64 * wm, (j + 1) as f64 * wm);
            sum += px.rect(s, t) * py.rect(s, t);
        }
    }
    (n * m) as f64 * sum
}

/// `n Σ_i ∫_0^1 [∫_{I_i} Px(s - s') ds] [∫_{I_i} Py(t - s') dt] ds'`.
///
/// With `u = n s' - i` each bracket is `n^(-p-1) g(u)`, `g` the line
/// profile, and the sum over blocks folds into weights `n - |d|` on the
/// unit intervals `[d, d+1]`. Only `d ∈ {-1, 0, 1}` touch the kinks of `g`
/// at 0 and 1.
fn blocks_limit(n: usize, px: TwoSidedPower, py: TwoSidedPower, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    let rule = GaussLegendre::new(12);
    let product = |u: f64| px.line_profile(u) * py.line_profile(u);
    let n_i = n as i64;
    let scale = px.plus.max(px.minus) * py.plus.max(py.minus);
    let tol = Tolerance::new(cfg.abs_tol.min(1e-3 * cfg.rel_tol * scale), 1e-3 * cfg.rel_tol);
    let mut sum = 0.0;
    for d in (1 - n_i)..n_i {
        let (lo, hi) = (d as f64, d as f64 + 1.0);
        let piece = if (-1..=1).contains(&d) {
            adaptive(product, lo, hi, tol)?.value
        } else {
            rule.integrate(lo, hi, product)
        };
        sum += (n_i - d.abs()) as f64 * piece;
    }
    Ok((n as f64).powf(-px.exponent - py.exponent - 2.0) * sum)
}
