//! Fractional kernels on `(-∞, 1]²`, their pointwise values, inner products
//! and `L²` distances.
//!
//! Every kernel here has the form `f(x, y) = ∫ k1(s, x) k2(s, y) μ(ds)` with
//! `k_i(s, x) = (s - x)_+^(a_i)` and `μ` either Lebesgue measure on [0, 1]
//! (the limit kernel) or a block-averaged version of it (the discrete
//! kernels). Integrating out `x` and `y` first turns every inner product
//! into integrals of two-sided power functions over blocks, which are
//! available in closed form.

mod inner;
mod power;

use std::fmt;

use thiserror::Error;

use crate::quadrature::{adaptive, QuadError, Tolerance};

pub use inner::{inner_product, inner_product_sym, l2_distance, l2_distance_sym, norm_sq, norm_sq_sym};
pub use power::{block_integral, c_alpha, rect_power_integral, TwoSidedPower};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid Hurst pair ({h1}, {h2}): {reason}")]
    InvalidHurst { h1: f64, h2: f64, reason: &'static str },
    #[error("exponent {0} outside (-1, -1/2)")]
    AlphaOutOfRange(f64),
    #[error("power exponent {0} must exceed -1")]
    GammaOutOfRange(f64),
    #[error("block count must be at least 1")]
    ZeroBlocks,
    #[error("scale factor {0} must be finite")]
    InvalidFactor(f64),
    #[error("NaN or infinite input")]
    NanInput,
    #[error("kernels built from different Hurst pairs")]
    HurstMismatch,
    #[error("kernel is not square integrable at ({h1}, {h2}): need h1 + h2 > 3/2")]
    NotSquareIntegrable { h1: f64, h2: f64 },
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Hurst indices of the two fractional Brownian motions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstPair {
    h1: f64,
    h2: f64,
}

impl HurstPair {
    /// Both indices in (1/2, 1) with `h1 + h2 > 3/2`, the range where the
    /// limit kernel is square integrable.
    pub fn new(h1: f64, h2: f64) -> Result<Self, KernelError> {
        let pair = Self::relaxed(h1, h2)?;
        if !(h1 + h2 > 1.5) {
            return Err(KernelError::InvalidHurst {
                h1,
                h2,
                reason: "h1 + h2 must exceed 3/2",
            });
        }
        Ok(pair)
    }

    /// Only requires each index in (1/2, 1). Kernels built from such a pair
    /// can be discretized but may have infinite norm.
    pub fn relaxed(h1: f64, h2: f64) -> Result<Self, KernelError> {
        let ok = |h: f64| h > 0.5 && h < 1.0;
        if !(ok(h1) && ok(h2)) {
            return Err(KernelError::InvalidHurst {
                h1,
                h2,
                reason: "each index must lie in (1/2, 1)",
            });
        }
        Ok(Self { h1, h2 })
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    /// Kernel exponents `h_i - 3/2`.
    pub fn a1(&self) -> f64 {
        self.h1 - 1.5
    }

    pub fn a2(&self) -> f64 {
        self.h2 - 1.5
    }

    /// Exponent of `|s - s'|` after integrating out one coordinate: `2h - 2`.
    pub fn beta1(&self) -> f64 {
        2.0 * self.h1 - 2.0
    }

    pub fn beta2(&self) -> f64 {
        2.0 * self.h2 - 2.0
    }

    /// `2h1 + 2h2 - 4`, the exponent of the reduced norm integrand.
    pub fn gamma(&self) -> f64 {
        self.beta1() + self.beta2()
    }

    /// `3/2 - h1 - h2`: the decay exponent of `‖f_n - f_inf‖`.
    pub fn rate_exponent(&self) -> f64 {
        1.5 - self.h1 - self.h2
    }

    pub fn is_square_integrable(&self) -> bool {
        self.h1 + self.h2 > 1.5
    }

    pub fn is_diagonal(&self) -> bool {
        self.h1 == self.h2
    }

    pub fn swapped(&self) -> Self {
        Self {
            h1: self.h2,
            h2: self.h1,
        }
    }

    pub(crate) fn require_square_integrable(&self) -> Result<(), KernelError> {
        if self.is_square_integrable() {
            Ok(())
        } else {
            Err(KernelError::NotSquareIntegrable {
                h1: self.h1,
                h2: self.h2,
            })
        }
    }
}

impl fmt::Display for HurstPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.h1, self.h2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelVariant {
    FInfinity,
    FN(usize),
    Scaled(Box<KernelVariant>, f64),
}

/// Which underlying kernel a spec is a multiple of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKernel {
    Limit,
    Blocks(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    pub hurst: HurstPair,
}

impl KernelSpec {
    pub fn f_infinity(hurst: HurstPair) -> Self {
        Self {
            variant: KernelVariant::FInfinity,
            hurst,
        }
    }

    pub fn f_n(hurst: HurstPair, n: usize) -> Result<Self, KernelError> {
        if n == 0 {
            return Err(KernelError::ZeroBlocks);
        }
        Ok(Self {
            variant: KernelVariant::FN(n),
            hurst,
        })
    }

    /// `factor` times this kernel. A zero factor is allowed and builds the
    /// zero kernel.
    pub fn scaled(&self, factor: f64) -> Result<Self, KernelError> {
        if !factor.is_finite() {
            return Err(KernelError::InvalidFactor(factor));
        }
        Ok(Self {
            variant: KernelVariant::Scaled(Box::new(self.variant.clone()), factor),
            hurst: self.hurst,
        })
    }

    /// Splits the spec into `factor * base`.
    pub fn decompose(&self) -> (BaseKernel, f64) {
        let mut factor = 1.0;
        let mut v = &self.variant;
        loop {
            match v {
                KernelVariant::FInfinity => return (BaseKernel::Limit, factor),
                KernelVariant::FN(n) => return (BaseKernel::Blocks(*n), factor),
                KernelVariant::Scaled(inner, c) => {
                    factor *= c;
                    v = inner;
                }
            }
        }
    }

    pub fn base(&self) -> BaseKernel {
        self.decompose().0
    }

    pub fn factor(&self) -> f64 {
        self.decompose().1
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn variant(v: &KernelVariant, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match v {
                KernelVariant::FInfinity => write!(f, "f_inf"),
                KernelVariant::FN(n) => write!(f, "f_{n}"),
                KernelVariant::Scaled(b, c) => {
                    write!(f, "{c}*")?;
                    variant(b, f)
                }
            }
        }
        variant(&self.variant, f)?;
        write!(f, " at H = {}", self.hurst)
    }
}

/// Discretization and tolerance settings shared by the numerical paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub truncation_left: f64,
    pub panels_per_unit: usize,
    pub grading_exponent: f64,
    pub nodes_per_panel: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            truncation_left: -50.0,
            panels_per_unit: 64,
            grading_exponent: 3.0,
            nodes_per_panel: 8,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.truncation_left < 0.0 && self.truncation_left.is_finite()) {
            return Err(KernelError::InvalidConfig("truncation_left must be negative and finite"));
        }
        if self.panels_per_unit == 0 {
            return Err(KernelError::InvalidConfig("panels_per_unit must be positive"));
        }
        if !(self.grading_exponent >= 1.0) {
            return Err(KernelError::InvalidConfig("grading_exponent must be at least 1"));
        }
        if self.nodes_per_panel == 0 {
            return Err(KernelError::InvalidConfig("nodes_per_panel must be positive"));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(KernelError::InvalidConfig("tolerances must be positive"));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.abs_tol, self.rel_tol)
    }

    /// Upper bound on `∫∫ f²` over `{x < L} ∪ {y < L}` for any of the
    /// kernels, with `L = truncation_left`.
    ///
    /// For `x < L < 0`, `f(x, y) ≤ (-x)^a1 g2(y)` with `g2(y) = ∫_0^1 (s-y)_+^a2 ds`,
    /// and `‖g‖² = c_a · 2/((β+1)(β+2))`.
    pub fn tail_bound(&self, hurst: &HurstPair) -> Result<f64, KernelError> {
        tail_bound_at(hurst, self.truncation_left)
    }

    /// The truncation point at which [`Self::tail_bound`] equals `target`.
    pub fn truncation_for_tail(hurst: &HurstPair, target: f64) -> Result<f64, KernelError> {
        if !(target > 0.0) {
            return Err(KernelError::InvalidConfig("tail target must be positive"));
        }
        let mut lo = 0.0f64; // log|L|
        let mut hi = 1.0f64;
        while tail_bound_at(hurst, -hi.exp())? > target {
            lo = hi;
            hi *= 2.0;
            if hi > 700.0 {
                return Err(KernelError::InvalidConfig("tail target unreachable"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if tail_bound_at(hurst, -mid.exp())? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(-hi.exp())
    }
}

fn tail_bound_at(hurst: &HurstPair, left: f64) -> Result<f64, KernelError> {
    let l = left.abs();
    let profile_sq = |a: f64| -> Result<f64, KernelError> {
        let beta = 2.0 * a + 1.0;
        Ok(c_alpha(a)? * 2.0 / ((beta + 1.0) * (beta + 2.0)))
    };
    let (a1, a2) = (hurst.a1(), hurst.a2());
    let piece = |a: f64| l.powf(2.0 * a + 1.0) / (-2.0 * a - 1.0);
    Ok(piece(a1) * profile_sq(a2)? + piece(a2) * profile_sq(a1)?)
}

/// Pointwise value of the kernel. Returns `+∞` on the diagonal of the limit
/// kernel inside [0, 1), where the defining integral diverges.
pub fn eval_kernel(spec: &KernelSpec, x: f64, y: f64) -> Result<f64, KernelError> {
    if x.is_nan() || y.is_nan() {
        return Err(KernelError::NanInput);
    }
    let (base, factor) = spec.decompose();
    if factor == 0.0 {
        return Ok(0.0);
    }
    let (a1, a2) = (spec.hurst.a1(), spec.hurst.a2());
    let value = match base {
        BaseKernel::Limit => eval_limit(x, y, a1, a2)?,
        BaseKernel::Blocks(n) => eval_blocks(n, x, y, a1, a2),
    };
    Ok(factor * value)
}

/// `(f(x, y) + f(y, x)) / 2`.
pub fn eval_kernel_sym(spec: &KernelSpec, x: f64, y: f64) -> Result<f64, KernelError> {
    Ok(0.5 * (eval_kernel(spec, x, y)? + eval_kernel(spec, y, x)?))
}

fn eval_blocks(n: usize, x: f64, y: f64, a1: f64, a2: f64) -> f64 {
    if x >= 1.0 || y >= 1.0 {
        return 0.0;
    }
    let w = 1.0 / n as f64;
    let first = ((x.max(y).max(0.0)) * n as f64).floor() as usize;
    (first..n)
        .map(|i| {
            let (l, r) = (i as f64 * w, (i + 1) as f64 * w);
            block_integral(x, l, r, a1) * block_integral(y, l, r, a2)
        })
        .sum::<f64>()
        * n as f64
}

/// `∫_0^1 (s-x)_+^a1 (s-y)_+^a2 ds`.
fn eval_limit(x: f64, y: f64, a1: f64, a2: f64) -> Result<f64, KernelError> {
    if x >= 1.0 || y >= 1.0 {
        return Ok(0.0);
    }
    // Order the two singular points: `lo` is the later one.
    let (lo, other, a_lo, a_other) = if x >= y { (x, y, a1, a2) } else { (y, x, a2, a1) };
    let v0 = (-lo).max(0.0);
    let v1 = 1.0 - lo;
    let d = lo - other;
    if d == 0.0 {
        if lo >= 0.0 {
            return Ok(f64::INFINITY);
        }
        let q = a_lo + a_other + 1.0;
        return Ok((v1.powf(q) - v0.powf(q)) / q);
    }
    // With v = s - lo and w = v/d the integral is d^(a+b+1) ∫ w^a (1+w)^b dw.
    let (w0, w1) = (v0 / d, v1 / d);
    let tol = Tolerance::new(0.0, 1e-12);
    let mut total = 0.0;
    if w0 < 1.0 {
        // w = t^k with k = 1/(1+a) removes the w^a factor.
        let k = 1.0 / (1.0 + a_lo);
        let upper = w1.min(1.0);
        let head = adaptive(
            |t: f64| k * (1.0 + t.powf(k)).powf(a_other),
            w0.powf(1.0 / k),
            upper.powf(1.0 / k),
            tol,
        )?;
        total += head.value;
    }
    if w1 > 1.0 {
        let start = w0.max(1.0).ln();
        let tail = adaptive(
            |tau: f64| {
                let w = tau.exp();
                w.powf(a_lo + 1.0) * (1.0 + w).powf(a_other)
            },
            start,
            w1.ln(),
            tol,
        )?;
        total += tail.value;
    }
    Ok(d.powf(a_lo + a_other + 1.0) * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_power_singular;
    use proptest::prelude::*;

    fn pair(h1: f64, h2: f64) -> HurstPair {
        HurstPair::new(h1, h2).unwrap()
    }

    #[test]
    fn hurst_pair_validation() {
        assert!(HurstPair::new(0.8, 0.8).is_ok());
        assert!(HurstPair::new(0.75, 0.75).is_err());
        assert!(HurstPair::relaxed(0.75, 0.75).is_ok());
        assert!(HurstPair::new(0.5, 0.99).is_err());
        assert!(HurstPair::new(1.0, 0.9).is_err());
        assert!(HurstPair::relaxed(f64::NAN, 0.9).is_err());
        let h = pair(0.9, 0.7);
        assert!((h.a1() + 0.6).abs() < 1e-15 && (h.a2() + 0.8).abs() < 1e-15);
        assert!((h.gamma() + 0.8).abs() < 1e-15);
        assert!((h.rate_exponent() + 0.1).abs() < 1e-15);
    }

    #[test]
    fn spec_construction() {
        let h = pair(0.8, 0.8);
        assert!(KernelSpec::f_n(h, 0).is_err());
        let s = KernelSpec::f_infinity(h).scaled(2.0).unwrap().scaled(1.5).unwrap();
        assert_eq!(s.decompose(), (BaseKernel::Limit, 3.0));
        assert!(KernelSpec::f_infinity(h).scaled(f64::INFINITY).is_err());
        assert_eq!(KernelSpec::f_n(h, 4).unwrap().to_string(), "f_4 at H = (0.8, 0.8)");
    }

    #[test]
    fn limit_kernel_special_points() {
        let h = HurstPair::relaxed(0.75, 0.75).unwrap();
        let f = KernelSpec::f_infinity(h);
        assert_eq!(eval_kernel(&f, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(eval_kernel(&f, 0.3, 0.3).unwrap(), f64::INFINITY);
        assert_eq!(eval_kernel(&f, 0.0, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(eval_kernel(&f, 0.2, 1.5).unwrap(), 0.0);
        assert!(eval_kernel(&f, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn limit_kernel_matches_direct_quadrature() {
        let h = HurstPair::relaxed(0.75, 0.75).unwrap();
        let f = KernelSpec::f_infinity(h);
        let got = eval_kernel(&f, 0.0, 0.5).unwrap();
        // singular at s = 0.5 with exponent -0.75; s^-0.75 is smooth there
        let oracle = adaptive_power_singular(
            |r: f64| (0.5 + r).powf(-0.75) * r.powf(-0.75),
            0.5,
            -0.75,
            Tolerance::new(1e-15, 1e-13),
        )
        .unwrap()
        .value;
        assert!(((got - oracle) / oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn limit_kernel_far_left_and_close_points() {
        let h = pair(0.9, 0.7);
        let f = KernelSpec::f_infinity(h);
        // far left: integrand nearly constant
        let x = -1e4;
        let y = -2e4;
        let got = eval_kernel(&f, x, y).unwrap();
        let approx = crate::quadrature::GaussLegendre::new(20)
            .integrate(0.0, 1.0, |s| (s - x).powf(h.a1()) * (s - y).powf(h.a2()));
        assert!(((got - approx) / approx).abs() < 1e-11);
        // nearly coincident points below zero
        let a = eval_kernel(&f, -1e-3, -1e-3 - 1e-9).unwrap();
        let b = eval_kernel(&f, -1e-3, -1e-3).unwrap();
        assert!(((a - b) / b).abs() < 1e-4);
    }

    #[test]
    fn block_kernel_example() {
        let h = HurstPair::relaxed(0.75, 0.75).unwrap();
        let f1 = KernelSpec::f_n(h, 1).unwrap();
        assert!((eval_kernel(&f1, 0.0, 0.0).unwrap() - 16.0).abs() < 1e-13);
        let f3 = KernelSpec::f_n(h, 3).unwrap();
        assert!(eval_kernel(&f3, 0.5, 0.5).unwrap().is_finite());
        assert_eq!(eval_kernel(&f3, 1.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn scaled_kernel_values() {
        let h = pair(0.8, 0.8);
        let f = KernelSpec::f_infinity(h);
        let g = f.scaled(-2.5).unwrap();
        let a = eval_kernel(&f, 0.1, -0.3).unwrap();
        let b = eval_kernel(&g, 0.1, -0.3).unwrap();
        assert_eq!(b, -2.5 * a);
        let zero = f.scaled(0.0).unwrap();
        assert_eq!(eval_kernel(&zero, 0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn tail_bound_and_truncation() {
        let h = pair(0.8, 0.8);
        let cfg = QuadratureConfig::default();
        let tail = cfg.tail_bound(&h).unwrap();
        assert!(tail > 0.0);
        let left = QuadratureConfig::truncation_for_tail(&h, 1e-3).unwrap();
        let moved = QuadratureConfig {
            truncation_left: left,
            ..cfg
        };
        assert!((moved.tail_bound(&h).unwrap() - 1e-3).abs() < 1e-9);
        assert!(left < cfg.truncation_left);
    }

    #[test]
    fn config_validation() {
        let bad = QuadratureConfig {
            truncation_left: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(QuadratureConfig::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn transposed_exponents_mirror_the_kernel(
            h1 in 0.76f64..0.99, h2 in 0.76f64..0.99,
            x in -3.0f64..0.99, y in -3.0f64..0.99,
        ) {
            prop_assume!((x - y).abs() > 1e-3);
            let h = HurstPair::new(h1, h2).unwrap();
            let f = KernelSpec::f_infinity(h);
            let g = KernelSpec::f_infinity(h.swapped());
            let a = eval_kernel(&f, x, y).unwrap();
            let b = eval_kernel(&g, y, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-11 * a.abs());
            let fb = KernelSpec::f_n(h, 5).unwrap();
            let gb = KernelSpec::f_n(h.swapped(), 5).unwrap();
            let a = eval_kernel(&fb, x, y).unwrap();
            let b = eval_kernel(&gb, y, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }

        #[test]
        fn limit_kernel_is_positive_and_symmetric_for_equal_indices(
            h in 0.76f64..0.99, x in -3.0f64..0.99, y in -3.0f64..0.99,
        ) {
            prop_assume!((x - y).abs() > 1e-6);
            let f = KernelSpec::f_infinity(HurstPair::new(h, h).unwrap());
            let a = eval_kernel(&f, x, y).unwrap();
            let b = eval_kernel(&f, y, x).unwrap();
            prop_assert!(a > 0.0);
            prop_assert!((a - b).abs() <= 1e-11 * a);
        }
    }
}
