//! Closed forms for integrals of one- and two-sided power functions.

use statrs::function::beta::ln_beta;

use super::KernelError;
use crate::quadrature::GaussLegendre;

/// Constant `c` in `∫ (t-x)_+^α (s-x)_+^α dx = c |t-s|^(2α+1)`.
pub fn c_alpha(alpha: f64) -> Result<f64, KernelError> {
    if !(alpha > -1.0 && alpha < -0.5) {
        return Err(KernelError::AlphaOutOfRange(alpha));
    }
    Ok(ln_beta(alpha + 1.0, -2.0 * alpha - 1.0).exp())
}

/// `P(z) = plus * z_+^p + minus * (-z)_+^p` with `p > -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSidedPower {
    pub plus: f64,
    pub minus: f64,
    pub exponent: f64,
}

impl TwoSidedPower {
    pub fn symmetric(constant: f64, exponent: f64) -> Self {
        Self {
            plus: constant,
            minus: constant,
            exponent,
        }
    }

    pub fn one_sided(exponent: f64) -> Self {
        Self {
            plus: 1.0,
            minus: 0.0,
            exponent,
        }
    }

    /// The covariance kernel of two one-sided powers sharing a driver:
    /// `∫ (s-x)_+^α (t-x)_+^β dx = P(s - t)`.
    ///
    /// For `s > t` the constant is `B(β+1, -α-β-1)` (the exponent at the
    /// earlier point goes first); for `s < t` it is `B(α+1, -α-β-1)`.
    pub fn cross(alpha: f64, beta: f64) -> Result<Self, KernelError> {
        let tail = -alpha - beta - 1.0;
        if !(alpha > -1.0 && beta > -1.0 && tail > 0.0) {
            return Err(KernelError::AlphaOutOfRange(alpha.max(beta)));
        }
        Ok(Self {
            plus: ln_beta(beta + 1.0, tail).exp(),
            minus: ln_beta(alpha + 1.0, tail).exp(),
            exponent: alpha + beta + 1.0,
        })
    }

    /// `P(-z)`.
    pub fn flipped(self) -> Self {
        Self {
            plus: self.minus,
            minus: self.plus,
            exponent: self.exponent,
        }
    }

    /// Pointwise product, again a two-sided power.
    pub fn product(self, other: Self) -> Self {
        Self {
            plus: self.plus * other.plus,
            minus: self.minus * other.minus,
            exponent: self.exponent + other.exponent,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            plus: self.plus * factor,
            minus: self.minus * factor,
            exponent: self.exponent,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        if z > 0.0 {
            self.plus * z.powf(self.exponent)
        } else if z < 0.0 {
            self.minus * (-z).powf(self.exponent)
        } else if self.exponent > 0.0 {
            0.0
        } else if self.exponent == 0.0 {
            0.5 * (self.plus + self.minus)
        } else {
            f64::INFINITY
        }
    }

    /// `∫_s0^s1 ∫_t0^t1 P(s - t) dt ds`.
    pub fn rect(&self, s: (f64, f64), t: (f64, f64)) -> f64 {
        let p = self.exponent;
        let mut total = 0.0;
        if self.plus != 0.0 {
            total += self.plus * one_sided_rect(s, t, p);
        }
        if self.minus != 0.0 {
            total += self.minus * one_sided_rect(t, s, p);
        }
        total
    }

    /// `rect([d, d+1], [0, 1])`, computed stably for large `|d|`.
    ///
    /// On a uniform grid of width `w`, `rect(cell_i, cell_j) = w^(p+2) unit_cell(i - j)`.
    pub fn unit_cell(&self, d: i64) -> f64 {
        self.plus * unit_second_difference(self.exponent, d)
            + self.minus * unit_second_difference(self.exponent, -d)
    }

    /// `g(u) = ∫_0^1 P(v - u) dv`.
    pub fn line_profile(&self, u: f64) -> f64 {
        let q = self.exponent + 1.0;
        let forward = if u < 0.0 {
            // (1-u)^q - (-u)^q without cancellation
            (-u).powf(q) * (q * (1.0 / -u).ln_1p()).exp_m1()
        } else if u < 1.0 {
            (1.0 - u).powf(q)
        } else {
            0.0
        };
        let backward = if u > 1.0 {
            -u.powf(q) * (q * (-1.0 / u).ln_1p()).exp_m1()
        } else if u > 0.0 {
            u.powf(q)
        } else {
            0.0
        };
        (self.plus * forward + self.minus * backward) / q
    }
}

fn phi(z: f64, p: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else {
        z.powf(p + 2.0) / ((p + 1.0) * (p + 2.0))
    }
}

/// `∫_s ∫_t (s - t)_+^p`.
fn one_sided_rect(s: (f64, f64), t: (f64, f64), p: f64) -> f64 {
    let (a, b) = s;
    let (c, d) = t;
    if b <= c || a == b || c == d {
        return 0.0;
    }
    let gap = a - d;
    let spread = (b - a) + (d - c);
    if gap > 0.0 && spread < 0.5 * gap {
        // Well separated: the second difference of phi cancels badly,
        // while the integrand is analytic on a wide neighbourhood.
        return separated_rect(s, t, p);
    }
    phi(b - c, p) + phi(a - d, p) - phi(b - d, p) - phi(a - c, p)
}

fn separated_rect(s: (f64, f64), t: (f64, f64), p: f64) -> f64 {
    thread_local! {
        static RULE: GaussLegendre = GaussLegendre::new(8);
    }
    RULE.with(|rule| {
        let mut total = 0.0;
        for (x, wx) in rule.mapped(s.0, s.1) {
            for (y, wy) in rule.mapped(t.0, t.1) {
                total += wx * wy * (x - y).powf(p);
            }
        }
        total
    })
}

/// `∫_d^{d+1} ∫_0^1 (s - t)_+^p dt ds = [φ(d+1) + φ(d-1) - 2φ(d)]`.
fn unit_second_difference(p: f64, d: i64) -> f64 {
    if d < 0 {
        return 0.0;
    }
    let q = p + 2.0;
    let norm = (p + 1.0) * (p + 2.0);
    if d < 8 {
        let df = d as f64;
        return phi(df + 1.0, p) + phi(df - 1.0, p) - 2.0 * phi(df, p);
    }
    // (d+1)^q + (d-1)^q - 2 d^q = 2 Σ_k binom(q, 2k) d^(q-2k)
    let df = d as f64;
    let inv_sq = 1.0 / (df * df);
    let mut binom = 1.0;
    let mut power = df.powf(q);
    let mut sum = 0.0;
    for m in 0..80 {
        binom *= (q - m as f64) / (m as f64 + 1.0);
        if m % 2 == 1 {
            power *= inv_sq;
            let term = binom * power;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
    }
    2.0 * sum / norm
}

/// `∫_l^r (s - x)_+^a ds`.
pub fn block_integral(x: f64, l: f64, r: f64, a: f64) -> f64 {
    let q = a + 1.0;
    if r <= x {
        return 0.0;
    }
    if l <= x {
        return (r - x).powf(q) / q;
    }
    // both positive; (r-x)^q - (l-x)^q computed relative to l-x
    let base = l - x;
    base.powf(q) * (q * ((r - l) / base).ln_1p()).exp_m1() / q
}

/// Exact `∫∫_{s×t} |s - t|^γ`.
pub fn rect_power_integral(s: (f64, f64), t: (f64, f64), gamma: f64) -> Result<f64, KernelError> {
    if !(gamma > -1.0) {
        return Err(KernelError::GammaOutOfRange(gamma));
    }
    if [s.0, s.1, t.0, t.1].iter().any(|v| !v.is_finite()) {
        return Err(KernelError::NanInput);
    }
    let s = (s.0.min(s.1), s.0.max(s.1));
    let t = (t.0.min(t.1), t.0.max(t.1));
    Ok(TwoSidedPower::symmetric(1.0, gamma).rect(s, t))
}
