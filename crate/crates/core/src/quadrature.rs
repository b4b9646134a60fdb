//! One-dimensional quadrature building blocks.
//!
//! Everything the crate integrates numerically goes through here: fixed
//! Gauss-Legendre rules on (optionally graded) panels, and a globally
//! adaptive 15-point Gauss-Kronrod driver for integrands with algebraic
//! endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("adaptive quadrature stalled: error estimate {achieved:.3e} above target {requested:.3e} after {subdivisions} subdivisions")]
    ToleranceNotMet {
        achieved: f64,
        requested: f64,
        subdivisions: usize,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
    #[error("invalid quadrature request: {0}")]
    Invalid(&'static str),
}

/// Stopping rule for the adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_subdivisions: 4000,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-13, 1e-11)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess for the i-th largest root.
            let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
            let mut x = theta.cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over consecutive `edges`.
    pub fn integrate_panels<F: Fn(f64) -> f64>(&self, edges: &[f64], f: F) -> f64 {
        edges
            .windows(2)
            .map(|p| self.integrate(p[0], p[1], &f))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Which end(s) of an interval a graded mesh clusters toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grading {
    Start,
    End,
    Both,
}

/// Panel edges on [a, b] with algebraic grading: edge k sits at
/// a + (b - a)(k/m)^q for `Start`, mirrored for `End`, and the two halves
/// glued at the midpoint for `Both`. `exponent = 1` gives a uniform mesh.
pub fn graded_edges(a: f64, b: f64, panels: usize, exponent: f64, grading: Grading) -> Vec<f64> {
    let m = panels.max(1);
    let q = exponent.max(1.0);
    let len = b - a;
    let mut edges: Vec<f64> = (0..=m)
        .map(|k| {
            let u = k as f64 / m as f64;
            let t = match grading {
                Grading::Start => u.powf(q),
                Grading::End => 1.0 - (1.0 - u).powf(q),
                Grading::Both => {
                    if u <= 0.5 {
                        0.5 * (2.0 * u).powf(q)
                    } else {
                        1.0 - 0.5 * (2.0 - 2.0 * u).powf(q)
                    }
                }
            };
            a + len * t
        })
        .collect();
    edges[0] = a;
    edges[m] = b;
    edges
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite(x))
        }
    };
    let fc = eval(centre)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(centre - dx)?;
        let f2 = eval(centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * value.abs();
    Ok((value, err.max(floor)))
}

/// Globally adaptive Gauss-Kronrod over the panels defined by `breakpoints`
/// (which must be sorted). Breakpoints are where the caller knows the
/// integrand is non-smooth.
pub fn adaptive_panels<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Integral, QuadError> {
    if breakpoints.len() < 2 {
        return Err(QuadError::Invalid("need at least two breakpoints"));
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        if w[1] < w[0] {
            return Err(QuadError::Invalid("breakpoints must be sorted"));
        }
        if w[1] == w[0] {
            continue;
        }
        let (value, error) = kronrod15(&f, w[0], w[1])?;
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let mut subdivisions = 0;
    while total_err > tol.target(total) {
        if subdivisions >= tol.max_subdivisions {
            return Err(QuadError::ToleranceNotMet {
                achieved: total_err,
                requested: tol.target(total),
                subdivisions,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine resolution.
            return Err(QuadError::ToleranceNotMet {
                achieved: total_err,
                requested: tol.target(total),
                subdivisions,
            });
        }
        let (v1, e1) = kronrod15(&f, worst.a, mid)?;
        let (v2, e2) = kronrod15(&f, mid, worst.b)?;
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // Re-sum to shed the drift of the running updates.
    let (value, abs_error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Integral {
        value,
        abs_error,
        evaluations,
    })
}

pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral, QuadError> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    if b < a {
        let r = adaptive_panels(f, &[b, a], tol)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }
    adaptive_panels(f, &[a, b], tol)
}

/// Integrates `f(r)` over `r ∈ [0, len]` where `f(r) ~ r^nu` near 0.
///
/// The integrand receives the distance from the singular point rather than
/// a position, so callers never lose digits forming `x - a`. The
/// substitution `r = len t^k` with `k = 1/(1 + nu)` turns the leading
/// singular factor into a constant.
pub fn adaptive_power_singular<F: Fn(f64) -> f64>(
    f: F,
    len: f64,
    nu: f64,
    tol: Tolerance,
) -> Result<Integral, QuadError> {
    if !(nu > -1.0) {
        return Err(QuadError::Invalid("endpoint exponent must exceed -1"));
    }
    if !(len >= 0.0) {
        return Err(QuadError::Invalid("length must be nonnegative"));
    }
    if len == 0.0 {
        return adaptive(f, 0.0, 0.0, tol);
    }
    let k = if nu < 0.0 { 1.0 / (1.0 + nu) } else { 1.0 };
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let r = len * t.powf(k);
        if r == 0.0 {
            return 0.0;
        }
        f(r) * len * k * t.powf(k - 1.0)
    };
    adaptive(g, 0.0, 1.0, tol)
}
