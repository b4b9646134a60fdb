//! Exact simulation of two fBm driven by one Brownian motion, and the
//! normalized quadratic covariation `Z_n`.
//!
//! `B^H_t = κ(H) ∫ (∫_0^t (s-x)_+^(H-3/2) ds) dW(x)` with `κ(H)` making
//! `E[(B^H_1)²] = 1`. Both processes use the same `W`.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::chaos_sim::SamplePool;
use crate::kernels::{c_alpha, HurstPair, KernelError, TwoSidedPower};
use crate::streams::{layout, map_chunks};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FbmError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("increment covariance for n = {n} is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { n: usize, jitter: f64 },
    #[error("need at least one increment")]
    ZeroSize,
    #[error("sample count must be at least 1")]
    ZeroCount,
}

/// `κ(H) = √(H(2H-1) / c_(H-3/2))`.
pub fn fbm_scale(h: f64) -> Result<f64, KernelError> {
    let c = c_alpha(h - 1.5)?;
    Ok((h * (2.0 * h - 1.0) / c).sqrt())
}

/// `E[ΔB^h_i ΔB^h_j]` for increments over `[k/n, (k+1)/n]`.
pub fn auto_cov(h: f64, i: usize, j: usize, n: usize) -> f64 {
    let k = (i as f64 - j as f64).abs();
    let e = 2.0 * h;
    let p = |x: f64| x.abs().powf(e);
    (n as f64).powf(-e) * 0.5 * (p(k + 1.0) + p(k - 1.0) - 2.0 * p(k))
}

/// `E[ΔB^(H1)_i ΔB^(H2)_j]` from the shared-driver representation.
pub fn cross_cov(hurst: &HurstPair, i: usize, j: usize, n: usize) -> Result<f64, KernelError> {
    let k = fbm_scale(hurst.h1())? * fbm_scale(hurst.h2())?;
    let power = TwoSidedPower::cross(hurst.a1(), hurst.a2())?;
    let w = 1.0 / n as f64;
    let cell = |m: usize| (m as f64 * w, (m + 1) as f64 * w);
    Ok(k * power.rect(cell(i), cell(j)))
}

/// `E[B^(H1)_1 B^(H2)_1]`.
pub fn unit_correlation(hurst: &HurstPair) -> Result<f64, KernelError> {
    cross_cov(hurst, 0, 0, 1)
}

/// `b` in `Z_n = b · I2(f_n)`: `κ1 κ2 / E[B^(H1)_1 B^(H2)_1]`.
pub fn rosenblatt_scale(hurst: &HurstPair) -> Result<f64, KernelError> {
    let power = TwoSidedPower::cross(hurst.a1(), hurst.a2())?;
    Ok(1.0 / power.rect((0.0, 1.0), (0.0, 1.0)))
}

/// Joint covariance of `(ΔB^(H1)_0..ΔB^(H1)_(n-1), ΔB^(H2)_0..ΔB^(H2)_(n-1))`
/// with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct IncrementCovariance {
    pub hurst: HurstPair,
    pub n: usize,
    pub matrix: DMatrix<f64>,
    /// Diagonal shift needed for the factorization to succeed.
    pub jitter: f64,
    factor: DMatrix<f64>,
}

impl IncrementCovariance {
    /// Lower-triangular `L` with `L Lᵀ = matrix + jitter·I`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.clone().symmetric_eigenvalues().min()
    }

    /// `L z` for a vector of `2n` standard normals.
    fn correlate(&self, z: &[f64], out: &mut [f64]) {
        let m = 2 * self.n;
        for (r, o) in out.iter_mut().enumerate().take(m) {
            let mut s = 0.0;
            for (c, zc) in z.iter().enumerate().take(r + 1) {
                s += self.factor[(r, c)] * zc;
            }
            *o = s;
        }
    }
}

pub fn build_joint_cov(hurst: &HurstPair, n: usize) -> Result<IncrementCovariance, FbmError> {
    if n == 0 {
        return Err(FbmError::ZeroSize);
    }
    let (h1, h2) = (hurst.h1(), hurst.h2());
    let mut cross = Vec::with_capacity(2 * n - 1);
    for d in 0..(2 * n - 1) {
        // offsets i - j = d - (n - 1); stationarity lets us use one row
        let off = d as i64 - (n as i64 - 1);
        let (i, j) = if off >= 0 { (off as usize, 0) } else { (0, (-off) as usize) };
        cross.push(cross_cov(hurst, i, j, n)?);
    }
    let m = 2 * n;
    let mut cov = DMatrix::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] = auto_cov(h1, i, j, n);
            cov[(n + i, n + j)] = auto_cov(h2, i, j, n);
            let c = cross[(i as i64 - j as i64 + n as i64 - 1) as usize];
            cov[(i, n + j)] = c;
            cov[(n + j, i)] = c;
        }
    }
    let trace = cov.trace();
    let mut last = 0.0;
    for jitter in [0.0, 1e-14 * trace / m as f64, 1e-12 * trace / m as f64] {
        last = jitter;
        let mut shifted = cov.clone();
        for d in 0..m {
            shifted[(d, d)] += jitter;
        }
        if let Some(ch) = Cholesky::<f64, Dyn>::new(shifted) {
            let factor = ch.l();
            if factor.iter().all(|v| v.is_finite()) {
                return Ok(IncrementCovariance {
                    hurst: *hurst,
                    n,
                    matrix: cov,
                    jitter,
                    factor,
                });
            }
        }
    }
    Err(FbmError::NotPositiveDefinite { n, jitter: last })
}

/// Draws of `Z_n = n^(1-H1-H2) Σ_k (ΔB^(H1)_k ΔB^(H2)_k / E[ΔB^(H1)_k ΔB^(H2)_k] - 1)`.
pub fn sample_zn(hurst: &HurstPair, n: usize, count: usize, seed: u64) -> Result<SamplePool, FbmError> {
    let cov = build_joint_cov(hurst, n)?;
    sample_zn_with(&cov, count, seed)
}

/// As [`sample_zn`] with a prebuilt covariance.
pub fn sample_zn_with(cov: &IncrementCovariance, count: usize, seed: u64) -> Result<SamplePool, FbmError> {
    if count == 0 {
        return Err(FbmError::ZeroCount);
    }
    let n = cov.n;
    let rho = cov.matrix[(0, n)];
    let norm = (n as f64).powf(1.0 - cov.hurst.h1() - cov.hurst.h2());
    let streams = layout(count);
    let chunks = map_chunks(seed, &streams, |rng: &mut ChaCha8Rng, len| {
        let mut z = vec![0.0; 2 * n];
        let mut x = vec![0.0; 2 * n];
        (0..len)
            .map(|_| {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                cov.correlate(&z, &mut x);
                let s: f64 = (0..n).map(|k| x[k] * x[n + k] / rho - 1.0).sum();
                norm * s
            })
            .collect::<Vec<f64>>()
    });
    Ok(SamplePool {
        values: chunks.into_iter().flatten().collect(),
        seed,
        stream_count: streams.len(),
        meta: format!("Z_n path route, n = {n}, H = {}, jitter {:e}", cov.hurst, cov.jitter),
        chunks: streams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos_sim::sample_second_chaos;
    use crate::kernels::KernelSpec;
    use crate::quadrature::{adaptive_panels, Tolerance};
    use crate::spectral::factorized_decomposition;
    use crate::tv_estimator::ks_two_sample;

    #[test]
    fn auto_cov_examples() {
        assert_eq!(auto_cov(0.7, 3, 3, 4), 4f64.powf(-1.4));
        assert!(auto_cov(0.5, 1, 3, 8).abs() < 1e-15);
        assert!(auto_cov(0.5, 1, 2, 8).abs() < 1e-15);
        assert!((auto_cov(0.8, 1, 0, 1) - 0.5 * (2f64.powf(1.6) - 2.0)).abs() < 1e-15);
        assert!((auto_cov(0.8, 1, 0, 1) - 0.5157).abs() < 1e-4);
    }

    #[test]
    fn scale_normalizes_unit_variance() {
        for h in [0.6, 0.75, 0.9] {
            let pair = HurstPair::relaxed(h, h).unwrap();
            assert!((cross_cov(&pair, 0, 0, 1).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_hurst_cross_matches_auto() {
        let pair = HurstPair::new(0.8, 0.8).unwrap();
        for (i, j) in [(0, 0), (0, 1), (3, 1), (0, 7)] {
            let a = auto_cov(0.8, i, j, 8);
            let c = cross_cov(&pair, i, j, 8).unwrap();
            assert!((a - c).abs() < 1e-12 * a.abs().max(1e-3), "{i} {j}: {a} vs {c}");
        }
    }

    #[test]
    fn swap_symmetry() {
        let p = HurstPair::new(0.7, 0.9).unwrap();
        for (i, j) in [(0, 0), (0, 2), (3, 1)] {
            let a = cross_cov(&p, i, j, 4).unwrap();
            let b = cross_cov(&p.swapped(), j, i, 4).unwrap();
            assert!((a - b).abs() < 1e-13 * a.abs());
        }
    }

    /// `κ1 κ2 ∫ g1(x) g2(x) dx` with `g(x) = ∫_l^r (s-x)_+^a ds` written out.
    fn cross_cov_oracle(h1: f64, h2: f64, i: usize, j: usize, n: usize) -> f64 {
        let w = 1.0 / n as f64;
        let g = |a: f64, m: usize, x: f64| {
            let (l, r) = (m as f64 * w, (m + 1) as f64 * w);
            let q = a + 1.0;
            if x >= l {
                return (r - x).max(0.0).powf(q) / q;
            }
            // (r-x)^q (1 - (1 - w/(r-x))^q) / q without cancellation
            -(r - x).powf(q) * (q * (-w / (r - x)).ln_1p()).exp_m1() / q
        };
        let (a1, a2) = (h1 - 1.5, h2 - 1.5);
        let f = |x: f64| g(a1, i, x) * g(a2, j, x);
        let tol = Tolerance::new(1e-15, 1e-10);
        let right = (i.min(j) + 1) as f64 * w;
        let mut bps = vec![-1.0, 0.0];
        for m in 1..=(i.max(j) + 1) {
            let e = m as f64 * w;
            if e <= right + 1e-15 {
                bps.push(e);
            }
        }
        let near = adaptive_panels(f, &bps, tol).unwrap().value;
        // x = -e^t on (-∞, -1]
        let far = adaptive_panels(|t: f64| f(-t.exp()) * t.exp(), &[0.0, 10.0, 40.0, 120.0], tol)
            .unwrap()
            .value;
        let k = fbm_scale(h1).unwrap() * fbm_scale(h2).unwrap();
        k * (near + far)
    }

    #[test]
    fn cross_cov_matches_quadrature() {
        let p = HurstPair::new(0.7, 0.9).unwrap();
        for (i, j) in [(0, 0), (0, 2), (2, 0)] {
            let got = cross_cov(&p, i, j, 4).unwrap();
            let want = cross_cov_oracle(0.7, 0.9, i, j, 4);
            assert!(((got - want) / want).abs() < 1e-6, "{i} {j}: {got} vs {want}");
        }
    }

    #[test]
    fn joint_cov_examples() {
        let c = build_joint_cov(&HurstPair::new(0.8, 0.8).unwrap(), 1).unwrap();
        for v in c.matrix.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let p = HurstPair::new(0.7, 0.9).unwrap();
        let c = build_joint_cov(&p, 8).unwrap();
        assert_eq!(c.matrix, c.matrix.transpose());
        assert!(c.min_eigenvalue() >= -1e-12 * c.matrix.trace());
        assert!((c.matrix[(0, 0)] - 8f64.powf(-1.4)).abs() < 1e-15);
        // stationarity of the auto blocks
        for d in 1..8 {
            assert_eq!(c.matrix[(0, d)], c.matrix[(8 - d - 1, 8 - 1)]);
        }
        let rebuilt = c.factor() * c.factor().transpose();
        assert!((rebuilt - &c.matrix).amax() < 1e-12);
    }

    #[test]
    fn equal_hurst_matrix_has_rank_n() {
        let n = 6;
        let c = build_joint_cov(&HurstPair::new(0.8, 0.8).unwrap(), n).unwrap();
        let eig = c.matrix.clone().symmetric_eigenvalues();
        let tiny = eig.iter().filter(|v| v.abs() < 1e-10 * c.matrix.trace()).count();
        assert_eq!(tiny, n);
        assert!(c.jitter > 0.0);
    }

    #[test]
    fn zn_is_centered_and_reproducible() {
        let p = HurstPair::new(0.8, 0.8).unwrap();
        let a = sample_zn(&p, 16, 40_000, 1).unwrap();
        let m = a.moments();
        assert!(m.mean.abs() < 4.0 * m.std_error_of_mean());
        assert_eq!(a, sample_zn(&p, 16, 40_000, 1).unwrap());
    }

    #[test]
    fn zn_variance_matches_scaled_kernel_route() {
        // Var Z_n = 2 b² ‖sym f_n‖²
        for (h1, h2) in [(0.8, 0.8), (0.9, 0.7)] {
            let p = HurstPair::new(h1, h2).unwrap();
            let n = 8;
            let d = factorized_decomposition(&KernelSpec::f_n(p, n).unwrap(), n).unwrap();
            let b = rosenblatt_scale(&p).unwrap();
            let target = 2.0 * b * b * d.hs_norm_sq;
            let m = sample_zn(&p, n, 200_000, 2).unwrap().moments();
            assert!(((m.variance() - target) / target).abs() < 0.03, "{h1} {h2}: {} vs {target}", m.variance());
        }
    }

    #[test]
    fn zn_law_matches_kernel_route() {
        let p = HurstPair::new(0.8, 0.8).unwrap();
        let n = 16;
        let count = 20_000;
        let path = sample_zn(&p, n, count, 3).unwrap().standardized();
        let d = factorized_decomposition(&KernelSpec::f_n(p, n).unwrap(), n).unwrap();
        let kernel = sample_second_chaos(&d, count, 4).unwrap().standardized();
        let ks = ks_two_sample(&path.values, &kernel.values);
        assert!(ks.statistic < ks.critical_value(0.01), "{ks:?}");
    }
}
