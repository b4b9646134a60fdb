//! Sampling of `I2(f) = Σ λ_k (Z_k² - 1)` and of `‖D I2(f)‖² = 4 Σ λ_k² Z_k²`.
//!
//! Every draw consumes `K + 1` standard normals from its chunk stream: one per
//! retained eigenvalue, in decreasing order of `|λ|`, then one reserved for the
//! unresolved tail. Two samplers run on the same seed therefore share the
//! Gaussians of equally ranked eigenvalues, which is what the coupled and
//! matched-seed comparisons rely on.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::ratefit::{fit_loglog, RateFit, RateFitError};
use crate::spectral::{SpectralDecomposition, DEFAULT_RELATIVE_FLOOR};
use crate::streams::{layout, map_chunks};

/// Minimum number of draws at or below `u` for a small-ball grid point.
pub const MIN_TAIL_HITS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChaosError {
    #[error("spectrum has no nonzero eigenvalue")]
    EmptySpectrum,
    #[error("sample count must be at least 1")]
    ZeroCount,
    #[error("only {hits} draws at or below u = {u} (need {required}); raise the count or u")]
    InsufficientTailHits { u: f64, hits: usize, required: usize },
    #[error("u grid must hold positive values spanning a decade below the median {median}")]
    GridTooNarrow { median: f64 },
    #[error("cannot merge pools: {0}")]
    IncompatiblePools(&'static str),
    #[error(transparent)]
    Fit(#[from] RateFitError),
}

/// What to do with the Hilbert-Schmidt mass not carried by the retained eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailModel {
    /// Plain truncated sum.
    #[default]
    Drop,
    /// Adds an independent `N(0, 2·tail)` term, matching the variance of the
    /// discarded part of the series.
    Gaussian,
}

/// Draws tagged with the chunk streams that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream_count: usize,
    pub meta: String,
    /// `(stream, length)` of each chunk, in the order of `values`.
    pub chunks: Vec<(u64, usize)>,
}

impl SamplePool {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pool from plain values with no stream structure (e.g. external data).
    pub fn from_values(values: Vec<f64>, meta: impl Into<String>) -> Self {
        let n = values.len();
        Self {
            values,
            seed: 0,
            stream_count: 1,
            meta: meta.into(),
            chunks: vec![(0, n)],
        }
    }

    /// Union of two pools drawn from disjoint stream sets of the same run,
    /// laid out in increasing stream order.
    pub fn merge(&self, other: &SamplePool) -> Result<SamplePool, ChaosError> {
        if self.seed != other.seed {
            return Err(ChaosError::IncompatiblePools("different seeds"));
        }
        if self.meta != other.meta {
            return Err(ChaosError::IncompatiblePools("different generating specs"));
        }
        let mut parts: Vec<(u64, &[f64])> = Vec::with_capacity(self.chunks.len() + other.chunks.len());
        for pool in [self, other] {
            let mut start = 0;
            for &(stream, len) in &pool.chunks {
                parts.push((stream, &pool.values[start..start + len]));
                start += len;
            }
        }
        parts.sort_by_key(|p| p.0);
        if parts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ChaosError::IncompatiblePools("overlapping streams"));
        }
        let chunks: Vec<(u64, usize)> = parts.iter().map(|p| (p.0, p.1.len())).collect();
        let values = parts.iter().flat_map(|p| p.1.iter().copied()).collect();
        Ok(SamplePool {
            values,
            seed: self.seed,
            stream_count: chunks.len(),
            meta: self.meta.clone(),
            chunks,
        })
    }

    pub fn moments(&self) -> Moments {
        Moments::from_slice(&self.values)
    }

    /// Multiplies every draw by `c`.
    pub fn scaled(&self, c: f64) -> SamplePool {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Divides by the empirical standard deviation after centering at the empirical mean.
    pub fn standardized(&self) -> SamplePool {
        let m = self.moments();
        let sd = m.variance().sqrt();
        let mut out = self.clone();
        if sd > 0.0 {
            out.values.iter_mut().for_each(|v| *v = (*v - m.mean) / sd);
        }
        out
    }

    /// One value per row.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "value")?;
        for v in &self.values {
            writeln!(out, "{v:.16e}")?;
        }
        Ok(())
    }

    /// Little-endian `f64` values, no header.
    pub fn write_binary<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Running count, mean and central moments; merges associatively.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
    m3: f64,
}

impl Moments {
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: f64) {
        self.merge(&Moments {
            count: 1,
            mean: x,
            m2: 0.0,
            m3: 0.0,
        });
    }

    pub fn merge(&mut self, o: &Moments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.count as f64, o.count as f64);
        let n = na + nb;
        let delta = o.mean - self.mean;
        let m2 = self.m2 + o.m2 + delta * delta * na * nb / n;
        let m3 = self.m3
            + o.m3
            + delta.powi(3) * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * o.m2 - nb * self.m2) / n;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.count += o.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count as f64 - 1.0)
    }

    pub fn std_error_of_mean(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Third central moment (plug-in).
    pub fn third_central(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.m3 / self.count as f64
    }
}

/// Retained spectrum of one kernel, ready to draw from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosSampler {
    eigenvalues: Vec<f64>,
    /// Signed `√(2·tail)`; zero under [`TailModel::Drop`].
    tail_scale: f64,
    /// `Σλ²` of eigenvalues below the floor plus any known unresolved mass.
    pub discarded_hs: f64,
    pub meta: String,
}

impl ChaosSampler {
    pub fn new(d: &SpectralDecomposition, tail: TailModel) -> Result<Self, ChaosError> {
        if d.max_abs() == 0.0 || !d.max_abs().is_finite() {
            return Err(ChaosError::EmptySpectrum);
        }
        let (kept, dropped) = d.retained(DEFAULT_RELATIVE_FLOOR);
        let discarded = dropped + d.tail_hs_sq.unwrap_or(0.0);
        let tail_scale = match tail {
            TailModel::Drop => 0.0,
            TailModel::Gaussian => kept[0].signum() * (2.0 * discarded).sqrt(),
        };
        let source = d.source.as_ref().map_or_else(|| "synthetic spectrum".to_string(), |s| s.to_string());
        let meta = format!("{source}; retained {}; discarded_hs {discarded:.6e}; tail {tail:?}", kept.len());
        Ok(Self {
            eigenvalues: kept,
            tail_scale,
            discarded_hs: discarded,
            meta,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn retained(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `2 Σλ²` plus the tail term's variance.
    pub fn variance(&self) -> f64 {
        2.0 * self.eigenvalues.iter().map(|l| l * l).sum::<f64>() + self.tail_scale * self.tail_scale
    }

    fn chaos_value(&self, z: &[f64], z_tail: f64) -> f64 {
        let mut s = 0.0;
        for (l, zk) in self.eigenvalues.iter().zip(z) {
            s += l * (zk * zk - 1.0);
        }
        s + self.tail_scale * z_tail
    }

    fn malliavin_value(&self, z: &[f64]) -> f64 {
        let mut s = 0.0;
        for (l, zk) in self.eigenvalues.iter().zip(z) {
            s += l * l * zk * zk;
        }
        4.0 * s
    }
}

#[derive(Clone, Copy)]
enum Statistic {
    Chaos,
    Malliavin,
}

fn draw_pools(
    samplers: &[&ChaosSampler],
    stat: Statistic,
    streams: &[(u64, usize)],
    seed: u64,
) -> Vec<SamplePool> {
    let width = samplers.iter().map(|s| s.retained()).max().unwrap_or(0);
    let chunks: Vec<Vec<Vec<f64>>> = map_chunks(seed, streams, |rng: &mut ChaCha8Rng, len| {
        let mut out = vec![Vec::with_capacity(len); samplers.len()];
        let mut z = vec![0.0; width];
        for _ in 0..len {
            for zk in z.iter_mut() {
                *zk = rng.sample(StandardNormal);
            }
            let z_tail: f64 = rng.sample(StandardNormal);
            for (s, col) in samplers.iter().zip(out.iter_mut()) {
                col.push(match stat {
                    Statistic::Chaos => s.chaos_value(&z, z_tail),
                    Statistic::Malliavin => s.malliavin_value(&z),
                });
            }
        }
        out
    });
    let label = match stat {
        Statistic::Chaos => "I2",
        Statistic::Malliavin => "malliavin_norm_sq",
    };
    samplers
        .iter()
        .enumerate()
        .map(|(p, s)| SamplePool {
            values: chunks.iter().flat_map(|c| c[p].iter().copied()).collect(),
            seed,
            stream_count: streams.len(),
            meta: format!("{label} of {}", s.meta),
            chunks: streams.to_vec(),
        })
        .collect()
}

fn check_count(count: usize) -> Result<(), ChaosError> {
    if count == 0 {
        Err(ChaosError::ZeroCount)
    } else {
        Ok(())
    }
}

/// `count` draws of the truncated series `Σ_{k≤K} λ_k (Z_k² - 1)`.
pub fn sample_second_chaos(d: &SpectralDecomposition, count: usize, seed: u64) -> Result<SamplePool, ChaosError> {
    sample_second_chaos_with(d, TailModel::Drop, count, seed)
}

pub fn sample_second_chaos_with(
    d: &SpectralDecomposition,
    tail: TailModel,
    count: usize,
    seed: u64,
) -> Result<SamplePool, ChaosError> {
    check_count(count)?;
    let s = ChaosSampler::new(d, tail)?;
    Ok(draw_pools(&[&s], Statistic::Chaos, &layout(count), seed).remove(0))
}

/// Draws from a subset of the chunk streams of a run; see [`SamplePool::merge`].
pub fn sample_streams(sampler: &ChaosSampler, streams: &[(u64, usize)], seed: u64) -> SamplePool {
    draw_pools(&[sampler], Statistic::Chaos, streams, seed).remove(0)
}

/// One pool per sampler, all driven by the same Gaussians (paired by rank).
pub fn sample_coupled(samplers: &[&ChaosSampler], count: usize, seed: u64) -> Result<Vec<SamplePool>, ChaosError> {
    check_count(count)?;
    Ok(draw_pools(samplers, Statistic::Chaos, &layout(count), seed))
}

/// `count` draws of `4 Σ λ_k² Z_k²`, on the same Gaussians as
/// [`sample_second_chaos`] for a matching seed.
pub fn sample_malliavin_norm_sq(d: &SpectralDecomposition, count: usize, seed: u64) -> Result<SamplePool, ChaosError> {
    check_count(count)?;
    let s = ChaosSampler::new(d, TailModel::Drop)?;
    Ok(draw_pools(&[&s], Statistic::Malliavin, &layout(count), seed).remove(0))
}

/// Empirical `P(V ≤ u)` at each `u` of a sorted sample.
pub fn empirical_cdf(sorted: &[f64], u: f64) -> (usize, f64) {
    let hits = sorted.partition_point(|&v| v <= u);
    (hits, hits as f64 / sorted.len() as f64)
}

/// Small-ball fit result with the per-point probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallBall {
    pub fit: RateFit,
    /// `(u, hits, probability)` for every grid point used in the fit.
    pub points: Vec<(f64, usize, f64)>,
    pub median: f64,
}

/// Log-log slope of `P(‖DF‖² ≤ u)` over the grid points below the median
/// that have at least [`MIN_TAIL_HITS`] hits.
pub fn small_ball_exponent(d: &SpectralDecomposition, u_grid: &[f64], count: usize, seed: u64) -> Result<RateFit, ChaosError> {
    small_ball_detail(d, u_grid, count, seed).map(|s| s.fit)
}

pub fn small_ball_detail(d: &SpectralDecomposition, u_grid: &[f64], count: usize, seed: u64) -> Result<SmallBall, ChaosError> {
    let mut pool = sample_malliavin_norm_sq(d, count, seed)?.values;
    pool.sort_by(f64::total_cmp);
    small_ball_from_sorted(&pool, u_grid)
}

/// As [`small_ball_detail`] on an already sorted sample.
pub fn small_ball_from_sorted(sorted: &[f64], u_grid: &[f64]) -> Result<SmallBall, ChaosError> {
    if sorted.is_empty() {
        return Err(ChaosError::ZeroCount);
    }
    let median = sorted[sorted.len() / 2];
    let mut grid: Vec<f64> = u_grid.iter().copied().filter(|&u| u > 0.0 && u < median).collect();
    grid.sort_by(f64::total_cmp);
    let lo = match (grid.first(), grid.last()) {
        (Some(&lo), Some(&hi)) if hi / lo >= 10.0 => lo,
        _ => return Err(ChaosError::GridTooNarrow { median }),
    };
    let (hits, _) = empirical_cdf(sorted, lo);
    if hits < MIN_TAIL_HITS {
        return Err(ChaosError::InsufficientTailHits {
            u: lo,
            hits,
            required: MIN_TAIL_HITS,
        });
    }
    let points: Vec<(f64, usize, f64)> = grid
        .iter()
        .map(|&u| {
            let (h, p) = empirical_cdf(sorted, u);
            (u, h, p)
        })
        .collect();
    let fit = fit_loglog(&points.iter().map(|&(u, _, p)| (u, p)).collect::<Vec<_>>())?;
    Ok(SmallBall { fit, points, median })
}

/// `u^(5/2) / ((2π)^(5/2) Π_{i≤5} |λ_i|)`, an upper bound for
/// `P(‖DF‖² ≤ u)` built from the five leading eigenvalues.
pub fn small_ball_upper_bound(eigenvalues: &[f64], u: f64) -> Option<f64> {
    if eigenvalues.len() < 5 {
        return None;
    }
    let prod: f64 = eigenvalues[..5].iter().map(|l| l.abs()).product();
    Some(u.powf(2.5) / ((2.0 * std::f64::consts::PI).powf(2.5) * prod))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{HurstPair, KernelSpec};
    use crate::spectral::factorized_decomposition;
    use proptest::prelude::*;
    use statrs::function::erf::erf;

    fn synth(v: Vec<f64>) -> SpectralDecomposition {
        SpectralDecomposition::from_eigenvalues(v).unwrap()
    }

    fn finf(cells: usize) -> SpectralDecomposition {
        factorized_decomposition(&KernelSpec::f_infinity(HurstPair::new(0.8, 0.8).unwrap()), cells).unwrap()
    }

    #[test]
    fn single_eigenvalue_is_centered_chi_square() {
        let p = sample_second_chaos(&synth(vec![1.0]), 200_000, 1).unwrap();
        let m = p.moments();
        assert!(p.values.iter().all(|&v| v >= -1.0));
        assert!(m.mean.abs() < 4.0 * m.std_error_of_mean());
        // Var(Z²) = 2, and the variance estimator has sd ≈ √(96/N)
        assert!((m.variance() - 2.0).abs() < 5.0 * (96.0f64 / 200_000.0).sqrt());
    }

    #[test]
    fn kernel_spectrum_isometry() {
        let d = finf(64);
        let n = 200_000;
        let p = sample_second_chaos(&d, n, 2).unwrap();
        let m = p.moments();
        let target = 2.0 * d.retained(DEFAULT_RELATIVE_FLOOR).0.iter().map(|l| l * l).sum::<f64>();
        // Var of the variance estimator: (κ4 + 2σ⁴)/N with κ4 = 48Σλ⁴
        let l4: f64 = d.eigenvalues.iter().map(|l| l.powi(4)).sum();
        let se = ((48.0 * l4 + 2.0 * target * target) / n as f64).sqrt();
        assert!((m.variance() - target).abs() < 4.0 * se, "{} vs {target}", m.variance());
        assert!(m.mean.abs() < 4.0 * m.std_error_of_mean());
    }

    #[test]
    fn scaled_kernel_scales_draw_by_draw() {
        let f = KernelSpec::f_infinity(HurstPair::new(0.8, 0.8).unwrap());
        let a = sample_second_chaos(&factorized_decomposition(&f, 32).unwrap(), 5000, 3).unwrap();
        let b = sample_second_chaos(&factorized_decomposition(&f.scaled(1.25).unwrap(), 32).unwrap(), 5000, 3).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((1.25 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn malliavin_single_and_kernel() {
        let p = sample_malliavin_norm_sq(&synth(vec![1.0]), 200_000, 4).unwrap();
        let m = p.moments();
        assert!(p.values.iter().all(|&v| v >= 0.0));
        assert!((m.mean - 4.0).abs() < 4.0 * m.std_error_of_mean());

        let d = finf(64);
        let p = sample_malliavin_norm_sq(&d, 50_000, 5).unwrap();
        assert!(p.values.iter().all(|&v| v > 0.0));
        let m = p.moments();
        let target = 4.0 * d.hs_norm_sq;
        assert!((m.mean - target).abs() < 4.0 * m.std_error_of_mean());
    }

    #[test]
    fn malliavin_ignores_eigenvalue_signs() {
        let a = sample_malliavin_norm_sq(&synth(vec![1.0, -0.5, 0.25]), 3000, 6).unwrap();
        let b = sample_malliavin_norm_sq(&synth(vec![-1.0, 0.5, -0.25]), 3000, 6).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn skewness_follows_third_cumulant() {
        // κ3 = 8Σλ³
        for (eigs, seed) in [(vec![1.0, 0.6, -0.3], 7u64), (vec![-1.0, 0.4, 0.4], 8)] {
            let k3: f64 = 8.0 * eigs.iter().map(|l: &f64| l.powi(3)).sum::<f64>();
            let p = sample_second_chaos(&synth(eigs), 1_000_000, seed).unwrap();
            let m3 = p.moments().third_central();
            assert_eq!(m3.signum(), k3.signum());
            assert!((m3 - k3).abs() < 0.05 * k3.abs() + 0.1, "{m3} vs {k3}");
        }
    }

    #[test]
    fn more_eigenvalues_change_variance_within_tail() {
        let d = finf(128);
        let (k, extra) = (20, 10);
        let a = sample_second_chaos(&d.truncated(k), 100_000, 9).unwrap().moments().variance();
        let b = sample_second_chaos(&d.truncated(k + extra), 100_000, 9).unwrap().moments().variance();
        let tail: f64 = 2.0 * d.eigenvalues[k..].iter().map(|l| l * l).sum::<f64>();
        assert!(b > a && b - a < tail);
    }

    #[test]
    fn gaussian_tail_restores_variance() {
        let d = finf(32);
        let s = ChaosSampler::new(&d, TailModel::Gaussian).unwrap();
        let total = 2.0 * (d.hs_norm_sq + d.tail_hs_sq.unwrap());
        assert!((s.variance() - total).abs() < 1e-9 * total);
        let p = sample_second_chaos_with(&d, TailModel::Gaussian, 100_000, 10).unwrap();
        let m = p.moments();
        assert!((m.variance() - total).abs() < 0.03 * total);
    }

    #[test]
    fn zero_spectrum_and_count_rejected() {
        let mut d = synth(vec![1.0]);
        d.eigenvalues = vec![0.0];
        assert_eq!(sample_second_chaos(&d, 10, 0), Err(ChaosError::EmptySpectrum));
        assert_eq!(sample_second_chaos(&synth(vec![1.0]), 0, 0), Err(ChaosError::ZeroCount));
    }

    #[test]
    fn merge_restores_the_full_run() {
        let d = synth(vec![1.0, 0.5]);
        let s = ChaosSampler::new(&d, TailModel::Drop).unwrap();
        let count = 3 * crate::streams::CHUNK_LEN + 17;
        let full = sample_second_chaos(&d, count, 11).unwrap();
        let l = layout(count);
        let a = sample_streams(&s, &l[..1], 11);
        let b = sample_streams(&s, &l[1..3], 11);
        let c = sample_streams(&s, &l[3..], 11);
        let abc = a.merge(&b).unwrap().merge(&c).unwrap();
        let cba = c.merge(&b.merge(&a).unwrap()).unwrap();
        assert_eq!(abc.values, full.values);
        assert_eq!(abc, cba);
        assert!(a.merge(&a).is_err());
    }

    #[test]
    fn coupled_pools_equal_single_runs() {
        let d1 = synth(vec![1.0, 0.5, 0.2]);
        let d2 = synth(vec![0.9, 0.4]);
        let s1 = ChaosSampler::new(&d1, TailModel::Drop).unwrap();
        let s2 = ChaosSampler::new(&d2, TailModel::Drop).unwrap();
        let pools = sample_coupled(&[&s1, &s2], 5000, 12).unwrap();
        let single = sample_second_chaos(&d1, 5000, 12).unwrap();
        assert_eq!(pools[0].values, single.values);
        // shared Gaussians make the pair strongly correlated
        let (a, b) = (&pools[0].values, &pools[1].values);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64;
        assert!(cov / (pools[0].moments().variance() * pools[1].moments().variance()).sqrt() > 0.9);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let d = finf(16);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_second_chaos(&d, 20_000, 13).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn small_ball_one_eigenvalue_matches_gaussian_oracle() {
        // P(4Z² ≤ u) = erf(√(u/8)) ~ √(u/2π)·... slope 1/2
        let d = synth(vec![1.0]);
        let grid = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
        let sb = small_ball_detail(&d, &grid, 1_000_000, 14).unwrap();
        assert!((sb.fit.slope - 0.5).abs() < 0.05, "{}", sb.fit.slope);
        for &(u, _, p) in &sb.points {
            let exact = erf((u / 8.0).sqrt());
            assert!((p - exact).abs() < 5.0 * (exact / 1e6).sqrt());
        }
    }

    #[test]
    fn small_ball_five_equal_eigenvalues() {
        let d = synth(vec![0.5; 5]);
        let grid = [0.05, 0.1, 0.2, 0.5];
        let sb = small_ball_detail(&d, &grid, 2_000_000, 15).unwrap();
        assert!((sb.fit.slope - 2.5).abs() < 0.3, "{}", sb.fit.slope);
        for &(u, _, p) in &sb.points {
            assert!(p <= small_ball_upper_bound(&d.eigenvalues, u).unwrap());
        }
    }

    #[test]
    fn small_ball_guards() {
        let d = synth(vec![1.0]);
        // entries above the median are dropped, leaving less than a decade
        assert!(matches!(
            small_ball_exponent(&d, &[0.5, 100.0, 1000.0], 10_000, 16),
            Err(ChaosError::GridTooNarrow { .. })
        ));
        assert!(matches!(
            small_ball_exponent(&d, &[1e-9, 1e-8, 1e-7], 10_000, 16),
            Err(ChaosError::InsufficientTailHits { .. })
        ));
    }

    proptest! {
        #[test]
        fn moments_merge_is_associative(xs in proptest::collection::vec(-100.0f64..100.0, 1..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let whole = Moments::from_slice(&xs);
            let mut parts = Moments::from_slice(&xs[..cut]);
            parts.merge(&Moments::from_slice(&xs[cut..]));
            prop_assert_eq!(whole.count, parts.count);
            prop_assert!((whole.mean - parts.mean).abs() < 1e-9);
            prop_assert!((whole.variance() - parts.variance()).abs() < 1e-7 * (1.0 + whole.variance()));
            prop_assert!((whole.third_central() - parts.third_central()).abs() < 1e-6 * (1.0 + whole.third_central().abs()));
        }
    }
}
