//! Total variation between two sample pools as half the L¹ distance of
//! estimated densities.
//!
//! Both estimators first reduce the pools to counts on one common grid, so
//! the bootstrap can resample counts (multinomially) instead of points. That
//! is exact for the histogram and exact up to grid rounding for the KDE.

use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use thiserror::Error;

use crate::chaos_sim::SamplePool;
use crate::streams::map_chunks;

/// Pooled quantiles at which the common grid is clipped.
pub const CLIP_QUANTILE: f64 = 1e-4;
/// Evaluation points of the KDE estimator.
pub const KDE_GRID: usize = 2048;
pub const DEFAULT_BINS: usize = 200;
pub const DEFAULT_RESAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TvError {
    #[error("sample pool is empty")]
    EmptyPool,
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("need at least 100 bootstrap resamples, got {0}")]
    TooFewResamples(usize),
    #[error("paired resampling needs pools of equal length ({0} vs {1})")]
    PairedLengthMismatch(usize, usize),
    #[error("pool contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvMethod {
    Histogram,
    Kde,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Average of the two pools' rule-of-thumb bandwidths.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    /// Each pool resampled on its own.
    #[default]
    Independent,
    /// Draw `i` of both pools resampled together; for pools built on shared
    /// Gaussians.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub mode: Resampling,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            seed: 0x7465_7374,
            mode: Resampling::Independent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: TvMethod,
    /// Bin count or bandwidth.
    pub resolution: f64,
    pub sample_sizes: (usize, usize),
}

/// Two pools reduced to counts on a common grid.
struct Binned {
    a: Vec<u64>,
    b: Vec<u64>,
    /// Nonzero `(bin_a, bin_b, count)` cells, only under paired resampling.
    joint: Option<Vec<(u32, u32, u64)>>,
}

fn validate(a: &[f64], b: &[f64]) -> Result<(), TvError> {
    if a.is_empty() || b.is_empty() {
        return Err(TvError::EmptyPool);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(TvError::NonFinite);
    }
    Ok(())
}

/// Pooled quantile range, clipped at [`CLIP_QUANTILE`]; symmetric in `a, b`.
fn common_range(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let last = (all.len() - 1) as f64;
    let lo = all[(CLIP_QUANTILE * last).floor() as usize];
    let hi = all[((1.0 - CLIP_QUANTILE) * last).ceil() as usize];
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn bin_of(x: f64, lo: f64, width: f64, bins: usize) -> usize {
    let k = ((x - lo) / width).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

fn bin_pools(a: &[f64], b: &[f64], lo: f64, width: f64, bins: usize, mode: Resampling) -> Result<Binned, TvError> {
    let count = |xs: &[f64]| {
        let mut c = vec![0u64; bins];
        for &x in xs {
            c[bin_of(x, lo, width, bins)] += 1;
        }
        c
    };
    let joint = match mode {
        Resampling::Independent => None,
        Resampling::Paired => {
            if a.len() != b.len() {
                return Err(TvError::PairedLengthMismatch(a.len(), b.len()));
            }
            let mut cells: Vec<(u32, u32)> = a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (bin_of(x, lo, width, bins) as u32, bin_of(y, lo, width, bins) as u32))
                .collect();
            cells.sort_unstable();
            let mut joint: Vec<(u32, u32, u64)> = Vec::new();
            for c in cells {
                match joint.last_mut() {
                    Some(last) if (last.0, last.1) == c => last.2 += 1,
                    _ => joint.push((c.0, c.1, 1)),
                }
            }
            Some(joint)
        }
    };
    Ok(Binned {
        a: count(a),
        b: count(b),
        joint,
    })
}

/// Multinomial draw of `total` items over `weights` (counts) by conditional binomials.
fn multinomial(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = u64>, total: u64, out: &mut Vec<u64>) {
    out.clear();
    let mut left_n = total;
    let mut left_w = total;
    for w in weights {
        if left_n == 0 || w == 0 {
            out.push(0);
            left_w -= w.min(left_w);
            continue;
        }
        let k = if w >= left_w {
            left_n
        } else {
            Binomial::new(left_n, w as f64 / left_w as f64)
                .expect("probability in [0, 1]")
                .sample(rng)
        };
        out.push(k);
        left_n -= k;
        left_w -= w;
    }
}

/// Order-insensitive key so that swapping the pools swaps their roles in the
/// bootstrap too.
fn fingerprint(xs: &[f64]) -> (usize, u64, u64) {
    let s: f64 = xs.iter().sum();
    (xs.len(), s.to_bits(), xs[0].to_bits())
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Percentile interval of `stat` over multinomial resamples of the counts,
/// widened if needed to contain `value`.
fn count_bootstrap<F>(binned: &Binned, stat: F, value: f64, boot: &BootstrapConfig, swap: bool) -> Result<(f64, f64), TvError>
where
    F: Fn(&[u64], &[u64]) -> f64 + Sync,
{
    if boot.resamples < 100 {
        return Err(TvError::TooFewResamples(boot.resamples));
    }
    let (ma, mb) = (binned.a.iter().sum::<u64>(), binned.b.iter().sum::<u64>());
    let bins = binned.a.len();
    let streams: Vec<(u64, usize)> = (0..boot.resamples as u64).map(|r| (r, 0)).collect();
    let mut stats = map_chunks(boot.seed, &streams, |rng, _| {
        let mut ra = Vec::with_capacity(bins);
        let mut rb = Vec::with_capacity(bins);
        match &binned.joint {
            None => {
                if swap {
                    multinomial(rng, binned.b.iter().copied(), mb, &mut rb);
                    multinomial(rng, binned.a.iter().copied(), ma, &mut ra);
                } else {
                    multinomial(rng, binned.a.iter().copied(), ma, &mut ra);
                    multinomial(rng, binned.b.iter().copied(), mb, &mut rb);
                }
            }
            Some(joint) => {
                let mut cells = Vec::with_capacity(joint.len());
                multinomial(rng, joint.iter().map(|c| c.2), ma, &mut cells);
                ra.resize(bins, 0);
                rb.resize(bins, 0);
                for (c, k) in joint.iter().zip(&cells) {
                    ra[c.0 as usize] += k;
                    rb[c.1 as usize] += k;
                }
            }
        }
        stat(&ra, &rb)
    });
    stats.sort_by(f64::total_cmp);
    let lo = percentile(&stats, 0.025).min(value).max(0.0);
    let hi = percentile(&stats, 0.975).max(value).min(1.0);
    Ok((lo, hi))
}

fn histogram_stat(ca: &[u64], cb: &[u64]) -> f64 {
    let (ma, mb) = (ca.iter().sum::<u64>() as f64, cb.iter().sum::<u64>() as f64);
    let s: f64 = ca
        .iter()
        .zip(cb)
        .map(|(&x, &y)| (x as f64 / ma - y as f64 / mb).abs())
        .sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// Histogram estimate `½ Σ |p̂_a - p̂_b|` with the default bootstrap.
pub fn tv_histogram(a: &SamplePool, b: &SamplePool, bins: usize) -> Result<TvEstimate, TvError> {
    tv_histogram_with(a, b, bins, &BootstrapConfig::default())
}

pub fn tv_histogram_with(a: &SamplePool, b: &SamplePool, bins: usize, boot: &BootstrapConfig) -> Result<TvEstimate, TvError> {
    tv_histogram_values(&a.values, &b.values, bins, boot)
}

pub fn tv_histogram_values(a: &[f64], b: &[f64], bins: usize, boot: &BootstrapConfig) -> Result<TvEstimate, TvError> {
    validate(a, b)?;
    if bins < 2 {
        return Err(TvError::TooFewBins(bins));
    }
    let (lo, hi) = common_range(a, b);
    let binned = bin_pools(a, b, lo, (hi - lo) / bins as f64, bins, boot.mode)?;
    let value = histogram_stat(&binned.a, &binned.b);
    let swap = fingerprint(a) > fingerprint(b);
    let (ci_low, ci_high) = count_bootstrap(&binned, histogram_stat, value, boot, swap)?;
    Ok(TvEstimate {
        value,
        ci_low,
        ci_high,
        method: TvMethod::Histogram,
        resolution: bins as f64,
        sample_sizes: (a.len(), b.len()),
    })
}

/// `0.9 · min(sd, iqr/1.34) · m^(-1/5)`.
pub fn rule_of_thumb_bandwidth(xs: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = percentile(&s, 0.75) - percentile(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * m.powf(-0.2)
}

/// Gaussian KDE of counts on a uniform grid with spacing `step`.
fn smooth(counts: &[u64], kernel: &[f64]) -> Vec<f64> {
    let m = counts.iter().sum::<u64>() as f64;
    let n = counts.len();
    let r = kernel.len() - 1;
    let mut out = vec![0.0; n];
    for (c, &k) in counts.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let w = k as f64 / m;
        let from = c.saturating_sub(r);
        let to = (c + r).min(n - 1);
        for (g, o) in out.iter_mut().enumerate().take(to + 1).skip(from) {
            *o += w * kernel[g.abs_diff(c)];
        }
    }
    out
}

fn kde_stat(kernel: &[f64], step: f64) -> impl Fn(&[u64], &[u64]) -> f64 + Sync + '_ {
    move |ca: &[u64], cb: &[u64]| {
        let (ka, kb) = (smooth(ca, kernel), smooth(cb, kernel));
        let d: Vec<f64> = ka.iter().zip(&kb).map(|(x, y)| (x - y).abs()).collect();
        let inner: f64 = d[1..d.len() - 1].iter().sum();
        let trap = step * (inner + 0.5 * (d[0] + d[d.len() - 1]));
        (0.5 * trap).clamp(0.0, 1.0)
    }
}

/// Kernel-density estimate of `½ ∫ |k̂_a - k̂_b|` with the default bootstrap.
pub fn tv_kde(a: &SamplePool, b: &SamplePool, bandwidth: Bandwidth) -> Result<TvEstimate, TvError> {
    tv_kde_with(a, b, bandwidth, &BootstrapConfig::default())
}

pub fn tv_kde_with(a: &SamplePool, b: &SamplePool, bandwidth: Bandwidth, boot: &BootstrapConfig) -> Result<TvEstimate, TvError> {
    tv_kde_values(&a.values, &b.values, bandwidth, boot)
}

pub fn tv_kde_values(a: &[f64], b: &[f64], bandwidth: Bandwidth, boot: &BootstrapConfig) -> Result<TvEstimate, TvError> {
    validate(a, b)?;
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(TvError::NonPositiveBandwidth(h)),
        Bandwidth::Auto => 0.5 * (rule_of_thumb_bandwidth(a) + rule_of_thumb_bandwidth(b)),
    };
    if !(h > 0.0) {
        return Err(TvError::NonPositiveBandwidth(h));
    }
    let (lo, hi) = common_range(a, b);
    let (lo, hi) = (lo - 6.0 * h, hi + 6.0 * h);
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    // grid nodes sit at bin centres
    let binned = bin_pools(a, b, lo - 0.5 * step, step, KDE_GRID, boot.mode)?;
    let radius = ((6.0 * h / step).ceil() as usize).min(KDE_GRID);
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| {
            let z = k as f64 * step / h;
            norm * (-0.5 * z * z).exp()
        })
        .collect();
    let stat = kde_stat(&kernel, step);
    let value = stat(&binned.a, &binned.b);
    let swap = fingerprint(a) > fingerprint(b);
    let (ci_low, ci_high) = count_bootstrap(&binned, &stat, value, boot, swap)?;
    Ok(TvEstimate {
        value,
        ci_low,
        ci_high,
        method: TvMethod::Kde,
        resolution: h,
        sample_sizes: (a.len(), b.len()),
    })
}

/// Percentile interval of any two-sample statistic, resampling points with
/// replacement. Slower than the count bootstrap used by the TV estimators.
pub fn bootstrap_ci<F>(estimator: F, a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<(f64, f64), TvError>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    validate(a, b)?;
    if resamples < 100 {
        return Err(TvError::TooFewResamples(resamples));
    }
    use rand::Rng;
    let streams: Vec<(u64, usize)> = (0..resamples as u64).map(|r| (r, 0)).collect();
    let mut stats = map_chunks(seed, &streams, |rng, _| {
        let ra: Vec<f64> = (0..a.len()).map(|_| a[rng.random_range(0..a.len())]).collect();
        let rb: Vec<f64> = (0..b.len()).map(|_| b[rng.random_range(0..b.len())]).collect();
        estimator(&ra, &rb)
    });
    stats.sort_by(f64::total_cmp);
    Ok((percentile(&stats, 0.025), percentile(&stats, 0.975)))
}

/// Two-sample Kolmogorov-Smirnov statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    pub m: usize,
}

impl KsResult {
    /// Asymptotic critical value `√(-ln(α/2)/2) · √((n+m)/(nm))`.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        (-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
    }

    /// Asymptotic p-value from the Kolmogorov distribution.
    pub fn p_value(&self) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        let en = (n * m / (n + m)).sqrt();
        let lambda = (en + 0.12 + 0.11 / en) * self.statistic;
        if lambda < 1e-3 {
            return 1.0;
        }
        let mut sum = 0.0;
        for j in 1..=100 {
            let j = j as f64;
            let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
            sum += term;
            if term.abs() < 1e-12 {
                break;
            }
        }
        sum.clamp(0.0, 1.0)
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.statistic < self.critical_value(alpha)
    }
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    KsResult { statistic: d, n, m }
}

/// Reproducible standard normal pool, used by calibration checks.
pub fn gaussian_pool(mean: f64, count: usize, seed: u64) -> SamplePool {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let streams = crate::streams::layout(count);
    let chunks = map_chunks(seed, &streams, |rng, len| {
        (0..len)
            .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<_>>()
    });
    SamplePool {
        values: chunks.into_iter().flatten().collect(),
        seed,
        stream_count: streams.len(),
        meta: format!("N({mean}, 1)"),
        chunks: streams,
    }
}
