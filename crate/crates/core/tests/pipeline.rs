//! Cross-module checks: kernels against spectra, spectra against sampling.

use chaos_tv::chaos_sim::{sample_second_chaos, ChaosSampler};
use chaos_tv::kernels::{norm_sq_sym, HurstPair, KernelSpec, QuadratureConfig};
use chaos_tv::spectral::{build_grid, eigendecompose_on_grid, factorized_decomposition};
use chaos_tv::tv_estimator::tv_histogram;
use chaos_tv::TailModel;
use proptest::prelude::*;

#[test]
fn grid_and_cell_routes_agree_on_leading_eigenvalues() {
    let f = KernelSpec::f_infinity(HurstPair::new(0.8, 0.8).unwrap());
    let q = QuadratureConfig::default();
    let grid = eigendecompose_on_grid(&f, &build_grid(&q).unwrap()).unwrap();
    let cells = factorized_decomposition(&f, 512).unwrap();
    // The grid cuts the domain at -50, which drops about 6% of the norm;
    // the slowly decaying leading eigenfunction loses the most.
    let tail_share = q.tail_bound(&f.hurst).unwrap() / norm_sq_sym(&f, &q).unwrap();
    assert!(tail_share < 0.07, "{tail_share}");
    let rel = |k: usize| (grid.eigenvalues[k] - cells.eigenvalues[k]).abs() / cells.eigenvalues[k].abs();
    assert!(rel(0) < tail_share, "leading gap {}", rel(0));
    for k in 1..5 {
        assert!(rel(k) < 0.02, "eigenvalue {k}: gap {}", rel(k));
    }
}

#[test]
fn scaling_the_kernel_scales_the_spectrum() {
    let f = KernelSpec::f_infinity(HurstPair::new(0.85, 0.75).unwrap());
    let base = factorized_decomposition(&f, 64).unwrap();
    let doubled = factorized_decomposition(&f.scaled(2.0).unwrap(), 64).unwrap();
    for (a, b) in base.eigenvalues.iter().zip(&doubled.eigenvalues) {
        assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn identical_kernels_sampled_with_one_seed_have_zero_tv() {
    let f = KernelSpec::f_n(HurstPair::new(0.8, 0.8).unwrap(), 8).unwrap();
    let d = factorized_decomposition(&f, 8).unwrap();
    let a = sample_second_chaos(&d, 50_000, 9).unwrap();
    let b = sample_second_chaos(&d, 50_000, 9).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(tv_histogram(&a, &b, 100).unwrap().value, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Block kernels live exactly on the cell basis, so the spectrum must
    /// carry the whole symmetrized norm.
    #[test]
    fn block_kernel_spectrum_carries_the_exact_norm(
        h1 in 0.76f64..0.98,
        h2 in 0.76f64..0.98,
        n in 1usize..24,
    ) {
        let f = KernelSpec::f_n(HurstPair::new(h1, h2).unwrap(), n).unwrap();
        let d = factorized_decomposition(&f, n).unwrap();
        let exact = norm_sq_sym(&f, &QuadratureConfig::default()).unwrap();
        prop_assert!((d.hs_norm_sq - exact).abs() <= 1e-9 * exact, "{} vs {}", d.hs_norm_sq, exact);
    }

    #[test]
    fn sampler_variance_is_twice_the_retained_norm(h1 in 0.76f64..0.98, n in 2usize..16) {
        let f = KernelSpec::f_n(HurstPair::new(h1, 0.8).unwrap(), n).unwrap();
        let d = factorized_decomposition(&f, n).unwrap();
        let s = ChaosSampler::new(&d, TailModel::Drop).unwrap();
        let kept: f64 = s.eigenvalues().iter().map(|l| l * l).sum();
        prop_assert!((s.variance() - 2.0 * kept).abs() <= 1e-12 * kept);
        prop_assert!(kept <= d.hs_norm_sq * (1.0 + 1e-12));
    }
}
