//! Numerical laboratory for second-chaos random variables built from
//! fractional kernels.
//!
//! The crate constructs the kernels `f_n` and `f_inf` of the quadratic
//! covariation of two fractional Brownian motions driven by one Brownian
//! motion, diagonalizes the associated Hilbert-Schmidt operators, samples
//! the double Wiener-Ito integrals, and estimates the total variation
//! distance between their laws.
//!
//! Module map:
//! - [`kernels`]: Hurst pairs, kernel specs, exact inner products and distances.
//! - [`spectral`]: grids, operator discretization, eigendecompositions.
//! - [`chaos_sim`]: reproducible sampling of `I2(f)` and of the Malliavin norm.
//! - [`fbm_paths`]: exact increment simulation and the statistic `Z_n`.
//! - [`tv_estimator`]: histogram and kernel-density TV estimates with bootstrap CIs.
//! - [`ratefit`]: log-log regression.
//! - [`experiments`]: configured experiment drivers producing CSV output.

pub mod chaos_sim;
pub mod experiments;
pub mod fbm_paths;
pub mod kernels;
pub mod quadrature;
pub mod ratefit;
pub mod spectral;
pub mod streams;
pub mod tv_estimator;

pub use chaos_sim::{SamplePool, TailModel};
pub use experiments::{ExperimentConfig, Report};
pub use kernels::{HurstPair, KernelSpec, QuadratureConfig};
pub use ratefit::RateFit;
pub use spectral::SpectralDecomposition;
pub use tv_estimator::TvEstimate;
