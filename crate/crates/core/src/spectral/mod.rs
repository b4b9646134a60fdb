//! Discretized Hilbert-Schmidt operators and their spectra.
//!
//! Two routes are provided. [`discretize_operator`] averages the symmetrized
//! kernel over panel pairs of a graded grid on `[truncation_left, 1]`.
//! [`factorized_decomposition`] works on the mixing variable in [0, 1]
//! instead, needs no truncation, and is exact for the block kernels; it is
//! what the samplers use.

mod factorized;
mod galerkin;
mod grid;

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::kernels::{block_integral, norm_sq_sym, KernelError, KernelSpec, QuadratureConfig};

pub use factorized::factorized_decomposition;
pub use galerkin::{discretize_cells, discretize_operator, CellKernel};
pub use grid::{build_grid, Grid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("matrix is not square")]
    NotSquare,
    #[error("discretized operator has non-finite entries")]
    NonFinite,
    #[error("symmetric eigensolver did not converge")]
    EigenFailed,
    #[error("spectrum is empty or identically zero")]
    EmptySpectrum,
}

/// How eigenvectors map back to functions on the `x` axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Eigenvector entry `i` times `1/√w_i` is the value on panel `i`.
    Galerkin(Grid),
    /// `e_k(x) = Σ_{p,i} C[(p,i), k] √n ∫_{I_i} (s-x)_+^(a_p) ds` over `cells`
    /// uniform cells `I_i` of [0, 1].
    Factorized {
        cells: usize,
        exponents: Vec<f64>,
        coefficients: DMatrix<f64>,
    },
    /// Eigenvalues given directly.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Sorted by decreasing magnitude.
    pub eigenvalues: Vec<f64>,
    /// Unit columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// `Σ λ_k²`.
    pub hs_norm_sq: f64,
    pub source: Option<KernelSpec>,
    /// `‖sym f‖² - Σ λ_k²` when the exact norm is known.
    pub tail_hs_sq: Option<f64>,
    pub basis: Basis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisCheck {
    pub count: usize,
    pub satisfied: bool,
    pub threshold: f64,
}

/// Relative noise floor below which eigenvalues are treated as zero.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-6;

pub(crate) fn symmetric_eigen(m: DMatrix<f64>) -> Result<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>, SpectralError> {
    if m.nrows() != m.ncols() {
        return Err(SpectralError::NotSquare);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    m.try_symmetric_eigen(f64::EPSILON, 0).ok_or(SpectralError::EigenFailed)
}

/// Sorts eigenpairs by decreasing `|λ|`.
fn sorted_pairs(values: Vec<f64>, vectors: DMatrix<f64>, extra: Option<DMatrix<f64>>) -> (Vec<f64>, DMatrix<f64>, Option<DMatrix<f64>>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let vals = order.iter().map(|&k| values[k]).collect();
    let vecs = DMatrix::from_fn(vectors.nrows(), order.len(), |i, k| vectors[(i, order[k])]);
    let extra = extra.map(|c| DMatrix::from_fn(c.nrows(), order.len(), |i, k| c[(i, order[k])]));
    (vals, vecs, extra)
}

/// Full eigensystem of a symmetric matrix, sorted by magnitude.
///
/// When the matrix is a Galerkin matrix on a grid, use
/// [`eigendecompose_on_grid`] to keep the eigenfunctions evaluable.
pub fn eigendecompose(m: DMatrix<f64>, source: &KernelSpec) -> Result<SpectralDecomposition, SpectralError> {
    let eig = symmetric_eigen(m)?;
    let values = eig.eigenvalues.iter().copied().collect();
    let (values, vectors, _) = sorted_pairs(values, eig.eigenvectors, None);
    let hs = values.iter().map(|v: &f64| v * v).sum();
    Ok(SpectralDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
        hs_norm_sq: hs,
        source: Some(source.clone()),
        tail_hs_sq: analytic_tail(source, hs),
        basis: Basis::Synthetic,
    })
}

/// Galerkin route end to end: grid, matrix, eigensystem.
pub fn eigendecompose_on_grid(spec: &KernelSpec, grid: &Grid) -> Result<SpectralDecomposition, SpectralError> {
    let m = discretize_operator(spec, grid)?;
    let mut d = eigendecompose(m, spec)?;
    d.basis = Basis::Galerkin(grid.clone());
    Ok(d)
}

fn analytic_tail(source: &KernelSpec, hs: f64) -> Option<f64> {
    if !source.hurst.is_square_integrable() {
        return None;
    }
    norm_sq_sym(source, &QuadratureConfig::default())
        .ok()
        .map(|total| (total - hs).max(0.0))
}

impl SpectralDecomposition {
    pub(crate) fn assemble(
        values: Vec<f64>,
        vectors: DMatrix<f64>,
        source: KernelSpec,
        basis: Basis,
        tail: Option<f64>,
    ) -> Result<Self, SpectralError> {
        let (basis, extra) = match basis {
            Basis::Factorized {
                cells,
                exponents,
                coefficients,
            } => (
                Basis::Factorized {
                    cells,
                    exponents,
                    coefficients: DMatrix::zeros(0, 0),
                },
                Some(coefficients),
            ),
            other => (other, None),
        };
        let (values, vectors, extra) = sorted_pairs(values, vectors, extra);
        let basis = match (basis, extra) {
            (Basis::Factorized { cells, exponents, .. }, Some(coefficients)) => Basis::Factorized {
                cells,
                exponents,
                coefficients,
            },
            (b, _) => b,
        };
        let hs = values.iter().map(|v| v * v).sum();
        Ok(Self {
            eigenvalues: values,
            eigenvectors: vectors,
            hs_norm_sq: hs,
            source: Some(source),
            tail_hs_sq: tail,
            basis,
        })
    }

    /// A decomposition with the given eigenvalues and no kernel behind it.
    pub fn from_eigenvalues(values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) || values.iter().all(|&v| v == 0.0) {
            return Err(SpectralError::EmptySpectrum);
        }
        let n = values.len();
        let (values, vectors, _) = sorted_pairs(values, DMatrix::identity(n, n), None);
        let hs = values.iter().map(|v| v * v).sum();
        Ok(Self {
            eigenvalues: values,
            eigenvectors: vectors,
            hs_norm_sq: hs,
            source: None,
            tail_hs_sq: Some(0.0),
            basis: Basis::Synthetic,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.first().map_or(0.0, |v| v.abs())
    }

    /// Eigenvalues with `|λ| > rel_floor · max|λ|`, plus `Σλ²` of the rest.
    pub fn retained(&self, rel_floor: f64) -> (Vec<f64>, f64) {
        let cut = rel_floor * self.max_abs();
        let mut kept = Vec::new();
        let mut dropped = 0.0;
        for &v in &self.eigenvalues {
            if v.abs() > cut {
                kept.push(v);
            } else {
                dropped += v * v;
            }
        }
        (kept, dropped)
    }

    /// Keeps the `k` leading eigenpairs; the dropped mass moves to the tail.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.len());
        let dropped: f64 = self.eigenvalues[k..].iter().map(|v| v * v).sum();
        let mut out = self.clone();
        out.eigenvalues.truncate(k);
        out.eigenvectors = self.eigenvectors.columns(0, k).into_owned();
        if let Basis::Factorized { coefficients, .. } = &mut out.basis {
            *coefficients = coefficients.columns(0, k).into_owned();
        }
        out.hs_norm_sq = out.eigenvalues.iter().map(|v| v * v).sum();
        out.tail_hs_sq = self.tail_hs_sq.map(|t| t + dropped);
        out
    }

    /// Value of the `k`-th eigenfunction at `x`, when the basis allows it.
    pub fn eigenfunction(&self, k: usize, x: f64) -> Option<f64> {
        if k >= self.len() {
            return None;
        }
        match &self.basis {
            Basis::Galerkin(grid) => {
                let i = grid.panel_edges.partition_point(|&e| e <= x);
                if i == 0 || i > grid.len() {
                    return Some(0.0);
                }
                Some(self.eigenvectors[(i - 1, k)] / grid.weights[i - 1].sqrt())
            }
            Basis::Factorized {
                cells,
                exponents,
                coefficients,
            } => {
                let n = *cells;
                let w = 1.0 / n as f64;
                let root = (n as f64).sqrt();
                let mut total = 0.0;
                for (p, &a) in exponents.iter().enumerate() {
                    for i in 0..n {
                        let c = coefficients[(p * n + i, k)];
                        if c != 0.0 {
                            total += c * root * block_integral(x, i as f64 * w, (i + 1) as f64 * w, a);
                        }
                    }
                }
                Some(total)
            }
            Basis::Synthetic => None,
        }
    }

    /// `‖M - Σ λ_k v_k v_kᵀ‖_F` relative to `‖M‖_F`.
    pub fn reconstruction_error(&self, m: &DMatrix<f64>) -> f64 {
        let v = &self.eigenvectors;
        let lam = DVector::from_vec(self.eigenvalues.clone());
        let rebuilt = v * DMatrix::from_diagonal(&lam) * v.transpose();
        (m - rebuilt).norm() / m.norm()
    }
}

/// Counts eigenvalues above `threshold` (default `1e-6 · max|λ|`).
pub fn verify_hypothesis_h(d: &SpectralDecomposition, threshold: Option<f64>) -> HypothesisCheck {
    let threshold = threshold.unwrap_or(DEFAULT_RELATIVE_FLOOR * d.max_abs());
    let count = d.eigenvalues.iter().filter(|v| v.abs() > threshold).count();
    HypothesisCheck {
        count,
        satisfied: count >= 5,
        threshold,
    }
}

/// Columns `index, eigenvalue, abs_eigenvalue`.
pub fn write_spectrum_csv<W: Write>(d: &SpectralDecomposition, out: &mut W) -> io::Result<()> {
    writeln!(out, "index,eigenvalue,abs_eigenvalue")?;
    for (k, v) in d.eigenvalues.iter().enumerate() {
        writeln!(out, "{},{:.16e},{:.16e}", k + 1, v, v.abs())?;
    }
    Ok(())
}
