//! Spectra through the mixing variable.
//!
//! `sym f = L J L*` with `L = [K1, K2]`, `(K_p φ)(x) = ∫_0^1 (s-x)_+^(a_p) φ(s) ds`
//! and `J = ½[[0, I], [I, 0]]`. Restricting the mixing variable to
//! block-constant functions on `cells` uniform cells, the nonzero spectrum
//! equals that of `G^½ J G^½` where `G = L*L` is the Gram matrix of the
//! two-sided power kernels, known in closed form. For the block kernel
//! `f_n` with `n` cells the restriction is exact.

use nalgebra::DMatrix;

use super::{Basis, SpectralDecomposition, SpectralError};
use crate::kernels::{norm_sq_sym, BaseKernel, KernelSpec, QuadratureConfig, TwoSidedPower};

/// Eigendecomposition of `sym spec` with the mixing variable on `cells`
/// uniform cells. Block kernels `f_n` always use their own `n` cells.
pub fn factorized_decomposition(spec: &KernelSpec, cells: usize) -> Result<SpectralDecomposition, SpectralError> {
    let (base, factor) = spec.decompose();
    let n = match base {
        BaseKernel::Limit => cells,
        BaseKernel::Blocks(n) => n,
    };
    if n == 0 {
        return Err(SpectralError::InvalidGrid("need at least one cell"));
    }
    let h = spec.hurst;
    let exponents = if h.is_diagonal() { vec![h.a1()] } else { vec![h.a1(), h.a2()] };
    let gram = gram_matrix(&exponents, n)?;

    let (mut values, vectors, coefficients) = if exponents.len() == 1 {
        // sym f = K K*, whose nonzero spectrum is that of G = K*K.
        let eig = super::symmetric_eigen(gram)?;
        let coeff = DMatrix::from_fn(n, n, |i, k| {
            let lam = eig.eigenvalues[k];
            if lam > 0.0 {
                eig.eigenvectors[(i, k)] / lam.sqrt()
            } else {
                0.0
            }
        });
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors, coeff)
    } else {
        let eig = super::symmetric_eigen(gram)?;
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()))
            * eig.eigenvectors.transpose();
        let j = swap_half(n);
        let m = &root * &j * &root;
        let m = 0.5 * (&m + m.transpose());
        let inner = super::symmetric_eigen(m)?;
        let js = &j * &root;
        let mut coeff = &js * &inner.eigenvectors;
        for (k, lam) in inner.eigenvalues.iter().enumerate() {
            let scale = if lam.abs() > 0.0 { 1.0 / lam.abs() } else { 0.0 };
            coeff.column_mut(k).scale_mut(scale);
        }
        (inner.eigenvalues.iter().copied().collect(), inner.eigenvectors, coeff)
    };
    for v in values.iter_mut() {
        *v *= factor;
    }
    let hs: f64 = values.iter().map(|v| v * v).sum();
    let tail = match base {
        BaseKernel::Blocks(_) => Some(0.0),
        BaseKernel::Limit if h.is_square_integrable() => {
            let total = norm_sq_sym(spec, &QuadratureConfig::default())?;
            Some((total - hs).max(0.0))
        }
        BaseKernel::Limit => None,
    };
    let basis = Basis::Factorized {
        cells: n,
        exponents,
        coefficients,
    };
    SpectralDecomposition::assemble(values, vectors, spec.clone(), basis, tail)
}

/// `G[(p,i),(q,j)] = ∫_{I_i}∫_{I_j} P_pq(s - s') / w` with `P_pq` the cross
/// kernel of exponents `a_p` at `s` and `a_q` at `s'`.
pub(crate) fn gram_matrix(exponents: &[f64], n: usize) -> Result<DMatrix<f64>, SpectralError> {
    let k = exponents.len();
    let mut g = DMatrix::zeros(k * n, k * n);
    let w = 1.0 / n as f64;
    let n_i = n as i64;
    for (p, &ap) in exponents.iter().enumerate() {
        for (q, &aq) in exponents.iter().enumerate() {
            let power = TwoSidedPower::cross(ap, aq)?;
            // rect(I_i, I_j) = w^(e+2) unit_cell(i - j); divide by w
            let scale = w.powf(power.exponent + 1.0);
            let diag: Vec<f64> = ((1 - n_i)..n_i).map(|d| scale * power.unit_cell(d)).collect();
            for i in 0..n {
                for j in 0..n {
                    g[(p * n + i, q * n + j)] = diag[(i as i64 - j as i64 + n_i - 1) as usize];
                }
            }
        }
    }
    // symmetric in exact arithmetic; remove rounding asymmetry
    Ok(0.5 * (&g + g.transpose()))
}

fn swap_half(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 0.5;
        j[(n + i, i)] = 0.5;
    }
    j
}
