//! Cell-average discretization on a [`Grid`] of the `x` domain.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{Grid, SpectralError};
use crate::kernels::{block_integral, BaseKernel, KernelSpec, TwoSidedPower};
use crate::quadrature::GaussLegendre;

/// Geometric ratio and depth of the sub-panels graded toward the left end
/// of every mixing-variable panel.
const GEOMETRIC_RATIO: f64 = 0.3;
const GEOMETRIC_LEVELS: usize = 26;

/// A kernel whose integrals over products of grid panels are computable.
pub trait CellKernel {
    /// `C_ij = ∫∫_{panel_i × panel_j} f(x, y) dx dy` on the raw kernel.
    fn cell_integrals(&self, grid: &Grid) -> Result<DMatrix<f64>, SpectralError>;
}

impl CellKernel for KernelSpec {
    fn cell_integrals(&self, grid: &Grid) -> Result<DMatrix<f64>, SpectralError> {
        let (base, factor) = self.decompose();
        let (a1, a2) = (self.hurst.a1(), self.hurst.a2());
        let raw = match base {
            BaseKernel::Limit => limit_cells(grid, a1, a2),
            BaseKernel::Blocks(n) => block_cells(grid, n, a1, a2),
        };
        Ok(raw * factor)
    }
}

/// `M_ij = (C_ij + C_ji) / (2 √(w_i w_j))`, exactly symmetric.
pub fn discretize_cells<K: CellKernel + ?Sized>(kernel: &K, grid: &Grid) -> Result<DMatrix<f64>, SpectralError> {
    let c = kernel.cell_integrals(grid)?;
    let n = grid.len();
    if c.nrows() != n || c.ncols() != n {
        return Err(SpectralError::InvalidGrid("cell matrix does not match the grid"));
    }
    let scale: Vec<f64> = grid.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]) * scale[i] * scale[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    Ok(m)
}

/// Galerkin matrix of the symmetrized kernel on `grid`.
pub fn discretize_operator(spec: &KernelSpec, grid: &Grid) -> Result<DMatrix<f64>, SpectralError> {
    discretize_cells(spec, grid)
}

/// Quadrature nodes and weights for the mixing variable on [0, 1]: the grid
/// edges inside [0, 1] split it into panels, each graded geometrically
/// toward its left end where the panel antiderivatives have kinks.
fn mixing_rule(grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(grid.quadrature_nodes);
    let mut edges: Vec<f64> = grid
        .panel_edges
        .iter()
        .copied()
        .filter(|&e| e > 0.0 && e < 1.0)
        .collect();
    edges.insert(0, 0.0);
    edges.push(1.0);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in edges.windows(2) {
        let (l, r) = (w[0], w[1]);
        let width = r - l;
        let mut hi = r;
        for level in 1..=GEOMETRIC_LEVELS {
            let lo = if level == GEOMETRIC_LEVELS {
                l
            } else {
                l + width * GEOMETRIC_RATIO.powi(level as i32)
            };
            for (x, wt) in rule.mapped(lo, hi) {
                nodes.push(x);
                weights.push(wt);
            }
            hi = lo;
        }
    }
    (nodes, weights)
}

/// `Φ_i(s) = ∫_{panel_i} (s - x)_+^a dx` sampled at every mixing node.
fn panel_profiles(grid: &Grid, nodes: &[f64], a: f64) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (l, r) = grid.panel(i);
            nodes.iter().map(|&s| block_integral(-s, -r, -l, a)).collect()
        })
        .collect();
    DMatrix::from_fn(grid.len(), nodes.len(), |i, q| rows[i][q])
}

fn limit_cells(grid: &Grid, a1: f64, a2: f64) -> DMatrix<f64> {
    let (nodes, weights) = mixing_rule(grid);
    let p1 = panel_profiles(grid, &nodes, a1);
    let mut p2 = if a1 == a2 { p1.clone() } else { panel_profiles(grid, &nodes, a2) };
    for (q, w) in weights.iter().enumerate() {
        p2.column_mut(q).scale_mut(*w);
    }
    &p1 * p2.transpose()
}

/// `C_ij = n Σ_k Ψ1_ik Ψ2_jk` with `Ψ_ik = ∫_{panel_i} ∫_{I_k} (s - x)_+^a ds dx`.
fn block_cells(grid: &Grid, n: usize, a1: f64, a2: f64) -> DMatrix<f64> {
    let psi = |a: f64| {
        let p = TwoSidedPower::one_sided(a);
        let w = 1.0 / n as f64;
        DMatrix::from_fn(grid.len(), n, |i, k| p.rect((k as f64 * w, (k + 1) as f64 * w), grid.panel(i)))
    };
    let p1 = psi(a1);
    let p2 = if a1 == a2 { p1.clone() } else { psi(a2) };
    (&p1 * p2.transpose()) * n as f64
}
