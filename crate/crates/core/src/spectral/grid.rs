use super::SpectralError;
use crate::kernels::QuadratureConfig;
use crate::quadrature::{graded_edges, Grading};

/// Panel decomposition of `[truncation_left, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Panel midpoints.
    pub nodes: Vec<f64>,
    /// Panel lengths.
    pub weights: Vec<f64>,
    pub panel_edges: Vec<f64>,
    /// Gauss-Legendre nodes per sub-panel for the integrals over the mixing variable.
    pub quadrature_nodes: usize,
}

impl Grid {
    pub fn from_edges(edges: Vec<f64>, quadrature_nodes: usize) -> Result<Self, SpectralError> {
        if edges.len() < 2 {
            return Err(SpectralError::InvalidGrid("need at least one panel"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectralError::InvalidGrid("edges must be strictly increasing"));
        }
        let nodes = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let weights = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            nodes,
            weights,
            panel_edges: edges,
            quadrature_nodes: quadrature_nodes.max(1),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn panel(&self, i: usize) -> (f64, f64) {
        (self.panel_edges[i], self.panel_edges[i + 1])
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Graded grid: `[0, 1]` gets `panels_per_unit` panels refined toward both
/// ends; `[L, 0]` gets edges `L ((m - k)/m)^q`, refined toward 0, with
/// `m = ceil(panels_per_unit |L|^(1/q))`.
pub fn build_grid(cfg: &QuadratureConfig) -> Result<Grid, SpectralError> {
    cfg.validate()?;
    let q = cfg.grading_exponent;
    let left = cfg.truncation_left;
    let ppu = cfg.panels_per_unit;
    let m = ((ppu as f64) * left.abs().powf(1.0 / q)).ceil().max(1.0) as usize;
    let mut edges: Vec<f64> = (0..m)
        .map(|k| left * ((m - k) as f64 / m as f64).powf(q))
        .collect();
    edges.extend(graded_edges(0.0, 1.0, ppu, q, Grading::Both));
    Grid::from_edges(edges, cfg.nodes_per_panel)
}
