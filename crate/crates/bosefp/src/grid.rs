//! Graded radial grid `r_i = R (i/N)^q`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub outer_radius: f64,
    pub q: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        // resolves the critical power law down to r ~ 2e-6 at desk scale
        Self { n: 2048, outer_radius: 8.0, q: 2.0 }
    }
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    q: f64,
    outer_radius: f64,
}

impl RadialGrid {
    /// Graded nodes without the production-size checks; used for small
    /// analytic test grids.
    pub fn graded(n: usize, outer_radius: f64, q: f64) -> Result<Self> {
        if n < 2 || !(outer_radius > 0.0) || !(q >= 1.0) {
            return Err(Error::Config(format!(
                "grid requires n >= 2, R > 0, q >= 1 (got n = {n}, R = {outer_radius}, q = {q})"
            )));
        }
        let nodes = (0..=n)
            .map(|i| outer_radius * (i as f64 / n as f64).powf(q))
            .collect();
        Ok(Self { nodes, q, outer_radius })
    }

    /// Rebuild a grid from explicit nodes (e.g. read back from CSV).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 || nodes[0] != 0.0 {
            return Err(Error::Config("grid nodes must start at 0 with at least 3 entries".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid nodes must be strictly increasing".into()));
        }
        let outer_radius = *nodes.last().unwrap();
        // infer the grading exponent from the first interior node
        let n = nodes.len() - 1;
        let q = (nodes[1] / outer_radius).ln() / (1.0 / n as f64).ln();
        Ok(Self { nodes, q, outer_radius })
    }

    /// Production constructor: enforces the solver's resolution invariants
    /// (`N >= 64`, first interior node at or below 1e-3).
    pub fn build(config: &GridConfig) -> Result<Self> {
        if config.n < 64 {
            return Err(Error::Config(format!("grid requires N >= 64, got {}", config.n)));
        }
        let grid = Self::graded(config.n, config.outer_radius, config.q)?;
        if grid.nodes[1] > 1e-3 {
            return Err(Error::Config(format!(
                "first interior node r_1 = {:.3e} exceeds 1e-3; increase N or q",
                grid.nodes[1]
            )));
        }
        Ok(grid)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals N (nodes are indexed 0..=N).
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_grading() {
        let g = RadialGrid::graded(4, 1.0, 1.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn quadratic_grading() {
        let g = RadialGrid::graded(4, 1.0, 2.0).unwrap();
        let expect = [0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0];
        for (a, b) in g.nodes().iter().zip(expect.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-15);
        }
    }

    #[test]
    fn default_config_resolves_origin() {
        let g = RadialGrid::build(&GridConfig { n: 1024, outer_radius: 8.0, q: 2.0 }).unwrap();
        assert!(g.node(1) < 1e-3);
        assert_relative_eq!(g.node(1), 8.0 / (1024.0 * 1024.0), max_relative = 1e-14);
    }

    #[test]
    fn coarse_uniform_grid_rejected() {
        assert!(RadialGrid::build(&GridConfig { n: 64, outer_radius: 8.0, q: 1.0 }).is_err());
        assert!(RadialGrid::build(&GridConfig { n: 32, outer_radius: 8.0, q: 2.0 }).is_err());
    }
}
