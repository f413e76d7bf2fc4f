//! Periodic 1D grid and real-valued fields sampled on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_points: usize,
}

impl Grid {
    pub const DOMAIN_LENGTH: f64 = 1.0;

    /// Grid with `n` points; `n` must be even and at least 4.
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParam(format!(
                "grid size must be even and >= 4, got {n}"
            )));
        }
        Ok(Grid { n_points: n })
    }

    pub fn n(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        Self::DOMAIN_LENGTH / self.n_points as f64
    }

    /// Grid point locations x_i = i/N.
    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| i as f64 * self.spacing()).collect()
    }
}

/// Real function sampled on a [`Grid`]. The universal input/output currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.n()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field { grid, values: vec![c; grid.n()] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Discrete mass M(u) = (1/N) sum_i u_i.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute difference against another field.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_odd_and_tiny_sizes() {
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(2).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn field_length_must_match_grid() {
        let g = Grid::new(8).unwrap();
        assert!(Field::new(g, vec![0.0; 7]).is_err());
        assert!(Field::new(g, vec![0.0; 8]).is_ok());
    }

    #[test]
    fn mass_of_constant_field() {
        let g = Grid::new(16).unwrap();
        assert_eq!(Field::constant(g, 3.0).mass(), 3.0);
    }

    #[test]
    fn mass_of_ramp() {
        let g = Grid::new(4).unwrap();
        let u = Field::new(g, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(u.mass(), 1.5);
    }

    #[test]
    fn mass_is_linear() {
        let g = Grid::new(8).unwrap();
        let u = Field::new(g, (0..8).map(|i| i as f64 * 0.3).collect()).unwrap();
        let w = Field::new(g, (0..8).map(|i| (i as f64).sin()).collect()).unwrap();
        let sum = Field::new(g, u.values().iter().zip(w.values()).map(|(a, b)| a + b).collect())
            .unwrap();
        assert!((sum.mass() - (u.mass() + w.mass())).abs() < 1e-12);
    }
}
