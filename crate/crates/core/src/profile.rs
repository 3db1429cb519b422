//! Spatial fields on a uniform grid of `[0, 1]`.

use crate::error::{Error, Result};

/// Nodal values on `grid_m` equally spaced points of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    values: Vec<f64>,
}

impl Profile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Validation(format!(
                "a profile needs at least 3 nodes, got {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn from_fn(grid_m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if grid_m < 3 {
            return Err(Error::Validation(format!(
                "a profile needs at least 3 nodes, got {grid_m}"
            )));
        }
        let h = 1.0 / (grid_m - 1) as f64;
        Ok(Self {
            values: (0..grid_m).map(|i| f(i as f64 * h)).collect(),
        })
    }

    pub fn zeros(grid_m: usize) -> Result<Self> {
        Self::from_fn(grid_m, |_| 0.0)
    }

    pub fn grid_m(&self) -> usize {
        self.values.len()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.step()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Profile, b: f64) -> Result<Profile> {
        self.check_same_grid(other)?;
        Ok(Profile {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| a * u + b * v)
                .collect(),
        })
    }

    pub fn scale(&self, a: f64) -> Profile {
        Profile {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Profile) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub(crate) fn check_same_grid(&self, other: &Profile) -> Result<()> {
        if self.grid_m() != other.grid_m() {
            return Err(Error::GridMismatch(format!(
                "profiles have {} and {} nodes",
                self.grid_m(),
                other.grid_m()
            )));
        }
        Ok(())
    }
}
