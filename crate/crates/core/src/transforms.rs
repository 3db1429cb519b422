//! Volterra transforms between plant and target states, and the feedback law.

use crate::error::{Error, Result};
use crate::kernel::KernelGrid;
use crate::profile::Profile;

/// `v ↦ v + sign · ∫_0^x K(x,y) v(y) dy` on a fixed profile grid.
///
/// Kernel values are taken directly from the kernel grid when the nodes
/// coincide and interpolated otherwise.
#[derive(Debug, Clone)]
pub struct VolterraOperator {
    grid_m: usize,
    sign: f64,
    rows: Vec<Vec<f64>>,
}

impl VolterraOperator {
    pub fn new(kernel: &KernelGrid, grid_m: usize, sign: f64) -> Result<Self> {
        if grid_m < 3 {
            return Err(Error::GridMismatch(format!(
                "profile grid needs at least 3 nodes, got {grid_m}"
            )));
        }
        let intervals = grid_m - 1;
        let km = kernel.grid_intervals();
        let field = kernel.values_xy();
        let aligned = km.is_multiple_of(intervals);
        let ratio = km / intervals;
        let h = 1.0 / intervals as f64;
        let rows = (0..grid_m)
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        if aligned {
                            field.get(i * ratio, j * ratio)
                        } else {
                            field.interpolate(i as f64 * h, j as f64 * h)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { grid_m, sign, rows })
    }

    pub fn forward(kernel: &KernelGrid, grid_m: usize) -> Result<Self> {
        Self::new(kernel, grid_m, 1.0)
    }

    pub fn inverse(kernel: &KernelGrid, grid_m: usize) -> Result<Self> {
        Self::new(kernel, grid_m, -1.0)
    }

    pub fn apply(&self, v: &Profile) -> Result<Profile> {
        if v.grid_m() != self.grid_m {
            return Err(Error::GridMismatch(format!(
                "operator built for {} nodes, profile has {}",
                self.grid_m,
                v.grid_m()
            )));
        }
        let h = v.step();
        let vals = v.values();
        let out = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if i == 0 {
                    return vals[0];
                }
                let mut acc = 0.5 * (row[0] * vals[0] + row[i] * vals[i]);
                for j in 1..i {
                    acc += row[j] * vals[j];
                }
                vals[i] + self.sign * h * acc
            })
            .collect();
        Profile::new(out)
    }
}

/// `u(x) = w(x) + ∫_0^x k(x,y) w(y) dy`.
pub fn forward_transform(w: &Profile, k: &KernelGrid) -> Result<Profile> {
    VolterraOperator::forward(k, w.grid_m())?.apply(w)
}

/// `w(x) = u(x) − ∫_0^x l(x,y) u(y) dy`.
pub fn inverse_transform(u: &Profile, l: &KernelGrid) -> Result<Profile> {
    VolterraOperator::inverse(l, u.grid_m())?.apply(u)
}

/// Target-system initial data `u0 = w0 + ∫_0^x k(x,y) w0(y) dy`.
pub fn initial_target_data(w0: &Profile, k: &KernelGrid) -> Result<Profile> {
    forward_transform(w0, k)
}

/// Feedback weights on a profile grid: `U = −k(1,1) w(1) − Σ_j q_j w_j`.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    k11: f64,
    weights: Vec<f64>,
}

impl FeedbackLaw {
    pub fn new(k: &KernelGrid, grid_m: usize) -> Result<Self> {
        let trace = k.trace_kx1().ok_or(Error::MissingTrace)?;
        if grid_m < 3 {
            return Err(Error::GridMismatch(format!(
                "profile grid needs at least 3 nodes, got {grid_m}"
            )));
        }
        let intervals = grid_m - 1;
        let km = trace.len() - 1;
        let h = 1.0 / intervals as f64;
        let weights = (0..grid_m)
            .map(|j| {
                let kx = if km % intervals == 0 {
                    trace[j * (km / intervals)]
                } else {
                    k.eval_kx1(j as f64 * h).ok_or(Error::MissingTrace)?
                };
                let w = if j == 0 || j == intervals { 0.5 } else { 1.0 };
                Ok(w * h * kx)
            })
            .collect::<Result<Vec<f64>>>()?;
        let k11 = *k
            .trace_diag()
            .last()
            .expect("diagonal trace is never empty");
        Ok(Self { k11, weights })
    }

    pub fn k11(&self) -> f64 {
        self.k11
    }

    pub fn grid_m(&self) -> usize {
        self.weights.len()
    }

    /// Value of the law for a full state vector.
    pub fn eval(&self, w: &[f64]) -> f64 {
        let integral: f64 = self.weights.iter().zip(w).map(|(a, b)| a * b).sum();
        -self.k11 * w[w.len() - 1] - integral
    }
}

/// `U = −k(1,1) w(1) − ∫_0^1 k_x(1,y) w(y) dy`.
pub fn control_input(w: &Profile, k: &KernelGrid) -> Result<f64> {
    Ok(FeedbackLaw::new(k, w.grid_m())?.eval(w.values()))
}
