use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};

/// Linear-hat density filter: `w = 1 - dist / radius` over cells whose
/// centers lie strictly closer than `radius`.
#[derive(Debug, Clone)]
pub struct FilterKernel {
    grid: GridSpec,
    radius: f64,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    // weights already divided by the row sum
    weights: Vec<f64>,
}

impl FilterKernel {
    pub fn new(grid: GridSpec, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "filter radius must be positive, got {radius}"
            )));
        }
        let (hx, hy) = (grid.hx(), grid.hy());
        let rx = (radius / hx).ceil() as isize;
        let ry = (radius / hy).ceil() as isize;
        let mut offsets = vec![0];
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        for j in 0..grid.ny() as isize {
            for i in 0..grid.nx() as isize {
                let start = weights.len();
                for jj in (j - ry).max(0)..(j + ry + 1).min(grid.ny() as isize) {
                    for ii in (i - rx).max(0)..(i + rx + 1).min(grid.nx() as isize) {
                        let d = (((ii - i) as f64 * hx).powi(2) + ((jj - j) as f64 * hy).powi(2))
                            .sqrt();
                        if d < radius {
                            neighbors.push(grid.index(ii as usize, jj as usize));
                            weights.push(1.0 - d / radius);
                        }
                    }
                }
                let total: f64 = weights[start..].iter().sum();
                weights[start..].iter_mut().for_each(|w| *w /= total);
                offsets.push(weights.len());
            }
        }
        Ok(Self {
            grid,
            radius,
            offsets,
            neighbors,
            weights,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Indices of the cells averaged into cell `e`.
    pub fn neighbors(&self, e: usize) -> &[usize] {
        &self.neighbors[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn apply(&self, field: &DensityField) -> Result<DensityField> {
        self.grid.ensure_same(field.grid())?;
        DensityField::clamped(self.grid, self.apply_values(field.values()))
    }

    pub fn apply_values(&self, x: &[f64]) -> Vec<f64> {
        (0..self.grid.len())
            .map(|e| {
                let r = self.offsets[e]..self.offsets[e + 1];
                self.neighbors[r.clone()]
                    .iter()
                    .zip(&self.weights[r])
                    .map(|(&k, w)| w * x[k])
                    .sum()
            })
            .collect()
    }

    /// Chain rule through the filter: maps `dJ/d(filtered)` to `dJ/d(raw)`.
    pub fn backprop(&self, grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (e, g) in grad.iter().enumerate() {
            let r = self.offsets[e]..self.offsets[e + 1];
            for (&k, w) in self.neighbors[r.clone()].iter().zip(&self.weights[r]) {
                out[k] += w * g;
            }
        }
        out
    }
}
