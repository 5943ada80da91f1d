//! Entropy-regularized optimal transport on structured grids.
//!
//! The ground cost is the squared Euclidean distance between cell centers in
//! physical units, so `epsilon` carries squared-length units.

mod kernel;
mod lp;
mod sinkhorn;
mod stabilized;

pub use kernel::{KernelApplier, KernelMode};
pub use lp::{exact_ot_lp, LP_SIZE_LIMIT};
pub use sinkhorn::{
    sinkhorn_barycenter, sinkhorn_barycenter_with, sinkhorn_distance, sinkhorn_distance_with,
    sinkhorn_plan, SinkhornParams, SinkhornReport, DENOMINATOR_FLOOR, UNDERFLOW_RATIO,
};
pub use stabilized::sinkhorn_stabilized;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Dense `n x n` cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "cost matrix needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    /// Squared Euclidean distances between points.
    pub fn squared_euclidean(points: &[(f64, f64)]) -> Self {
        let n = points.len();
        let mut data = Vec::with_capacity(n * n);
        for &(xi, yi) in points {
            for &(xj, yj) in points {
                data.push((xi - xj).powi(2) + (yi - yj).powi(2));
            }
        }
        Self { n, data }
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::squared_euclidean(&grid.centers())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }
}

/// A coupling between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n: usize,
    data: Vec<f64>,
}

impl TransportPlan {
    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for row in self.data.chunks(self.n) {
            for (acc, p) in s.iter_mut().zip(row) {
                *acc += p;
            }
        }
        s
    }

    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.data.iter().zip(&cost.data).map(|(p, c)| p * c).sum()
    }
}
