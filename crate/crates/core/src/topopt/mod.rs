//! Low-fidelity stress minimization used to seed the population.
//!
//! Each run minimizes the P-norm of the relaxed von Mises stress over the
//! filtered density under an upper bound on the material volume. Different
//! filter radii and volume bounds yield structurally different designs.

mod filter;
mod mma;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{pnorm_sensitivity, BoundaryConditions, ElasticModel};
use crate::grid::DensityField;

pub use filter::FilterKernel;
pub use mma::{mma_update, MmaState};

/// Default per-iteration move limit.
pub const MOVE_LIMIT: f64 = 0.05;
/// Window over which an objective increase marks a run as non-improving.
pub const IMPROVEMENT_WINDOW: usize = 20;

/// Position in the unit square of sweep parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedPoint {
    /// Filter-radius coordinate.
    pub s1: f64,
    /// Volume-bound coordinate.
    pub s2: f64,
    /// Reserved third coordinate; unused in two dimensions.
    pub s3: Option<f64>,
}

/// Ranges the seed coordinates are mapped onto.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedRanges {
    pub r_min: f64,
    pub r_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl SeedRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_min > 0.0
            && self.r_min <= self.r_max
            && self.r_max.is_finite()
            && self.v_min > 0.0
            && self.v_min <= self.v_max
            && self.v_max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid seed ranges {self:?}"
            )))
        }
    }
}

impl SeedPoint {
    pub fn new(s1: f64, s2: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&s1) && (0.0..=1.0).contains(&s2)) {
            return Err(Error::InvalidArgument(format!(
                "seed coordinates must lie in [0, 1], got ({s1}, {s2})"
            )));
        }
        Ok(Self { s1, s2, s3: None })
    }

    pub fn radius(&self, r: &SeedRanges) -> f64 {
        r.r_min + self.s1 * (r.r_max - r.r_min)
    }

    pub fn volume(&self, r: &SeedRanges) -> f64 {
        r.v_min + self.s2 * (r.v_max - r.v_min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfResult {
    /// Filtered (physical) density of the last design.
    pub density: DensityField,
    /// P-norm stress per iteration, plus one entry for the returned design.
    pub objective_history: Vec<f64>,
    /// `max(0, sum v g - V sum v)` in volume units.
    pub constraint_residual: f64,
    pub iterations: usize,
    /// The objective rose over the last [`IMPROVEMENT_WINDOW`] iterations.
    pub non_improving: bool,
}

impl LfResult {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_history
            .last()
            .expect("history is never empty")
    }
}

/// Runs `max_iter` filter / analysis / MMA steps from a uniform design at the
/// volume bound.
pub fn lf_optimize(
    model: &ElasticModel,
    bc: &BoundaryConditions,
    radius: f64,
    volume: f64,
    p_norm: f64,
    max_iter: usize,
) -> Result<LfResult> {
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    if !(volume > 0.0 && volume <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "volume bound {volume} not in (0, 1]"
        )));
    }
    let grid = *model.grid();
    let filter = FilterKernel::new(grid, radius)?;
    let n = grid.len();
    let cell = grid.cell_area();
    let total = cell * n as f64;
    let mut x = vec![volume; n];
    let mut state = MmaState::new(n);
    let mut history = Vec::with_capacity(max_iter + 1);
    let mut scale = None;
    // d(normalized volume)/d(filtered) is constant
    let dvol = filter.backprop(&vec![cell / (volume * total); n]);

    for _ in 0..max_iter {
        let phys = DensityField::clamped(grid, filter.apply_values(&x))?;
        let (j, grad) = pnorm_sensitivity(model, &phys, bc, p_norm)?;
        history.push(j);
        let j0 = *scale.get_or_insert(if j > 0.0 { j } else { 1.0 });
        let gobj: Vec<f64> = filter.backprop(&grad).iter().map(|g| g / j0).collect();
        let g = phys.values().iter().sum::<f64>() * cell / (volume * total) - 1.0;
        x = mma_update(&x, &gobj, &dvol, g, MOVE_LIMIT, &mut state)?;
    }

    let density = DensityField::clamped(grid, filter.apply_values(&x))?;
    let (j, _) = pnorm_sensitivity(model, &density, bc, p_norm)?;
    history.push(j);
    let used: f64 = density.values().iter().sum::<f64>() * cell;
    let non_improving = history.len() > IMPROVEMENT_WINDOW
        && history[history.len() - 1] > history[history.len() - 1 - IMPROVEMENT_WINDOW];
    Ok(LfResult {
        density,
        objective_history: history,
        constraint_residual: (used - volume * total).max(0.0),
        iterations: max_iter,
        non_improving,
    })
}

/// One sweep run; failed runs keep their error instead of a result.
#[derive(Debug)]
pub struct SweepEntry {
    pub index: usize,
    pub seed: SeedPoint,
    pub radius: f64,
    pub volume: f64,
    pub outcome: Result<LfResult>,
}

/// Uniform `n_s1 x n_s2` lattice of seed points, `s1`-major.
pub fn seed_lattice(n_s1: usize, n_s2: usize) -> Result<Vec<SeedPoint>> {
    if n_s1 == 0 || n_s2 == 0 {
        return Err(Error::InvalidArgument("sweep counts must be >= 1".into()));
    }
    let coord = |k: usize, n: usize| {
        if n == 1 {
            0.0
        } else {
            k as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n_s1 * n_s2);
    for a in 0..n_s1 {
        for b in 0..n_s2 {
            out.push(SeedPoint::new(coord(a, n_s1), coord(b, n_s2))?);
        }
    }
    Ok(out)
}

/// Independent [`lf_optimize`] runs over the seed lattice, in lattice order.
pub fn seed_sweep(
    model: &ElasticModel,
    bc: &BoundaryConditions,
    ranges: &SeedRanges,
    n_s1: usize,
    n_s2: usize,
    p_norm: f64,
    max_iter: usize,
) -> Result<Vec<SweepEntry>> {
    ranges.validate()?;
    let seeds = seed_lattice(n_s1, n_s2)?;
    Ok(seeds
        .into_par_iter()
        .enumerate()
        .map(|(index, seed)| {
            let (radius, volume) = (seed.radius(ranges), seed.volume(ranges));
            SweepEntry {
                index,
                seed,
                radius,
                volume,
                outcome: lf_optimize(model, bc, radius, volume, p_norm, max_iter),
            }
        })
        .collect())
}
