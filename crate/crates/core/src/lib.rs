//! Optimal-transport crossover for evolutionary topology optimization.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: structured-grid density and probability fields plus the
//!   `DFLD1` on-disk format.
//! * [`ot`]: entropy-regularized optimal transport: Gibbs kernels (dense and
//!   separable-convolution), Sinkhorn distance, Sinkhorn barycenters and an
//!   exact transport LP used as an oracle.
//! * [`crossover`]: the barycentric crossover operator with adaptive
//!   regularization and a linear-interpolation baseline.
//! * [`fem`]: bilinear-quad plane-stress analysis with SIMP interpolation,
//!   von Mises recovery, P-norm aggregation and adjoint sensitivities.
//! * [`topopt`]: the low-fidelity density-filtered MMA optimizer and the
//!   seeding sweep that produces the initial population.
//! * [`hf`]: high-fidelity evaluation: PDE smoothing, binarization and the
//!   (max stress, volume fraction) objective pair.
//! * [`evolve`]: non-dominated sorting, crowding truncation, 2-D
//!   hypervolume and the evolutionary loop itself.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod crossover;
pub mod error;
pub mod evolve;
pub mod fem;
pub mod grid;
pub mod hf;
pub mod ot;
pub mod topopt;

mod banded;
pub(crate) mod seeding;

pub use crossover::{CrossoverConfig, CrossoverOperator, DistanceMatrix, Offspring};
pub use error::{Error, Result};
pub use evolve::{EvolveConfig, GenerationRecord, Member, Population};
pub use fem::{BoundaryConditions, ElasticModel, LoadCase, StressField};
pub use grid::{DensityField, GridSpec, ProbabilityField};
pub use hf::{HfConfig, Objectives};
pub use ot::{KernelApplier, KernelMode, SinkhornParams, SinkhornReport, TransportPlan};
pub use topopt::{FilterKernel, LfResult, SeedPoint};
