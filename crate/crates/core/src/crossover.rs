//! Barycentric crossover between density fields.
//!
//! A Wasserstein offspring is built by turning both parents into probability
//! fields, taking their entropic barycenter with weights `(lambda, 1 - lambda)`
//! and min-max rescaling the result back into `[0, 1]`. The regularization
//! strength grows with the Euclidean distance between the parents, so close
//! parents blend sharply and distant ones are allowed more blur.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{from_probability_minmax, to_probability, DensityField, DEFAULT_FLOOR};
use crate::ot::{sinkhorn_barycenter, KernelMode, SinkhornParams, SinkhornReport};
use crate::seeding::item_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverConfig {
    pub eps_min: f64,
    pub eps_max: f64,
    pub tau: f64,
    pub max_iter: usize,
    pub mode: KernelMode,
    /// Added to every density before normalization so empty cells keep mass.
    pub floor: f64,
    pub rng_seed: u64,
}

impl CrossoverConfig {
    pub fn new(eps_min: f64, eps_max: f64) -> Result<Self> {
        let cfg = Self {
            eps_min,
            eps_max,
            tau: 1e-9,
            max_iter: 10_000,
            mode: KernelMode::Convolutional,
            floor: DEFAULT_FLOOR,
            rng_seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0 && self.eps_min <= self.eps_max && self.eps_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < eps_min <= eps_max, got {} and {}",
                self.eps_min, self.eps_max
            )));
        }
        if !(self.tau > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "crossover tau and max_iter must be positive".into(),
            ));
        }
        if !(self.floor >= 0.0 && self.floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "floor must be >= 0, got {}",
                self.floor
            )));
        }
        Ok(())
    }

    fn params(&self, epsilon: f64) -> SinkhornParams {
        SinkhornParams::new(epsilon)
            .tau(self.tau)
            .max_iter(self.max_iter)
            .mode(self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossoverOperator {
    Wasserstein,
    Linear,
}

impl FromStr for CrossoverOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wasserstein" => Ok(Self::Wasserstein),
            "linear" => Ok(Self::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown operator `{other}` (expected wasserstein or linear)"
            ))),
        }
    }
}

impl fmt::Display for CrossoverOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Wasserstein => "wasserstein",
            Self::Linear => "linear",
        })
    }
}

/// Symmetric matrix of Euclidean distances between density vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
    d_min: f64,
    d_max: f64,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// Smallest off-diagonal entry.
    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    /// Largest off-diagonal entry.
    pub fn d_max(&self) -> f64 {
        self.d_max
    }
}

pub fn pairwise_distances(pop: &[DensityField]) -> Result<DistanceMatrix> {
    if pop.len() < 2 {
        return Err(Error::PopulationTooSmall {
            need: 2,
            have: pop.len(),
        });
    }
    let grid = *pop[0].grid();
    for f in pop {
        grid.ensure_same(f.grid())?;
    }
    let n = pop.len();
    let mut d = vec![0.0; n * n];
    let (mut d_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let dij = pop[i]
                .values()
                .iter()
                .zip(pop[j].values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i * n + j] = dij;
            d[j * n + i] = dij;
            d_min = d_min.min(dij);
            d_max = d_max.max(dij);
        }
    }
    Ok(DistanceMatrix { n, d, d_min, d_max })
}

/// Linear map of a pair distance onto `[eps_min, eps_max]`.
pub fn adaptive_epsilon(dij: f64, dm: &DistanceMatrix, cfg: &CrossoverConfig) -> f64 {
    let span = dm.d_max - dm.d_min;
    if !(span > 0.0) {
        return cfg.eps_min;
    }
    let t = ((dij - dm.d_min) / span).clamp(0.0, 1.0);
    cfg.eps_min + (cfg.eps_max - cfg.eps_min) * t
}

/// Barycentric offspring; `lambda` is the weight of `a`.
pub fn wasserstein_crossover(
    a: &DensityField,
    b: &DensityField,
    lambda: f64,
    params: &SinkhornParams,
    floor: f64,
) -> Result<SinkhornReport<DensityField>> {
    check_lambda(lambda)?;
    a.grid().ensure_same(b.grid())?;
    let pa = to_probability(a, floor)?;
    let pb = to_probability(b, floor)?;
    let report = sinkhorn_barycenter(&[&pa, &pb], &[lambda, 1.0 - lambda], params)?;
    let field = from_probability_minmax(&report.value)?;
    Ok(report.map(|_| field))
}

/// `lambda * a + (1 - lambda) * b`, elementwise.
pub fn linear_crossover(a: &DensityField, b: &DensityField, lambda: f64) -> Result<DensityField> {
    check_lambda(lambda)?;
    a.grid().ensure_same(b.grid())?;
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
        .collect();
    DensityField::clamped(*a.grid(), values)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

/// One child together with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Offspring {
    pub field: DensityField,
    pub parents: (usize, usize),
    pub lambda: f64,
    /// Regularization used; `None` for linear offspring.
    pub epsilon: Option<f64>,
    /// Barycenter solver outcome, `None` for linear offspring.
    pub report: Option<SinkhornReport<()>>,
    /// Number of degenerate barycenters discarded before this one.
    pub retries: u32,
    /// The slot fell back to linear interpolation after a failed retry.
    pub fallback: bool,
}

/// Produces exactly `n_xo` children from random parent pairs.
///
/// Child `k` draws from its own RNG stream keyed by `(cfg.rng_seed, k)`, so
/// the result does not depend on how the work is scheduled.
pub fn generate_offspring(
    pop: &[DensityField],
    n_xo: usize,
    cfg: &CrossoverConfig,
    operator: CrossoverOperator,
) -> Result<Vec<Offspring>> {
    if pop.len() < 2 {
        return Err(Error::PopulationTooSmall {
            need: 2,
            have: pop.len(),
        });
    }
    cfg.validate()?;
    if n_xo == 0 {
        return Ok(Vec::new());
    }
    let dm = match operator {
        CrossoverOperator::Wasserstein => Some(pairwise_distances(pop)?),
        CrossoverOperator::Linear => {
            let grid = *pop[0].grid();
            for f in pop {
                grid.ensure_same(f.grid())?;
            }
            None
        }
    };
    (0..n_xo)
        .into_par_iter()
        .map(|k| make_child(pop, k, cfg, dm.as_ref()))
        .collect()
}

fn make_child(
    pop: &[DensityField],
    k: usize,
    cfg: &CrossoverConfig,
    dm: Option<&DistanceMatrix>,
) -> Result<Offspring> {
    let mut rng = item_rng(cfg.rng_seed, k as u64);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let i = rng.gen_range(0..pop.len());
        let mut j = rng.gen_range(0..pop.len() - 1);
        if j >= i {
            j += 1;
        }
        let lambda: f64 = rng.gen();
        (i, j, lambda)
    };
    let (mut i, mut j, mut lambda) = draw(&mut rng);
    let Some(dm) = dm else {
        return Ok(Offspring {
            field: linear_crossover(&pop[i], &pop[j], lambda)?,
            parents: (i, j),
            lambda,
            epsilon: None,
            report: None,
            retries: 0,
            fallback: false,
        });
    };
    let mut retries = 0;
    loop {
        let epsilon = adaptive_epsilon(dm.get(i, j), dm, cfg);
        match wasserstein_crossover(&pop[i], &pop[j], lambda, &cfg.params(epsilon), cfg.floor) {
            Ok(rep) => {
                let field = rep.value.clone();
                return Ok(Offspring {
                    field,
                    parents: (i, j),
                    lambda,
                    epsilon: Some(epsilon),
                    report: Some(rep.map(|_| ())),
                    retries,
                    fallback: false,
                });
            }
            Err(Error::ConstantField | Error::SolveFailed(_)) if retries == 0 => {
                retries += 1;
                (i, j, lambda) = draw(&mut rng);
            }
            Err(Error::ConstantField | Error::SolveFailed(_)) => {
                return Ok(Offspring {
                    field: linear_crossover(&pop[i], &pop[j], lambda)?,
                    parents: (i, j),
                    lambda,
                    epsilon: None,
                    report: None,
                    retries,
                    fallback: true,
                });
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    fn pair_1x2(a: [f64; 2], b: [f64; 2]) -> (DensityField, DensityField) {
        let g = GridSpec::unit(2, 2).unwrap();
        let pad = |v: [f64; 2]| DensityField::new(g, vec![v[0], v[1], 0.0, 0.0]).unwrap();
        (pad(a), pad(b))
    }

    #[test]
    fn identical_fields_have_zero_distances() {
        let (a, _) = pair_1x2([0.3, 0.9], [0.0, 0.0]);
        let dm = pairwise_distances(&[a.clone(), a]).unwrap();
        assert_eq!(dm.get(0, 1), 0.0);
        assert_eq!(dm.get(1, 0), 0.0);
        assert_eq!((dm.d_min(), dm.d_max()), (0.0, 0.0));
    }

    #[test]
    fn orthogonal_unit_fields_are_root_two_apart() {
        let (a, b) = pair_1x2([1.0, 0.0], [0.0, 1.0]);
        let dm = pairwise_distances(&[a, b]).unwrap();
        assert_eq!(dm.get(0, 1), 2f64.sqrt());
    }

    #[test]
    fn distances_reject_mixed_grids() {
        let a = DensityField::constant(GridSpec::unit(2, 2).unwrap(), 0.5).unwrap();
        let b = DensityField::constant(GridSpec::unit(3, 2).unwrap(), 0.5).unwrap();
        assert!(matches!(
            pairwise_distances(&[a, b]),
            Err(Error::GridMismatch(_))
        ));
    }

    fn dm_from(d_min: f64, d_max: f64) -> DistanceMatrix {
        DistanceMatrix {
            n: 2,
            d: vec![0.0, d_min, d_min, 0.0],
            d_min,
            d_max,
        }
    }

    #[test]
    fn epsilon_endpoints_and_midpoint() {
        let cfg = CrossoverConfig::new(1e-6, 1e-4).unwrap();
        let dm = dm_from(2.0, 6.0);
        assert_eq!(adaptive_epsilon(2.0, &dm, &cfg), 1e-6);
        assert_eq!(adaptive_epsilon(6.0, &dm, &cfg), 1e-4);
        let mid = adaptive_epsilon(4.0, &dm, &cfg);
        assert!((mid - 0.5 * (1e-6 + 1e-4)).abs() < 1e-18);
        assert_eq!(adaptive_epsilon(0.0, &dm, &cfg), 1e-6);
        assert_eq!(adaptive_epsilon(9.0, &dm, &cfg), 1e-4);
        assert_eq!(adaptive_epsilon(3.0, &dm_from(3.0, 3.0), &cfg), 1e-6);
    }

    #[test]
    fn config_rejects_inverted_range() {
        assert!(CrossoverConfig::new(1e-4, 1e-6).is_err());
        assert!(CrossoverConfig::new(0.0, 1e-6).is_err());
    }

    #[test]
    fn linear_endpoints_and_midpoint() {
        let (a, b) = pair_1x2([1.0, 0.0], [0.0, 1.0]);
        assert_eq!(linear_crossover(&a, &b, 1.0).unwrap(), a);
        let mid = linear_crossover(&a, &b, 0.5).unwrap();
        assert_eq!(&mid.values()[..2], &[0.5, 0.5]);
        assert!(linear_crossover(&a, &b, 1.5).is_err());
    }

    #[test]
    fn no_children_requested() {
        let (a, b) = pair_1x2([1.0, 0.0], [0.0, 1.0]);
        let cfg = CrossoverConfig::new(1e-2, 1e-1).unwrap();
        assert!(
            generate_offspring(&[a, b], 0, &cfg, CrossoverOperator::Wasserstein)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn single_parent_is_rejected() {
        let (a, _) = pair_1x2([1.0, 0.0], [0.0, 1.0]);
        let cfg = CrossoverConfig::new(1e-2, 1e-1).unwrap();
        assert!(matches!(
            generate_offspring(&[a], 3, &cfg, CrossoverOperator::Linear),
            Err(Error::PopulationTooSmall { need: 2, have: 1 })
        ));
    }

    #[test]
    fn operator_names_round_trip() {
        for op in [CrossoverOperator::Wasserstein, CrossoverOperator::Linear] {
            assert_eq!(op.to_string().parse::<CrossoverOperator>().unwrap(), op);
        }
        assert!("blend".parse::<CrossoverOperator>().is_err());
    }

    proptest! {
        #[test]
        fn epsilon_is_monotone(d1 in 0.0f64..10.0, d2 in 0.0f64..10.0) {
            let cfg = CrossoverConfig::new(1e-6, 1e-4).unwrap();
            let dm = dm_from(1.0, 8.0);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(adaptive_epsilon(lo, &dm, &cfg) <= adaptive_epsilon(hi, &dm, &cfg));
        }

        #[test]
        fn linear_stays_between_parents(
            v in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 4),
            lambda in 0.0f64..=1.0,
        ) {
            let g = GridSpec::unit(2, 2).unwrap();
            let a = DensityField::new(g, v.iter().map(|p| p.0).collect()).unwrap();
            let b = DensityField::new(g, v.iter().map(|p| p.1).collect()).unwrap();
            let c = linear_crossover(&a, &b, lambda).unwrap();
            for ((x, y), z) in a.values().iter().zip(b.values()).zip(c.values()) {
                prop_assert!(*z >= x.min(*y) - 1e-15 && *z <= x.max(*y) + 1e-15);
            }
        }
    }
}
