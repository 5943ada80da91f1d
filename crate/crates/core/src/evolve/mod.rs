//! The evolutionary loop.
//!
//! Generation 0 evaluates the seed designs. Every later generation breeds
//! `n_xo` children from the current population, evaluates only the children,
//! drops infeasible ones, merges the rest with the population and keeps the
//! best `n_pop` by Pareto rank and crowding distance. Progress is tracked by
//! the hypervolume against a reference point fixed at generation 0.

mod selection;

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;

use crate::crossover::{generate_offspring, CrossoverConfig, CrossoverOperator};
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::hf::Objectives;
use crate::seeding::mix;

pub use selection::{
    crowding_distance, crowding_truncate, dominates, hypervolume_2d, non_dominated_sort,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveConfig {
    pub n_pop: usize,
    pub n_xo: usize,
    /// Last generation index; the loop produces `t_max + 1` records.
    pub t_max: usize,
    /// Stop early when the relative hypervolume gain over `hv_window`
    /// generations falls below this; zero disables the test.
    pub hv_rel_tol: f64,
    pub hv_window: usize,
    pub crossover: CrossoverConfig,
    pub operator: CrossoverOperator,
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pop < 2 || self.n_xo < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_pop and n_xo must be >= 2, got {} and {}",
                self.n_pop, self.n_xo
            )));
        }
        if !(self.hv_rel_tol >= 0.0) || self.hv_window < 2 {
            return Err(Error::InvalidArgument(
                "hv_rel_tol must be >= 0 and hv_window >= 2".into(),
            ));
        }
        self.crossover.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub id: u64,
    pub born: usize,
    pub field: DensityField,
    pub objectives: Objectives,
}

/// Feasible members, kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Member>,
    pub capacity: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.members
            .iter()
            .map(|m| m.objectives.j.clone())
            .collect()
    }

    /// Members of rank 0, in id order.
    pub fn front(&self) -> Vec<&Member> {
        let ranks = non_dominated_sort(&self.objectives());
        self.members
            .iter()
            .zip(ranks)
            .filter(|(_, r)| *r == 0)
            .map(|(m, _)| m)
            .collect()
    }

    fn points(&self) -> Vec<[f64; 2]> {
        self.members
            .iter()
            .map(|m| [m.objectives.j[0], m.objectives.j[1]])
            .collect()
    }
}

/// Summary of one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub hv: f64,
    pub hv_normalized: f64,
    pub front_size: usize,
    /// Population size after selection.
    pub n_feasible: usize,
    pub eval_seconds: f64,
    pub crossover_seconds: f64,
    pub selection_seconds: f64,
}

/// One candidate evaluation, feasible or not.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub id: u64,
    pub objectives: Objectives,
    pub seconds: f64,
}

/// Everything needed to continue a run after a given generation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveState {
    pub generation: usize,
    pub population: Population,
    pub history: Vec<GenerationRecord>,
    pub reference: [f64; 2],
    pub next_id: u64,
}

/// Reference point `worst + 0.1 (worst - best)` per objective.
pub fn reference_point(points: &[[f64; 2]]) -> [f64; 2] {
    let mut r = [0.0; 2];
    for (k, rk) in r.iter_mut().enumerate() {
        let worst = points
            .iter()
            .map(|p| p[k])
            .fold(f64::NEG_INFINITY, f64::max);
        let best = points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let span = worst - best;
        let margin = if span > 0.0 {
            0.1 * span
        } else if worst != 0.0 {
            0.1 * worst.abs()
        } else {
            0.1
        };
        *rk = worst + margin;
    }
    r
}

/// Whether the loop should stop after the last entry of `history`.
pub fn check_convergence(history: &[f64], cfg: &EvolveConfig) -> bool {
    let Some(&last) = history.last() else {
        return false;
    };
    if history.len() > cfg.t_max {
        return true;
    }
    if cfg.hv_rel_tol <= 0.0 || history.len() < cfg.hv_window {
        return false;
    }
    let old = history[history.len() - cfg.hv_window];
    if old <= 0.0 {
        return false;
    }
    (last - old) / old < cfg.hv_rel_tol
}

/// Objective function: pure, callable from several threads.
pub type Evaluator<'a> = dyn Fn(&DensityField) -> Result<Objectives> + Sync + 'a;

/// Called after every generation; an error aborts the run.
pub type Observer<'a> = dyn FnMut(&EvolveState, &[Evaluation]) -> Result<()> + 'a;

/// Where the loop starts.
pub enum Start {
    /// Evaluate these seed designs as generation 0.
    Fresh(Vec<DensityField>),
    /// Continue after the last recorded generation.
    Resume(EvolveState),
}

fn field_key(f: &DensityField) -> Vec<u64> {
    f.values().iter().map(|v| v.to_bits()).collect()
}

fn evaluate(
    candidates: Vec<(u64, DensityField)>,
    evaluator: &Evaluator<'_>,
) -> Result<Vec<(Evaluation, DensityField)>> {
    candidates
        .into_par_iter()
        .map(|(id, field)| {
            let t = Instant::now();
            let objectives = evaluator(&field)?;
            if objectives.feasible && objectives.j.len() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "expected 2 objectives, evaluator returned {}",
                    objectives.j.len()
                )));
            }
            let seconds = t.elapsed().as_secs_f64();
            Ok((
                Evaluation {
                    id,
                    objectives,
                    seconds,
                },
                field,
            ))
        })
        .collect()
}

/// Keeps whole fronts while they fit and crowding-truncates the first that
/// does not. Returns the survivors sorted by id.
pub fn select(mut pool: Vec<Member>, n_pop: usize) -> Vec<Member> {
    pool.sort_by_key(|m| m.id);
    if pool.len() <= n_pop {
        return pool;
    }
    let objs: Vec<Vec<f64>> = pool.iter().map(|m| m.objectives.j.clone()).collect();
    let ranks = non_dominated_sort(&objs);
    let mut keep = vec![false; pool.len()];
    let mut kept = 0;
    let mut r = 0;
    while kept < n_pop {
        let layer: Vec<usize> = (0..pool.len()).filter(|&i| ranks[i] == r).collect();
        if kept + layer.len() <= n_pop {
            for &i in &layer {
                keep[i] = true;
            }
            kept += layer.len();
        } else {
            let front: Vec<Vec<f64>> = layer.iter().map(|&i| objs[i].clone()).collect();
            let ids: Vec<u64> = layer.iter().map(|&i| pool[i].id).collect();
            for k in crowding_truncate(&front, &ids, n_pop - kept) {
                keep[layer[k]] = true;
            }
            kept = n_pop;
        }
        r += 1;
    }
    pool.into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(m, _)| m)
        .collect()
}

/// Runs generations until [`check_convergence`] fires.
pub fn evolve_loop(
    cfg: &EvolveConfig,
    start: Start,
    evaluator: &Evaluator<'_>,
    observer: &mut Observer<'_>,
) -> Result<EvolveState> {
    cfg.validate()?;
    let mut state = match start {
        Start::Fresh(seeds) => {
            let state = initial_generation(cfg, seeds, evaluator)?;
            observer(&state.0, &state.1)?;
            state.0
        }
        Start::Resume(state) => {
            if state.population.len() < 2 || state.history.len() != state.generation + 1 {
                return Err(Error::InvalidArgument(
                    "resume state is inconsistent".into(),
                ));
            }
            state
        }
    };

    loop {
        let hv: Vec<f64> = state.history.iter().map(|r| r.hv).collect();
        if check_convergence(&hv, cfg) {
            return Ok(state);
        }
        let generation = state.generation + 1;

        let t = Instant::now();
        let mut xo = cfg.crossover;
        xo.rng_seed = mix(cfg.crossover.rng_seed, generation as u64);
        let parents: Vec<DensityField> = state
            .population
            .members
            .iter()
            .map(|m| m.field.clone())
            .collect();
        let children = generate_offspring(&parents, cfg.n_xo, &xo, cfg.operator)?;
        let crossover_seconds = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut seen: HashSet<Vec<u64>> = state
            .population
            .members
            .iter()
            .map(|m| field_key(&m.field))
            .collect();
        let mut fresh = Vec::new();
        for child in children {
            let id = state.next_id;
            state.next_id += 1;
            if seen.insert(field_key(&child.field)) {
                fresh.push((id, child.field));
            }
        }
        let evaluated = evaluate(fresh, evaluator)?;
        let eval_seconds = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut pool = std::mem::take(&mut state.population.members);
        let mut log = Vec::with_capacity(evaluated.len());
        for (ev, field) in evaluated {
            if ev.objectives.feasible {
                pool.push(Member {
                    id: ev.id,
                    born: generation,
                    field,
                    objectives: ev.objectives.clone(),
                });
            }
            log.push(ev);
        }
        state.population.members = select(pool, cfg.n_pop);
        let record = summarize(&state, generation, state.history[0].hv);
        let selection_seconds = t.elapsed().as_secs_f64();
        state.history.push(GenerationRecord {
            eval_seconds,
            crossover_seconds,
            selection_seconds,
            ..record
        });
        state.generation = generation;
        observer(&state, &log)?;
    }
}

fn summarize(state: &EvolveState, generation: usize, hv0: f64) -> GenerationRecord {
    let hv = hypervolume_2d(&state.population.points(), state.reference);
    GenerationRecord {
        generation,
        hv,
        hv_normalized: if hv0 > 0.0 { hv / hv0 } else { 0.0 },
        front_size: state.population.front().len(),
        n_feasible: state.population.len(),
        eval_seconds: 0.0,
        crossover_seconds: 0.0,
        selection_seconds: 0.0,
    }
}

fn initial_generation(
    cfg: &EvolveConfig,
    seeds: Vec<DensityField>,
    evaluator: &Evaluator<'_>,
) -> Result<(EvolveState, Vec<Evaluation>)> {
    let t = Instant::now();
    let mut seen = HashSet::new();
    let n_seeds = seeds.len() as u64;
    let candidates: Vec<(u64, DensityField)> = seeds
        .into_iter()
        .enumerate()
        .filter(|(_, f)| seen.insert(field_key(f)))
        .map(|(k, f)| (k as u64, f))
        .collect();
    let evaluated = evaluate(candidates, evaluator)?;
    let eval_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut pool = Vec::new();
    let mut log = Vec::new();
    for (ev, field) in evaluated {
        if ev.objectives.feasible {
            pool.push(Member {
                id: ev.id,
                born: 0,
                field,
                objectives: ev.objectives.clone(),
            });
        }
        log.push(ev);
    }
    if pool.is_empty() {
        return Err(Error::ExtinctPopulation);
    }
    if pool.len() < 2 {
        return Err(Error::PopulationTooSmall {
            need: 2,
            have: pool.len(),
        });
    }
    let points: Vec<[f64; 2]> = pool
        .iter()
        .map(|m| [m.objectives.j[0], m.objectives.j[1]])
        .collect();
    let reference = reference_point(&points);
    let mut state = EvolveState {
        generation: 0,
        population: Population {
            members: select(pool, cfg.n_pop),
            capacity: cfg.n_pop,
        },
        history: Vec::new(),
        reference,
        next_id: n_seeds,
    };
    let hv0 = hypervolume_2d(&state.population.points(), reference);
    let record = summarize(&state, 0, hv0);
    state.history.push(GenerationRecord {
        eval_seconds,
        selection_seconds: t.elapsed().as_secs_f64(),
        ..record
    });
    Ok((state, log))
}
