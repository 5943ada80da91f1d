//! `evolve`: the evolutionary loop with per-generation checkpoints.
//!
//! Run directory layout:
//!
//! ```text
//! config.toml            resolved config
//! history.csv            generation, hv, hv_normalized, front_size, n_feasible
//! timing.csv             per-phase wall-clock seconds
//! evals.csv              every evaluated candidate
//! checkpoints/gen_XXX/   members.csv, state.csv, member_<id>.dfld
//! front/                 rank-0 members of the final population
//! ```
//!
//! Everything except `timing.csv` is a pure function of the config and seeds.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wxo_core::evolve::{evolve_loop, Evaluation, EvolveState, GenerationRecord, Population, Start};
use wxo_core::grid::{read_field, write_field, DensityField};
use wxo_core::hf::{hf_evaluate, Objectives};
use wxo_core::Member;

use crate::config::{Preset, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{
    clear, create_dir, field_name, guard, read_csv, read_fields, write_csv, write_text,
};

pub const HISTORY: &str = "history.csv";
pub const TIMING: &str = "timing.csv";
pub const EVALS: &str = "evals.csv";
pub const CHECKPOINTS: &str = "checkpoints";
pub const FRONT: &str = "front";
pub const CONFIG: &str = "config.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryRow {
    pub generation: usize,
    pub hv: f64,
    pub hv_normalized: f64,
    pub front_size: usize,
    pub n_feasible: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub generation: usize,
    pub eval_seconds: f64,
    pub crossover_seconds: f64,
    pub selection_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    pub generation: usize,
    pub id: u64,
    pub feasible: bool,
    pub j1: f64,
    pub j2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberRow {
    pub id: u64,
    pub born: usize,
    pub j1: f64,
    pub j2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateRow {
    generation: usize,
    reference_j1: f64,
    reference_j2: f64,
    next_id: u64,
    capacity: usize,
}

pub fn checkpoint_dir(run: &Path, generation: usize) -> PathBuf {
    run.join(CHECKPOINTS).join(format!("gen_{generation:03}"))
}

fn outputs(run: &Path) -> Vec<PathBuf> {
    [HISTORY, TIMING, EVALS, CHECKPOINTS, FRONT, CONFIG]
        .iter()
        .map(|n| run.join(n))
        .collect()
}

fn member_rows(pop: &Population) -> Vec<MemberRow> {
    pop.members
        .iter()
        .map(|m| MemberRow {
            id: m.id,
            born: m.born,
            j1: m.objectives.j[0],
            j2: m.objectives.j[1],
        })
        .collect()
}

fn write_members(dir: &Path, pop: &Population) -> CliResult<()> {
    for m in &pop.members {
        write_field(&m.field, dir.join(field_name("member", m.id)))?;
    }
    write_csv(&dir.join("members.csv"), &member_rows(pop))
}

fn write_checkpoint(run: &Path, state: &EvolveState) -> CliResult<()> {
    let dir = checkpoint_dir(run, state.generation);
    let tmp = dir.with_extension("partial");
    clear(&[tmp.clone(), dir.clone()])?;
    create_dir(&tmp)?;
    write_members(&tmp, &state.population)?;
    write_csv(
        &tmp.join("state.csv"),
        &[StateRow {
            generation: state.generation,
            reference_j1: state.reference[0],
            reference_j2: state.reference[1],
            next_id: state.next_id,
            capacity: state.population.capacity,
        }],
    )?;
    fs::rename(&tmp, &dir).map_err(|e| CliError::io(&dir, e))
}

fn write_history(run: &Path, history: &[GenerationRecord]) -> CliResult<()> {
    let rows: Vec<HistoryRow> = history
        .iter()
        .map(|r| HistoryRow {
            generation: r.generation,
            hv: r.hv,
            hv_normalized: r.hv_normalized,
            front_size: r.front_size,
            n_feasible: r.n_feasible,
        })
        .collect();
    let timing: Vec<TimingRow> = history
        .iter()
        .map(|r| TimingRow {
            generation: r.generation,
            eval_seconds: r.eval_seconds,
            crossover_seconds: r.crossover_seconds,
            selection_seconds: r.selection_seconds,
        })
        .collect();
    write_csv(&run.join(HISTORY), &rows)?;
    write_csv(&run.join(TIMING), &timing)
}

fn append_evals(run: &Path, generation: usize, evals: &[Evaluation]) -> CliResult<()> {
    let path = run.join(EVALS);
    let mut rows: Vec<EvalRow> = if path.exists() {
        read_csv(&path)?
    } else {
        Vec::new()
    };
    rows.retain(|r| r.generation < generation);
    for e in evals {
        let (j1, j2) = match e.objectives.j.as_slice() {
            [a, b] => (*a, *b),
            _ => (f64::INFINITY, f64::INFINITY),
        };
        rows.push(EvalRow {
            generation,
            id: e.id,
            feasible: e.objectives.feasible,
            j1,
            j2,
        });
    }
    write_csv(&path, &rows)
}

/// Loads the newest complete checkpoint of `run`.
pub fn load_checkpoint(run: &Path) -> CliResult<EvolveState> {
    let root = run.join(CHECKPOINTS);
    let latest = fs::read_dir(&root)
        .map_err(|e| CliError::Validation(format!("no checkpoints in {}: {e}", run.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("gen_")?.parse::<usize>().ok()
        })
        .max()
        .ok_or_else(|| CliError::Validation(format!("no checkpoints in {}", run.display())))?;
    let dir = checkpoint_dir(run, latest);
    let state: Vec<StateRow> = read_csv(&dir.join("state.csv"))?;
    let state = state
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Validation(format!("empty state in {}", dir.display())))?;
    let rows: Vec<MemberRow> = read_csv(&dir.join("members.csv"))?;
    let members = rows
        .into_iter()
        .map(|r| {
            Ok(Member {
                id: r.id,
                born: r.born,
                field: read_field(dir.join(field_name("member", r.id)))?,
                objectives: Objectives::feasible(vec![r.j1, r.j2]),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let hist: Vec<HistoryRow> = read_csv(&run.join(HISTORY))?;
    let timing: Vec<TimingRow> = read_csv(&run.join(TIMING)).unwrap_or_default();
    let history: Vec<GenerationRecord> = hist
        .into_iter()
        .filter(|h| h.generation <= latest)
        .map(|h| {
            let t = timing.iter().find(|t| t.generation == h.generation);
            GenerationRecord {
                generation: h.generation,
                hv: h.hv,
                hv_normalized: h.hv_normalized,
                front_size: h.front_size,
                n_feasible: h.n_feasible,
                eval_seconds: t.map_or(0.0, |t| t.eval_seconds),
                crossover_seconds: t.map_or(0.0, |t| t.crossover_seconds),
                selection_seconds: t.map_or(0.0, |t| t.selection_seconds),
            }
        })
        .collect();
    if history.len() != latest + 1 {
        return Err(CliError::Validation(format!(
            "history.csv in {} does not cover generation {latest}",
            run.display()
        )));
    }
    Ok(EvolveState {
        generation: state.generation,
        population: Population {
            members,
            capacity: state.capacity,
        },
        history,
        reference: [state.reference_j1, state.reference_j2],
        next_id: state.next_id,
    })
}

/// Reads the resolved config of an existing run.
pub fn run_config(run: &Path) -> CliResult<RunConfig> {
    RunConfig::load(&run.join(CONFIG), Preset::Paper2d)
}

pub enum EvolveStart {
    Fresh,
    /// Continue the run in `cfg.out` from its latest checkpoint.
    Resume,
}

pub fn cmd_evolve(cfg: &RunConfig, start: EvolveStart, force: bool) -> CliResult<EvolveState> {
    let run = cfg.out.clone();
    let ecfg = cfg.evolve()?;
    let model = cfg.model()?;
    let lc = cfg.load_case();
    let hf = cfg.hf()?;

    let start = match start {
        EvolveStart::Fresh => {
            let seeds_dir = cfg.seeds_path();
            let seeds = read_fields(&seeds_dir, "lf")?;
            if seeds.len() < 2 {
                return Err(CliError::Validation(format!(
                    "{} holds {} seed fields, need at least 2",
                    seeds_dir.display(),
                    seeds.len()
                )));
            }
            for (name, f) in &seeds {
                if f.grid() != model.grid() {
                    return Err(CliError::Validation(format!(
                        "seed {name} is on grid {}, config expects {}",
                        f.grid(),
                        model.grid()
                    )));
                }
            }
            let outs = outputs(&run);
            guard(&outs, force)?;
            clear(&outs)?;
            create_dir(&run)?;
            let mut resolved = cfg.clone();
            resolved.seeds_dir = seeds_dir;
            write_text(&run.join(CONFIG), &resolved.to_toml())?;
            Start::Fresh(seeds.into_iter().map(|(_, f)| f).collect())
        }
        EvolveStart::Resume => {
            let state = load_checkpoint(&run)?;
            if state
                .population
                .members
                .iter()
                .any(|m| m.field.grid() != model.grid())
            {
                return Err(CliError::Validation(
                    "checkpoint grid differs from the config".into(),
                ));
            }
            write_text(&run.join(CONFIG), &cfg.to_toml())?;
            Start::Resume(state)
        }
    };

    let evaluator = |f: &DensityField| hf_evaluate(f, &model, &lc, &hf);
    // an output failure inside the observer is reported as itself
    let mut failure: Option<CliError> = None;
    let mut observer = |state: &EvolveState, evals: &[Evaluation]| -> wxo_core::Result<()> {
        let r = state
            .history
            .last()
            .expect("observer sees at least one record");
        eprintln!(
            "gen {:>3}  hv {:.6e}  hv/hv0 {:.4}  front {:>3}  pop {:>3}  eval {:.1}s  xo {:.1}s",
            r.generation,
            r.hv,
            r.hv_normalized,
            r.front_size,
            r.n_feasible,
            r.eval_seconds,
            r.crossover_seconds
        );
        let written = append_evals(&run, state.generation, evals)
            .and_then(|_| write_history(&run, &state.history))
            .and_then(|_| write_checkpoint(&run, state));
        written.map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            wxo_core::Error::InvalidArgument(msg)
        })
    };
    let outcome = evolve_loop(&ecfg, start, &evaluator, &mut observer);
    if let Some(e) = failure {
        return Err(e);
    }
    let state = outcome?;

    let front_dir = run.join(FRONT);
    clear(std::slice::from_ref(&front_dir))?;
    create_dir(&front_dir)?;
    let front = Population {
        members: state.population.front().into_iter().cloned().collect(),
        capacity: state.population.capacity,
    };
    write_members(&front_dir, &front)?;
    Ok(state)
}
