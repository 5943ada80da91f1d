//! `wxo`: command-line driver for seeding, evolving, morphing, evaluating and
//! reporting runs of the Wasserstein-crossover optimizer.

pub mod config;
pub mod error;
pub mod evolve;
pub mod morph;
pub mod output;
pub mod report;
pub mod seed;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wxo_core::crossover::CrossoverOperator;
use wxo_core::ot::KernelMode;

use config::{Preset, RunConfig};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "wxo",
    version,
    about = "Evolutionary topology optimization with Wasserstein crossover"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file overriding preset values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base parameter set.
    #[arg(long, global = true, default_value = "paper2d")]
    pub preset: Preset,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long = "seed-rng", global = true)]
    pub seed_rng: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the low-fidelity sweep and write the seed designs.
    Seed,
    /// Run the evolutionary loop from the seed designs.
    Evolve {
        /// Crossover operator.
        #[arg(long)]
        operator: Option<CrossoverOperator>,
        /// Directory holding lf_*.dfld seeds (default: <out>/seeds).
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Continue an existing run directory from its latest checkpoint.
        #[arg(long, conflicts_with_all = ["seeds", "operator"])]
        resume: Option<PathBuf>,
        /// Override the last generation index.
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Interpolate two fields along the Wasserstein geodesic.
    Morph {
        a: PathBuf,
        b: PathBuf,
        /// Comma-separated weights of the first field.
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        weights: Vec<f64>,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-9)]
        tau: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value = "conv")]
        kernel: KernelMode,
    },
    /// High-fidelity objectives of one field.
    Eval { field: PathBuf },
    /// Render hv.svg, pareto.svg and timing.txt for a run.
    Report {
        run: PathBuf,
        /// Other runs whose hypervolume curves are overlaid.
        #[arg(long)]
        compare: Vec<PathBuf>,
    },
}

fn resolve(g: &GlobalArgs) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p, g.preset)?,
        None => RunConfig::preset(g.preset),
    };
    if let Some(out) = &g.out {
        cfg.out = out.clone();
    }
    if let Some(s) = g.seed_rng {
        cfg.rng_seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

pub fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    match cli.command {
        Command::Seed => {
            let cfg = resolve(g)?;
            pool(cfg.workers)?.install(|| seed::cmd_seed(&cfg, g.force))?;
        }
        Command::Evolve {
            operator,
            seeds,
            resume,
            generations,
        } => {
            let (mut cfg, start) = match resume {
                Some(run) => {
                    let mut cfg = evolve::run_config(&run)?;
                    cfg.out = run;
                    if let Some(w) = g.workers {
                        cfg.workers = w;
                    }
                    (cfg, evolve::EvolveStart::Resume)
                }
                None => {
                    let mut cfg = resolve(g)?;
                    if let Some(op) = operator {
                        cfg.operator = op.to_string();
                    }
                    if let Some(s) = seeds {
                        cfg.seeds_dir = s;
                    }
                    (cfg, evolve::EvolveStart::Fresh)
                }
            };
            if let Some(t) = generations {
                cfg.t_max = t;
            }
            cfg.validate()?;
            let state = pool(cfg.workers)?.install(|| evolve::cmd_evolve(&cfg, start, g.force))?;
            let last = state.history.last().expect("history is never empty");
            println!(
                "generation {}  hv/hv0 {}  front {}",
                last.generation, last.hv_normalized, last.front_size
            );
        }
        Command::Morph {
            a,
            b,
            weights,
            epsilon,
            tau,
            max_iter,
            kernel,
        } => {
            let args = morph::MorphArgs {
                a,
                b,
                weights,
                epsilon,
                tau,
                max_iter,
                kernel,
                out: g.out.clone().unwrap_or_else(|| PathBuf::from("morph")),
            };
            let workers = g.workers.unwrap_or(0);
            for p in pool(workers)?.install(|| morph::cmd_morph(&args, g.force))? {
                println!("{}", p.display());
            }
        }
        Command::Eval { field } => {
            let cfg = resolve(g)?;
            let obj = pool(cfg.workers)?.install(|| morph::cmd_eval(&cfg, &field))?;
            println!("feasible,max_stress,volume_fraction");
            println!("{},{},{}", obj.feasible, obj.j[0], obj.j[1]);
        }
        Command::Report { run, compare } => {
            for p in report::cmd_report(&run, &compare, g.out.as_deref())? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
