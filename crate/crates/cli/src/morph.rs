use std::path::{Path, PathBuf};

use serde::Serialize;
use wxo_core::crossover::wasserstein_crossover;
use wxo_core::grid::{read_field, write_field, DensityField, DEFAULT_FLOOR};
use wxo_core::hf::{hf_evaluate, Objectives};
use wxo_core::ot::{KernelMode, SinkhornParams};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{clear, create_dir, guard, write_csv};

pub struct MorphArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Weight of `a` for each output.
    pub weights: Vec<f64>,
    pub epsilon: f64,
    pub tau: f64,
    pub max_iter: usize,
    pub kernel: KernelMode,
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct MorphRow {
    k: usize,
    weight: f64,
    file: String,
    iterations: usize,
    residual: f64,
    converged: bool,
    centroid_x: f64,
    centroid_y: f64,
}

fn load(path: &Path) -> CliResult<DensityField> {
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "{} does not exist",
            path.display()
        )));
    }
    Ok(read_field(path)?)
}

/// One barycentric interpolant of `a` and `b` per weight.
pub fn cmd_morph(args: &MorphArgs, force: bool) -> CliResult<Vec<PathBuf>> {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    if a.grid() != b.grid() {
        return Err(CliError::Validation(format!(
            "fields are on different grids: {} vs {}",
            a.grid(),
            b.grid()
        )));
    }
    if args.weights.is_empty() || args.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(CliError::Validation("weights must lie in [0, 1]".into()));
    }
    let params = SinkhornParams::new(args.epsilon)
        .tau(args.tau)
        .max_iter(args.max_iter)
        .mode(args.kernel);
    let names: Vec<String> = (0..args.weights.len())
        .map(|k| format!("morph_{k:03}.dfld"))
        .collect();
    let mut targets: Vec<PathBuf> = names.iter().map(|n| args.out.join(n)).collect();
    targets.push(args.out.join("morph.csv"));
    guard(&targets, force)?;

    let mut results = Vec::with_capacity(args.weights.len());
    for &w in &args.weights {
        results.push(wasserstein_crossover(&a, &b, w, &params, DEFAULT_FLOOR)?);
    }

    clear(&targets)?;
    create_dir(&args.out)?;
    let mut rows = Vec::new();
    for (k, (rep, name)) in results.iter().zip(&names).enumerate() {
        write_field(&rep.value, args.out.join(name))?;
        let (cx, cy) = rep.value.centroid().unwrap_or((f64::NAN, f64::NAN));
        rows.push(MorphRow {
            k,
            weight: args.weights[k],
            file: name.clone(),
            iterations: rep.iterations,
            residual: rep.final_residual,
            converged: rep.converged,
            centroid_x: cx,
            centroid_y: cy,
        });
    }
    write_csv(&args.out.join("morph.csv"), &rows)?;
    targets.pop();
    Ok(targets)
}

/// High-fidelity objectives of one field under the config's problem.
pub fn cmd_eval(cfg: &RunConfig, field: &Path) -> CliResult<Objectives> {
    let f = load(field)?;
    let model = cfg.model()?;
    if f.grid() != model.grid() {
        return Err(CliError::Validation(format!(
            "field is on grid {}, config expects {}",
            f.grid(),
            model.grid()
        )));
    }
    Ok(hf_evaluate(&f, &model, &cfg.load_case(), &cfg.hf()?)?)
}
