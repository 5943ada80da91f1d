use serde::Serialize;
use wxo_core::grid::write_field;
use wxo_core::topopt::seed_sweep;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{clear, create_dir, field_name, guard, write_csv, write_text};

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Serialize)]
struct ManifestRow {
    k: usize,
    s1: f64,
    s2: f64,
    radius: f64,
    volume: f64,
    objective: Option<f64>,
    residual: Option<f64>,
    iterations: Option<usize>,
    non_improving: Option<bool>,
    error: String,
}

/// Runs the low-fidelity sweep and writes `lf_<k>.dfld` plus the manifest.
/// Returns the number of successful runs.
pub fn cmd_seed(cfg: &RunConfig, force: bool) -> CliResult<usize> {
    let dir = cfg.seeds_path();
    guard(std::slice::from_ref(&dir), force)?;
    let model = cfg.model()?;
    let bc = cfg.load_case().materialize(model.grid())?;
    let ranges = cfg.seed_ranges()?;

    let sweep = seed_sweep(
        &model,
        &bc,
        &ranges,
        cfg.n_s1,
        cfg.n_s2,
        cfg.p_norm,
        cfg.lf_max_iter,
    )?;

    clear(std::slice::from_ref(&dir))?;
    create_dir(&dir)?;
    let mut rows = Vec::with_capacity(sweep.len());
    let mut ok = 0;
    for e in &sweep {
        let mut row = ManifestRow {
            k: e.index,
            s1: e.seed.s1,
            s2: e.seed.s2,
            radius: e.radius,
            volume: e.volume,
            objective: None,
            residual: None,
            iterations: None,
            non_improving: None,
            error: String::new(),
        };
        match &e.outcome {
            Ok(r) => {
                write_field(&r.density, dir.join(field_name("lf", e.index as u64)))?;
                row.objective = Some(r.final_objective());
                row.residual = Some(r.constraint_residual);
                row.iterations = Some(r.iterations);
                row.non_improving = Some(r.non_improving);
                ok += 1;
            }
            Err(err) => row.error = err.to_string(),
        }
        rows.push(row);
    }
    write_csv(&dir.join(MANIFEST), &rows)?;
    write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    if ok == 0 {
        return Err(CliError::Internal(format!(
            "all {} low-fidelity runs failed",
            sweep.len()
        )));
    }
    eprintln!(
        "seed: {ok}/{} runs written to {}",
        sweep.len(),
        dir.display()
    );
    Ok(ok)
}
