use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use wxo_core::grid::{read_field, DensityField};

use crate::error::{CliError, CliResult};

/// Fails with the first of `paths` that already exists unless `force`.
pub fn guard(paths: &[PathBuf], force: bool) -> CliResult<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::Overwrite(p.clone())),
        None => Ok(()),
    }
}

/// Removes files and directories left by an earlier run.
pub fn clear(paths: &[PathBuf]) -> CliResult<()> {
    for p in paths {
        let res = if p.is_dir() {
            fs::remove_dir_all(p)
        } else if p.exists() {
            fs::remove_file(p)
        } else {
            Ok(())
        };
        res.map_err(|e| CliError::io(p, e))?;
    }
    Ok(())
}

pub fn create_dir(p: &Path) -> CliResult<()> {
    fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

pub fn write_text(p: &Path, text: &str) -> CliResult<()> {
    fs::write(p, text).map_err(|e| CliError::io(p, e))
}

pub fn write_csv<T: Serialize>(p: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(p)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(p, e))
}

pub fn read_csv<T: DeserializeOwned>(p: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::Reader::from_path(p)?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
}

pub fn field_name(prefix: &str, k: u64) -> String {
    format!("{prefix}_{k:03}.dfld")
}

/// `(stem, field)` for every `<prefix>_*.dfld` in `dir`, sorted by file name.
pub fn read_fields(dir: &Path, prefix: &str) -> CliResult<Vec<(String, DensityField)>> {
    let entries = fs::read_dir(dir).map_err(|e| {
        CliError::Validation(format!("cannot read directory {}: {e}", dir.display()))
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "dfld")
                && p.file_stem()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| s.starts_with(&format!("{prefix}_")))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            Ok((stem, read_field(&p)?))
        })
        .collect()
}
