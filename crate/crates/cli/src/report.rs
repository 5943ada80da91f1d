use std::fmt::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};
use crate::evolve::{checkpoint_dir, HistoryRow, MemberRow, TimingRow, HISTORY, TIMING};
use crate::output::{read_csv, write_text};
use crate::svg::{Plot, Series, Style};

pub const HV_SVG: &str = "hv.svg";
pub const PARETO_SVG: &str = "pareto.svg";
pub const TIMING_TXT: &str = "timing.txt";

fn history(run: &Path) -> CliResult<Vec<HistoryRow>> {
    let path = run.join(HISTORY);
    if !path.exists() {
        return Err(CliError::MissingHistory(run.to_path_buf()));
    }
    let rows: Vec<HistoryRow> = read_csv(&path)?;
    if rows.is_empty() {
        return Err(CliError::MissingHistory(run.to_path_buf()));
    }
    Ok(rows)
}

fn label(run: &Path) -> String {
    run.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| run.display().to_string())
}

fn members(run: &Path, generation: usize) -> Vec<(f64, f64)> {
    let path = checkpoint_dir(run, generation).join("members.csv");
    read_csv::<MemberRow>(&path)
        .map(|rows| rows.into_iter().map(|r| (r.j1, r.j2)).collect())
        .unwrap_or_default()
}

/// Per-phase totals and shares.
pub fn timing_table(rows: &[TimingRow]) -> String {
    let phases = [
        (
            "evaluation",
            rows.iter().map(|r| r.eval_seconds).sum::<f64>(),
        ),
        ("crossover", rows.iter().map(|r| r.crossover_seconds).sum()),
        ("selection", rows.iter().map(|r| r.selection_seconds).sum()),
    ];
    let total: f64 = phases.iter().map(|p| p.1).sum();
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>12} {:>8}", "phase", "seconds", "share");
    for (name, t) in phases {
        let share = if total > 0.0 { 100.0 * t / total } else { 0.0 };
        let _ = writeln!(s, "{name:<12} {t:>12.3} {share:>7.1}%");
    }
    let _ = writeln!(s, "{:<12} {total:>12.3} {:>7.1}%", "total", 100.0);
    let _ = writeln!(s, "generations  {}", rows.len());
    s
}

/// Writes `hv.svg`, `pareto.svg` and `timing.txt` into `out`, which defaults
/// to the run directory. `compare` adds other runs' curves to `hv.svg`.
pub fn cmd_report(run: &Path, compare: &[PathBuf], out: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let hist = history(run)?;
    let others = compare
        .iter()
        .map(|r| Ok((label(r), history(r)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let out = out.unwrap_or(run);
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let curve = |name: String, rows: &[HistoryRow]| Series {
        name,
        points: rows
            .iter()
            .map(|r| (r.generation as f64, r.hv_normalized))
            .collect(),
        style: Style::Line,
    };
    let mut series = vec![curve(label(run), &hist)];
    series.extend(others.iter().map(|(n, h)| curve(n.clone(), h)));
    let hv = Plot {
        title: "Hypervolume".into(),
        x_label: "generation".into(),
        y_label: "HV / HV at generation 0".into(),
        series,
    };

    let last = hist.last().map_or(0, |r| r.generation);
    let pareto = Plot {
        title: "Objective space".into(),
        x_label: "max stress".into(),
        y_label: "volume fraction".into(),
        series: vec![
            Series {
                name: "generation 0".into(),
                points: members(run, 0),
                style: Style::Scatter,
            },
            Series {
                name: format!("generation {last}"),
                points: members(run, last),
                style: Style::Scatter,
            },
        ],
    };

    let timing: Vec<TimingRow> = if run.join(TIMING).exists() {
        read_csv(&run.join(TIMING))?
    } else {
        Vec::new()
    };

    let files = [
        (out.join(HV_SVG), hv.render()),
        (out.join(PARETO_SVG), pareto.render()),
        (out.join(TIMING_TXT), timing_table(&timing)),
    ];
    for (p, text) in &files {
        write_text(p, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_shares_sum_to_one_hundred() {
        let rows = vec![
            TimingRow {
                generation: 0,
                eval_seconds: 3.0,
                crossover_seconds: 0.0,
                selection_seconds: 1.0,
            },
            TimingRow {
                generation: 1,
                eval_seconds: 1.0,
                crossover_seconds: 4.0,
                selection_seconds: 1.0,
            },
        ];
        let t = timing_table(&rows);
        assert!(t.contains("evaluation"));
        assert!(t.contains("40.0%"), "{t}");
        assert!(t.contains("generations  2"));
    }
}
