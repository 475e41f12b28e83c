//! Parameter sweeps: a template scenario, a grid of `section.key` values
//! and a seed range, run in parallel with results in grid order.
//!
//! Grid files hold one axis per line, values separated by `;`:
//!
//! ```text
//! graph.generator = cycle:4 ; cycle:8 ; cycle:16
//! algorithm.eps = 1 ; 1/2
//! ```
//!
//! `{seed}` and `{run}` in the template or in grid values are replaced by
//! the run's seed and index.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::runner::{execute, Outcome, EXIT_HORIZON, EXIT_OK, EXIT_PARSE, EXIT_VIOLATION};
use crate::scenario::{Scenario, ScenarioDoc};

pub const DEFAULT_MAX_RUNS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SweepError {
    #[error("grid line {line}: {message}")]
    Grid { line: usize, message: String },
    #[error("bad seed range '{0}' (expected a..b or a single seed)")]
    Seeds(String),
    #[error("sweep has {runs} runs, above the cap of {cap}")]
    TooLarge { runs: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub section: String,
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Self, SweepError> {
        let mut axes: Vec<Axis> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |message: &str| SweepError::Grid { line: i + 1, message: message.to_string() };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, values) = line.split_once('=').ok_or_else(|| err("expected section.key = values"))?;
            let (section, key) = name.trim().split_once('.').ok_or_else(|| err("axis name must be section.key"))?;
            let values: Vec<String> =
                values.split(';').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
            if values.is_empty() {
                return Err(err("axis without values"));
            }
            if axes.iter().any(|a| a.section == section.trim() && a.key == key.trim()) {
                return Err(err("axis repeated"));
            }
            axes.push(Axis { section: section.trim().into(), key: key.trim().into(), values });
        }
        Ok(Grid { axes })
    }

    /// Cartesian product, last axis varying fastest. Empty for an empty grid.
    pub fn points(&self) -> Vec<Vec<(&Axis, &str)>> {
        if self.axes.is_empty() {
            return Vec::new();
        }
        let mut points: Vec<Vec<(&Axis, &str)>> = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((axis, v.as_str()));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// `a..b` (half-open) or a single seed.
pub fn parse_seeds(text: &str) -> Result<Range<u64>, SweepError> {
    let bad = || SweepError::Seeds(text.to_string());
    match text.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            Ok(a..b)
        }
        None => {
            let a: u64 = text.trim().parse().map_err(|_| bad())?;
            Ok(a..a + 1)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub run: usize,
    pub seed: u64,
    /// `section.key=value` pairs joined by `;`.
    pub params: String,
    pub exit: i32,
    pub status: String,
    pub observed: Option<u128>,
    pub budget: Option<u128>,
    pub ratio: Option<f64>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.ratio).reduce(f64::max)
    }

    /// Violations outrank horizon overruns, which outrank per-run errors.
    pub fn exit_code(&self) -> i32 {
        [EXIT_VIOLATION, EXIT_HORIZON, EXIT_PARSE]
            .into_iter()
            .find(|c| self.rows.iter().any(|r| r.exit == *c))
            .unwrap_or(EXIT_OK)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("run,seed,params,exit,status,observed,budget,ratio\n");
        let show = |v: Option<u128>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.run,
                r.seed,
                r.params,
                r.exit,
                r.status.replace(',', ";"),
                show(r.observed),
                show(r.budget),
                r.ratio.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
            );
        }
        let within = self.rows.iter().filter(|r| r.ratio.is_some_and(|x| x <= 1.0)).count();
        let budgeted = self.rows.iter().filter(|r| r.ratio.is_some()).count();
        let _ = writeln!(out, "# runs = {}", self.rows.len());
        let _ = writeln!(out, "# within_budget = {within}/{budgeted}");
        let _ = writeln!(
            out,
            "# max_ratio = {}",
            self.max_ratio().map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
        );
        out
    }
}

/// One sweep job before execution.
struct Job {
    run: usize,
    seed: u64,
    params: String,
    doc: Result<ScenarioDoc, String>,
}

/// Runs every grid point for every seed. Per-run failures land in the table.
pub fn sweep(
    template: &str,
    base_dir: &Path,
    grid: &Grid,
    seeds: Range<u64>,
    max_runs: usize,
) -> Result<SweepTable, SweepError> {
    let points = grid.points();
    let runs = points.len() * (seeds.end - seeds.start) as usize;
    if runs > max_runs {
        return Err(SweepError::TooLarge { runs, cap: max_runs });
    }
    let mut jobs = Vec::with_capacity(runs);
    for point in &points {
        for seed in seeds.clone() {
            let run = jobs.len();
            let fill = |s: &str| s.replace("{seed}", &seed.to_string()).replace("{run}", &run.to_string());
            let doc = ScenarioDoc::parse(&fill(template)).map_err(|e| e.to_string()).map(|mut doc| {
                for (axis, value) in point {
                    doc.set(&axis.section, &axis.key, &fill(value));
                }
                doc
            });
            let params = point
                .iter()
                .map(|(a, v)| format!("{}.{}={}", a.section, a.key, fill(v)).replace(',', " "))
                .collect::<Vec<_>>()
                .join(";");
            jobs.push(Job { run, seed, params, doc });
        }
    }

    let rows = jobs
        .into_par_iter()
        .map(|job| {
            let result = job
                .doc
                .and_then(|doc| Scenario::from_doc(&doc, base_dir).map_err(|e| e.to_string()))
                .map_err(|e| (EXIT_PARSE, e))
                .and_then(|s| execute(&s).map_err(|e| (e.exit_code(), e.to_string())));
            match result {
                Ok(outcome) => SweepRow {
                    run: job.run,
                    seed: job.seed,
                    params: job.params,
                    exit: outcome.exit_code(),
                    status: outcome.status.label().to_string(),
                    observed: outcome.budget.map(|b| b.observed),
                    budget: outcome.budget.map(|b| b.budget),
                    ratio: outcome.budget.map(|b| b.ratio()),
                    outcome: Some(outcome),
                },
                Err((exit, message)) => SweepRow {
                    run: job.run,
                    seed: job.seed,
                    params: job.params,
                    exit,
                    status: format!("error: {message}"),
                    observed: None,
                    budget: None,
                    ratio: None,
                    outcome: None,
                },
            }
        })
        .collect();
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEMPLATE: &str = "[algorithm]\nkind = discrete\n[graph]\ngenerator = cycle:4\nloads = uniform:max=100,seed={seed}\n";

    #[test]
    fn grid_points_in_order() {
        let grid = Grid::parse("graph.generator = path:3 ; path:4\n# note\nrun.max_rounds = 5;9\n").unwrap();
        let points = grid.points();
        assert_eq!(points.len(), 4);
        assert_eq!(points[1].iter().map(|(_, v)| *v).collect::<Vec<_>>(), ["path:3", "9"]);
        assert!(Grid::parse("generator = x").is_err());
        assert!(Grid::parse("a.b =").is_err());
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("3..7").unwrap(), 3..7);
        assert_eq!(parse_seeds("5").unwrap(), 5..6);
        assert!(parse_seeds("7..3").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn empty_grid_gives_an_empty_table() {
        let table = sweep(TEMPLATE, Path::new("."), &Grid::default(), 0..5, 10).unwrap();
        assert!(table.rows.is_empty());
        assert_eq!(table.exit_code(), EXIT_OK);
        assert!(table.render().starts_with("run,seed"));
    }

    #[test]
    fn errors_stay_in_their_rows() {
        let grid = Grid::parse("graph.generator = cycle:6 ; grid:3").unwrap();
        let table = sweep(TEMPLATE, Path::new("."), &grid, 0..3, 100).unwrap();
        assert_eq!(table.rows.len(), 6);
        assert!(table.rows[..3].iter().all(|r| r.exit == EXIT_OK && r.ratio.is_some_and(|x| x <= 1.0)));
        assert!(table.rows[3..].iter().all(|r| r.exit == EXIT_PARSE));
        assert_eq!(table.exit_code(), EXIT_PARSE);
        assert!(matches!(sweep(TEMPLATE, Path::new("."), &grid, 0..100, 10), Err(SweepError::TooLarge { .. })));
    }
}
