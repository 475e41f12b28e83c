//! File-level commands behind the binary. Each returns a process exit code.

use std::fs;
use std::path::{Path, PathBuf};

use dealbal::graph::{generate_topology, serialize_graph};
use dealbal::{LoadVector, Rational};

use crate::runner::{execute, Outcome, Status, EXIT_IO, EXIT_OK, EXIT_PARSE};
use crate::scenario::{Scenario, ScenarioDoc};
use crate::spec::{build_loads, parse_graph_spec};
use crate::sweep::{parse_seeds, sweep, Grid};
use crate::trace::render;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DEALBAL_OUT_DIR";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Command-line overrides applied to the scenario before interpretation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub checks: Option<String>,
    pub max_rounds: Option<usize>,
    pub max_steps: Option<u64>,
    pub trace: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, doc: &mut ScenarioDoc) {
        if let Some(c) = &self.checks {
            doc.set("run", "checks", c);
        }
        if let Some(n) = self.max_rounds {
            doc.set("run", "max_rounds", &n.to_string());
        }
        if let Some(n) = self.max_steps {
            doc.set("run", "max_steps", &n.to_string());
        }
        if let Some(t) = &self.trace {
            doc.set("run", "trace", &t.display().to_string());
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

/// Parses, runs and persists one scenario.
pub fn run_scenario(path: &Path, overrides: &Overrides, out_dir: &Path) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_PARSE;
        }
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let scenario = ScenarioDoc::parse(&text).and_then(|mut doc| {
        overrides.apply(&mut doc);
        Scenario::from_doc(&doc, base)
    });
    let scenario = match scenario {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_PARSE;
        }
    };
    let outcome = match execute(&scenario) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let trace = out_dir.join(scenario.trace.clone().unwrap_or_else(|| format!("{}.csv", stem(path)).into()));
    let summary =
        out_dir.join(scenario.summary.clone().unwrap_or_else(|| format!("{}.summary.txt", stem(path)).into()));
    if let Err(e) = persist(&outcome, &trace, &summary) {
        eprintln!("error: {e}");
        return EXIT_IO;
    }
    print!("{}", outcome.render_summary());
    if let Status::Violation { at, check, detail } = &outcome.status {
        eprintln!("check {} violated at {at}: {detail}", check.name());
    }
    outcome.exit_code()
}

pub fn persist(outcome: &Outcome, trace: &Path, summary: &Path) -> Result<(), String> {
    write(trace, &render(&outcome.records))?;
    write(summary, &outcome.render_summary())
}

/// Runs a sweep and writes its table to `output` (or stdout).
pub fn run_sweep(template: &Path, grid: &Path, seeds: &str, max_runs: usize, output: Option<&Path>) -> i32 {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let prepared = read(template).and_then(|t| {
        let g = Grid::parse(&read(grid)?).map_err(|e| e.to_string())?;
        let s = parse_seeds(seeds).map_err(|e| e.to_string())?;
        Ok((t, g, s))
    });
    let (text, grid, seeds) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_PARSE;
        }
    };
    let base = template.parent().unwrap_or(Path::new("."));
    let table = match sweep(&text, base, &grid, seeds, max_runs) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_PARSE;
        }
    };
    let rendered = table.render();
    match output {
        Some(path) => {
            if let Err(e) = write(path, &rendered) {
                eprintln!("error: {e}");
                return EXIT_IO;
            }
        }
        None => print!("{rendered}"),
    }
    table.exit_code()
}

/// Builds the graph text for a spec such as `path:8+uniform:max=100,seed=3`.
/// Loads default to zero.
pub fn graph_text(spec: &str) -> Result<String, String> {
    let spec = parse_graph_spec(spec).map_err(|e| e.to_string())?;
    let graph = generate_topology(&spec.topology).map_err(|e| e.to_string())?;
    let loads = match &spec.loads {
        Some(l) => build_loads::<Rational>(&graph, l).map_err(|e| e.to_string())?,
        None => LoadVector::new(vec![Rational::from_integer(0.into()); graph.node_count()]).map_err(|e| e.to_string())?,
    };
    Ok(serialize_graph(&graph, &loads))
}

pub fn gen_graph(spec: &str, output: &Path) -> i32 {
    match graph_text(spec) {
        Ok(text) => match write(output, &text) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_IO
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PARSE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_text_defaults_to_zero_loads() {
        let text = graph_text("path:3").unwrap();
        assert_eq!(text, "n 3\nnode 0 0\nnode 1 0\nnode 2 0\nedge 0 1\nedge 1 2\n");
        assert!(graph_text("path:3+explicit:1/2,1,2").unwrap().contains("node 0 1/2"));
        assert!(graph_text("ring:3").is_err());
    }
}
