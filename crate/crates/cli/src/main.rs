use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dealbal_cli::commands::{default_out_dir, gen_graph, run_scenario, run_sweep, Overrides, OUT_DIR_ENV};
use dealbal_cli::sweep::DEFAULT_MAX_RUNS;

#[derive(Parser)]
#[command(name = "dealbal", version, about = "Run deal-agreement load balancing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file. Exit 0 ok, 2 parse error, 3 check violation, 4 horizon exceeded.
    Run {
        scenario: PathBuf,
        /// Comma-separated checks, replacing the scenario's list.
        #[arg(long)]
        check: Option<String>,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Trace CSV path, relative to the output directory.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Output directory for traces and summaries.
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
    /// Run a template scenario over a parameter grid and seed range.
    Sweep {
        template: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Half-open range `a..b`, or a single seed.
        #[arg(long, default_value = "0..1")]
        seeds: String,
        #[arg(long, default_value_t = DEFAULT_MAX_RUNS)]
        max_runs: usize,
        /// Write the table here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a graph file from a spec such as `cycle:8+uniform:max=100,seed=3`.
    GenGraph {
        spec: String,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run { scenario, check, max_rounds, max_steps, trace, out_dir } => {
            let overrides = Overrides { checks: check, max_rounds, max_steps, trace };
            run_scenario(&scenario, &overrides, &out_dir.unwrap_or_else(default_out_dir))
        }
        Command::Sweep { template, grid, seeds, max_runs, output } => {
            run_sweep(&template, &grid, &seeds, max_runs, output.as_deref())
        }
        Command::GenGraph { spec, output } => gen_graph(&spec, &output),
    };
    ExitCode::from(code as u8)
}
