use std::fmt::Display;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ceasim::analysis::{efficiency_frontier, nmb, strategy_totals, summary, StrategyTotals};
use ceasim::document::{load_model, LoadedModel};
use ceasim::engine::run_model;
use ceasim::model::{to_dot, CountingMethod};
use ceasim::report;
use ceasim::uncertainty::{ceac, evpi, export_psa, psa_summary, run_dsa, run_psa, update_heterogeneity};

#[derive(Parser)]
#[command(
    name = "ceasim",
    version,
    about = "Discrete-time cohort models for cost-effectiveness analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Model document
    model: PathBuf,
    /// Directory for emitted CSVs
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the document's cycle count
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    cycles: Option<u64>,
    /// Override the counting method (start, end, life-table)
    #[arg(long, value_parser = parse_method)]
    method: Option<CountingMethod>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every strategy; writes counts.csv, values.csv, totals.csv
    Run(ModelArgs),
    /// Run the document's [dsa] bounds; writes dsa.csv
    Dsa {
        #[command(flatten)]
        args: ModelArgs,
        /// Worker threads (does not change results)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the document's [psa] marginals; writes psa.csv, ceac.csv, evpi.csv
    Psa {
        #[command(flatten)]
        args: ModelArgs,
        /// Number of parameter draws
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        draws: u64,
        /// Seed fixing every draw
        #[arg(long)]
        seed: u64,
        /// Worker threads (does not change results)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-run per [population] row and pool; writes heterogeneity.csv
    Update {
        #[command(flatten)]
        args: ModelArgs,
        /// Worker threads (does not change results)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Load a model document and report whether it is valid
    Validate {
        /// Model document
        model: PathBuf,
    },
    /// Print one strategy's transition diagram as Graphviz DOT
    Diagram {
        /// Model document
        model: PathBuf,
        /// Strategy to draw
        strategy: String,
    },
}

fn parse_method(s: &str) -> Result<CountingMethod, String> {
    CountingMethod::parse(s)
        .ok_or_else(|| format!("unknown counting method `{s}` (expected start, end, or life-table)"))
}

/// λ grid backing ceac.csv and evpi.csv: 0 to 100,000 in steps of 1,000.
fn lambda_grid() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) * 1000.0).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            // single machine-parsable line, whatever the source
            eprintln!("error: {}", message.replace('\n', "; "));
            ExitCode::from(1)
        }
    }
}

fn fail(e: impl Display) -> String {
    e.to_string()
}

fn dispatch(command: Command) -> Result<(), String> {
    match command {
        Command::Run(args) => {
            let loaded = load(&args)?;
            let result = run_model(&loaded.spec, loaded.lifetable.as_ref()).map_err(fail)?;
            let totals = strategy_totals(&result);
            print_summary(&totals)?;
            let out = out_dir(&args.out)?;
            write_csv(out.join("counts.csv"), |f| report::write_counts(&result, f).map_err(fail))?;
            write_csv(out.join("values.csv"), |f| report::write_values(&result, f).map_err(fail))?;
            write_csv(out.join("totals.csv"), |f| report::write_totals(&result, f).map_err(fail))?;
            Ok(())
        }
        Command::Dsa { args, threads } => {
            configure_threads(threads)?;
            let loaded = load(&args)?;
            let dsa = loaded
                .dsa
                .as_ref()
                .ok_or("the model document has no [dsa] section")?;
            let result = run_dsa(&loaded.spec, dsa, loaded.lifetable.as_ref()).map_err(fail)?;
            for row in &result.rows {
                if let Err(message) = &row.outcome {
                    eprintln!(
                        "warning: {} at its {} bound {} failed: {message}",
                        row.parameter,
                        row.bound.label(),
                        row.value,
                    );
                }
            }
            print_summary(&result.base)?;
            let out = out_dir(&args.out)?;
            write_csv(out.join("dsa.csv"), |f| report::write_dsa(&result, f).map_err(fail))?;
            Ok(())
        }
        Command::Psa { args, draws, seed, threads } => {
            configure_threads(threads)?;
            let loaded = load(&args)?;
            let psa = loaded
                .psa
                .as_ref()
                .ok_or("the model document has no [psa] section")?;
            let result = run_psa(&loaded.spec, psa, draws as usize, seed, loaded.lifetable.as_ref())
                .map_err(fail)?;
            let means = psa_summary(&result).map_err(fail)?;
            println!("{} draws, seed {}\n", result.draws.len(), result.seed);
            print_summary(&means.means)?;
            let grid = lambda_grid();
            let curves = ceac(&result, &grid);
            let points = evpi(&result, &grid);
            let out = out_dir(&args.out)?;
            write_csv(out.join("psa.csv"), |f| export_psa(&result, f).map_err(fail))?;
            write_csv(out.join("ceac.csv"), |f| report::write_ceac(&curves, f).map_err(fail))?;
            write_csv(out.join("evpi.csv"), |f| report::write_evpi(&points, f).map_err(fail))?;
            Ok(())
        }
        Command::Update { args, threads } => {
            configure_threads(threads)?;
            let loaded = load(&args)?;
            let pop = loaded
                .population
                .as_ref()
                .ok_or("the model document has no [population] section")?;
            let result =
                update_heterogeneity(&loaded.spec, pop, loaded.lifetable.as_ref()).map_err(fail)?;
            println!("{} population rows, weights pooled\n", result.rows.len());
            print_summary(&result.means)?;
            let out = out_dir(&args.out)?;
            write_csv(out.join("heterogeneity.csv"), |f| {
                report::write_heterogeneity(&result, f).map_err(fail)
            })?;
            Ok(())
        }
        Command::Validate { model } => {
            let loaded = load_model(&model).map_err(fail)?;
            let plural = |n: usize, one: &str, many: &str| {
                format!("{n} {}", if n == 1 { one } else { many })
            };
            println!(
                "ok: {} ({}, {}, {})",
                model.display(),
                plural(loaded.spec.strategies.len(), "strategy", "strategies"),
                plural(loaded.spec.init.len(), "state", "states"),
                plural(loaded.spec.cycles, "cycle", "cycles"),
            );
            Ok(())
        }
        Command::Diagram { model, strategy } => {
            let loaded = load_model(&model).map_err(fail)?;
            let spec = loaded
                .spec
                .strategies
                .iter()
                .find(|s| s.name() == strategy)
                .ok_or_else(|| {
                    let known: Vec<&str> =
                        loaded.spec.strategies.iter().map(|s| s.name()).collect();
                    format!("unknown strategy `{strategy}` (known: {})", known.join(", "))
                })?;
            print!("{}", to_dot(spec));
            Ok(())
        }
    }
}

fn load(args: &ModelArgs) -> Result<LoadedModel, String> {
    let mut loaded = load_model(&args.model).map_err(fail)?;
    if let Some(cycles) = args.cycles {
        loaded.spec.cycles = cycles as usize;
    }
    if let Some(method) = args.method {
        loaded.spec.method = method;
    }
    Ok(loaded)
}

fn print_summary(totals: &[StrategyTotals]) -> Result<(), String> {
    let frontier = efficiency_frontier(totals).map_err(fail)?;
    let nmb = nmb(totals, &[]).map_err(fail)?;
    print!("{}", summary(totals, &frontier, &nmb));
    Ok(())
}

fn configure_threads(threads: Option<usize>) -> Result<(), String> {
    let Some(n) = threads else { return Ok(()) };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot configure {n} threads: {e}"))
}

fn out_dir(dir: &Path) -> Result<&Path, String> {
    fs::create_dir_all(dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
    Ok(dir)
}

fn write_csv(path: PathBuf, write: impl FnOnce(File) -> Result<(), String>) -> Result<(), String> {
    let file =
        File::create(&path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    write(file).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
