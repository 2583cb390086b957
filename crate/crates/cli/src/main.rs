use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stiefel_relax::bench::{
    read_records, relative_gap, render_report, run_suite, BenchConfig, ReportFormat, ReportMode,
};
use stiefel_relax::instances::{generate, load_instance, save_instance, ProblemClass};
use stiefel_relax::relax::{extract_lifted, Relaxation};
use stiefel_relax::round::{primal_value, refine, round_solution, RefineSettings};
use stiefel_relax::solver::{solve, SolverSettings};
use stiefel_relax::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "stiefel-relax",
    version,
    about = "SDP lower bounds for quadratic programs over the Stiefel manifold"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write it as JSON.
    Gen {
        #[arg(long)]
        class: ProblemClass,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one relaxation of an instance file and round its solution.
    Solve {
        #[arg(long)]
        relaxation: Relaxation,
        #[arg(long = "in")]
        input: PathBuf,
        /// Polish the rounded point with Riemannian gradient descent.
        #[arg(long)]
        refine: bool,
        /// Tolerance for all three KKT residuals.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Run a benchmark suite described by a TOML file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Results CSV; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep instances already complete in the results file.
        #[arg(long)]
        resume: bool,
        /// Worker threads; overrides `workers` in the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarize a results CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// timing-table, gap-histogram or summary.
        #[arg(long)]
        mode: ReportMode,
        /// csv or md.
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Parameter(_) => EXIT_CONFIG,
                Error::Solver(_) => EXIT_SOLVER,
                _ => EXIT_FAILURE,
            })
        }
    }
}

fn run(command: Command) -> stiefel_relax::Result<u8> {
    match command {
        Command::Gen {
            class,
            n,
            p,
            seed,
            out,
        } => {
            let inst = generate(class, n, p, seed)?;
            save_instance(&inst, &out)?;
            println!(
                "wrote {class} instance (n={n}, p={p}, seed={seed}) to {}",
                out.display()
            );
            Ok(0)
        }
        Command::Solve {
            relaxation,
            input,
            refine: do_refine,
            tolerance,
        } => {
            let inst = load_instance(&input)?;
            let settings = SolverSettings::default().with_tolerance(tolerance);
            let sol = solve(&relaxation.build(&inst), &settings)?;
            println!("relaxation  {relaxation}");
            println!("status      {}", sol.status);
            println!("iterations  {}", sol.iterations);
            println!("time        {:.3}s", sol.wall_time_seconds);
            println!(
                "residuals   primal {:.2e}  dual {:.2e}  gap {:.2e}",
                sol.residuals.primal, sol.residuals.dual, sol.residuals.gap
            );
            if !sol.is_optimal() {
                return Ok(EXIT_SOLVER);
            }
            let d = sol.primal_objective;
            println!("bound d     {d}");
            let lifted = extract_lifted(&sol, inst.n(), inst.p())?;
            let point = round_solution(&inst, lifted.u(), lifted.x())?;
            let mut p_val = primal_value(&inst, &point)?;
            println!("rounded p   {p_val}");
            if do_refine {
                let out = refine(&inst, &point, &RefineSettings::default())?;
                p_val = out.value;
                println!(
                    "refined p   {p_val}  ({} iterations{})",
                    out.iterations,
                    if out.converged { "" } else { ", not converged" }
                );
            }
            println!("gap         {:.6e}", relative_gap(p_val, d).gamma);
            Ok(0)
        }
        Command::Bench {
            config,
            out,
            resume,
            workers,
        } => {
            let mut cfg = BenchConfig::load(&config).map_err(|e| match e {
                Error::Io { .. } => Error::Config(e.to_string()),
                e => e,
            })?;
            if let Some(out) = out {
                cfg.output = out;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let summary = run_suite(&cfg, resume)?;
            println!(
                "{} instances ({} kept from a previous run), {} records written to {}",
                summary.instances_total,
                summary.instances_skipped,
                summary.records_written,
                cfg.output.display()
            );
            if summary.non_optimal > 0 {
                eprintln!(
                    "{} records without an optimal solver status",
                    summary.non_optimal
                );
                return Ok(EXIT_SOLVER);
            }
            Ok(0)
        }
        Command::Report {
            input,
            mode,
            format,
        } => {
            let records = read_records(&input)?;
            print!("{}", render_report(&records, mode, format));
            Ok(0)
        }
    }
}
