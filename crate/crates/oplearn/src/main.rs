use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use oplearn::domains::{validate_bundle, Bundle};
use oplearn::harness::{aggregate, evaluate_file, run_experiment, ExperimentConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Learn lifted STRIPS operators from directed exploration and measure
/// planning success on held-out tasks.
#[derive(Parser)]
#[command(name = "oplearn", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Re-derive and check a bundle's advertised statistics and solvability.
    Validate {
        /// Built-in bundle name (gripper, blocksworld, baking, baking-large)
        /// or a path to a bundle directory.
        bundle: String,
    },
    /// Run one experiment described by a TOML config file.
    Run {
        config: PathBuf,
    },
    /// Average finished runs into per-(bundle, method) mean ± SE curves.
    Aggregate {
        /// Run directories, each holding `manifest.toml` and `curve.csv`.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Directory the aggregated tables are written to.
        #[arg(long, default_value = "aggregated")]
        out: PathBuf,
    },
    /// Evaluate a serialized operator set against a bundle's test tasks.
    Evaluate {
        /// An `operators.pddl` document, e.g. as written by `run`.
        operators: PathBuf,
        bundle: String,
        /// Seed for planner tie-breaking during evaluation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Validate { bundle } => {
            let b = Bundle::resolve(&bundle)?;
            let report = validate_bundle(&b);
            print!("{}", report.render());
            if !report.ok() {
                bail!("bundle '{bundle}' failed validation");
            }
        }
        Cmd::Run { config } => {
            let src = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = ExperimentConfig::from_toml(&src)?;
            let run = run_experiment(&cfg)?;
            println!("bundle={} method={} seed={}", cfg.bundle, cfg.method, cfg.seed);
            println!("episodes={} steps_charged_for_demos={}", run.episodes, run.demo_steps);
            match run.converged_at {
                Some(s) => println!("converged at step {s}"),
                None => println!("budget exhausted without convergence"),
            }
            println!("final success rate: {:.6}", run.final_success_rate());
            println!("artifacts: {}", run.out_dir.display());
        }
        Cmd::Aggregate { dirs, out } => {
            let series = aggregate(&dirs, &out)?;
            for s in &series {
                let last = s.points.last().expect("series are non-empty");
                let flag = if s.single_run { " [single run, SE undefined]" } else { "" };
                println!(
                    "{} {} runs={} final={:.6} se={:.6}{flag}",
                    s.bundle,
                    s.method,
                    s.seeds.len(),
                    last.mean,
                    last.se
                );
            }
            println!("tables: {}", out.display());
        }
        Cmd::Evaluate { operators, bundle, seed } => {
            let b = Bundle::resolve(&bundle)?;
            let (res, names) = evaluate_file(&operators, &b, seed)?;
            for (name, ok) in names.iter().zip(&res.outcomes) {
                println!("{} {name}", if *ok { "pass" } else { "fail" });
            }
            let wins = res.outcomes.iter().filter(|&&b| b).count();
            println!("success rate: {:.6} ({wins}/{})", res.success_rate, names.len());
        }
    }
    Ok(())
}
