use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use surfhop::harness::config::parse_number;
use surfhop::harness::verify::{verify_all, VerifyOptions};
use surfhop::harness::{parse_config, run_convergence_study, run_experiment, SolverKind};
use surfhop::{Error, Result};

#[derive(Parser)]
#[command(name = "surfhop", version, about = "Semiclassical surface-hopping simulator")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Preset: 1d-pure, 1d-mixed, 1d-pure-longtime or 2d-pure.
    #[arg(long)]
    preset: Option<String>,
    /// JSON config file layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set hybrid.refinement=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Epsilon, e.g. `2^-8`, `1/256` or `0.00390625`.
        #[arg(long, value_parser = eps_arg)]
        epsilon: Option<f64>,
        /// Solver name, `both`, `all` or a comma-separated list.
        #[arg(long)]
        solver: Option<String>,
    },
    /// Run the reference and the hybrid model over several epsilons.
    Study {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated epsilon list (at least three).
        #[arg(long, value_delimiter = ',', value_parser = eps_arg, required = true)]
        epsilons: Vec<f64>,
    },
    /// Print residuals of the potential and identity checks.
    Verify {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
}

fn eps_arg(s: &str) -> std::result::Result<f64, String> {
    match parse_number(s) {
        Some(v) if v > 0.0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Run { cfg, epsilon, solver } => {
            let mut overrides = cfg.overrides.clone();
            if let Some(s) = solver {
                let list: Vec<&str> = SolverKind::parse_list(&s)?.iter().map(|k| k.name()).collect();
                overrides.push(format!("solvers={}", serde_json::to_string(&list)?));
            }
            let (raw, config) = parse_config(cfg.preset.as_deref(), cfg.config.as_deref(), &overrides, epsilon)?;
            let report = run_experiment(&config, Some(&raw), cfg.out.as_deref())?;
            for o in &report.outcomes {
                let (pp, pm) = o.final_p();
                print!("{:<13} P+ = {pp:.6}  P- = {pm:.6}", o.solver.name());
                if let Some(e) = o.err {
                    print!("  Err = {e:.6e}");
                }
                println!("  ({:.1}s)", o.wall_seconds);
            }
            Ok(true)
        }
        Command::Study { cfg, epsilons } => {
            let (_, config) = parse_config(cfg.preset.as_deref(), cfg.config.as_deref(), &cfg.overrides, None)?;
            let report = run_convergence_study(&config, &epsilons, cfg.out.as_deref())?;
            println!("epsilon,err");
            for r in &report.rows {
                println!("{:.6e},{:.6e}", r.epsilon, r.err);
            }
            println!("slope {:.4}", report.slope);
            Ok(true)
        }
        Command::Verify { samples, seed } => {
            let opts = VerifyOptions {
                samples,
                seed,
                ..Default::default()
            };
            let mut ok = true;
            for r in verify_all(&opts)? {
                println!(
                    "{:<11} unitarity {:.1e}  diag {:.1e}  skew {:.1e}  Re b {:.1e}  b-fd {:.1e}  conj {:.1e}  lap {:.1e}  berry {:.1e}  {}",
                    format!("{:?}", r.model),
                    r.unitarity,
                    r.diagonalisation,
                    r.skew,
                    r.real_part,
                    r.coupling_fd,
                    r.conjugation,
                    r.laplacian,
                    r.berry,
                    if r.passes() { "ok" } else { "FAIL" }
                );
                ok &= r.passes();
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
