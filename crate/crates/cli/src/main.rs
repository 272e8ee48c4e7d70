use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use svm_robust::config::parse_config;
use svm_robust::io::{
    emit_report, load_empirical, read_line_measure, read_measure, read_report, report_to_csv,
    write_model,
};
use svm_robust::losses::{verify_loss_contract, ContractGrid};
use svm_robust::prokhorov::{prokhorov_1d_weighted, prokhorov_measures};
use svm_robust::robustness::run_experiment;
use svm_robust::{train, Error, Kernel, Loss, SolverOptions};

#[derive(Parser)]
#[command(
    name = "svm",
    version,
    about = "Kernel SVMs on finitely supported measures and their robustness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a CSV dataset (header x_1..x_d,y) and write the model as JSON.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// hinge, logistic, absolute, eps_insensitive:E, huber:D, pinball:T
        #[arg(long)]
        loss: String,
        /// rbf:G, linear, poly:D:C, exp
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input-space radius; required for unbounded kernels.
        #[arg(long)]
        domain_bound: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prokhorov distance between two measures stored as JSON. In `1d` mode
    /// the atoms are single values: `{"atoms": [[v], ...], "weights": [...]}`.
    Prokhorov {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Finite)]
        mode: Mode,
    },
    /// Run a Monte Carlo experiment described by a TOML config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides `base_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a loss against the convex Lipschitz contract on a grid.
    VerifyLoss {
        #[arg(long)]
        loss: String,
    },
    /// Convert a JSON report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Finite,
    #[value(name = "1d")]
    OneD,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Error> {
    s.parse()
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            data,
            loss,
            kernel,
            lambda,
            seed,
            domain_bound,
            tolerance,
            max_iterations,
            out,
        } => {
            let loss: Loss = parse(&loss)?;
            let kernel = parse::<Kernel>(&kernel)?.with_domain_bound(domain_bound)?;
            let defaults = SolverOptions::default();
            let opts = SolverOptions {
                seed,
                tolerance,
                max_iterations: max_iterations.unwrap_or(defaults.max_iterations),
                ..defaults
            };
            opts.validate()?;
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "--lambda must be positive, got {lambda}"
                )));
            }
            let measure = load_empirical(&data)?;
            let model = train(&measure, &loss, &kernel, lambda, &opts)?;
            write_model(&out, &model)?;
            println!(
                "trained on {} atoms (d = {}): objective {}, certificate {:.3e}, |f|_H {}",
                measure.len(),
                measure.dim(),
                model.objective,
                model.certificate_residual,
                model.norm()
            );
        }
        Command::Prokhorov { a, b, mode } => match mode {
            Mode::Finite => {
                let (pa, pb) = (read_measure(&a)?, read_measure(&b)?);
                println!("{}", json(&prokhorov_measures(&pa, &pb)?)?)
            }
            Mode::OneD => {
                let (la, lb) = (read_line_measure(&a)?, read_line_measure(&b)?);
                let d = prokhorov_1d_weighted(&la.points, &la.weights, &lb.points, &lb.weights);
                println!("{}", serde_json::json!({ "epsilon": d }));
            }
        },
        Command::Experiment {
            config,
            out,
            csv,
            jobs,
            seed,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let cfg = cfg.validate()?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                if j == 0 {
                    return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
                }
                pool = pool.num_threads(j);
            }
            let pool = pool
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            let outcome = pool.install(|| run_experiment(&cfg))?;
            emit_report(&outcome.report, &outcome.timings, &out, csv.as_deref())?;
            println!("verdict: {}", outcome.report.verdict);
            for p in &outcome.report.predicates {
                println!("  [{}] {}: {}", p.verdict, p.name, p.detail);
            }
        }
        Command::VerifyLoss { loss } => {
            let loss: Loss = parse(&loss)?;
            let report = verify_loss_contract(&loss, &ContractGrid::default());
            println!("{}", json(&report)?);
            if !report.passed() {
                return Err(Error::ContractViolation {
                    loss: loss.to_string(),
                    detail: "see report above".into(),
                });
            }
        }
        Command::Report { input, format, out } => {
            let report = read_report(&input)?;
            let text = match format {
                Format::Csv => report_to_csv(&report),
            };
            write_or_print(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
