use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coupledfix::cli::{self, problem::parse_list, RawProblem, EXIT_INVALID_INPUT};
use coupledfix::Error;

/// A comma-separated list of numbers, optionally in brackets: `1,2` or `[1, 2]`.
#[derive(Clone, Debug)]
struct List(Vec<f64>);

fn list(text: &str) -> Result<List, String> {
    parse_list(text).map(List)
}

#[derive(Parser)]
#[command(name = "coupledfix", version, about = "Coupled fixed points by Picard and Krasnoselskij iterations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one iteration scheme and write its trace.
    Run(Common),
    /// Estimate contractivity constants and classify an operator.
    Analyze(Common),
    /// Run the scheme for several relaxation weights.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated relaxation weights, each in (0, 1).
        #[arg(long, value_parser = list)]
        thetas: Option<List>,
    },
    /// List the built-in operators.
    ListOperators,
}

#[derive(Args)]
struct Common {
    /// Problem file (flat TOML); flags override its fields.
    #[arg(long, short)]
    problem: Option<PathBuf>,
    #[arg(long)]
    operator: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, value_parser = list, allow_hyphen_values = true)]
    x0: Option<List>,
    #[arg(long, value_parser = list, allow_hyphen_values = true)]
    y0: Option<List>,
    #[arg(long, value_parser = list, allow_hyphen_values = true)]
    reference: Option<List>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<i64>,
    #[arg(long)]
    guard_domain: Option<bool>,
    #[arg(long)]
    seed: Option<i64>,
    #[arg(long)]
    samples: Option<i64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv
    #[arg(long)]
    format: Option<String>,
}

impl Common {
    fn resolve(self, thetas: Option<List>) -> Result<RawProblem, Error> {
        let base = match &self.problem {
            Some(p) => RawProblem::load(p)?,
            None => RawProblem::default(),
        };
        let flags = RawProblem {
            operator: self.operator,
            scheme: self.scheme,
            theta: self.theta,
            thetas: thetas.map(|l| l.0),
            tol: self.tol,
            max_iter: self.max_iter,
            guard_domain: self.guard_domain,
            x0: self.x0.map(|l| l.0),
            y0: self.y0.map(|l| l.0),
            reference: self.reference.map(|l| l.0),
            seed: self.seed,
            samples: self.samples,
            out: self.out,
            format: self.format,
            ..RawProblem::default()
        };
        Ok(base.merge(flags))
    }
}

fn execute(command: Command) -> Result<i32, Error> {
    match command {
        Command::Run(common) => {
            let spec = common.resolve(None)?.run_spec()?;
            let trace = cli::run(&spec)?;
            cli::emit(spec.out.as_deref(), &cli::render_trace(&trace, spec.format)?)?;
            eprintln!(
                "{}: {} after {} iterations, residual {:e}",
                trace.operator_name,
                trace.status,
                trace.iterations(),
                trace.final_residual()
            );
            Ok(trace.status.exit_code())
        }
        Command::Analyze(common) => {
            let spec = common.resolve(None)?.analyze_spec()?;
            let report = cli::analyze(&spec)?;
            cli::emit(spec.out.as_deref(), &cli::render_report(&report)?)?;
            Ok(0)
        }
        Command::Sweep { common, thetas } => {
            let spec = common.resolve(thetas)?.run_spec()?;
            let rows = cli::sweep(&spec)?;
            cli::emit(spec.out.as_deref(), &cli::sweep_to_csv(&rows)?)?;
            Ok(cli::sweep_exit_code(&rows))
        }
        Command::ListOperators => {
            print!("{}", cli::list_operators());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(parsed.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID_INPUT as u8)
        }
    }
}
