use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use adiabat::runner::{builtin_scenarios, load_scenario, run, sweep, write_run, write_sweep, OutputFormat};
use adiabat::Error;

#[derive(Parser)]
#[command(name = "adiabat", version, about = "Adiabatic and jumping evolution scenarios")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario (builtin name or JSON file).
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long, env = "ADIABAT_OUT_DIR", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Run a scenario for each value of one parameter.
    Sweep {
        #[arg(long)]
        scenario: String,
        /// One of T, N, r_jump, rel_std, a, theta_g (units of pi), k. T is in us.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long, env = "ADIABAT_OUT_DIR", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the builtin scenario names.
    ListScenarios,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else if matches!(e, Error::Io(_)) {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::ListScenarios => {
            for s in builtin_scenarios() {
                println!("{:8} {}", s.name, s.description);
            }
            Ok(())
        }
        Cmd::Run { scenario, out, seed, format } => (|| {
            let format: OutputFormat = format.parse()?;
            let mut sc = load_scenario(&scenario)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            let r = run(&sc)?;
            for p in write_run(&r, &out, format)? {
                println!("{}", p.display());
            }
            Ok(())
        })(),
        Cmd::Sweep { scenario, param, values, out, seed } => (|| {
            let mut sc = load_scenario(&scenario)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            let results = sweep(&sc, &param, &values)?;
            println!("{}", write_sweep(&sc, &results, &param, &out)?.display());
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
