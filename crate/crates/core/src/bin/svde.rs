use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use svde::cli::{run, CliError, Command, ExperimentConfig, ASSERTION_FAILED};

/// Stochastic Volterra experiment runner.
#[derive(Debug, Parser)]
#[command(name = "svde", version)]
struct Args {
    /// solve, girsanov-check, oracle-compare, derivative-check, cauchy-check,
    /// mollify-study or holder-study
    command: String,

    /// Flat key = value config file
    #[arg(long)]
    config: PathBuf,

    /// Exit with status 3 if any check fails
    #[arg(long)]
    assert: bool,

    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn threads() -> Result<usize, CliError> {
    match std::env::var("SVDE_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("SVDE_THREADS must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = (|| {
        let command: Command = args.command.parse()?;
        let config = ExperimentConfig::from_file(command, &args.config)?;
        let output = run(&config, threads()?)?;
        match &args.out {
            Some(path) => std::fs::write(path, &output.csv)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?,
            None => print!("{}", output.csv),
        }
        Ok::<_, CliError>(output.failed)
    })();
    match result {
        Ok(true) if args.assert => {
            eprintln!("svde: at least one check failed");
            ExitCode::from(ASSERTION_FAILED as u8)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("svde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
