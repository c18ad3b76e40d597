//! Drives the batch runner from code, as the `svde` binary does.

use svde::cli::{run, Command, ExperimentConfig};

const CONFIG: &str = "
# Euler vs change-of-measure estimates for the drift cos(x)
kernel  = cos_x
T       = 0.5
N       = 400
n_paths = 20000
seed    = 11
phi     = id, square, sin
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::parse(Command::OracleCompare, CONFIG)?;
    let output = run(&config, 0)?;
    print!("{}", output.csv);
    if output.failed {
        eprintln!("some checks failed");
    }
    Ok(())
}
