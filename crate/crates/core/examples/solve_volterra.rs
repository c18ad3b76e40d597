//! Euler and Picard solutions of `X_t = x + int_0^t (t - s) X_s ds + B_t`.
//!
//! Without noise the solution is `x cosh(t)`; the Euler error halves with the step.

use svde::kernel::{Cosine, Linear};
use svde::{make_grid, picard_solve, sample_brownian, solve_deterministic, solve_euler, KernelSeries};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kernel = KernelSeries::new(1.0)?.with_term(1, Linear::field(1.0))?;
    println!("{:>8} {:>14} {:>8}", "N", "|X(1)-cosh 1|", "ratio");
    let mut prev: Option<f64> = None;
    for n in [1_000, 2_000, 4_000, 8_000] {
        let grid = make_grid(1.0, n)?;
        let err = (solve_deterministic(&kernel, &[1.0], &grid)?.terminal()[0] - 1f64.cosh()).abs();
        let ratio = prev.map_or(String::from("-"), |p| format!("{:.3}", p / err));
        println!("{n:>8} {err:>14.3e} {ratio:>8}");
        prev = Some(err);
    }

    // with noise: Picard iteration converges to the Euler path on a short horizon
    let kernel = KernelSeries::new(0.5)?.with_term(0, Cosine::field(1.0))?;
    let grid = make_grid(0.5, 500)?;
    let noise = sample_brownian(&grid, 1, 42, 0)?;
    let euler = solve_euler(&kernel, &[0.0], &noise, &grid)?;
    let picard = picard_solve(&kernel, &[0.0], &noise, &grid, 100, 1e-13)?;
    println!(
        "\ncos drift, one path: Euler X(T) = {:.6}, Picard X(T) = {:.6} after {} iterations",
        euler.terminal()[0],
        picard.path.terminal()[0],
        picard.iterations
    );
    Ok(())
}
