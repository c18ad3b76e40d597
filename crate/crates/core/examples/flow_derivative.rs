//! Flow and Malliavin derivatives against common-noise finite differences
//! and the exponential closed form.

use svde::kernel::{Cosine, Linear};
use svde::sensitivity::DerivativeSolver;
use svde::{make_grid, sample_brownian, solve_euler, KernelSeries};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = make_grid(0.5, 10_000)?;
    let n = grid.steps();
    let kernel = KernelSeries::new(0.5)?.with_term(0, Cosine::field(1.0))?;
    let solver = DerivativeSolver::new(&kernel, &grid)?;
    let (x, h) = (0.3, 1e-4);

    println!(
        "{:>5} {:>14} {:>14} {:>10}",
        "path", "dX_T/dx", "central diff", "rel err"
    );
    for p in 0..5 {
        let noise = sample_brownian(&grid, 1, 3, p)?;
        let path = solve_euler(&kernel, &[x], &noise, &grid)?;
        let flow = solver.malliavin_at(&path, 0, n)?[0];
        let up = solve_euler(&kernel, &[x + h], &noise, &grid)?.terminal()[0];
        let down = solve_euler(&kernel, &[x - h], &noise, &grid)?.terminal()[0];
        let fd = (up - down) / (2.0 * h);
        println!("{p:>5} {flow:>14.8} {fd:>14.8} {:>10.2e}", ((flow - fd) / flow).abs());
    }

    // drift lambda x: D_u X_T = exp(lambda (T - u))
    let grid = make_grid(1.0, 4000)?;
    let kernel = KernelSeries::new(1.0)?.with_term(0, Linear::field(0.7))?;
    let solver = DerivativeSolver::new(&kernel, &grid)?;
    let path = solve_euler(&kernel, &[0.0], &sample_brownian(&grid, 1, 3, 0)?, &grid)?;
    println!("\n{:>6} {:>12} {:>12}", "u", "D_u X_T", "exact");
    for u in [0, 1000, 2000, 3000, 4000] {
        let d = solver.malliavin_at(&path, u, 4000)?[0];
        println!(
            "{:>6.2} {d:>12.6} {:>12.6}",
            grid.node(u),
            (0.7 * (1.0 - grid.node(u))).exp()
        );
    }
    Ok(())
}
