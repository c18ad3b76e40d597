//! Mollified approximations of the discontinuous drift `sign(x)` and the
//! convergence of `E[phi(X_T^n)]` toward the change-of-measure value for the
//! unmollified drift.

use svde::kernel::Sign;
use svde::mollify::{mollify_kernel, weak_convergence_study};
use svde::{make_grid, KernelSeries, TestFunction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = make_grid(0.5, 200)?;
    let base = KernelSeries::new(0.5)?.with_term(0, Sign::field())?;
    let levels = [2u32, 4, 16, 64]
        .iter()
        .map(|&n| Ok((n, mollify_kernel(&base, n, 32, 1)?)))
        .collect::<Result<Vec<_>, svde::SvdeError>>()?;
    // start off the discontinuity so the expectation is not zero by symmetry
    let phi = TestFunction::BoundedId(1.0);
    let table = weak_convergence_study(&levels, &base, &[0.2], &phi, grid.steps(), &grid, 20_000, 5)?;

    println!("{:>6} {:>12} {:>10}", "n", "estimate", "std err");
    for row in &table.rows {
        println!(
            "{:>6} {:>12.5} {:>10.5}",
            row.level, row.estimate.mean, row.estimate.std_error
        );
    }
    println!(
        "{:>6} {:>12.5} {:>10.5}",
        "ref", table.reference.mean, table.reference.std_error
    );
    println!(
        "\ntrend toward reference: {}, finest within 3 SE: {}",
        table.trend_toward_reference(3.0),
        table.finest_matches_reference(3.0)
    );
    Ok(())
}
