//! Two independent estimators of `E[phi(X_T)]` for the drift `cos(x)`:
//! Euler paths, and Brownian paths reweighted by the stochastic exponential
//! of the collapsed drift functional.

use svde::girsanov::weak_estimator;
use svde::kernel::Cosine;
use svde::montecarlo::{euler_estimator, independent_seed};
use svde::{make_grid, KernelSeries, TestFunction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = make_grid(0.5, 500)?;
    let kernel = KernelSeries::new(0.5)?.with_term(0, Cosine::field(1.0))?;
    let n_paths = 50_000;
    let seed = 1;

    println!("{:>10} {:>20} {:>20} {:>8}", "phi", "Euler", "Girsanov", "z");
    for phi in [
        TestFunction::Id,
        TestFunction::Square,
        TestFunction::Sin,
        TestFunction::IndicatorLe(0.5),
    ] {
        let euler = euler_estimator(&kernel, &[0.0], &phi, grid.steps(), &grid, n_paths, seed)?;
        let weak = weak_estimator(
            &kernel,
            &[0.0],
            &phi,
            grid.steps(),
            &grid,
            n_paths,
            independent_seed(seed),
        )?;
        let z = (euler.mean - weak.estimate.mean).abs() / euler.combined_se(&weak.estimate);
        println!(
            "{:>10} {:>11.5} +- {:.5} {:>11.5} +- {:.5} {z:>8.2}",
            phi.to_string(),
            euler.mean,
            euler.std_error,
            weak.estimate.mean,
            weak.estimate.std_error
        );
        if phi == TestFunction::Id {
            let d = weak.diagnostics;
            println!(
                "{:>10} mean weight {:.5} +- {:.5}, ESS {:.0} of {}",
                "", d.mean_weight, d.mean_weight_se, d.effective_sample_size, d.n
            );
        }
    }
    Ok(())
}
