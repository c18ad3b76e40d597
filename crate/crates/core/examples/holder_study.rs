//! Hölder regularity of `u -> D_u X_T`: log-log slope of
//! `sqrt(E |D_r X_T - D_0 X_T|^2)` against `r`, with a bootstrap lower bound.

use svde::kernel::Cosine;
use svde::montecarlo::independent_seed;
use svde::sensitivity::holder_statistic;
use svde::{make_grid, KernelSeries};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = make_grid(0.5, 256)?;
    let kernel = KernelSeries::new(0.5)?.with_term(0, Cosine::field(1.0))?;
    let pairs: Vec<(usize, usize)> = (2..=6).map(|e| (256 >> e, 0)).collect();
    let stat = holder_statistic(&kernel, &[0.0], &grid, 5000, 9, &pairs, 256)?;

    println!("{:>10} {:>14} {:>12}", "|r - v|", "L2 distance", "std err");
    for (sep, l2) in stat.separations.iter().zip(&stat.l2_differences) {
        println!("{sep:>10.5} {:>14.6e} {:>12.2e}", l2.mean, l2.std_error);
    }
    let lower = stat.bootstrap_lower_bound(200, 0.05, independent_seed(9));
    println!("\nslope {:?}, 5% bootstrap quantile {lower:?}", stat.slope);
    Ok(())
}
