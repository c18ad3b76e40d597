//! Residual of `int_0^t (t - s)^k f(s) ds = k! I^{k+1}[f](t)` under grid refinement.

use svde::kernel::{cauchy_check, GridFunction};
use svde::{make_grid, sample_brownian};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let levels = [250, 500, 1000, 2000, 4000];
    let brownian = sample_brownian(&make_grid(1.0, 4000)?, 1, 7, 0)?;

    println!(
        "{:>6} {:>14} {:>14} {:>14}",
        "N", "f = s, k = 2", "f = s^3, k = 4", "cos(B), k = 2"
    );
    for n in levels {
        let grid = make_grid(1.0, n)?;
        let s = GridFunction::from_scalar(&grid, |t| t);
        let cube = GridFunction::from_scalar(&grid, |t| t.powi(3));
        let stride = 4000 / n;
        let b = GridFunction::from_scalar(&grid, |t| {
            brownian.at((t / grid.dt()).round() as usize * stride)[0].cos()
        });
        println!(
            "{n:>6} {:>14.3e} {:>14.3e} {:>14.3e}",
            cauchy_check(&s, 2),
            cauchy_check(&cube, 4),
            cauchy_check(&b, 2)
        );
    }
    Ok(())
}
