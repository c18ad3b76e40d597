//! Truncated power-series kernels: `sin(t - s)` and `(t - s)^alpha`.

use svde::kernel::Constant;
use svde::{eval_kernel, fractional_kernel, sin_kernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let one = Constant::field(vec![1.0]);

    println!("sin kernel on [0, 1]");
    println!("{:>6} {:>12} {:>14}", "k_max", "tail bound", "max |error|");
    for k_max in [1, 2, 4, 8] {
        let k = sin_kernel(one.clone(), k_max, 1.0)?;
        let err = (0..=200)
            .map(|i| i as f64 / 200.0)
            .map(|lag| Ok((eval_kernel(&k, lag, 0.0, &[0.0])?[0] - lag.sin()).abs()))
            .collect::<Result<Vec<f64>, svde::SvdeError>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!("{k_max:>6} {:>12.3e} {err:>14.3e}", k.tail_bound());
    }

    println!("\n(t - s)^-0.4 expanded about t - s = 1");
    println!("{:>6} {:>10} {:>14}", "n_max", "lag", "rel. error");
    for n_max in [20, 50, 200] {
        let k = fractional_kernel(-0.4, one.clone(), n_max, 1.9)?;
        for lag in [0.05, 0.2, 1.0, 1.8] {
            let v = eval_kernel(&k, lag, 0.0, &[0.0])?[0];
            let direct = lag.powf(-0.4);
            println!("{n_max:>6} {lag:>10} {:>14.3e}", ((v - direct) / direct).abs());
        }
    }
    Ok(())
}
