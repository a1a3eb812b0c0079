//! Principal periodic eigenpairs of the linearizations at 0 and 1.

use kpp_front::reaction::make_periodic_fisher;
use kpp_front::spectral::{eigenpair_at_one, eigenpair_at_zero};

fn main() -> kpp_front::Result<()> {
    println!("{:>6} {:>14} {:>14} {:>12}", "a", "f0", "f1", "residual");
    for a in [0.0, 0.25, 0.5, 0.75, 0.9] {
        let f = make_periodic_fisher(a, 1.0)?;
        let zero = eigenpair_at_zero(&f, 512)?;
        let one = eigenpair_at_one(&f, 512)?;
        println!(
            "{a:>6} {:>14.10} {:>14.10} {:>12.2e}",
            zero.eigenvalue,
            one.rate(),
            zero.residual()
        );
    }
    // The mean of f_u(x, 0) is 1; Jensen-type gain pushes f0 above it.
    let f = make_periodic_fisher(0.5, 1.0)?;
    let pair = eigenpair_at_zero(&f, 2048)?;
    println!(
        "a = 0.5, N = 2048: f0 = {:.10}, int psi = {:.6}",
        pair.eigenvalue,
        pair.integral()
    );
    Ok(())
}
