//! B(m, T): the constant start that reaches spatial mean m at time T.
//! Its logarithm decays at the principal rate f0.

use kpp_front::cell::{solve_terminal_value, terminal_start_levels, CellNumerics};
use kpp_front::reaction::{make_fisher, make_periodic_fisher};
use kpp_front::spectral::eigenpair_at_zero;
use kpp_front::verify::fit_decay_rate;

fn main() -> kpp_front::Result<()> {
    let numerics = CellNumerics::default();

    let fisher = make_fisher();
    let r = solve_terminal_value(&fisher, 0.5, 3f64.ln(), 1e-12, &numerics)?;
    println!(
        "Fisher: B(1/2, ln 3) = {:.10} (exact 1/4), {} bisections",
        r.b, r.iterations
    );

    let f = make_periodic_fisher(0.5, 1.0)?;
    let horizons = [6.0, 8.0, 10.0, 12.0];
    let levels = terminal_start_levels(&f, 0.5, &horizons, 1e-10, &numerics)?;
    for (t, b) in horizons.iter().zip(&levels) {
        println!("  T = {t:>4}: B = {b:.6e}");
    }
    let samples: Vec<(f64, f64)> = horizons.iter().copied().zip(levels).collect();
    let rate = fit_decay_rate(&samples)?;
    let f0 = eigenpair_at_zero(&f, 1024)?.eigenvalue;
    println!(
        "fitted rate {rate:.6}, eigenvalue f0 {f0:.6}, rel. diff {:.2e}",
        (rate - f0).abs() / f0
    );
    Ok(())
}
