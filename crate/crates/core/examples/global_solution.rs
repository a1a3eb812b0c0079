//! Entire-in-time solution of the cell problem, normalized to mean 1/2 at t = 0.

use kpp_front::cell::{construct_global_solution, trajectory_distance, CellNumerics};
use kpp_front::reaction::{make_fisher, make_periodic_fisher};

fn main() -> kpp_front::Result<()> {
    let numerics = CellNumerics::default();

    let g = construct_global_solution(&make_fisher(), 1e6, 10.0, &numerics)?;
    println!("Fisher: alpha = {:.5}, omega = {:.5}", g.alpha, g.omega);
    for t in [-5.0f64, 0.0, 5.0] {
        let exact = t.exp() / (1.0 + t.exp());
        println!("  mean({t:+}) = {:.8}  logistic {exact:.8}", g.mean_at(t));
    }
    let coarse = construct_global_solution(&make_fisher(), 100.0, 10.0, &numerics)?;
    let fine = construct_global_solution(&make_fisher(), 1000.0, 10.0, &numerics)?;
    println!(
        "  n = 100 vs 1000: {:.2e}",
        trajectory_distance(&coarse, &fine, &[-5.0, 0.0, 5.0])
    );

    let f = make_periodic_fisher(0.5, 1.0)?;
    let g = construct_global_solution(&f, 1e8, 15.0, &numerics)?;
    println!(
        "periodic a=0.5: f0 = {:.6}, f1 = {:.6}, alpha = {:.5}, omega = {:.5}",
        g.f0, g.f1, g.alpha, g.omega
    );
    for m in [0.1, 0.5, 0.9] {
        println!("  mean reaches {m} at t = {:+.5}", g.mean_crossing_time(m)?);
    }
    Ok(())
}
