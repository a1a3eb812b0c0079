//! Accelerating front from algebraic data: level sets move like
//! u0^{-1}((1-m)/m e^{-t}), i.e. exponentially for algebraic tails.

use kpp_front::frontsim::{extract_level_set, plan_domain, simulate_front, FrontNumerics, PlanOptions};
use kpp_front::logistic::solve_profile_default;
use kpp_front::profiles::make_algebraic;
use kpp_front::reaction::make_fisher;

fn main() -> kpp_front::Result<()> {
    let f = make_fisher();
    let u0 = make_algebraic(2.0, 1.0)?;
    let horizon = 10.0;
    let grid = plan_domain(&u0, 1.0, horizon, 0.25, &PlanOptions::default())?;
    println!("domain [{}, {}] with {} nodes", grid.x_left, grid.x_right, grid.nodes());

    let run = simulate_front(&f, &u0, horizon, &grid, &FrontNumerics::default())?;
    run.require_clean(horizon)?;
    let profile = solve_profile_default(&f)?;
    println!("{:>5} {:>10} {:>10} {:>8}", "t", "E_0.5", "predicted", "ratio");
    for t in [2.0, 4.0, 6.0, 8.0, 10.0] {
        let x = extract_level_set(&run, 0.5, t)?.rightmost().unwrap_or(f64::NAN);
        let p = profile.predict_level_position(&u0, 0.5, t)?;
        println!("{t:>5} {x:>10.4} {p:>10.4} {:>8.5}", x / p);
    }
    Ok(())
}
