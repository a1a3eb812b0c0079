//! Periodic medium: pointwise level sets oscillate within each cell, so the
//! front is read off window averages over one period instead.

use kpp_front::cell::{construct_global_solution, CellNumerics};
use kpp_front::frontsim::{
    extract_average_level_set, extract_level_set, plan_domain, simulate_front, FrontNumerics, PlanOptions,
};
use kpp_front::profiles::make_algebraic;
use kpp_front::reaction::make_periodic_fisher;
use kpp_front::spectral::eigenpair_at_zero;
use kpp_front::verify::{verify_mean_levelsets, MeanCheckOptions};

fn main() -> kpp_front::Result<()> {
    let f = make_periodic_fisher(0.5, 1.0)?;
    let u0 = make_algebraic(2.0, 1.0)?;
    let horizon = 10.0;
    let f0 = eigenpair_at_zero(&f, 512)?.eigenvalue;
    let opts = PlanOptions {
        dx: 1.0 / 32.0,
        ..Default::default()
    };
    let grid = plan_domain(&u0, f0, horizon, 0.5, &opts)?;
    let run = simulate_front(&f, &u0, horizon, &grid, &FrontNumerics::default())?;

    let pointwise = extract_level_set(&run, 0.5, horizon)?;
    let averaged = extract_average_level_set(&run, 0.5, horizon, 1.0)?;
    println!("pointwise crossings: {}", pointwise.points().len());
    println!("averaged rightmost:  {:?}", averaged.rightmost());

    let g = construct_global_solution(&f, 1e8, 15.0, &CellNumerics::default())?;
    let report = verify_mean_levelsets(&run, &g, &[0.5], horizon, 0.05, &MeanCheckOptions::default())?;
    print!("{}", report.summary());
    Ok(())
}
