//! The spatially homogeneous profile phi' = f(phi) and its level times.

use kpp_front::logistic::solve_profile_default;
use kpp_front::profiles::make_algebraic;
use kpp_front::reaction::make_fisher;

fn main() -> kpp_front::Result<()> {
    let f = make_fisher();
    let profile = solve_profile_default(&f)?;

    let mut worst: f64 = 0.0;
    for k in 0..=400 {
        let t = -20.0 + 0.1 * k as f64;
        worst = worst.max((profile.eval(t) - t.exp() / (1.0 + t.exp())).abs());
    }
    println!("sup |phi - e^t/(1+e^t)| on [-20, 20] = {worst:.2e}");

    let u0 = make_algebraic(4.0, 1.0)?;
    for m in [0.25, 0.5, 0.75] {
        let tm = profile.level_time(m)?;
        let x = profile.predict_level_position(&u0, m, 10.0)?;
        println!("m = {m}: T_m = {tm:+.6}, predicted E_m(10) = {x:.4}");
    }
    Ok(())
}
