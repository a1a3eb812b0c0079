//! Slowly decaying initial profiles: tails, inverses and admissibility.

use kpp_front::profiles::{
    inverse_tail, make_algebraic, make_log_algebraic, make_stretched, oscillation_ratio, validate_admissibility,
    AdmissibilityProbe, ShiftSign,
};

fn main() -> kpp_front::Result<()> {
    let families = [
        ("algebraic alpha=4", make_algebraic(4.0, 1.0)?),
        ("stretched beta=0.3", make_stretched(0.3, 1.0)?),
        // borderline: u0' ln u0 / u0 tends to beta, not to 0
        ("stretched beta=0.5", make_stretched(0.5, 1.0)?),
        ("log-algebraic", make_log_algebraic(2.0, 1.0, 1.0)?),
    ];
    let probe = AdmissibilityProbe::default();
    for (name, u0) in &families {
        let report = validate_admissibility(u0, &probe)?;
        println!("{name}: admissible = {}", report.passed());
        for x in [10.0, 100.0, 1000.0] {
            let v = u0.eval(x);
            println!("  u0({x:>6}) = {v:.4e}   inverse -> {:.6}", inverse_tail(u0, v)?);
        }
        // Shifting by c*t barely changes u0 far out: the ratio tends to 1.
        for t in [5.0, 20.0, 40.0] {
            let r = oscillation_ratio(u0, |t| (-t).exp(), 2.0, t, ShiftSign::Plus)?;
            println!("  shift ratio at t = {t:>4}: {r:.5}");
        }
    }
    Ok(())
}
