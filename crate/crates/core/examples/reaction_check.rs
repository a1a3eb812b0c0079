//! Checks the KPP structure conditions for a few reaction terms.
//!
//! ```bash
//! cargo run --example reaction_check
//! ```

use kpp_front::reaction::{make_fisher, make_periodic_fisher, validate_kpp, Nonlinearity, ReactionKind};

fn show(f: &Nonlinearity) -> kpp_front::Result<()> {
    let report = validate_kpp(f, 64, 64)?;
    println!("{} -> {}", f.name(), if report.passed() { "KPP" } else { "not KPP" });
    for e in &report.entries {
        println!("  {:<28} {:?}  worst {:.3e}", e.name, e.status, e.worst_violation);
    }
    Ok(())
}

fn main() -> kpp_front::Result<()> {
    show(&make_fisher())?;
    show(&make_periodic_fisher(0.5, 1.0)?)?;

    // u^2 (1 - u) has f'(0) = 0: monostable but not KPP.
    let bistable = Nonlinearity::custom(
        "u^2(1-u)",
        1.0,
        ReactionKind::Homogeneous,
        |_, u| u * u * (1.0 - u),
        |_| 0.0,
        |_| -1.0,
    )?;
    show(&bistable)?;
    Ok(())
}
