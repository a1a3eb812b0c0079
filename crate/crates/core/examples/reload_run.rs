//! Saves a run to disk, reloads it and checks the manifest hashes.

use kpp_front::artifacts::{load_run, write_run_files, Manifest};
use kpp_front::frontsim::{simulate_front, FrontGrid, FrontNumerics};
use kpp_front::profiles::make_stretched;
use kpp_front::reaction::make_fisher;

fn main() -> kpp_front::Result<()> {
    let f = make_fisher();
    let u0 = make_stretched(0.5, 1.0)?;
    let grid = FrontGrid::new(-10.0, 200.0, 0.25)?;
    let run = simulate_front(&f, &u0, 3.0, &grid, &FrontNumerics::default())?;

    let dir = std::env::temp_dir().join("kpp-reload");
    let files = write_run_files(&run, &dir)?;
    let mut manifest = Manifest::new("simulate", serde_json::Value::Null);
    manifest.run = Some(
        serde_json::to_value(kpp_front::artifacts::run_record(
            &run,
            &kpp_front::config::ReactionConfig::Fisher,
            &kpp_front::config::ProfileConfig::Stretched {
                beta: 0.5,
                plateau: 1.0,
            },
        ))
        .expect("run record serializes"),
    );
    manifest.write(&dir, &files)?;

    let back = load_run(&dir)?;
    Manifest::read(&dir)?.verify_hashes(&dir)?;
    println!("hash before {}", run.content_hash());
    println!("hash after  {}", back.content_hash());
    assert_eq!(run.content_hash(), back.content_hash());
    Ok(())
}
