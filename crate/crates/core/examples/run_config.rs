//! Runs an experiment config end to end and prints where the artifacts went.
//!
//! ```bash
//! cargo run --example run_config -- configs/hom_levelsets_alpha2.toml /tmp/out
//! ```

use std::path::PathBuf;

use kpp_front::config::ExperimentConfig;
use kpp_front::experiment::{run_experiment, run_sweep};

fn main() -> kpp_front::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| root.join("configs/simulate_minimal.toml"));
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("kpp-run"));
    let cfg = ExperimentConfig::load(&path)?;

    if cfg.sweep.is_some() {
        for o in run_sweep(&cfg, &out)? {
            println!("{} {}", if o.passed() { "PASS" } else { "FAIL" }, o.out_dir.display());
        }
        return Ok(());
    }
    let outcome = run_experiment(&cfg, &out)?;
    println!("{} -> {}", outcome.experiment, out.display());
    for f in &outcome.files {
        println!("  {f}");
    }
    if let Some(r) = &outcome.report {
        print!("{}", r.summary());
    }
    Ok(())
}
