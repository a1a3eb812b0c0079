//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every criterion executes and reports even when another fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use kpp_front::cell::{
    construct_global_solution, evolve_cell, evolve_cell_final, solve_terminal_value, terminal_start_level,
    trajectory_distance, CellNumerics,
};
use kpp_front::config::ExperimentConfig;
use kpp_front::experiment::run_experiment;
use kpp_front::field::TorusField;
use kpp_front::frontsim::{extract_level_set, simulate_front, FrontGrid, FrontNumerics};
use kpp_front::logistic::solve_profile_default;
use kpp_front::profiles::{make_algebraic, make_log_algebraic, make_stretched, oscillation_ratio, ShiftSign};
use kpp_front::reaction::{make_fisher, make_periodic_fisher};
use kpp_front::spectral::{eigenpair_at_zero, rayleigh_quotient};
use kpp_front::verify::{flatness_discrepancy, Verdict, VerificationReport};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

fn describe(report: &VerificationReport) -> String {
    report
        .checks
        .iter()
        .map(|c| {
            let v = match c.verdict {
                Verdict::Pass => "ok",
                Verdict::Fail => "FAIL",
                Verdict::PreAsymptotic => "pre-asymptotic",
                Verdict::AtBoundary => "at-boundary",
                Verdict::Skipped => "skipped",
            };
            let m = c.measured.map_or("-".into(), |m| format!("{m:.4}"));
            let b = c
                .bracket
                .map_or(String::new(), |(a, b)| format!(" in [{a:.3}, {b:.3}]"));
            let p = match (c.predicted, c.measured) {
                (Some(p), Some(x)) if c.label.starts_with("ratio m=") => format!(" ratio {:.4}", x / p),
                _ => String::new(),
            };
            format!("{} {m}{b}{p} {v}", c.label)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

// ---------------------------------------------------------------- oracles

/// Number of eigenvalues of the symmetric tridiagonal (d, e) below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let prev = if q == 0.0 {
            f64::EPSILON * e[i - 1].abs().max(1.0)
        } else {
            q
        };
        q = d[i] - x - e[i - 1] * e[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue by bisection on the Sturm count.
fn largest_eigenvalue(d: &[f64], e: &[f64]) -> f64 {
    let radius = (0..d.len())
        .map(|i| d[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 } + e.get(i).map_or(0.0, |v| v.abs()))
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (-radius, radius);
    let n = d.len();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(d, e, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Principal eigenvalue of the periodic second difference plus
/// `1 + a cos(2 pi x)` at N nodes. The principal mode is even about x = 0,
/// so only nodes 0..=N/2 are kept; the end couplings become sqrt(2)/h^2
/// after symmetrizing.
fn discrete_oracle(a: f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let half = n / 2;
    let d: Vec<f64> = (0..=half)
        .map(|i| -2.0 / (h * h) + 1.0 + a * (2.0 * std::f64::consts::PI * i as f64 * h).cos())
        .collect();
    let mut e = vec![1.0 / (h * h); half];
    e[0] *= 2f64.sqrt();
    e[half - 1] *= 2f64.sqrt();
    largest_eigenvalue(&d, &e)
}

/// Continuum value from the cosine basis cos(2 pi k x), k = 0..K.
fn hill_oracle(a: f64, modes: usize) -> f64 {
    let d: Vec<f64> = (0..modes)
        .map(|k| 1.0 - (2.0 * std::f64::consts::PI * k as f64).powi(2))
        .collect();
    let mut e = vec![a / 2.0; modes - 1];
    e[0] = a / 2f64.sqrt();
    largest_eigenvalue(&d, &e)
}

// ---------------------------------------------------------------- criteria

fn criterion_1() -> Outcome {
    let profile = solve_profile_default(&make_fisher()).expect("profile");
    let mut worst: f64 = 0.0;
    for k in 0..=40_000 {
        let t = -20.0 + 1e-3 * k as f64;
        worst = worst.max((profile.eval(t) - t.exp() / (1.0 + t.exp())).abs());
    }
    outcome(worst <= 1e-8, format!("sup error {worst:.2e} (tol 1e-8)"))
}

fn criterion_2() -> Outcome {
    let r = solve_terminal_value(&make_fisher(), 0.5, 3f64.ln(), 1e-12, &CellNumerics::default()).expect("B");
    let err = (r.b - 0.25).abs();
    outcome(
        err <= 1e-6,
        format!("B(1/2, ln 3) = {:.10}, |B - 1/4| = {err:.2e} (tol 1e-6)", r.b),
    )
}

fn criterion_3() -> Outcome {
    let out = scratch();
    let cfg = config("bmt_rate.toml");
    let res = run_experiment(&cfg, out.path()).expect("bmt experiment");
    let report = res.report.expect("report");
    let f = make_periodic_fisher(0.5, 1.0).unwrap();
    let f0 = eigenpair_at_zero(&f, 4096).expect("eigenpair").eigenvalue;
    let oracle = discrete_oracle(0.5, 4096);
    let continuum = hill_oracle(0.5, 40);
    let eig_err = (f0 - oracle).abs();
    let rate = res.summary["rate"].as_f64().unwrap_or(f64::NAN);
    let rel = (rate - f0).abs() / f0;
    outcome(
        report.pass && rel <= 0.02 && eig_err <= 1e-5,
        format!(
            "fitted rate {rate:.6} vs f0 {f0:.10} (rel {rel:.2e}, tol 2e-2); Sturm oracle N=4096 {oracle:.10} \
             (|diff| {eig_err:.1e}, tol 1e-5); continuum {continuum:.10}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let out = scratch();
    let res = run_experiment(&config("ratio_limit.toml"), out.path()).expect("ratio experiment");
    let report = res.report.expect("report");
    let ratios: Vec<String> = res.summary["ratios"]
        .as_array()
        .map(|rows| {
            rows.iter()
                .map(|r| format!("T={} {:.9}", r[0], r[1].as_f64().unwrap_or(f64::NAN)))
                .collect()
        })
        .unwrap_or_default();
    outcome(report.pass, format!("{} ({})", ratios.join(", "), describe(&report)))
}

fn criterion_5() -> Outcome {
    let out = scratch();
    let res = run_experiment(&config("hom_levelsets_alpha4.toml"), out.path()).expect("hom levelsets");
    let report = res.report.expect("report");
    outcome(report.pass, describe(&report))
}

fn criterion_6() -> Outcome {
    let out = scratch();
    let res = run_experiment(&config("mean_levelsets_alpha4.toml"), out.path()).expect("mean levelsets");
    let report = res.report.expect("report");
    outcome(report.pass, describe(&report))
}

fn criterion_7() -> Outcome {
    let out = scratch();
    let res = run_experiment(&config("flatness_alpha4.toml"), out.path()).expect("flatness");
    let report = res.report.expect("report");
    let series: Vec<String> = res.summary["discrepancy"]
        .as_array()
        .map(|rows| {
            rows.iter()
                .map(|r| format!("T={} {:.4}", r[0], r[1].as_f64().unwrap_or(f64::NAN)))
                .collect()
        })
        .unwrap_or_default();
    outcome(report.pass, format!("{} ({})", series.join(", "), describe(&report)))
}

fn criterion_8() -> Outcome {
    let f = make_fisher();
    let n = CellNumerics::default();
    let big = construct_global_solution(&f, 1e6, 10.0, &n).expect("global n=1e6");
    let a = construct_global_solution(&f, 100.0, 10.0, &n).expect("global n=100");
    let b = construct_global_solution(&f, 1000.0, 10.0, &n).expect("global n=1000");
    let dist = trajectory_distance(&a, &b, &[-5.0, 0.0, 5.0]);
    let ok = (big.alpha - 1.0).abs() <= 0.01 && (big.omega - 1.0).abs() <= 0.01 && dist <= 1e-4;
    outcome(
        ok,
        format!(
            "alpha {:.5}, omega {:.5} (n=1e6, tol 1%); n=100 alpha {:.5}; n=100 vs 1000 sup distance {dist:.2e} (tol 1e-4)",
            big.alpha, big.omega, a.alpha
        ),
    )
}

/// Deterministic replicates of the property suites.
fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let mut note = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let numerics = CellNumerics::default();
    let field = |n: usize, phase: f64, base: f64| {
        TorusField::from_fn(1.0, n, |x| {
            base + 0.4 * base.min(1.0 - base) * (2.0 * std::f64::consts::PI * x + phase).sin()
        })
        .unwrap()
    };

    // comparison principle and [0,1] invariance on cells and on the line
    for (k, a) in [0.0, 0.3, 0.6, 0.9].into_iter().enumerate() {
        let f = make_periodic_fisher(a, 1.0).unwrap();
        let lo = field(64, k as f64, 0.3);
        let hi = TorusField::new(1.0, lo.values.iter().map(|v| (v * 1.05).min(1.0)).collect()).unwrap();
        let ulo = evolve_cell_final(&f, &lo, 2.0, &numerics).unwrap();
        let uhi = evolve_cell_final(&f, &hi, 2.0, &numerics).unwrap();
        note(
            "cell comparison",
            ulo.values.iter().zip(&uhi.values).all(|(x, y)| x <= y),
        );
        note("cell invariance", uhi.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let u0 = make_algebraic(2.0, 1.0).unwrap();
    let grid = FrontGrid::new(-10.0, 150.0, 0.25).unwrap();
    let line = FrontNumerics {
        stride: 100,
        ..Default::default()
    };
    let lo = simulate_front(&make_fisher(), &u0, 4.0, &grid, &line).unwrap();
    let xs: Vec<f64> = (0..grid.nodes()).map(|i| grid.x(i)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| (1.05 * u0.eval(x)).min(1.0)).collect();
    let hi = simulate_front(
        &make_fisher(),
        &kpp_front::profiles::make_table(xs, ys).unwrap(),
        4.0,
        &grid,
        &line,
    )
    .unwrap();
    note(
        "line comparison",
        lo.snapshots
            .iter()
            .zip(&hi.snapshots)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x <= y && *y <= 1.0 && *x >= 0.0)),
    );

    // mean growth: each step changes the mean by the mean reaction increment
    let f = make_periodic_fisher(0.5, 1.0).unwrap();
    let traj = evolve_cell(&f, &field(64, 0.7, 0.4), 0.5, &numerics).unwrap();
    let h = 1.0 / 64.0;
    let worst = (0..traj.snapshots.len() - 1)
        .map(|k| {
            let reacted: f64 = traj.snapshots[k]
                .iter()
                .enumerate()
                .map(|(i, &u)| numerics.scheme.advance(|v| f.eval(i as f64 * h, v), u, numerics.dt))
                .sum::<f64>()
                / 64.0;
            (reacted - traj.means[k + 1]).abs()
        })
        .fold(0.0, f64::max);
    note("mean growth", worst < 1e-14);

    // B monotone in m and T
    let small = CellNumerics {
        nodes: 32,
        ..Default::default()
    };
    let b = |m: f64, t: f64| terminal_start_level(&f, m, t, 1e-10, &small).unwrap();
    let grid_b: Vec<Vec<f64>> = [0.2, 0.5, 0.8]
        .iter()
        .map(|&m| [1.0, 2.0, 3.0].iter().map(|&t| b(m, t)).collect())
        .collect();
    note(
        "B increasing in m",
        (0..3).all(|j| grid_b[0][j] < grid_b[1][j] && grid_b[1][j] < grid_b[2][j]),
    );
    note(
        "B decreasing in T",
        grid_b.iter().all(|row| row[0] > row[1] && row[1] > row[2]),
    );

    // eigen residual and Rayleigh bound
    let mut max_residual: f64 = 0.0;
    for a in [0.0, 0.25, 0.5, 0.75, 0.95] {
        for period in [0.5, 1.0, 3.0] {
            let pair = eigenpair_at_zero(&make_periodic_fisher(a, period).unwrap(), 256).unwrap();
            max_residual = max_residual.max(pair.residual());
        }
    }
    note("eigen residual", max_residual <= 1e-6);
    let pair = eigenpair_at_zero(&f, 256).unwrap();
    let mut rng_state = 0x2545F4914F6CDD1Du64;
    let mut next = || {
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut rayleigh_ok = true;
    for _ in 0..50 {
        let values: Vec<f64> = (0..256).map(|_| next() - 0.3).collect();
        let r = rayleigh_quotient(&TorusField::new(1.0, values).unwrap(), |x| f.du_at_zero(x)).unwrap();
        rayleigh_ok &= r <= pair.eigenvalue + 1e-10;
    }
    note("Rayleigh bound", rayleigh_ok);

    // second-order spatial self-convergence
    let run = |n: usize| {
        let c = CellNumerics {
            nodes: n,
            dt: 2e-4,
            ..Default::default()
        };
        let init = TorusField::from_fn(1.0, n, |x| 0.3 + 0.2 * (2.0 * std::f64::consts::PI * x).cos()).unwrap();
        evolve_cell_final(&f, &init, 0.5, &c).unwrap()
    };
    let (u1, u2, u4) = (run(16), run(32), run(64));
    let diff = |fine: &TorusField, coarse: &TorusField| {
        let s = fine.len() / coarse.len();
        coarse
            .values
            .iter()
            .enumerate()
            .map(|(i, c)| (fine.values[i * s] - c).abs())
            .fold(0.0, f64::max)
    };
    let order = (diff(&u2, &u1) / diff(&u4, &u2)).log2();
    note("second order", (1.8..2.2).contains(&order));

    // oscillation ratios at family-specific times
    let lambda = |t: f64| (-t).exp();
    for (u0, t) in [
        (make_algebraic(2.0, 1.0).unwrap(), 40.0),
        (make_algebraic(4.0, 1.0).unwrap(), 80.0),
        (make_log_algebraic(2.0, 1.0, 1.0).unwrap(), 40.0),
        (make_stretched(0.3, 1.0).unwrap(), 40.0),
    ] {
        for sign in [ShiftSign::Plus, ShiftSign::Minus] {
            let r = oscillation_ratio(&u0, lambda, 2.0, t, sign).unwrap();
            note("oscillation ratio", (r - 1.0).abs() < 0.01);
        }
    }

    // level sets ordered in m and advancing in t
    let run = simulate_front(
        &make_fisher(),
        &u0,
        6.0,
        &FrontGrid::new(-20.0, 400.0, 0.25).unwrap(),
        &FrontNumerics::default(),
    )
    .unwrap();
    let mut previous = f64::NEG_INFINITY;
    let mut ordered = true;
    for &t in run.times.iter().filter(|&&t| t >= 0.5) {
        let p: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&m| extract_level_set(&run, m, t).unwrap().rightmost().unwrap_or(f64::NAN))
            .collect();
        ordered &= p[0] > p[1] && p[1] > p[2] && p[1] >= previous;
        previous = p[1];
    }
    note("level ordering", ordered);

    let detail = if failures.is_empty() {
        format!("all property replicates green (observed order {order:.3}, max eigen residual {max_residual:.1e})")
    } else {
        format!("failed: {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

/// Context for the level-set criteria: the same checks at alpha = 2 and at
/// later horizons. Printed, never counted.
fn supplementary() {
    let out = scratch();
    for name in [
        "hom_levelsets_alpha2.toml",
        "mean_levelsets_alpha2.toml",
        "flatness_alpha2.toml",
    ] {
        match run_experiment(&config(name), &out.path().join(name)) {
            Ok(res) => {
                let r = res.report.expect("report");
                eprintln!(
                    "INFO {name}: {} ({})",
                    if r.pass { "pass" } else { "fail" },
                    describe(&r)
                );
            }
            Err(e) => eprintln!("INFO {name}: error {e}"),
        }
    }
    let mut cfg = config("hom_levelsets_alpha4.toml");
    for horizon in [15.0, 20.0] {
        cfg.horizon = Some(horizon);
        cfg.numerics.x_right = None;
        match run_experiment(&cfg, &out.path().join(format!("a4_{horizon}"))) {
            Ok(res) => eprintln!("INFO alpha=4 T={horizon}: {}", describe(&res.report.expect("report"))),
            Err(e) => eprintln!("INFO alpha=4 T={horizon}: error {e}"),
        }
    }
    // flatness discrepancy keeps shrinking past the tested window
    let mut cfg = config("flatness_alpha4.toml");
    cfg.horizons = vec![12.0, 16.0];
    let f = cfg.build_reaction().unwrap();
    let u0 = cfg.build_profile().unwrap();
    if let Ok(grid) = kpp_front::experiment::front_grid(&cfg, &f, &u0, 16.0) {
        if let (Ok(run), Ok(g)) = (
            simulate_front(&f, &u0, 16.0, &grid, &cfg.numerics.front()),
            construct_global_solution(
                &f,
                cfg.numerics.global_n,
                cfg.numerics.global_t_max,
                &cfg.numerics.cell(),
            ),
        ) {
            let cells = (1, (grid.x_right as i64) - 1);
            for t in [12.0, 14.0, 16.0] {
                if let Ok(scan) = flatness_discrepancy(&run, &g, t, cells) {
                    eprintln!("INFO alpha=4 flatness T={t}: {:.4}", scan.max_discrepancy);
                }
            }
        }
    }
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "logistic closed form", Duration::from_secs(1), criterion_1),
        (2, "homogeneous terminal value", Duration::from_secs(10), criterion_2),
        (3, "terminal-value decay rate", Duration::from_secs(120), criterion_3),
        (4, "ratio limit", Duration::from_secs(180), criterion_4),
        (5, "homogeneous spreading law", Duration::from_secs(600), criterion_5),
        (6, "window-average level sets", Duration::from_secs(900), criterion_6),
        (7, "flatness", Duration::from_secs(900), criterion_7),
        (8, "global solution", Duration::from_secs(60), criterion_8),
        (9, "property suites", Duration::from_secs(600), criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked".into()));
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        eprintln!(
            "{} criterion {id} ({name}): {} [{:.1}s / budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if filter.is_empty() || filter.iter().any(|f| f == "supplementary") {
        supplementary();
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
