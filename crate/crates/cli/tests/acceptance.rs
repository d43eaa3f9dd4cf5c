//! Acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines reach stdout directly. The
//! query-decrease band is reported but does not fail the target; every other
//! check does.

use std::fs;
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use xgroup_cli::experiment::run_grid;
use xgroup_cli::suites::{conditional_accuracy, cover_bound, m1_m2, rare_cases, sigma_scan, no_free_lunch_miss_rate};
use xgroup_cli::{CliResult, ExperimentConfig};

struct Check {
    name: &'static str,
    passed: bool,
    enforced: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> CliResult<T>) -> (T, Duration) {
    let start = Instant::now();
    let v = f().expect("acceptance step errored");
    (v, start.elapsed())
}

fn conditional(cfg: &ExperimentConfig) -> Check {
    let cfg = ExperimentConfig {
        n_trials: 1000,
        ..cfg.clone()
    };
    let (r, t) = timed(|| conditional_accuracy(&cfg, 0.01));
    Check {
        name: "conditional accuracy",
        passed: r.passed && t < Duration::from_secs(120),
        enforced: true,
        detail: format!("{} ({:.1}s, limit 120s)", r.detail, t.as_secs_f64()),
    }
}

fn cover(cfg: &ExperimentConfig) -> Check {
    let (r, t) = timed(|| cover_bound(cfg, 400));
    Check {
        name: "greedy cover vs brute-force OPT",
        passed: r.passed && t < Duration::from_secs(60),
        enforced: true,
        detail: format!("{} ({:.1}s, limit 60s)", r.detail, t.as_secs_f64()),
    }
}

fn one_sided_triangles(cfg: &ExperimentConfig) -> Check {
    let (r, _) = timed(|| m1_m2(cfg, 100_000));
    Check {
        name: "M1/M2 on sampled triples",
        passed: r.passed,
        enforced: true,
        detail: r.detail,
    }
}

fn decrease_trend(cfg: &ExperimentConfig) -> Check {
    let cfg = ExperimentConfig {
        deltas: vec![0.1, 0.01, 0.001],
        repeats: 5,
        parallel: true,
        rare_outer: 1,
        ..cfg.clone()
    };
    let (grid, t) = timed(|| run_grid(&cfg));
    let per_delta: Vec<Vec<f64>> = grid
        .iter()
        .map(|jobs| jobs.iter().map(|j| j.summary.query_decrease_pct).collect())
        .collect();
    let increasing = (0..cfg.repeats).all(|r| per_delta.windows(2).all(|w| w[0][r] < w[1][r]));
    let in_band = per_delta[2].iter().all(|&d| (50.0..=90.0).contains(&d));
    let fmt = |v: &[f64]| v.iter().map(|d| format!("{d:.2}")).collect::<Vec<_>>().join("/");
    Check {
        name: "query decrease trend",
        passed: increasing && in_band && t < Duration::from_secs(600),
        enforced: false,
        detail: format!(
            "decrease % per repeat: delta 0.1 [{}], 0.01 [{}], 0.001 [{}]; strictly increasing {increasing}, \
             0.001 within [50, 90] {in_band} ({:.0}s, limit 600s)",
            fmt(&per_delta[0]),
            fmt(&per_delta[1]),
            fmt(&per_delta[2]),
            t.as_secs_f64()
        ),
    }
}

fn sigma_scale(cfg: &ExperimentConfig) -> Check {
    let (s, _) = timed(|| sigma_scan(cfg, 1000));
    Check {
        name: "sigma scale",
        passed: s.min > 3.0 && (6.0..=9.0).contains(&s.median),
        enforced: true,
        detail: format!(
            "1000 draws: min {:.3} (> 3), median {:.3} (in [6, 9]), {:.1}% in [7, 8)",
            s.min,
            s.median,
            100.0 * s.fraction_in_7_8
        ),
    }
}

fn no_free_lunch(cfg: &ExperimentConfig) -> Check {
    let (rate, _) = timed(|| no_free_lunch_miss_rate(cfg, 100, 1_000_000, 1000));
    Check {
        name: "no-free-lunch miss rate",
        passed: rate >= 0.70,
        enforced: true,
        detail: format!("N = 100, support 1e6, 1000 trials: Pr[|f - sigma| > 0.1] = {rate:.3} (>= 0.70)"),
    }
}

fn rare_exact(cfg: &ExperimentConfig) -> Check {
    let (r, _) = timed(|| rare_cases(cfg, 10_000));
    Check {
        name: "rare-probability exact cases",
        passed: r.passed,
        enforced: true,
        detail: r.detail,
    }
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().expect("tempdir");
    let run = || {
        let status = Command::new(env!("CARGO_BIN_EXE_xgroup"))
            .args(["run", "--delta", "0.1", "--seed", "7", "--out"])
            .arg(dir.path())
            .env("RUST_LOG", "warn")
            .stdout(Stdio::null())
            .status()
            .expect("spawn xgroup");
        assert!(status.success(), "xgroup run failed: {status}");
        fs::read(dir.path().join("delta_0.1").join("summary.json")).expect("summary.json")
    };
    let first = run();
    let second = run();
    Check {
        name: "byte-identical summary.json",
        passed: first == second,
        enforced: true,
        detail: format!("two runs at delta 0.1, seed 7: {} bytes each, identical {}", first.len(), first == second),
    }
}

fn main() -> ExitCode {
    let cfg = ExperimentConfig::default();
    let checks: Vec<fn(&ExperimentConfig) -> Check> = vec![
        conditional,
        cover,
        one_sided_triangles,
        decrease_trend,
        sigma_scale,
        no_free_lunch,
        rare_exact,
        |_| determinism(),
    ];
    let mut failed = 0;
    for check in checks {
        let c = check(&cfg);
        let status = match (c.passed, c.enforced) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (reported)",
        };
        println!("{status:<16} {:<32} {}", c.name, c.detail);
        if !c.passed && c.enforced {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} enforced check(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
