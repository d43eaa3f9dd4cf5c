use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use log::info;
use xgroup_core::ingest::{write_matrix_bin, write_matrix_csv};

use crate::config::{ExperimentConfig, Mode, Seeds};
use crate::error::{CliError, CliResult};
use crate::experiment::{generate_data, rare_report, run_grid, RareReport};
use crate::output::{print_table, write_json, write_run, Rollup};
use crate::suites::{all_suites, sigma_scan, SigmaScan, SuiteResult};

/// Command-line overrides applied on top of the JSON config.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Comma-separated delta grid.
    #[arg(long, global = true, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub uvar: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Sets the weights, data and trials seeds at once.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub repeats: Option<usize>,
    /// Fixed per-group sample size instead of the delta budget.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Run grid points concurrently.
    #[arg(long, global = true)]
    pub parallel: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(d) = &self.delta {
            cfg.deltas = d.clone();
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.uvar {
            cfg.u_var = v;
        }
        if let Some(v) = self.trials {
            cfg.n_trials = v;
        }
        if let Some(s) = self.seed {
            cfg.seeds = Seeds::all(s);
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        if let Some(n) = self.samples {
            cfg.samples = Some(n);
        }
        if self.parallel {
            cfg.parallel = true;
        }
    }
}

pub fn load_config(path: Option<&std::path::Path>, overrides: &Overrides) -> CliResult<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the grid and writes its artifacts. Artifacts are written even when
/// an invariant fails; the failure is returned afterwards.
pub fn cmd_run(cfg: &ExperimentConfig) -> CliResult<Rollup> {
    let grid = run_grid(cfg)?;
    let rollup = write_run(cfg, &grid)?;
    print_table(&mut io::stdout().lock(), &rollup)?;
    info!("artifacts written to {}", cfg.out.display());
    if !rollup.invariant_violations.is_empty() {
        return Err(CliError::Invariant(rollup.invariant_violations.join("; ")));
    }
    Ok(rollup)
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> CliResult<Vec<SuiteResult>> {
    let results = all_suites(cfg)?;
    let mut out = io::stdout().lock();
    for r in &results {
        writeln!(out, "{:<5} {:<28} {}", r.status(), r.name, r.detail)?;
    }
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("verify.json"), &(cfg, &results))?;
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| r.hard && !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Invariant(format!("suites failed: {}", failed.join(", "))));
    }
    Ok(results)
}

pub fn cmd_rare(cfg: &ExperimentConfig) -> CliResult<RareReport> {
    let report = rare_report(cfg)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{:>10} {:>6} {:>8} {:>8} {:>8}", "delta", "group", "p_hat", "M", "K")?;
    for r in &report.rows {
        writeln!(
            out,
            "{:>10} {:>6} {:>8.4} {:>8} {:>8}",
            r.delta, r.group, r.estimate.p_hat, r.estimate.outer, r.estimate.inner
        )?;
    }
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("rare.json"), &report)?;
    Ok(report)
}

pub fn cmd_sigma_scan(cfg: &ExperimentConfig, draws: usize) -> CliResult<SigmaScan> {
    if draws == 0 {
        return Err(CliError::Config("draws must be >= 1".into()));
    }
    let scan = sigma_scan(cfg, draws)?;
    writeln!(
        io::stdout().lock(),
        "{} draws: min {:.3}, median {:.3}, IQR [{:.3}, {:.3}], max {:.3}, {:.1}% in [7, 8)",
        scan.draws,
        scan.min,
        scan.median,
        scan.q25,
        scan.q75,
        scan.max,
        100.0 * scan.fraction_in_7_8
    )?;
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("sigma_scan.json"), &(cfg, &scan))?;
    if !scan.sane {
        return Err(CliError::Invariant(format!(
            "sigma scale off: min {:.3}, median {:.3}",
            scan.min, scan.median
        )));
    }
    Ok(scan)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Bin,
    Both,
}

pub fn cmd_gen_data(cfg: &ExperimentConfig, format: MatrixFormat) -> CliResult<Vec<PathBuf>> {
    let dir = cfg.out.join("data");
    let mut written = Vec::new();
    for g in generate_data(cfg)? {
        let base = dir.join(&g.name);
        if let Some(parent) = base.parent() {
            fs::create_dir_all(parent)?;
        }
        if matches!(format, MatrixFormat::Csv | MatrixFormat::Both) {
            let p = base.with_extension("csv");
            write_matrix_csv(&p, &g.header, &g.rows)?;
            written.push(p);
        }
        if matches!(format, MatrixFormat::Bin | MatrixFormat::Both) {
            let p = base.with_extension("bin");
            write_matrix_bin(&p, &g.rows)?;
            written.push(p);
        }
    }
    write_json(&dir.join("config.json"), cfg)?;
    for p in &written {
        writeln!(io::stdout().lock(), "{}", p.display())?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_fields() {
        let mut cfg = ExperimentConfig::default();
        Overrides {
            delta: Some(vec![0.5]),
            seed: Some(9),
            trials: Some(10),
            parallel: true,
            ..Default::default()
        }
        .apply(&mut cfg);
        assert_eq!(cfg.deltas, vec![0.5]);
        assert_eq!(cfg.seeds, Seeds::all(9));
        assert_eq!(cfg.n_trials, 10);
        assert!(cfg.parallel);
        assert_eq!(cfg.rho, 12.0);
    }

    #[test]
    fn invalid_override_is_config_error() {
        let o = Overrides {
            epsilon: Some(2.0),
            ..Default::default()
        };
        assert_eq!(load_config(None, &o).unwrap_err().exit_code(), 2);
    }
}
