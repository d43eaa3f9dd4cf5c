use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xgroup_core::analysis::{Histogram, QUERYOPT, SIMPLE};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::experiment::{JobOutput, RunSummary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    /// Sample standard deviation; zero for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Spread {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub config: ExperimentConfig,
    pub delta: f64,
    pub query_decrease_pct: Spread,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRollup {
    pub delta: f64,
    pub samples_per_group: usize,
    pub simple_queries: Vec<u64>,
    pub queryopt_queries: Vec<u64>,
    pub query_decrease_pct: Vec<f64>,
    pub decrease_spread: Spread,
    pub conditional_violations: usize,
    pub directory: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rollup {
    pub config: ExperimentConfig,
    pub deltas: Vec<DeltaRollup>,
    /// Per repeat: does the decrease grow strictly as delta shrinks?
    pub decrease_strictly_increasing: Vec<bool>,
    pub invariant_violations: Vec<String>,
}

#[derive(Serialize)]
struct TrialRow {
    repeat: usize,
    trial: usize,
    true_sigma: f64,
    proxy_dist_x: f64,
    proxy_dist_y: f64,
    simple_prediction: Option<f64>,
    simple_abs_error_over_eps: Option<f64>,
    simple_relative_error_pct: Option<f64>,
    queryopt_prediction: Option<f64>,
    queryopt_abs_error_over_eps: Option<f64>,
    queryopt_relative_error_pct: Option<f64>,
}

#[derive(Serialize)]
struct HistogramRow<'a> {
    repeat: usize,
    learner: &'a str,
    metric: &'a str,
    bin_lo: String,
    bin_hi: String,
    count: u64,
}

pub fn delta_dir_name(delta: f64) -> String {
    format!("delta_{delta}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn histogram_rows<'a>(repeat: usize, learner: &'a str, metric: &'a str, h: &Histogram) -> Vec<HistogramRow<'a>> {
    h.edges
        .iter()
        .zip(&h.counts)
        .enumerate()
        .map(|(i, (lo, count))| HistogramRow {
            repeat,
            learner,
            metric,
            bin_lo: lo.to_string(),
            bin_hi: h.edges.get(i + 1).map_or_else(|| "inf".to_string(), |hi| hi.to_string()),
            count: *count,
        })
        .collect()
}

/// Writes `trials.csv`, `summary.json` and `histograms.csv` for one delta.
pub fn write_delta(out: &Path, cfg: &ExperimentConfig, delta: f64, jobs: &[JobOutput]) -> CliResult<PathBuf> {
    let dir = out.join(delta_dir_name(delta));
    fs::create_dir_all(&dir)?;

    let mut trials = csv::Writer::from_path(dir.join("trials.csv"))?;
    for job in jobs {
        for r in &job.records {
            let s = r.outcome(SIMPLE);
            let q = r.outcome(QUERYOPT);
            trials.serialize(TrialRow {
                repeat: job.summary.repeat,
                trial: r.trial,
                true_sigma: r.true_sigma,
                proxy_dist_x: r.proxy_dist_x,
                proxy_dist_y: r.proxy_dist_y,
                simple_prediction: s.map(|o| o.prediction),
                simple_abs_error_over_eps: s.map(|o| o.abs_error_over_eps),
                simple_relative_error_pct: s.and_then(|o| o.relative_error_pct),
                queryopt_prediction: q.map(|o| o.prediction),
                queryopt_abs_error_over_eps: q.map(|o| o.abs_error_over_eps),
                queryopt_relative_error_pct: q.and_then(|o| o.relative_error_pct),
            })?;
        }
    }
    trials.flush()?;

    let mut hist = csv::Writer::from_path(dir.join("histograms.csv"))?;
    for job in jobs {
        for (learner, s) in &job.summary.errors.learners {
            let rows = histogram_rows(job.summary.repeat, learner, "abs_error_over_eps", &s.abs_error_over_eps.histogram)
                .into_iter()
                .chain(histogram_rows(
                    job.summary.repeat,
                    learner,
                    "relative_error_pct",
                    &s.relative_error_pct.histogram,
                ));
            for row in rows {
                hist.serialize(row)?;
            }
        }
    }
    hist.flush()?;

    let decreases: Vec<f64> = jobs.iter().map(|j| j.summary.query_decrease_pct).collect();
    let summary = DeltaSummary {
        config: cfg.clone(),
        delta,
        query_decrease_pct: Spread::of(&decreases).expect("at least one repeat"),
        runs: jobs.iter().map(|j| j.summary.clone()).collect(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(dir)
}

pub fn build_rollup(cfg: &ExperimentConfig, grid: &[Vec<JobOutput>]) -> Rollup {
    let deltas: Vec<DeltaRollup> = cfg
        .deltas
        .iter()
        .zip(grid)
        .map(|(&delta, jobs)| {
            let dec: Vec<f64> = jobs.iter().map(|j| j.summary.query_decrease_pct).collect();
            DeltaRollup {
                delta,
                samples_per_group: jobs.first().map_or(0, |j| j.summary.samples_per_group),
                simple_queries: jobs.iter().map(|j| j.summary.simple.queries).collect(),
                queryopt_queries: jobs.iter().map(|j| j.summary.queryopt.queries).collect(),
                decrease_spread: Spread::of(&dec).expect("at least one repeat"),
                query_decrease_pct: dec,
                conditional_violations: jobs.iter().map(|j| j.summary.conditional.violations()).sum(),
                directory: delta_dir_name(delta),
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[b].delta.total_cmp(&deltas[a].delta));
    let decrease_strictly_increasing = (0..cfg.repeats)
        .map(|r| {
            order
                .windows(2)
                .all(|w| deltas[w[0]].query_decrease_pct[r] < deltas[w[1]].query_decrease_pct[r])
        })
        .collect();

    let invariant_violations = grid
        .iter()
        .flatten()
        .flat_map(|j| {
            j.violations
                .iter()
                .map(move |v| format!("repeat {} delta {}: {v}", j.summary.repeat, j.summary.delta))
        })
        .collect();

    Rollup {
        config: cfg.clone(),
        deltas,
        decrease_strictly_increasing,
        invariant_violations,
    }
}

/// Writes every per-delta directory plus `rollup.json`.
pub fn write_run(cfg: &ExperimentConfig, grid: &[Vec<JobOutput>]) -> CliResult<Rollup> {
    fs::create_dir_all(&cfg.out)?;
    for (&delta, jobs) in cfg.deltas.iter().zip(grid) {
        write_delta(&cfg.out, cfg, delta, jobs)?;
    }
    let rollup = build_rollup(cfg, grid);
    write_json(&cfg.out.join("rollup.json"), &rollup)?;
    Ok(rollup)
}

pub fn print_table<W: Write>(w: &mut W, rollup: &Rollup) -> std::io::Result<()> {
    writeln!(w, "{:>10} {:>8} {:>14} {:>14} {:>12} {:>10}", "delta", "N", "simple", "queryopt", "decrease%", "cond.viol")?;
    for d in &rollup.deltas {
        writeln!(
            w,
            "{:>10} {:>8} {:>14} {:>14} {:>12.2} {:>10}",
            d.delta,
            d.samples_per_group,
            d.simple_queries.first().copied().unwrap_or(0),
            d.queryopt_queries.first().copied().unwrap_or(0),
            d.decrease_spread.mean,
            d.conditional_violations
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_of_values() {
        let s = Spread::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max), (2.5, 1.0, 4.0));
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Spread::of(&[7.0]).unwrap().std, 0.0);
        assert!(Spread::of(&[]).is_none());
    }

    #[test]
    fn directory_names() {
        assert_eq!(delta_dir_name(0.1), "delta_0.1");
        assert_eq!(delta_dir_name(0.001), "delta_0.001");
    }

    #[test]
    fn histogram_rows_mark_open_top() {
        let mut h = Histogram::new(&[0.0, 1.0]).unwrap();
        h.add(0.5);
        h.add(9.0);
        let rows = histogram_rows(0, "simple", "m", &h);
        assert_eq!(rows[0].bin_hi, "1");
        assert_eq!(rows[1].bin_hi, "inf");
        assert_eq!(rows.iter().map(|r| r.count).sum::<u64>(), 2);
    }
}
