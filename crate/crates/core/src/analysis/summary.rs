use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::trials::TrialRecord;
use crate::error::{Error, Result};

/// Lower bin edges in percent; the last bin is open above.
pub const RELATIVE_PCT_EDGES: [f64; 9] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
/// Lower bin edges in units of epsilon; the last bin is open above.
pub const ABS_OVER_EPS_EDGES: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 38.0];

/// Bin `i` holds `[edges[i], edges[i + 1])`; the last bin extends to infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(edges: &[f64]) -> Result<Self> {
        if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("histogram edges must be finite and strictly increasing"));
        }
        Ok(Histogram {
            edges: edges.to_vec(),
            counts: vec![0; edges.len()],
        })
    }

    /// Values below the first edge land in the first bin.
    pub fn add(&mut self, v: f64) {
        let i = self.edges.partition_point(|e| *e <= v).saturating_sub(1);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Linear-interpolation quantile (R type 7) of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p| quantile(&v, p);
        Some(Quantiles {
            mean: v.iter().sum::<f64>() / v.len().max(1) as f64,
            min: *v.first()?,
            q25: q(0.25)?,
            median: q(0.5)?,
            q75: q(0.75)?,
            p90: q(0.9)?,
            p99: q(0.99)?,
            max: *v.last()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    /// Records left out because the metric is undefined for them.
    pub excluded: usize,
    pub stats: Option<Quantiles>,
    pub histogram: Histogram,
}

impl MetricSummary {
    fn build(values: &[f64], excluded: usize, edges: &[f64]) -> Result<Self> {
        let mut histogram = Histogram::new(edges)?;
        values.iter().for_each(|v| histogram.add(*v));
        Ok(MetricSummary {
            count: values.len(),
            excluded,
            stats: Quantiles::of(values),
            histogram,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSummary {
    pub abs_error_over_eps: MetricSummary,
    pub relative_error_pct: MetricSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub trials: usize,
    pub epsilon: f64,
    pub true_sigma: Quantiles,
    pub learners: BTreeMap<String, LearnerSummary>,
}

pub fn summarize_errors(
    records: &[TrialRecord],
    epsilon: f64,
    relative_edges: &[f64],
    abs_edges: &[f64],
) -> Result<ErrorSummary> {
    if records.is_empty() {
        return Err(Error::usage("no trial records to summarize"));
    }
    let sigma: Vec<f64> = records.iter().map(|r| r.true_sigma).collect();
    let mut per_learner: BTreeMap<&str, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for o in records.iter().flat_map(|r| &r.outcomes) {
        let e = per_learner.entry(&o.learner).or_default();
        e.0.push(o.abs_error_over_eps);
        match o.relative_error_pct {
            Some(v) => e.1.push(v),
            None => e.2 += 1,
        }
    }
    let learners = per_learner
        .into_iter()
        .map(|(name, (abs, rel, skipped))| {
            Ok((
                name.to_string(),
                LearnerSummary {
                    abs_error_over_eps: MetricSummary::build(&abs, 0, abs_edges)?,
                    relative_error_pct: MetricSummary::build(&rel, skipped, relative_edges)?,
                },
            ))
        })
        .collect::<Result<_>>()?;
    Ok(ErrorSummary {
        trials: records.len(),
        epsilon,
        true_sigma: Quantiles::of(&sigma).expect("records are non-empty"),
        learners,
    })
}

/// `100 (simple - queryopt) / simple`
pub fn query_decrease_pct(simple: u64, queryopt: u64) -> Result<f64> {
    if simple == 0 {
        return Err(Error::usage("simple query count is zero"));
    }
    Ok(100.0 * (simple as f64 - queryopt as f64) / simple as f64)
}
