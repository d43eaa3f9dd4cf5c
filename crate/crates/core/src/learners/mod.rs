//! The two learners: full pairwise querying of the samples, and querying
//! only between greedily selected representatives.

mod queryopt;
mod simple;

pub use queryopt::{
    check_representatives, select_representatives, train_queryopt, train_queryopt_with_mode, LazyRep, RepModel,
    Representatives,
};
pub use simple::{eager_query_count, train_simple, LazySimple, QueryMode, SimpleModel};

use serde::{Deserialize, Serialize};

use crate::element::{Element, GroupSample};
use crate::error::{Error, Result};
use crate::metric::{nearest_in_sample, GroupMetric};

/// Anything that estimates `sigma(x, y)` for a cross-group pair.
pub trait Predictor {
    fn predict(&mut self, x: &Element, y: &Element) -> Result<f64>;
}

/// Per-group samples `S_l` and the known intra-group metrics `d_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    samples: Vec<GroupSample>,
    metrics: Vec<GroupMetric>,
}

impl TrainingSet {
    /// `samples[l]` must be the non-empty sample of group `l`.
    pub fn new(samples: Vec<GroupSample>, metrics: Vec<GroupMetric>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::usage(format!("need at least two groups, got {}", samples.len())));
        }
        if samples.len() != metrics.len() {
            return Err(Error::usage(format!(
                "{} samples but {} metrics",
                samples.len(),
                metrics.len()
            )));
        }
        for (g, (s, m)) in samples.iter().zip(&metrics).enumerate() {
            if s.group != g {
                return Err(Error::usage(format!("sample at position {g} belongs to group {}", s.group)));
            }
            if s.is_empty() {
                return Err(Error::usage(format!("sample of group {g} is empty")));
            }
            s.validate()?;
            m.check_dim(s.dim().unwrap_or(0))?;
        }
        Ok(TrainingSet { samples, metrics })
    }

    pub fn gamma(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[GroupSample] {
        &self.samples
    }

    pub fn sample(&self, group: usize) -> Option<&GroupSample> {
        self.samples.get(group)
    }

    pub fn metrics(&self) -> &[GroupMetric] {
        &self.metrics
    }

    pub fn metric(&self, group: usize) -> Option<&GroupMetric> {
        self.metrics.get(group)
    }

    /// `pi(x)` and `d_l(x, pi(x))`.
    pub fn proxy<'a>(&'a self, x: &Element) -> Result<(&'a Element, f64)> {
        let sample = self
            .samples
            .get(x.group)
            .ok_or_else(|| Error::usage(format!("unknown group id {}", x.group)))?;
        nearest_in_sample(x, sample, &self.metrics[x.group])
    }

    pub(crate) fn check_cross_pair(&self, x: &Element, y: &Element) -> Result<()> {
        for e in [x, y] {
            if e.group >= self.gamma() {
                return Err(Error::usage(format!("unknown group id {}", e.group)));
            }
        }
        if x.group == y.group {
            return Err(Error::usage(format!("both elements belong to group {}", x.group)));
        }
        Ok(())
    }

    /// Unordered group pairs `(l, l')`, `l < l'`.
    pub(crate) fn group_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let g = self.gamma();
        (0..g).flat_map(move |lo| (lo + 1..g).map(move |hi| (lo, hi)))
    }
}
