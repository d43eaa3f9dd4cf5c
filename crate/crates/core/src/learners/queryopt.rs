//! Representative selection and the query-optimized learner.
//!
//! For each group, every sample `x` gets a ball `H_x` of radius `rho * eps`
//! over the sample. Repeatedly the lowest-index surviving sample becomes a
//! representative and absorbs every survivor whose ball meets its own. Only
//! pairs of representatives are sent to the oracle.
//!
//! Two balls meet only if their centres are within `2 * rho * eps`, and they
//! always meet if the centres are within `rho * eps` (each centre lies in the
//! other's ball). Only the annulus in between needs an explicit witness
//! search, so no ball is ever materialized for the whole sample at once.

use serde::{Deserialize, Serialize};

use super::{Predictor, QueryMode, TrainingSet};
use crate::element::{Element, GroupSample, PairKey};
use crate::error::{Error, Result};
use crate::ledger::PairTable;
use crate::metric::{GroupMetric, Metric};
use crate::oracle::{CrossSimilarity, Oracle};
use crate::params::Params;

/// Output of representative selection for one group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representatives {
    /// Sample indices of `R_l`, in selection order (ascending).
    pub indices: Vec<usize>,
    /// `assignment[i]` is the sample index of `r_l(S_l[i])`.
    pub assignment: Vec<usize>,
}

impl Representatives {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn select_representatives(
    sample: &GroupSample,
    metric: &GroupMetric,
    epsilon: f64,
    rho: f64,
) -> Result<Representatives> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::param(format!("rho must be > 0, got {rho}")));
    }
    if sample.is_empty() {
        return Err(Error::usage(format!("sample of group {} is empty", sample.group)));
    }
    metric.check_dim(sample.dim().unwrap_or(0))?;

    let pts = &sample.elements;
    let radius = rho * epsilon;
    // loose by a few ulps so rounding never hides a witness
    let reach = 2.0 * radius * (1.0 + 1e-12);

    let n = pts.len();
    let mut assignment = vec![usize::MAX; n];
    let mut indices = Vec::new();
    let mut survivors: Vec<usize> = (0..n).collect();
    let mut ball: Vec<usize> = Vec::new();

    while let Some(&x) = survivors.first() {
        indices.push(x);
        let fx = &pts[x].features;
        let mut ball_ready = false;

        survivors.retain(|&cand| {
            let d = metric.dist(fx, &pts[cand].features);
            let joins = if d <= radius {
                true
            } else if d <= reach {
                if !ball_ready {
                    ball.clear();
                    ball.extend((0..n).filter(|&z| metric.dist(fx, &pts[z].features) <= radius));
                    ball_ready = true;
                }
                let fc = &pts[cand].features;
                ball.iter().any(|&z| metric.dist(fc, &pts[z].features) <= radius)
            } else {
                false
            };
            if joins {
                assignment[cand] = x;
            }
            !joins
        });
    }

    Ok(Representatives { indices, assignment })
}

/// Checks separation `d(u, v) > rho * eps` for distinct representatives
/// (exact), `r(u) = u` on representatives, and the assignment radius
/// `d(x, r(x)) <= 2 * rho * eps` (within `tol`).
pub fn check_representatives(
    sample: &GroupSample,
    metric: &GroupMetric,
    reps: &Representatives,
    epsilon: f64,
    rho: f64,
    tol: f64,
) -> Result<()> {
    let radius = rho * epsilon;
    let pts = &sample.elements;
    if reps.assignment.len() != pts.len() {
        return Err(Error::Internal(format!(
            "assignment covers {} of {} samples",
            reps.assignment.len(),
            pts.len()
        )));
    }
    for (a, &u) in reps.indices.iter().enumerate() {
        if reps.assignment.get(u) != Some(&u) {
            return Err(Error::Internal(format!("representative {u} not assigned to itself")));
        }
        for &v in &reps.indices[a + 1..] {
            let d = metric.dist(&pts[u].features, &pts[v].features);
            if d <= radius {
                return Err(Error::Internal(format!(
                    "representatives {u} and {v} at distance {d} <= {radius}"
                )));
            }
        }
    }
    let is_rep: std::collections::HashSet<usize> = reps.indices.iter().copied().collect();
    for (i, &r) in reps.assignment.iter().enumerate() {
        if !is_rep.contains(&r) {
            return Err(Error::Internal(format!("sample {i} assigned to non-representative {r}")));
        }
        let d = metric.dist(&pts[i].features, &pts[r].features);
        if d > 2.0 * radius + tol {
            return Err(Error::Internal(format!(
                "sample {i} is {d} from its representative {r}, limit {}",
                2.0 * radius
            )));
        }
    }
    Ok(())
}

/// Predicts `sigma(r(pi(x)), r(pi(y)))` from queried representative pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepModel {
    set: TrainingSet,
    params: Params,
    representatives: Vec<Representatives>,
    sigma: PairTable,
    #[serde(default = "eager")]
    mode: QueryMode,
}

fn eager() -> QueryMode {
    QueryMode::Eager
}

pub fn train_queryopt<S: CrossSimilarity>(
    set: TrainingSet,
    oracle: &mut Oracle<S>,
    params: Params,
) -> Result<RepModel> {
    train_queryopt_with_mode(set, oracle, params, QueryMode::Eager)
}

/// A lazy model selects representatives but defers every oracle query to
/// prediction time.
pub fn train_queryopt_with_mode<S: CrossSimilarity>(
    set: TrainingSet,
    oracle: &mut Oracle<S>,
    params: Params,
    mode: QueryMode,
) -> Result<RepModel> {
    params.validate()?;
    let representatives = set
        .samples()
        .iter()
        .zip(set.metrics())
        .map(|(s, m)| select_representatives(s, m, params.epsilon, params.rho))
        .collect::<Result<Vec<_>>>()?;

    let mut model = RepModel {
        set,
        params,
        representatives,
        sigma: PairTable::new(),
        mode: QueryMode::Lazy,
    };
    if mode == QueryMode::Eager {
        model.materialize(oracle)?;
    }
    Ok(model)
}

impl RepModel {
    pub fn training_set(&self) -> &TrainingSet {
        &self.set
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn representatives(&self, group: usize) -> Option<&Representatives> {
        self.representatives.get(group)
    }

    pub fn sigma_table(&self) -> &PairTable {
        &self.sigma
    }

    /// `sum_{l < l'} |R_l| |R_l'|`.
    pub fn query_count(&self) -> u64 {
        self.set
            .group_pairs()
            .map(|(a, b)| self.representatives[a].len() as u64 * self.representatives[b].len() as u64)
            .sum()
    }

    /// `r_l(pi(x))`.
    pub fn proxy<'a>(&'a self, x: &Element) -> Result<&'a Element> {
        let (px, _) = self.set.proxy(x)?;
        let r = self.representatives[x.group].assignment[px.index];
        Ok(&self.set.samples()[x.group].elements[r])
    }

    pub fn mode(&self) -> QueryMode {
        self.mode
    }

    /// Queries every representative pair not yet in the table and switches
    /// the model to eager.
    pub fn materialize<S: CrossSimilarity>(&mut self, oracle: &mut Oracle<S>) -> Result<()> {
        let pairs: Vec<_> = self.set.group_pairs().collect();
        for (lo, hi) in pairs {
            let (s_lo, s_hi) = (&self.set.samples()[lo], &self.set.samples()[hi]);
            for &u in &self.representatives[lo].indices {
                for &v in &self.representatives[hi].indices {
                    let (x, y) = (&s_lo.elements[u], &s_hi.elements[v]);
                    let key = PairKey::new(x.id(), y.id())?;
                    if self.sigma.get(&key).is_none() {
                        self.sigma.insert(key, oracle.query(x, y)?);
                    }
                }
            }
        }
        self.mode = QueryMode::Eager;
        Ok(())
    }

    fn rep_key(&self, x: &Element, y: &Element) -> Result<(PairKey, Element, Element)> {
        self.set.check_cross_pair(x, y)?;
        let (rx, ry) = (self.proxy(x)?, self.proxy(y)?);
        Ok((PairKey::new(rx.id(), ry.id())?, rx.clone(), ry.clone()))
    }

    /// Never queries. For an eager model a missing entry means corruption.
    pub fn predict(&self, x: &Element, y: &Element) -> Result<f64> {
        let (key, _, _) = self.rep_key(x, y)?;
        self.sigma.get(&key).ok_or_else(|| match self.mode {
            QueryMode::Eager => Error::Internal(format!("representative table lacks {key:?}")),
            QueryMode::Lazy => Error::usage(format!(
                "pair {key:?} not fetched yet; predict through an oracle"
            )),
        })
    }

    /// Lookup, falling back to one oracle query for a lazy model.
    pub fn predict_with<S: CrossSimilarity>(
        &mut self,
        oracle: &mut Oracle<S>,
        x: &Element,
        y: &Element,
    ) -> Result<f64> {
        let (key, rx, ry) = self.rep_key(x, y)?;
        if let Some(v) = self.sigma.get(&key) {
            return Ok(v);
        }
        if self.mode == QueryMode::Eager {
            return Err(Error::Internal(format!("representative table lacks {key:?}")));
        }
        let v = oracle.query(&rx, &ry)?;
        self.sigma.insert(key, v);
        Ok(v)
    }
}

impl Predictor for RepModel {
    fn predict(&mut self, x: &Element, y: &Element) -> Result<f64> {
        RepModel::predict(self, x, y)
    }
}

/// A representative model paired with the oracle it fetches missing pairs from.
pub struct LazyRep<'a, S> {
    pub model: &'a mut RepModel,
    pub oracle: &'a mut Oracle<S>,
}

impl<S: CrossSimilarity> Predictor for LazyRep<'_, S> {
    fn predict(&mut self, x: &Element, y: &Element) -> Result<f64> {
        self.model.predict_with(self.oracle, x, y)
    }
}
