use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::GroupDistribution;
use crate::element::Element;
use crate::error::{Error, Result};
use crate::ingest::PermutationSampler;
use crate::learners::{Predictor, TrainingSet};
use crate::oracle::CrossSimilarity;

pub const SIMPLE: &str = "simple";
pub const QUERYOPT: &str = "queryopt";

const RELATIVE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerOutcome {
    pub learner: String,
    pub prediction: f64,
    /// `|p - t| / eps`
    pub abs_error_over_eps: f64,
    /// `100 |p - t| / t`; `None` when `t` is numerically zero.
    pub relative_error_pct: Option<f64>,
}

impl LearnerOutcome {
    pub fn new(learner: &str, prediction: f64, truth: f64, epsilon: f64) -> Self {
        let err = (prediction - truth).abs();
        LearnerOutcome {
            learner: learner.to_string(),
            prediction,
            abs_error_over_eps: err / epsilon,
            relative_error_pct: (truth >= RELATIVE_FLOOR).then(|| 100.0 * err / truth),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub true_sigma: f64,
    /// `d(x, pi(x))`
    pub proxy_dist_x: f64,
    /// `d(y, pi(y))`
    pub proxy_dist_y: f64,
    pub outcomes: Vec<LearnerOutcome>,
}

impl TrialRecord {
    pub fn outcome(&self, learner: &str) -> Option<&LearnerOutcome> {
        self.outcomes.iter().find(|o| o.learner == learner)
    }
}

/// Supplies the cross-group test pairs.
pub trait PairSource {
    /// `Ok(None)` once the source has nothing left.
    fn next_pair(&mut self) -> Result<Option<(Element, Element)>>;
}

/// Fresh i.i.d. draws from two group distributions.
pub struct DistributionPairs<'a, D, R> {
    x_dist: &'a D,
    y_dist: &'a D,
    groups: (usize, usize),
    rng: R,
    drawn: usize,
}

impl<'a, D: GroupDistribution, R: Rng> DistributionPairs<'a, D, R> {
    pub fn new(x_dist: &'a D, y_dist: &'a D, groups: (usize, usize), rng: R) -> Result<Self> {
        if groups.0 == groups.1 {
            return Err(Error::usage(format!("test pairs need two groups, got {} twice", groups.0)));
        }
        Ok(DistributionPairs {
            x_dist,
            y_dist,
            groups,
            rng,
            drawn: 0,
        })
    }
}

impl<D: GroupDistribution, R: Rng> PairSource for DistributionPairs<'_, D, R> {
    fn next_pair(&mut self) -> Result<Option<(Element, Element)>> {
        let x = self.x_dist.draw_element(self.groups.0, self.drawn, &mut self.rng);
        let y = self.y_dist.draw_element(self.groups.1, self.drawn, &mut self.rng);
        self.drawn += 1;
        Ok(Some((x, y)))
    }
}

/// Continues two permutation samplers past the training prefix.
pub struct PermutationPairs {
    x: PermutationSampler,
    y: PermutationSampler,
}

impl PermutationPairs {
    pub fn new(x: PermutationSampler, y: PermutationSampler) -> Self {
        PermutationPairs { x, y }
    }
}

impl PairSource for PermutationPairs {
    fn next_pair(&mut self) -> Result<Option<(Element, Element)>> {
        if self.x.remaining() == 0 || self.y.remaining() == 0 {
            return Ok(None);
        }
        Ok(Some((self.x.next_sample()?, self.y.next_sample()?)))
    }
}

/// Evaluates every learner on `n_trials` pairs. The truth is read straight
/// from `truth`, so nothing is billed for it.
pub fn run_trials<S, P>(
    learners: &mut [(&str, &mut dyn Predictor)],
    proxies: &TrainingSet,
    truth: &S,
    pairs: &mut P,
    n_trials: usize,
    epsilon: f64,
) -> Result<Vec<TrialRecord>>
where
    S: CrossSimilarity + ?Sized,
    P: PairSource + ?Sized,
{
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be > 0, got {epsilon}")));
    }
    let mut records = Vec::with_capacity(n_trials);
    for trial in 0..n_trials {
        let Some((x, y)) = pairs.next_pair()? else {
            return Err(Error::TrialsExhausted {
                completed: trial,
                requested: n_trials,
            });
        };
        let t = truth.similarity(&x, &y)?;
        let (_, dx) = proxies.proxy(&x)?;
        let (_, dy) = proxies.proxy(&y)?;
        let outcomes = learners
            .iter_mut()
            .map(|(name, model)| Ok(LearnerOutcome::new(name, model.predict(&x, &y)?, t, epsilon)))
            .collect::<Result<Vec<_>>>()?;
        records.push(TrialRecord {
            trial,
            true_sigma: t,
            proxy_dist_x: dx,
            proxy_dist_y: dy,
            outcomes,
        });
    }
    Ok(records)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub trials: usize,
    /// Trials with both proxy distances within `3 eps`.
    pub eligible: usize,
    pub simple_violations: usize,
    pub queryopt_violations: usize,
    pub simple_worst_over_eps: f64,
    pub queryopt_worst_over_eps: f64,
}

impl ConditionalReport {
    pub fn violations(&self) -> usize {
        self.simple_violations + self.queryopt_violations
    }
}

/// On trials whose test points both lie within `3 eps` of their proxies, the
/// simple learner must be within `6 eps` and the representative learner
/// within `(4 rho + 6) eps`. Checked without tolerance.
pub fn check_conditional_accuracy(records: &[TrialRecord], epsilon: f64, rho: f64) -> ConditionalReport {
    let near = 3.0 * epsilon;
    let mut report = ConditionalReport {
        trials: records.len(),
        ..Default::default()
    };
    for r in records.iter().filter(|r| r.proxy_dist_x <= near && r.proxy_dist_y <= near) {
        report.eligible += 1;
        let truth = r.true_sigma;
        if let Some(o) = r.outcome(SIMPLE) {
            let err = (o.prediction - truth).abs();
            report.simple_worst_over_eps = report.simple_worst_over_eps.max(o.abs_error_over_eps);
            if err > 6.0 * epsilon {
                report.simple_violations += 1;
            }
        }
        if let Some(o) = r.outcome(QUERYOPT) {
            let err = (o.prediction - truth).abs();
            report.queryopt_worst_over_eps = report.queryopt_worst_over_eps.max(o.abs_error_over_eps);
            if err > (4.0 * rho + 6.0) * epsilon {
                report.queryopt_violations += 1;
            }
        }
    }
    report
}
