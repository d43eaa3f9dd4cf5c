//! Simulated expert oracle for the across-groups similarity `sigma`.
//!
//! The ground truth is a weighted Euclidean distance with per-feature weights
//! `beta` bounded above by both groups' intra-group weights `alpha`. Under
//! that bound `sigma <= d_l` on every pair, which with the triangle
//! inequality of `sigma` gives both one-sided cross-group triangle
//! inequalities (M1 and M2) checked by [`verify_cross_metric_properties`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::element::{Element, PairKey};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::metric::{GroupMetric, Metric, WeightedEuclideanMetric};

/// Ground-truth cross-group similarity. Evaluating it is free; billing
/// happens only through [`Oracle::query`].
pub trait CrossSimilarity {
    fn similarity(&self, x: &Element, y: &Element) -> Result<f64>;
}

impl<S: CrossSimilarity + ?Sized> CrossSimilarity for &S {
    fn similarity(&self, x: &Element, y: &Element) -> Result<f64> {
        (**self).similarity(x, y)
    }
}

/// `sqrt(sum_i beta_i (x_i - y_i)^2)` for `x`, `y` in different groups.
pub fn cross_similarity(beta: &WeightedEuclideanMetric, x: &Element, y: &Element) -> Result<f64> {
    if x.group == y.group {
        return Err(Error::usage(format!(
            "cross similarity requested inside group {}",
            x.group
        )));
    }
    for e in [x, y] {
        if e.dim() != beta.dim() {
            return Err(Error::Shape {
                expected: beta.dim(),
                found: e.dim(),
            });
        }
    }
    Ok(beta.dist(&x.features, &y.features))
}

/// A single `beta` vector used as the similarity of every group pair.
impl CrossSimilarity for WeightedEuclideanMetric {
    fn similarity(&self, x: &Element, y: &Element) -> Result<f64> {
        cross_similarity(self, x, y)
    }
}

/// Cross weights for one unordered group pair `lo < hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairWeights {
    pub lo: usize,
    pub hi: usize,
    pub beta: WeightedEuclideanMetric,
}

/// Intra-group weights `alpha` per group and cross weights `beta` per
/// unordered group pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOracleSpec")]
pub struct OracleSpec {
    alpha: Vec<WeightedEuclideanMetric>,
    beta: Vec<PairWeights>,
}

#[derive(Deserialize)]
struct RawOracleSpec {
    alpha: Vec<WeightedEuclideanMetric>,
    beta: Vec<PairWeights>,
}

impl TryFrom<RawOracleSpec> for OracleSpec {
    type Error = Error;

    fn try_from(raw: RawOracleSpec) -> Result<Self> {
        OracleSpec::new(raw.alpha, raw.beta)
    }
}

/// Position of `(lo, hi)` in the lexicographic list of pairs of `0..gamma`.
fn pair_slot(gamma: usize, lo: usize, hi: usize) -> usize {
    debug_assert!(lo < hi && hi < gamma);
    lo * (2 * gamma - lo - 1) / 2 + (hi - lo - 1)
}

impl OracleSpec {
    /// `beta` must list every unordered pair exactly once; it is reordered
    /// lexicographically.
    pub fn new(alpha: Vec<WeightedEuclideanMetric>, mut beta: Vec<PairWeights>) -> Result<Self> {
        let gamma = alpha.len();
        if gamma < 2 {
            return Err(Error::param(format!("need at least two groups, got {gamma}")));
        }
        let dim = alpha[0].dim();
        if let Some(a) = alpha.iter().find(|a| a.dim() != dim) {
            return Err(Error::Shape {
                expected: dim,
                found: a.dim(),
            });
        }
        beta.sort_by_key(|p| (p.lo, p.hi));
        let expected: Vec<(usize, usize)> = (0..gamma)
            .flat_map(|lo| (lo + 1..gamma).map(move |hi| (lo, hi)))
            .collect();
        let found: Vec<(usize, usize)> = beta.iter().map(|p| (p.lo, p.hi)).collect();
        if found != expected {
            return Err(Error::param(format!(
                "beta must cover each unordered group pair once; expected {expected:?}, found {found:?}"
            )));
        }
        for p in &beta {
            if p.beta.dim() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    found: p.beta.dim(),
                });
            }
            let (a_lo, a_hi) = (alpha[p.lo].weights(), alpha[p.hi].weights());
            for (i, b) in p.beta.weights().iter().enumerate() {
                if *b > a_lo[i].min(a_hi[i]) {
                    return Err(Error::param(format!(
                        "beta[{i}] = {b} for groups ({}, {}) exceeds min(alpha) = {}",
                        p.lo,
                        p.hi,
                        a_lo[i].min(a_hi[i])
                    )));
                }
            }
        }
        Ok(OracleSpec { alpha, beta })
    }

    pub fn gamma(&self) -> usize {
        self.alpha.len()
    }

    pub fn dim(&self) -> usize {
        self.alpha[0].dim()
    }

    pub fn alpha(&self, group: usize) -> Option<&WeightedEuclideanMetric> {
        self.alpha.get(group)
    }

    /// Intra-group metrics `d_l`, one per group, as learners see them.
    pub fn intra_metrics(&self) -> Vec<GroupMetric> {
        self.alpha.iter().cloned().map(GroupMetric::from).collect()
    }

    pub fn beta(&self, a: usize, b: usize) -> Option<&WeightedEuclideanMetric> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo == hi || hi >= self.gamma() {
            return None;
        }
        Some(&self.beta[pair_slot(self.gamma(), lo, hi)].beta)
    }

    pub fn pair_weights(&self) -> &[PairWeights] {
        &self.beta
    }
}

impl CrossSimilarity for OracleSpec {
    fn similarity(&self, x: &Element, y: &Element) -> Result<f64> {
        let beta = self.beta(x.group, y.group).ok_or_else(|| {
            Error::usage(format!(
                "no cross weights for groups ({}, {})",
                x.group, y.group
            ))
        })?;
        cross_similarity(beta, x, y)
    }
}

/// Draws `alpha_{i,l} ~ U[0,1]` independently, then for each unordered group
/// pair `beta_i ~ U[0, min(alpha_{i,l}, alpha_{i,l'})]`.
pub fn draw_weights<R: Rng + ?Sized>(dim: usize, gamma: usize, rng: &mut R) -> Result<OracleSpec> {
    if dim == 0 {
        return Err(Error::param("dimension must be >= 1"));
    }
    if gamma < 2 {
        return Err(Error::param(format!("gamma must be >= 2, got {gamma}")));
    }
    let alpha: Vec<Vec<f64>> = (0..gamma)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect())
        .collect();
    let mut beta = Vec::with_capacity(gamma * (gamma - 1) / 2);
    for lo in 0..gamma {
        for hi in lo + 1..gamma {
            let w = (0..dim)
                .map(|i| {
                    let cap = alpha[lo][i].min(alpha[hi][i]);
                    rng.random_range(0.0..=cap)
                })
                .collect();
            beta.push(PairWeights {
                lo,
                hi,
                beta: WeightedEuclideanMetric::new(w)?,
            });
        }
    }
    let alpha = alpha
        .into_iter()
        .map(WeightedEuclideanMetric::new)
        .collect::<Result<Vec<_>>>()?;
    OracleSpec::new(alpha, beta)
}

/// Ground truth plus the ledger that bills each distinct pair once.
#[derive(Clone, Debug)]
pub struct Oracle<S> {
    truth: S,
    ledger: QueryLedger,
}

/// The weighted-Euclidean oracle used by the synthetic and real experiments.
pub type SimulatedOracle = Oracle<OracleSpec>;

impl<S: CrossSimilarity> Oracle<S> {
    pub fn new(truth: S) -> Self {
        Oracle {
            truth,
            ledger: QueryLedger::new(),
        }
    }

    /// Asks for `sigma(x, y)`. The first request for an unordered pair is
    /// billed; repeats are answered from the ledger.
    pub fn query(&mut self, x: &Element, y: &Element) -> Result<f64> {
        let key = PairKey::new(x.id(), y.id())?;
        let truth = &self.truth;
        self.ledger.get_or_record(key, || {
            let (a, b) = if x.group < y.group { (x, y) } else { (y, x) };
            truth.similarity(a, b)
        })
    }

    pub fn truth(&self) -> &S {
        &self.truth
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn count(&self) -> usize {
        self.ledger.count()
    }
}

/// Outcome of checking M1 and M2 on a batch of triples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub m1_checked: usize,
    pub m2_checked: usize,
    pub m1_violations: usize,
    pub m2_violations: usize,
    /// Largest `lhs - rhs` seen; positive values are violations before tolerance.
    pub worst_slack: f64,
}

impl ViolationReport {
    pub fn violations(&self) -> usize {
        self.m1_violations + self.m2_violations
    }
}

/// Triple `(x, z, y)` for M1 (`x`, `z` in group l, `y` in l') or
/// `(x, y, z)` for M2 (`x` in l, `y`, `z` in l').
pub type Triple = (Element, Element, Element);

/// Checks
/// M1: `sigma(x,y) <= d_l(x,z) + sigma(z,y)` and
/// M2: `sigma(x,y) <= sigma(x,z) + d_l'(z,y)`,
/// counting triples whose left side exceeds the right by more than `tol`.
pub fn verify_cross_metric_properties<S: CrossSimilarity + ?Sized>(
    d_l: &GroupMetric,
    d_lp: &GroupMetric,
    sigma: &S,
    m1_triples: &[Triple],
    m2_triples: &[Triple],
    tol: f64,
) -> Result<ViolationReport> {
    let mut report = ViolationReport {
        worst_slack: f64::NEG_INFINITY,
        ..Default::default()
    };
    for (x, z, y) in m1_triples {
        if x.group != z.group || x.group == y.group {
            return Err(Error::usage("M1 triple needs x, z in one group and y in another"));
        }
        let lhs = sigma.similarity(x, y)?;
        let rhs = d_l.dist(&x.features, &z.features) + sigma.similarity(z, y)?;
        let slack = lhs - rhs;
        report.worst_slack = report.worst_slack.max(slack);
        report.m1_checked += 1;
        if slack > tol {
            report.m1_violations += 1;
        }
    }
    for (x, y, z) in m2_triples {
        if y.group != z.group || x.group == y.group {
            return Err(Error::usage("M2 triple needs y, z in one group and x in another"));
        }
        let lhs = sigma.similarity(x, y)?;
        let rhs = sigma.similarity(x, z)? + d_lp.dist(&z.features, &y.features);
        let slack = lhs - rhs;
        report.worst_slack = report.worst_slack.max(slack);
        report.m2_checked += 1;
        if slack > tol {
            report.m2_violations += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn el(group: usize, index: usize, f: &[f64]) -> Element {
        Element::new(group, index, f.to_vec())
    }

    #[test]
    fn beta_below_alpha_always() {
        let mut rng = stream(1, "weights");
        for _ in 0..200 {
            let spec = draw_weights(5, 3, &mut rng).unwrap();
            for p in spec.pair_weights() {
                let (a, b) = (spec.alpha(p.lo).unwrap(), spec.alpha(p.hi).unwrap());
                for i in 0..5 {
                    assert!(p.beta.weights()[i] <= a.weights()[i].min(b.weights()[i]));
                }
            }
        }
    }

    #[test]
    fn draw_counts_and_determinism() {
        let a = draw_weights(20, 2, &mut stream(42, "weights")).unwrap();
        let b = draw_weights(20, 2, &mut stream(42, "weights")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gamma(), 2);
        let alpha_count: usize = (0..2).map(|g| a.alpha(g).unwrap().dim()).sum();
        assert_eq!(alpha_count, 40);
        assert_eq!(a.pair_weights().len(), 1);
        assert_eq!(a.beta(0, 1).unwrap().dim(), 20);
        assert!(a.alpha.iter().flat_map(|m| m.weights()).all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn pair_slots_cover_all_pairs() {
        let spec = draw_weights(2, 4, &mut stream(3, "w")).unwrap();
        for lo in 0..4 {
            for hi in lo + 1..4 {
                let p = &spec.pair_weights()[pair_slot(4, lo, hi)];
                assert_eq!((p.lo, p.hi), (lo, hi));
                assert_eq!(spec.beta(hi, lo), spec.beta(lo, hi));
            }
        }
        assert!(spec.beta(2, 2).is_none());
        assert!(spec.beta(0, 4).is_none());
    }

    #[test]
    fn spec_rejects_beta_above_alpha() {
        let alpha = vec![
            WeightedEuclideanMetric::new(vec![0.5]).unwrap(),
            WeightedEuclideanMetric::new(vec![0.9]).unwrap(),
        ];
        let beta = vec![PairWeights {
            lo: 0,
            hi: 1,
            beta: WeightedEuclideanMetric::new(vec![0.6]).unwrap(),
        }];
        assert!(OracleSpec::new(alpha.clone(), beta).is_err());
        let eq = vec![PairWeights {
            lo: 0,
            hi: 1,
            beta: WeightedEuclideanMetric::new(vec![0.5]).unwrap(),
        }];
        assert!(OracleSpec::new(alpha, eq).is_ok());
    }

    #[test]
    fn spec_json_round_trip_validates() {
        let spec = draw_weights(4, 2, &mut stream(9, "w")).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: OracleSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let tampered = json.replacen("\"beta\":{\"weights\":[", "\"beta\":{\"weights\":[7.0,", 1);
        assert!(serde_json::from_str::<OracleSpec>(&tampered).is_err());
    }

    #[test]
    fn cross_similarity_examples() {
        let beta = WeightedEuclideanMetric::new(vec![1.0, 1.0]).unwrap();
        let x = el(0, 0, &[0.0, 0.0]);
        let y = el(1, 0, &[3.0, 4.0]);
        assert_eq!(cross_similarity(&beta, &x, &y).unwrap(), 5.0);
        let zero = WeightedEuclideanMetric::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(cross_similarity(&zero, &x, &y).unwrap(), 0.0);
        assert!(matches!(
            cross_similarity(&beta, &x, &el(0, 1, &[1.0, 1.0])),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn query_bills_once_per_unordered_pair() {
        let spec = draw_weights(3, 2, &mut stream(5, "w")).unwrap();
        let mut oracle = Oracle::new(spec);
        let x = el(0, 0, &[1.0, 2.0, 3.0]);
        let y = el(1, 0, &[0.0, 2.5, 1.0]);
        let v1 = oracle.query(&x, &y).unwrap();
        assert_eq!(oracle.count(), 1);
        let v2 = oracle.query(&x, &y).unwrap();
        let v3 = oracle.query(&y, &x).unwrap();
        assert_eq!((v1, v1), (v2, v3));
        assert_eq!(oracle.count(), 1);
        assert!(matches!(oracle.query(&x, &el(0, 1, &[0.0; 3])), Err(Error::Usage(_))));
        assert_eq!(oracle.count(), 1);
    }

    #[test]
    fn ledger_replays_bit_for_bit() {
        let spec = draw_weights(4, 3, &mut stream(6, "w")).unwrap();
        let mut rng = stream(6, "data");
        let mut oracle = Oracle::new(spec.clone());
        let pts: Vec<Element> = (0..30)
            .map(|i| el(i % 3, i, &(0..4).map(|_| rng.random_range(0.0..10.0)).collect::<Vec<_>>()))
            .collect();
        for a in &pts {
            for b in &pts {
                if a.group != b.group {
                    oracle.query(a, b).unwrap();
                }
            }
        }
        for (key, v) in oracle.ledger().iter() {
            let a = &pts[key.lo.index];
            let b = &pts[key.hi.index];
            assert_eq!(spec.similarity(a, b).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn m1_with_z_equal_x_has_zero_slack() {
        let spec = draw_weights(2, 2, &mut stream(2, "w")).unwrap();
        let d = spec.intra_metrics();
        let x = el(0, 0, &[1.0, 2.0]);
        let y = el(1, 0, &[4.0, -1.0]);
        let r = verify_cross_metric_properties(&d[0], &d[1], &spec, &[(x.clone(), x, y)], &[], 1e-9)
            .unwrap();
        assert_eq!(r.worst_slack, 0.0);
        assert_eq!(r.violations(), 0);
    }

    #[test]
    fn violating_beta_is_detected() {
        // beta above alpha on the only feature: sigma(x, y) = 2|x - y| while
        // d_l = |x - x'|. Brute force over a small colinear grid.
        let d = GroupMetric::from(WeightedEuclideanMetric::new(vec![1.0]).unwrap());
        let sigma = WeightedEuclideanMetric::new(vec![4.0]).unwrap();
        let grid = [0.0, 0.5, 1.0, 2.0];
        let mut m1 = Vec::new();
        for (i, a) in grid.iter().enumerate() {
            for (j, b) in grid.iter().enumerate() {
                for (k, c) in grid.iter().enumerate() {
                    m1.push((el(0, i, &[*a]), el(0, j, &[*b]), el(1, k, &[*c])));
                }
            }
        }
        let r = verify_cross_metric_properties(&d, &d, &sigma, &m1, &[], 1e-9).unwrap();
        assert!(r.m1_violations >= 1);
        // x = 0, z = 1, y = 1: sigma = 2 > d(x,z) + sigma(z,y) = 1
        assert!(r.worst_slack >= 1.0 - 1e-12);
    }

    #[test]
    fn mismatched_triple_groups_rejected() {
        let d = GroupMetric::from(WeightedEuclideanMetric::new(vec![1.0]).unwrap());
        let sigma = WeightedEuclideanMetric::new(vec![1.0]).unwrap();
        let bad = (el(0, 0, &[0.0]), el(1, 0, &[0.0]), el(1, 1, &[0.0]));
        assert!(verify_cross_metric_properties(&d, &d, &sigma, &[bad], &[], 1e-9).is_err());
    }

    proptest! {
        #[test]
        fn sigma_symmetric_nonnegative_and_dominated(
            seed in any::<u64>(),
            x in prop::collection::vec(-10.0f64..10.0, 6),
            y in prop::collection::vec(-10.0f64..10.0, 6),
        ) {
            let spec = draw_weights(6, 2, &mut stream(seed, "w")).unwrap();
            let a = el(0, 0, &x);
            let b = el(1, 0, &y);
            let s_ab = spec.similarity(&a, &b).unwrap();
            let s_ba = spec.similarity(&b, &a).unwrap();
            prop_assert!(s_ab >= 0.0);
            prop_assert_eq!(s_ab, s_ba);
            // sigma <= d_l on the same pair of coordinates, for both groups
            for g in 0..2 {
                prop_assert!(s_ab <= spec.alpha(g).unwrap().dist(&x, &y) + 1e-12);
            }
        }
    }
}
