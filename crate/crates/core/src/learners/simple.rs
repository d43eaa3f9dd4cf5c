use serde::{Deserialize, Serialize};

use super::{Predictor, TrainingSet};
use crate::element::{Element, PairKey};
use crate::error::{Error, Result};
use crate::ledger::PairTable;
use crate::oracle::{CrossSimilarity, Oracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// Query every cross pair of samples during training.
    Eager,
    /// Query a pair of samples only when a prediction first needs it.
    Lazy,
}

/// Predicts `sigma(pi(x), pi(y))` from the nearest sampled proxies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleModel {
    set: TrainingSet,
    mode: QueryMode,
    sigma: PairTable,
}

/// `sum_{l < l'} |S_l| |S_l'|`: distinct queries of eager training.
pub fn eager_query_count(set: &TrainingSet) -> u64 {
    set.group_pairs()
        .map(|(a, b)| set.samples()[a].len() as u64 * set.samples()[b].len() as u64)
        .sum()
}

pub fn train_simple<S: CrossSimilarity>(
    set: TrainingSet,
    oracle: &mut Oracle<S>,
    mode: QueryMode,
) -> Result<SimpleModel> {
    let mut sigma = PairTable::new();
    if mode == QueryMode::Eager {
        let pairs: Vec<_> = set.group_pairs().collect();
        for (lo, hi) in pairs {
            for x in &set.samples()[lo].elements {
                for y in &set.samples()[hi].elements {
                    let v = oracle.query(x, y)?;
                    sigma.insert(PairKey::new(x.id(), y.id())?, v);
                }
            }
        }
    }
    Ok(SimpleModel { set, mode, sigma })
}

impl SimpleModel {
    pub fn training_set(&self) -> &TrainingSet {
        &self.set
    }

    pub fn mode(&self) -> QueryMode {
        self.mode
    }

    pub fn sigma_table(&self) -> &PairTable {
        &self.sigma
    }

    fn proxy_key(&self, x: &Element, y: &Element) -> Result<(PairKey, Element, Element)> {
        self.set.check_cross_pair(x, y)?;
        let (px, _) = self.set.proxy(x)?;
        let (py, _) = self.set.proxy(y)?;
        Ok((PairKey::new(px.id(), py.id())?, px.clone(), py.clone()))
    }

    /// Table lookup only. A lazy model errors on pairs it has not fetched yet.
    pub fn predict(&self, x: &Element, y: &Element) -> Result<f64> {
        let (key, _, _) = self.proxy_key(x, y)?;
        self.sigma.get(&key).ok_or_else(|| match self.mode {
            QueryMode::Eager => Error::Internal(format!("eager table lacks {key:?}")),
            QueryMode::Lazy => Error::usage(format!(
                "pair {key:?} not fetched yet; predict through an oracle"
            )),
        })
    }

    /// Lookup, falling back to one oracle query for a lazy model. Adds at
    /// most one ledger entry.
    pub fn predict_with<S: CrossSimilarity>(
        &mut self,
        oracle: &mut Oracle<S>,
        x: &Element,
        y: &Element,
    ) -> Result<f64> {
        let (key, px, py) = self.proxy_key(x, y)?;
        if let Some(v) = self.sigma.get(&key) {
            return Ok(v);
        }
        if self.mode == QueryMode::Eager {
            return Err(Error::Internal(format!("eager table lacks {key:?}")));
        }
        let v = oracle.query(&px, &py)?;
        self.sigma.insert(key, v);
        Ok(v)
    }
}

impl Predictor for SimpleModel {
    fn predict(&mut self, x: &Element, y: &Element) -> Result<f64> {
        SimpleModel::predict(self, x, y)
    }
}

/// A simple model paired with the oracle it fetches missing pairs from.
pub struct LazySimple<'a, S> {
    pub model: &'a mut SimpleModel,
    pub oracle: &'a mut Oracle<S>,
}

impl<S: CrossSimilarity> Predictor for LazySimple<'_, S> {
    fn predict(&mut self, x: &Element, y: &Element) -> Result<f64> {
        self.model.predict_with(self.oracle, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::GroupSample;
    use crate::metric::{GroupMetric, WeightedEuclideanMetric};
    use crate::oracle::{draw_weights, OracleSpec};
    use crate::rng::stream;
    use rand::Rng;

    fn random_set(sizes: &[usize], dim: usize, seed: u64) -> (TrainingSet, OracleSpec) {
        let spec = draw_weights(dim, sizes.len(), &mut stream(seed, "weights")).unwrap();
        let mut rng = stream(seed, "data");
        let samples = sizes
            .iter()
            .enumerate()
            .map(|(g, n)| {
                let rows = (0..*n)
                    .map(|_| (0..dim).map(|_| rng.random_range(0.0..10.0)).collect())
                    .collect();
                GroupSample::from_features(g, rows).unwrap()
            })
            .collect();
        (TrainingSet::new(samples, spec.intra_metrics()).unwrap(), spec)
    }

    #[test]
    fn eager_two_groups_of_47() {
        let (set, spec) = random_set(&[47, 47], 3, 1);
        let mut oracle = Oracle::new(spec);
        let model = train_simple(set, &mut oracle, QueryMode::Eager).unwrap();
        assert_eq!(oracle.count(), 2209);
        assert_eq!(oracle.ledger().ordered_count(), 4418);
        assert_eq!(model.sigma_table().len(), 2209);
        assert_eq!(eager_query_count(model.training_set()), 2209);
    }

    #[test]
    fn eager_three_groups() {
        let (set, spec) = random_set(&[2, 3, 4], 2, 2);
        let mut oracle = Oracle::new(spec);
        train_simple(set, &mut oracle, QueryMode::Eager).unwrap();
        assert_eq!(oracle.count(), 26);
    }

    #[test]
    fn lazy_training_is_free_and_prediction_bills_at_most_one() {
        let (set, spec) = random_set(&[47, 47], 3, 3);
        let mut oracle = Oracle::new(spec);
        let mut model = train_simple(set, &mut oracle, QueryMode::Lazy).unwrap();
        assert_eq!(oracle.count(), 0);
        let x = Element::new(0, 1000, vec![1.0, 2.0, 3.0]);
        let y = Element::new(1, 1000, vec![3.0, 2.0, 1.0]);
        assert!(matches!(model.predict(&x, &y), Err(Error::Usage(_))));
        let v = model.predict_with(&mut oracle, &x, &y).unwrap();
        assert_eq!(oracle.count(), 1);
        assert_eq!(model.predict_with(&mut oracle, &x, &y).unwrap(), v);
        assert_eq!(model.predict(&x, &y).unwrap(), v);
        assert_eq!(oracle.count(), 1);
    }

    #[test]
    fn sampled_points_predict_exactly() {
        let (set, spec) = random_set(&[10, 12], 4, 4);
        let mut oracle = Oracle::new(spec.clone());
        let model = train_simple(set.clone(), &mut oracle, QueryMode::Eager).unwrap();
        for x in &set.samples()[0].elements {
            for y in &set.samples()[1].elements {
                let p = model.predict(x, y).unwrap();
                assert_eq!(p, spec.similarity(x, y).unwrap());
            }
        }
    }

    #[test]
    fn one_dimensional_proxy() {
        let m = GroupMetric::from(WeightedEuclideanMetric::new(vec![1.0]).unwrap());
        let s0 = GroupSample::from_features(0, vec![vec![0.0], vec![10.0]]).unwrap();
        let s1 = GroupSample::from_features(1, vec![vec![3.0]]).unwrap();
        let set = TrainingSet::new(vec![s0, s1], vec![m.clone(), m]).unwrap();
        let beta = WeightedEuclideanMetric::new(vec![1.0]).unwrap();
        let mut oracle = Oracle::new(beta);
        let model = train_simple(set, &mut oracle, QueryMode::Eager).unwrap();
        let x = Element::new(0, 7, vec![0.4]);
        let y = Element::new(1, 7, vec![3.0]);
        let (px, d) = model.training_set().proxy(&x).unwrap();
        assert_eq!(px.features, vec![0.0]);
        assert!((d - 0.4).abs() < 1e-15);
        assert_eq!(model.predict(&x, &y).unwrap(), 3.0);
    }

    #[test]
    fn unknown_or_same_group_rejected() {
        let (set, spec) = random_set(&[3, 3], 2, 5);
        let mut oracle = Oracle::new(spec);
        let model = train_simple(set, &mut oracle, QueryMode::Eager).unwrap();
        let x = Element::new(0, 0, vec![0.0, 0.0]);
        let bad = Element::new(5, 0, vec![0.0, 0.0]);
        assert!(matches!(model.predict(&x, &bad), Err(Error::Usage(_))));
        assert!(matches!(model.predict(&x, &x), Err(Error::Usage(_))));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let (set, spec) = random_set(&[6, 5], 3, 6);
        let mut oracle = Oracle::new(spec);
        let model = train_simple(set, &mut oracle, QueryMode::Eager).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: SimpleModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }
}
