//! Pair tables and the query ledger built on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::element::PairKey;

/// Map from unordered cross-group pair to a similarity value, ordered by key.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<PairValue>", into = "Vec<PairValue>")]
pub struct PairTable {
    values: BTreeMap<PairKey, f64>,
}

/// One table entry in serialized form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub key: PairKey,
    pub value: f64,
}

impl PairTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, key: &PairKey) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn contains(&self, key: &PairKey) -> bool {
        self.values.contains_key(key)
    }

    pub fn insert(&mut self, key: PairKey, value: f64) -> Option<f64> {
        self.values.insert(key, value)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, &f64)> {
        self.values.iter()
    }
}

impl From<Vec<PairValue>> for PairTable {
    fn from(entries: Vec<PairValue>) -> Self {
        PairTable {
            values: entries.into_iter().map(|e| (e.key, e.value)).collect(),
        }
    }
}

impl From<PairTable> for Vec<PairValue> {
    fn from(t: PairTable) -> Self {
        t.values
            .into_iter()
            .map(|(key, value)| PairValue { key, value })
            .collect()
    }
}

/// Every distinct cross-group pair the oracle has answered.
///
/// The cost of a learner is `count()`, the number of distinct unordered
/// pairs. `ordered_count()` counts the same set once per ordered group pair,
/// the convention of the `gamma(gamma-1) N^2` bound.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryLedger {
    answered: PairTable,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.answered.len()
    }

    pub fn ordered_count(&self) -> usize {
        2 * self.answered.len()
    }

    pub fn get(&self, key: &PairKey) -> Option<f64> {
        self.answered.get(key)
    }

    pub fn contains(&self, key: &PairKey) -> bool {
        self.answered.contains(key)
    }

    /// Returns the cached value, or computes, stores and returns a fresh one.
    /// `answer` runs only on a miss.
    pub fn get_or_record<E>(
        &mut self,
        key: PairKey,
        answer: impl FnOnce() -> Result<f64, E>,
    ) -> Result<f64, E> {
        if let Some(v) = self.answered.get(&key) {
            return Ok(v);
        }
        let v = answer()?;
        self.answered.insert(key, v);
        Ok(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, &f64)> {
        self.answered.iter()
    }

    pub fn table(&self) -> &PairTable {
        &self.answered
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::ElementId;
    use proptest::prelude::*;

    fn key(a: (usize, usize), b: (usize, usize)) -> PairKey {
        PairKey::new(
            ElementId { group: a.0, index: a.1 },
            ElementId { group: b.0, index: b.1 },
        )
        .unwrap()
    }

    #[test]
    fn hit_does_not_recompute() {
        let mut l = QueryLedger::new();
        let v = l.get_or_record::<()>(key((0, 1), (1, 2)), || Ok(0.5)).unwrap();
        assert_eq!(v, 0.5);
        let v = l
            .get_or_record::<()>(key((1, 2), (0, 1)), || panic!("cache miss on repeat"))
            .unwrap();
        assert_eq!(v, 0.5);
        assert_eq!(l.count(), 1);
        assert_eq!(l.ordered_count(), 2);
    }

    #[test]
    fn failed_answer_is_not_stored() {
        let mut l = QueryLedger::new();
        assert!(l.get_or_record(key((0, 0), (1, 0)), || Err("boom")).is_err());
        assert_eq!(l.count(), 0);
    }

    proptest! {
        #[test]
        fn count_equals_distinct_pairs(
            reqs in prop::collection::vec((0usize..3, 0usize..5, 0usize..3, 0usize..5), 0..60)
        ) {
            let mut l = QueryLedger::new();
            let mut distinct = std::collections::HashSet::new();
            for (g1, i1, g2, i2) in reqs {
                if g1 == g2 { continue; }
                let k = key((g1, i1), (g2, i2));
                distinct.insert(k);
                l.get_or_record::<()>(k, || Ok((g1 * 100 + i1 + g2 * 10 + i2) as f64 / 7.0)).unwrap();
                prop_assert_eq!(l.count(), distinct.len());
            }
            let json = serde_json::to_string(&l).unwrap();
            let back: QueryLedger = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, l);
        }
    }
}
