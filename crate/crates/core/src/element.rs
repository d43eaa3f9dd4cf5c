use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Group id plus position inside that group's sample or support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementId {
    pub group: usize,
    pub index: usize,
}

/// A feature vector tagged with the group that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub group: usize,
    pub index: usize,
    pub features: Vec<f64>,
}

impl Element {
    pub fn new(group: usize, index: usize, features: Vec<f64>) -> Self {
        Element {
            group,
            index,
            features,
        }
    }

    pub fn id(&self) -> ElementId {
        ElementId {
            group: self.group,
            index: self.index,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Unordered cross-group pair, stored with the lower group first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub lo: ElementId,
    pub hi: ElementId,
}

impl PairKey {
    /// Fails when both ids belong to the same group.
    pub fn new(a: ElementId, b: ElementId) -> Result<Self> {
        if a.group == b.group {
            return Err(Error::usage(format!(
                "cross-group pair requires distinct groups, both are {}",
                a.group
            )));
        }
        Ok(if a.group < b.group {
            PairKey { lo: a, hi: b }
        } else {
            PairKey { lo: b, hi: a }
        })
    }
}

/// The i.i.d. sample `S_l` drawn for one group, in sampling order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub group: usize,
    pub elements: Vec<Element>,
}

impl GroupSample {
    /// Builds a sample from raw feature vectors, numbering them `0..n` in order.
    pub fn from_features(group: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let dim = first.len();
            if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
                return Err(Error::Shape {
                    expected: dim,
                    found: bad.len(),
                });
            }
        }
        let elements = rows
            .into_iter()
            .enumerate()
            .map(|(index, features)| Element::new(group, index, features))
            .collect();
        Ok(GroupSample { group, elements })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Feature dimension, or `None` for an empty sample.
    pub fn dim(&self) -> Option<usize> {
        self.elements.first().map(Element::dim)
    }

    pub fn get(&self, index: usize) -> Option<&Element> {
        self.elements.get(index)
    }

    /// Checks the group-tag and index-order invariants.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        for (pos, e) in self.elements.iter().enumerate() {
            if e.group != self.group {
                return Err(Error::usage(format!(
                    "element {} tagged with group {} inside sample of group {}",
                    pos, e.group, self.group
                )));
            }
            if e.index != pos {
                return Err(Error::usage(format!(
                    "element at position {} carries index {}",
                    pos, e.index
                )));
            }
            if Some(e.dim()) != dim {
                return Err(Error::Shape {
                    expected: dim.unwrap_or(0),
                    found: e.dim(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_key_is_canonical() {
        let a = ElementId { group: 1, index: 4 };
        let b = ElementId { group: 0, index: 9 };
        assert_eq!(PairKey::new(a, b).unwrap(), PairKey::new(b, a).unwrap());
        assert_eq!(PairKey::new(a, b).unwrap().lo, b);
    }

    #[test]
    fn pair_key_rejects_same_group() {
        let a = ElementId { group: 2, index: 0 };
        let b = ElementId { group: 2, index: 1 };
        assert!(matches!(PairKey::new(a, b), Err(Error::Usage(_))));
    }

    #[test]
    fn from_features_numbers_in_order() {
        let s = GroupSample::from_features(3, vec![vec![1.0], vec![2.0], vec![1.0]]).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.elements.iter().enumerate().all(|(i, e)| e.index == i && e.group == 3));
        s.validate().unwrap();
    }

    #[test]
    fn from_features_rejects_ragged_rows() {
        let err = GroupSample::from_features(0, vec![vec![1.0, 2.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::Shape { expected: 2, found: 1 }));
    }
}
