//! Intra-group metrics `d_l` and nearest-sample search.

use serde::{Deserialize, Serialize};

use crate::element::{Element, GroupSample};
use crate::error::{Error, Result};

/// A distance over raw feature slices. Callers are responsible for checking
/// that both slices have the metric's dimension; see [`intra_distance`] for
/// the checked entry point.
pub trait Metric {
    fn dist(&self, a: &[f64], b: &[f64]) -> f64;
}

/// `sqrt(sum_i w_i (a_i - b_i)^2)` with non-negative weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedEuclideanMetric {
    weights: Vec<f64>,
}

impl WeightedEuclideanMetric {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("metric needs at least one weight"));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::param(format!("weight {i} is {w}, must be finite and >= 0")));
        }
        Ok(WeightedEuclideanMetric { weights })
    }

    pub fn unweighted(dim: usize) -> Result<Self> {
        Self::new(vec![1.0; dim])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

impl Metric for WeightedEuclideanMetric {
    #[inline]
    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| {
                let d = x - y;
                w * d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// 0 for identical feature vectors, 1 otherwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteMetric;

impl Metric for DiscreteMetric {
    #[inline]
    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        if a == b {
            0.0
        } else {
            1.0
        }
    }
}

/// The intra-group metric attached to a group in a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupMetric {
    WeightedEuclidean(WeightedEuclideanMetric),
    Discrete,
}

impl GroupMetric {
    /// Feature dimension the metric is defined for, if fixed.
    pub fn dim(&self) -> Option<usize> {
        match self {
            GroupMetric::WeightedEuclidean(m) => Some(m.dim()),
            GroupMetric::Discrete => None,
        }
    }

    pub fn check_dim(&self, found: usize) -> Result<()> {
        match self.dim() {
            Some(expected) if expected != found => Err(Error::Shape { expected, found }),
            _ => Ok(()),
        }
    }
}

impl From<WeightedEuclideanMetric> for GroupMetric {
    fn from(m: WeightedEuclideanMetric) -> Self {
        GroupMetric::WeightedEuclidean(m)
    }
}

impl Metric for GroupMetric {
    #[inline]
    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            GroupMetric::WeightedEuclidean(m) => m.dist(a, b),
            GroupMetric::Discrete => DiscreteMetric.dist(a, b),
        }
    }
}

/// `d_l(x, y)` for two members of the same group.
pub fn intra_distance(metric: &GroupMetric, x: &Element, y: &Element) -> Result<f64> {
    if x.group != y.group {
        return Err(Error::usage(format!(
            "intra-group distance between groups {} and {}",
            x.group, y.group
        )));
    }
    if x.dim() != y.dim() {
        return Err(Error::Shape {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    metric.check_dim(x.dim())?;
    Ok(metric.dist(&x.features, &y.features))
}

/// `pi(x)`: the sampled element closest to `x`, lowest index on ties.
pub fn nearest_in_sample<'s>(
    x: &Element,
    sample: &'s GroupSample,
    metric: &GroupMetric,
) -> Result<(&'s Element, f64)> {
    if x.group != sample.group {
        return Err(Error::usage(format!(
            "element of group {} searched in sample of group {}",
            x.group, sample.group
        )));
    }
    let first = sample
        .elements
        .first()
        .ok_or_else(|| Error::usage(format!("sample of group {} is empty", sample.group)))?;
    if first.dim() != x.dim() {
        return Err(Error::Shape {
            expected: first.dim(),
            found: x.dim(),
        });
    }
    metric.check_dim(x.dim())?;

    let mut best = first;
    let mut best_d = metric.dist(&x.features, &first.features);
    for e in &sample.elements[1..] {
        let d = metric.dist(&x.features, &e.features);
        // strict: earlier index wins ties
        if d < best_d {
            best = e;
            best_d = d;
        }
    }
    Ok((best, best_d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wm(w: &[f64]) -> GroupMetric {
        WeightedEuclideanMetric::new(w.to_vec()).unwrap().into()
    }

    fn el(index: usize, f: &[f64]) -> Element {
        Element::new(0, index, f.to_vec())
    }

    #[test]
    fn three_four_five() {
        let d = intra_distance(&wm(&[1.0, 1.0]), &el(0, &[0.0, 0.0]), &el(1, &[3.0, 4.0])).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn weights_scale_coordinates() {
        let d = intra_distance(&wm(&[0.25, 1.0]), &el(0, &[0.0, 0.0]), &el(1, &[2.0, 0.0])).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn identity_is_zero() {
        let x = el(0, &[1.5, -2.0, 7.25]);
        assert_eq!(intra_distance(&wm(&[0.3, 0.9, 0.1]), &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn group_mismatch_is_usage_error() {
        let x = el(0, &[0.0]);
        let y = Element::new(1, 0, vec![1.0]);
        assert!(matches!(intra_distance(&wm(&[1.0]), &x, &y), Err(Error::Usage(_))));
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let x = el(0, &[0.0]);
        let y = el(1, &[1.0, 2.0]);
        assert!(matches!(intra_distance(&wm(&[1.0]), &x, &y), Err(Error::Shape { .. })));
        let z = el(2, &[1.0]);
        assert!(matches!(
            intra_distance(&wm(&[1.0, 1.0]), &x, &z),
            Err(Error::Shape { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(WeightedEuclideanMetric::new(vec![1.0, -0.1]).is_err());
        assert!(WeightedEuclideanMetric::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn discrete_metric() {
        let m = GroupMetric::Discrete;
        assert_eq!(m.dist(&[3.0], &[3.0]), 0.0);
        assert_eq!(m.dist(&[3.0], &[4.0]), 1.0);
    }

    fn sample(points: &[f64]) -> GroupSample {
        GroupSample::from_features(0, points.iter().map(|p| vec![*p]).collect()).unwrap()
    }

    #[test]
    fn nearest_picks_minimum() {
        let s = sample(&[0.0, 1.0, 5.0]);
        let (e, d) = nearest_in_sample(&el(99, &[0.9]), &s, &wm(&[1.0])).unwrap();
        assert_eq!(e.index, 1);
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn nearest_of_sampled_point_is_itself() {
        let s = sample(&[0.0, 1.0, 5.0]);
        let (e, d) = nearest_in_sample(&el(99, &[5.0]), &s, &wm(&[1.0])).unwrap();
        assert_eq!((e.index, d), (2, 0.0));
    }

    #[test]
    fn nearest_tie_goes_to_lowest_index() {
        let s = sample(&[0.0, 2.0]);
        let (e, _) = nearest_in_sample(&el(99, &[1.0]), &s, &wm(&[1.0])).unwrap();
        assert_eq!(e.index, 0);
    }

    #[test]
    fn nearest_in_empty_sample_fails() {
        let s = GroupSample {
            group: 0,
            elements: vec![],
        };
        assert!(matches!(
            nearest_in_sample(&el(0, &[0.0]), &s, &wm(&[1.0])),
            Err(Error::Usage(_))
        ));
    }

    proptest! {
        #[test]
        fn triangle_inequality(
            w in prop::collection::vec(0.0f64..1.0, 4),
            x in prop::collection::vec(-10.0f64..10.0, 4),
            y in prop::collection::vec(-10.0f64..10.0, 4),
            z in prop::collection::vec(-10.0f64..10.0, 4),
        ) {
            let m = WeightedEuclideanMetric::new(w).unwrap();
            prop_assert!(m.dist(&x, &z) <= m.dist(&x, &y) + m.dist(&y, &z) + 1e-9);
            prop_assert_eq!(m.dist(&x, &y), m.dist(&y, &x));
        }

        #[test]
        fn nearest_is_deterministic(
            pts in prop::collection::vec(-5.0f64..5.0, 1..30),
            q in -6.0f64..6.0,
        ) {
            let s = sample(&pts);
            let m = wm(&[1.0]);
            let x = el(0, &[q]);
            let (a, da) = nearest_in_sample(&x, &s, &m).unwrap();
            let (b, db) = nearest_in_sample(&x, &s, &m).unwrap();
            prop_assert_eq!(a.index, b.index);
            prop_assert_eq!(da, db);
            // brute-force argmin with explicit lowest-index tie-break
            let best = pts.iter().map(|p| (p - q).abs()).fold(f64::INFINITY, f64::min);
            let first = pts.iter().position(|p| (p - q).abs() == best).unwrap();
            prop_assert_eq!(a.index, first);
        }
    }
}
