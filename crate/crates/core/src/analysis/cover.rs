use itertools::Itertools;

use crate::element::GroupSample;
use crate::error::{Error, Result};
use crate::metric::{GroupMetric, Metric};

pub const MAX_BRUTEFORCE_SIZE: usize = 20;

/// Minimum number of balls `{x' : d(c, x') <= radius}`, centred on sample
/// points, needed to cover the sample. Exhaustive over subsets in order of
/// size, so only small samples are accepted.
pub fn bruteforce_set_cover_opt(sample: &GroupSample, metric: &GroupMetric, radius: f64) -> Result<usize> {
    let n = sample.len();
    if n > MAX_BRUTEFORCE_SIZE {
        return Err(Error::usage(format!(
            "exhaustive cover limited to {MAX_BRUTEFORCE_SIZE} points, got {n}"
        )));
    }
    if n == 0 {
        return Ok(0);
    }
    metric.check_dim(sample.dim().unwrap_or(0))?;
    let pts = &sample.elements;
    let balls: Vec<u32> = (0..n)
        .map(|c| {
            (0..n)
                .filter(|&j| metric.dist(&pts[c].features, &pts[j].features) <= radius)
                .fold(0u32, |acc, j| acc | (1 << j))
        })
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    for k in 1..=n {
        let hit = (0..n)
            .combinations(k)
            .any(|centres| centres.iter().fold(0u32, |acc, &c| acc | balls[c]) == full);
        if hit {
            return Ok(k);
        }
    }
    // every ball contains its own centre, so k = n always covers
    unreachable!("the full sample is a cover")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::WeightedEuclideanMetric;

    fn line(points: &[f64]) -> GroupSample {
        GroupSample::from_features(0, points.iter().map(|p| vec![*p]).collect()).unwrap()
    }

    fn unit() -> GroupMetric {
        WeightedEuclideanMetric::new(vec![1.0]).unwrap().into()
    }

    /// Independent check: minimum over all 2^n subsets by bitmask.
    fn all_subsets_opt(points: &[f64], radius: f64) -> usize {
        let n = points.len();
        (1u32..(1 << n))
            .filter(|mask| {
                (0..n).all(|j| (0..n).any(|c| mask & (1 << c) != 0 && (points[c] - points[j]).abs() <= radius))
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap_or(0)
    }

    #[test]
    fn worked_example() {
        assert_eq!(bruteforce_set_cover_opt(&line(&[0.0, 0.3, 10.0]), &unit(), 0.4).unwrap(), 2);
        assert_eq!(all_subsets_opt(&[0.0, 0.3, 10.0], 0.4), 2);
    }

    #[test]
    fn all_within_radius() {
        assert_eq!(bruteforce_set_cover_opt(&line(&[1.0, 1.1, 1.2, 0.95]), &unit(), 0.5).unwrap(), 1);
    }

    #[test]
    fn all_far_apart() {
        let pts: Vec<f64> = (0..8).map(|i| i as f64 * 3.0).collect();
        assert_eq!(bruteforce_set_cover_opt(&line(&pts), &unit(), 1.0).unwrap(), 8);
    }

    #[test]
    fn chain_needs_middle_centres() {
        // 0, 1, 2, 3, 4 with radius 1: centres 1 and 3 cover everything
        let pts = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(bruteforce_set_cover_opt(&line(&pts), &unit(), 1.0).unwrap(), 2);
    }

    #[test]
    fn size_cap() {
        let pts: Vec<f64> = (0..21).map(|i| i as f64).collect();
        assert!(matches!(bruteforce_set_cover_opt(&line(&pts), &unit(), 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn agrees_with_subset_enumeration_and_is_monotone() {
        use crate::rng::stream;
        use rand::Rng;
        let mut rng = stream(17, "cover");
        for _ in 0..150 {
            let n = rng.random_range(1..=10);
            let pts: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
            let r = rng.random_range(0.05..2.0);
            let opt = bruteforce_set_cover_opt(&line(&pts), &unit(), r).unwrap();
            assert_eq!(opt, all_subsets_opt(&pts, r));
            assert!(opt <= n);
            let bigger = bruteforce_set_cover_opt(&line(&pts), &unit(), r * 1.5).unwrap();
            assert!(bigger <= opt);
        }
    }
}
