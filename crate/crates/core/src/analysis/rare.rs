//! Probability `p_l(eps, delta)` that a fresh draw is `(eps, delta)`-rare,
//! i.e. that its `eps`-ball carries less than `delta` of the group's mass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{FiniteSupportSpec, GroupDistribution};
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::rng::Rng as StreamRng;
use rand::SeedableRng;

/// Monte Carlo estimate of `p_l(eps, delta)`.
///
/// Each of the `outer` draws `x` has its ball mass estimated from `inner`
/// fresh draws and is called rare when that estimate is strictly below
/// `delta`. Points whose true mass sits close to `delta` are misclassified
/// with probability that shrinks as `inner` grows, so the estimate is biased
/// at small `inner`; the `outer` draws add ordinary binomial noise on top.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RareEstimate {
    pub p_hat: f64,
    pub outer: usize,
    pub inner: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub rare_count: usize,
    /// Estimated ball mass of each outer draw.
    pub ball_mass: Vec<f64>,
    pub method: String,
}

/// Outer and inner draws come from separate child streams of `rng`, so
/// changing `inner` keeps the outer draws fixed.
pub fn estimate_rare_probability<D, M, R>(
    dist: &D,
    metric: &M,
    epsilon: f64,
    delta: f64,
    outer: usize,
    inner: usize,
    rng: &mut R,
) -> Result<RareEstimate>
where
    D: GroupDistribution,
    M: Metric,
    R: Rng + ?Sized,
{
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
    }
    if outer == 0 {
        return Err(Error::param("need at least one outer draw"));
    }
    let min_inner = (10.0 / delta).ceil() as usize;
    if inner < min_inner {
        return Err(Error::param(format!(
            "inner draws {inner} below ceil(10/delta) = {min_inner}"
        )));
    }
    let mut outer_rng = StreamRng::seed_from_u64(rng.random());
    let mut inner_rng = StreamRng::seed_from_u64(rng.random());

    let mut ball_mass = Vec::with_capacity(outer);
    let mut rare_count = 0;
    for _ in 0..outer {
        let x = dist.draw(&mut outer_rng);
        let hits = (0..inner)
            .filter(|_| metric.dist(&x, &dist.draw(&mut inner_rng)) <= epsilon)
            .count();
        let q = hits as f64 / inner as f64;
        if q < delta {
            rare_count += 1;
        }
        ball_mass.push(q);
    }
    Ok(RareEstimate {
        p_hat: rare_count as f64 / outer as f64,
        outer,
        inner,
        epsilon,
        delta,
        rare_count,
        ball_mass,
        method: format!(
            "Monte Carlo: {outer} outer draws, ball mass from {inner} inner draws each, rare iff estimate < delta; biased near mass = delta for small inner"
        ),
    })
}

/// Exact `p_l(eps, delta)` for a finite support.
pub fn exact_rare_probability<M: Metric>(spec: &FiniteSupportSpec, metric: &M, epsilon: f64, delta: f64) -> f64 {
    spec.support()
        .iter()
        .zip(spec.probabilities())
        .filter(|(s, _)| spec.ball_mass(s, metric, epsilon) < delta)
        .map(|(_, p)| p)
        .sum()
}

/// `1/delta + p * n`, the expected-size bound on the optimal cover.
pub fn expected_opt_bound(delta: f64, p: f64, n: usize) -> f64 {
    1.0 / delta + p * n as f64
}
