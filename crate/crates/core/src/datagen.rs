//! Synthetic group distributions: diagonal Gaussian mixtures with dyadic
//! mixing weights, and the finite-support instances with independent uniform
//! cross similarities on which no learner can beat guessing.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::element::{Element, GroupSample};
use crate::error::{Error, Result};
use crate::metric::{GroupMetric, Metric};
use crate::oracle::CrossSimilarity;
use crate::rng::keyed_unit;

/// A distribution `D_l` that can be sampled for feature vectors.
pub trait GroupDistribution {
    fn dim(&self) -> usize;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>;

    fn draw_element<R: Rng + ?Sized>(&self, group: usize, index: usize, rng: &mut R) -> Element {
        Element::new(group, index, self.draw(rng))
    }

    /// `n` i.i.d. draws as the sample `S_l`, indexed `0..n`.
    fn sample<R: Rng + ?Sized>(&self, n: usize, group: usize, rng: &mut R) -> GroupSample {
        GroupSample {
            group,
            elements: (0..n).map(|i| self.draw_element(group, i, rng)).collect(),
        }
    }
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::param("probability vector is empty"));
    }
    if let Some(bad) = p.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::param(format!("probability {bad} is negative or not finite")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::param(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Inverse-CDF pick; the last non-zero slot absorbs rounding at the top.
fn pick<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let i = cdf.partition_point(|c| *c <= u);
    if i < cdf.len() {
        i
    } else {
        let top = cdf[cdf.len() - 1];
        cdf.partition_point(|c| *c < top)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Mixture of axis-aligned Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct MixtureSpec {
    components: Vec<Component>,
    weights: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMixture {
    components: Vec<Component>,
    weights: Vec<f64>,
}

impl TryFrom<RawMixture> for MixtureSpec {
    type Error = Error;

    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureSpec::new(raw.components, raw.weights)
    }
}

impl MixtureSpec {
    pub fn new(components: Vec<Component>, weights: Vec<f64>) -> Result<Self> {
        if components.len() != weights.len() {
            return Err(Error::param(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        check_probabilities(&weights)?;
        let dim = components[0].mean.len();
        for c in &components {
            if c.mean.len() != dim || c.variances.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    found: if c.mean.len() != dim { c.mean.len() } else { c.variances.len() },
                });
            }
            if let Some(v) = c.variances.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::param(format!("variance {v} is negative or not finite")));
            }
        }
        let cdf = cumulative(&weights);
        Ok(MixtureSpec {
            components,
            weights,
            cdf,
        })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the component the next draw comes from.
    pub fn pick_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick(&self.cdf, rng)
    }
}

impl GroupDistribution for MixtureSpec {
    fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let c = &self.components[self.pick_component(rng)];
        c.mean
            .iter()
            .zip(&c.variances)
            .map(|(m, v)| {
                let z: f64 = StandardNormal.sample(rng);
                m + v.sqrt() * z
            })
            .collect()
    }
}

/// `1/2, 1/4, ..., 1/2^(k-1), 1/2^(k-1)`; sums to exactly 1.
pub fn dyadic_weights(k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (1..k).map(|i| 0.5f64.powi(i as i32)).collect();
    w.push(0.5f64.powi(k as i32 - 1));
    w
}

/// `k` components with means uniform on `[0, 10]^dim`, diagonal variances
/// uniform on `[0, u_var]`, and dyadic mixing weights.
pub fn make_mixture_group<R: Rng + ?Sized>(
    dim: usize,
    k: usize,
    u_var: f64,
    rng: &mut R,
) -> Result<MixtureSpec> {
    if dim == 0 || k == 0 {
        return Err(Error::param("mixture needs dim >= 1 and k >= 1"));
    }
    if !(u_var > 0.0 && u_var.is_finite()) {
        return Err(Error::param(format!("u_var must be > 0, got {u_var}")));
    }
    let components = (0..k)
        .map(|_| Component {
            mean: (0..dim).map(|_| rng.random_range(0.0..=10.0)).collect(),
            variances: (0..dim).map(|_| rng.random_range(0.0..=u_var)).collect(),
        })
        .collect();
    MixtureSpec::new(components, dyadic_weights(k))
}

pub fn sample_from_mixture<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    n: usize,
    group: usize,
    rng: &mut R,
) -> Result<GroupSample> {
    if n == 0 {
        return Err(Error::param("sample size must be >= 1"));
    }
    Ok(spec.sample(n, group, rng))
}

/// Distribution over an explicit finite list of feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFinite")]
pub struct FiniteSupportSpec {
    support: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

#[derive(Deserialize)]
struct RawFinite {
    support: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
}

impl TryFrom<RawFinite> for FiniteSupportSpec {
    type Error = Error;

    fn try_from(raw: RawFinite) -> Result<Self> {
        FiniteSupportSpec::new(raw.support, raw.probabilities)
    }
}

impl FiniteSupportSpec {
    pub fn new(support: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Self> {
        if support.len() != probabilities.len() {
            return Err(Error::param(format!(
                "{} support points but {} probabilities",
                support.len(),
                probabilities.len()
            )));
        }
        check_probabilities(&probabilities)?;
        let dim = support[0].len();
        if let Some(bad) = support.iter().find(|s| s.len() != dim) {
            return Err(Error::Shape {
                expected: dim,
                found: bad.len(),
            });
        }
        let cdf = cumulative(&probabilities);
        Ok(FiniteSupportSpec {
            support,
            probabilities,
            cdf,
        })
    }

    pub fn uniform(support: Vec<Vec<f64>>) -> Result<Self> {
        let n = support.len();
        if n == 0 {
            return Err(Error::param("support is empty"));
        }
        let mut p = vec![1.0 / n as f64; n];
        // absorb rounding so the vector sums to 1 within tolerance
        let drift = 1.0 - p.iter().sum::<f64>();
        p[n - 1] += drift;
        Self::new(support, p)
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Exact `Pr_{x' ~ D}[d(center, x') <= radius]`.
    pub fn ball_mass(&self, center: &[f64], metric: &impl Metric, radius: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .filter(|(s, _)| metric.dist(center, s) <= radius)
            .map(|(_, p)| p)
            .sum()
    }
}

impl GroupDistribution for FiniteSupportSpec {
    fn dim(&self) -> usize {
        self.support[0].len()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.support[pick(&self.cdf, rng)].clone()
    }
}

/// Cross similarities drawn independently and uniformly from `[0, 1)` per
/// pair of support ids, generated on demand from a keyed hash so that huge
/// supports never need a materialized table. The support id is the first
/// feature of each element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedUniformTable {
    pub seed: u64,
}

fn support_id(e: &Element) -> Result<u64> {
    match e.features.first() {
        Some(v) if *v >= 0.0 && v.fract() == 0.0 && *v < 2f64.powi(53) => Ok(*v as u64),
        _ => Err(Error::usage(format!(
            "element {:?} carries no integral support id",
            e.id()
        ))),
    }
}

impl CrossSimilarity for HashedUniformTable {
    fn similarity(&self, x: &Element, y: &Element) -> Result<f64> {
        if x.group == y.group {
            return Err(Error::usage(format!(
                "cross similarity requested inside group {}",
                x.group
            )));
        }
        let (a, b) = if x.group < y.group { (x, y) } else { (y, x) };
        // group ids are folded in so distinct group pairs get distinct tables
        let ga = (a.group as u64) << 48 | support_id(a)?;
        let gb = (b.group as u64) << 48 | support_id(b)?;
        Ok(keyed_unit(self.seed, ga, gb))
    }
}

/// A two-group instance with discrete intra-group metrics and an
/// independent uniform cross table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialInstance {
    pub groups: [FiniteSupportSpec; 2],
    pub table: HashedUniformTable,
}

impl AdversarialInstance {
    /// The 0/1 metric used inside both groups.
    pub fn metric(&self) -> GroupMetric {
        GroupMetric::Discrete
    }

    pub fn metrics(&self) -> Vec<GroupMetric> {
        vec![GroupMetric::Discrete, GroupMetric::Discrete]
    }
}

fn indexed_support(n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|j| {
            let mut f = vec![0.0; dim];
            f[0] = j as f64;
            f
        })
        .collect()
}

/// Group 1 is a point mass; group 2 is uniform over `support_size` points.
/// With `support_size` far above the sample size, a fresh group-2 draw is
/// almost never a sampled point and its similarity is independent of
/// everything queried.
pub fn no_free_lunch_instance<R: Rng + ?Sized>(
    support_size: usize,
    dim: usize,
    rng: &mut R,
) -> Result<AdversarialInstance> {
    if support_size < 2 {
        return Err(Error::param(format!("support_size must be >= 2, got {support_size}")));
    }
    if dim == 0 {
        return Err(Error::param("dimension must be >= 1"));
    }
    let g1 = FiniteSupportSpec::new(indexed_support(1, dim), vec![1.0])?;
    let g2 = FiniteSupportSpec::uniform(indexed_support(support_size, dim))?;
    Ok(AdversarialInstance {
        groups: [g1, g2],
        table: HashedUniformTable { seed: rng.random() },
    })
}

/// Both groups uniform over `1/delta` points, so every pair of points is
/// equally likely to be compared.
pub fn query_bound_instance<R: Rng + ?Sized>(
    delta: f64,
    dim: usize,
    rng: &mut R,
) -> Result<AdversarialInstance> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
    }
    let inv = 1.0 / delta;
    let m = inv.round();
    if (inv - m).abs() > 1e-9 * m || m < 2.0 {
        return Err(Error::param(format!("1/delta = {inv} is not an integer >= 2")));
    }
    if dim == 0 {
        return Err(Error::param("dimension must be >= 1"));
    }
    let m = m as usize;
    Ok(AdversarialInstance {
        groups: [
            FiniteSupportSpec::uniform(indexed_support(m, dim))?,
            FiniteSupportSpec::uniform(indexed_support(m, dim))?,
        ],
        table: HashedUniformTable { seed: rng.random() },
    })
}
