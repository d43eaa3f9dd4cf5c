//! Learning across-groups similarity functions from a limited number of
//! expert-oracle queries.
//!
//! Elements come from `gamma` groups. Within a group the metric `d_l` is
//! known; across groups the similarity `sigma` is only available through an
//! oracle that bills every distinct pair it answers. Two learners are
//! provided: [`learners::train_simple`] queries every cross pair of samples,
//! and [`learners::train_queryopt`] queries only between representatives
//! chosen by a greedy ball-cover pass, trading a bounded loss of accuracy for
//! far fewer queries.

pub mod analysis;
pub mod datagen;
pub mod element;
pub mod error;
pub mod ingest;
pub mod learners;
pub mod ledger;
pub mod metric;
pub mod oracle;
pub mod params;
pub mod rng;

pub use element::{Element, ElementId, GroupSample, PairKey};
pub use error::{Error, Result};
pub use ledger::{PairTable, QueryLedger};
pub use metric::{intra_distance, nearest_in_sample, GroupMetric, Metric, WeightedEuclideanMetric};
pub use oracle::{CrossSimilarity, Oracle, OracleSpec, SimulatedOracle};
pub use params::{sample_budget, Params, DEFAULT_RHO};
