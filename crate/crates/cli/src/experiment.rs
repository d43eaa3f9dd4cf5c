//! The `run` command: for every repeat and every delta, sample both groups,
//! train both learners on separate oracles, and evaluate them on fresh pairs.

use std::thread;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use xgroup_core::analysis::{
    check_conditional_accuracy, estimate_rare_probability, expected_opt_bound, query_decrease_pct, run_trials,
    summarize_errors, ConditionalReport, DistributionPairs, ErrorSummary, PairSource, PermutationPairs,
    RareEstimate, TrialRecord, ABS_OVER_EPS_EDGES, QUERYOPT, RELATIVE_PCT_EDGES, SIMPLE,
};
use xgroup_core::datagen::{
    make_mixture_group, no_free_lunch_instance, AdversarialInstance, FiniteSupportSpec, GroupDistribution, MixtureSpec,
};
use xgroup_core::ingest::{prepare_dataset, PermutationSampler, PreparedDataset, TableSchema};
use xgroup_core::learners::{
    check_representatives, eager_query_count, train_queryopt_with_mode, train_simple, LazyRep, LazySimple, Predictor,
    QueryMode,
    TrainingSet,
};
use xgroup_core::oracle::draw_weights;
use xgroup_core::rng::stream;
use xgroup_core::{CrossSimilarity, GroupMetric, GroupSample, Oracle, OracleSpec, Params};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};

const GAMMA: usize = 2;
const ASSIGNMENT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleQueries {
    pub mode: QueryMode,
    /// Distinct pairs an eager run queries; analytic in lazy mode.
    pub queries: u64,
    pub ordered_queries: u64,
    /// Pairs actually fetched by the lazy learner during evaluation.
    pub fetched: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepQueries {
    pub mode: QueryMode,
    pub queries: u64,
    pub ordered_queries: u64,
    pub representatives: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRare {
    pub group: usize,
    pub p_hat: f64,
    pub outer: usize,
    pub inner: usize,
    pub representatives: usize,
    /// `1/delta + p_hat * N`, compared with the representative count.
    pub expected_opt_bound: f64,
    pub within_bound: bool,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub repeat: usize,
    pub delta: f64,
    pub samples_per_group: usize,
    pub simple: SimpleQueries,
    pub queryopt: RepQueries,
    pub query_decrease_pct: f64,
    pub conditional: ConditionalReport,
    pub rare: Vec<GroupRare>,
    pub errors: ErrorSummary,
}

#[derive(Clone, Debug)]
pub struct JobOutput {
    pub summary: RunSummary,
    pub records: Vec<TrialRecord>,
    pub violations: Vec<String>,
}

/// Everything fixed for one repeat: the cross oracle and the group laws.
enum Context<'a> {
    Synthetic {
        spec: OracleSpec,
        dists: [MixtureSpec; 2],
    },
    Real {
        spec: OracleSpec,
        data: &'a PreparedDataset,
        supports: &'a [FiniteSupportSpec; 2],
    },
    Adversarial {
        inst: AdversarialInstance,
    },
}

pub fn load_dataset(cfg: &ExperimentConfig) -> CliResult<PreparedDataset> {
    let ds = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Config("real mode needs a dataset section".into()))?;
    let schema = TableSchema::from_json_file(&ds.schema)?;
    let data = prepare_dataset(&ds.path, &schema, &ds.group_column, &ds.first_group)?;
    info!(
        "loaded {}: groups of {} and {} rows, {} features, {} rows dropped for missing values",
        ds.path.display(),
        data.groups[0].len(),
        data.groups[1].len(),
        data.feature_names.len(),
        data.dropped_missing
    );
    Ok(data)
}

/// Real data must leave `n_trials` unseen rows per group after sampling.
pub fn check_real_sizes(cfg: &ExperimentConfig, data: &PreparedDataset) -> CliResult<()> {
    for &delta in &cfg.deltas {
        let need = cfg.sample_size(delta)? + cfg.n_trials;
        for (g, rows) in data.groups.iter().enumerate() {
            if rows.len() < need {
                return Err(CliError::Config(format!(
                    "group {g} has {} rows but delta = {delta} needs {} samples plus {} test points = {need}",
                    rows.len(),
                    need - cfg.n_trials,
                    cfg.n_trials
                )));
            }
        }
    }
    Ok(())
}

fn build_context<'a>(
    cfg: &ExperimentConfig,
    repeat: usize,
    real: Option<(&'a PreparedDataset, &'a [FiniteSupportSpec; 2])>,
) -> CliResult<Context<'a>> {
    let mut weights = stream(cfg.seeds.weights, &format!("weights/{repeat}"));
    Ok(match cfg.mode {
        Mode::Synthetic => {
            let mut g = stream(cfg.seeds.data, &format!("groups/{repeat}"));
            let dists = [
                make_mixture_group(cfg.dim, cfg.components, cfg.u_var, &mut g)?,
                make_mixture_group(cfg.dim, cfg.components, cfg.u_var, &mut g)?,
            ];
            Context::Synthetic {
                spec: draw_weights(cfg.dim, GAMMA, &mut weights)?,
                dists,
            }
        }
        Mode::Real => {
            let (data, supports) = real.expect("real mode context needs the dataset");
            Context::Real {
                spec: draw_weights(data.feature_names.len(), GAMMA, &mut weights)?,
                data,
                supports,
            }
        }
        Mode::Adversarial => Context::Adversarial {
            inst: no_free_lunch_instance(cfg.support, 1, &mut stream(cfg.seeds.weights, &format!("adversary/{repeat}")))?,
        },
    })
}

fn rare_estimates<D: GroupDistribution>(
    cfg: &ExperimentConfig,
    repeat: usize,
    delta: f64,
    dists: [&D; 2],
    metrics: &[GroupMetric],
) -> CliResult<Vec<RareEstimate>> {
    let mut rng = stream(cfg.seeds.data, &format!("rare/{repeat}/{delta}"));
    dists
        .iter()
        .zip(metrics)
        .map(|(d, m)| {
            Ok(estimate_rare_probability(
                *d,
                m,
                cfg.epsilon,
                delta,
                cfg.rare_outer,
                cfg.rare_inner(delta),
                &mut rng,
            )?)
        })
        .collect()
}

fn run_job(cfg: &ExperimentConfig, ctx: &Context<'_>, repeat: usize, delta: f64) -> CliResult<JobOutput> {
    let n = cfg.sample_size(delta)?;
    let mut data_rng = stream(cfg.seeds.data, &format!("samples/{repeat}/{delta}"));
    let trial_rng = stream(cfg.seeds.trials, &format!("trials/{repeat}/{delta}"));
    info!("repeat {repeat}, delta {delta}: {n} samples per group");
    match ctx {
        Context::Synthetic { spec, dists } => {
            let samples = vec![dists[0].sample(n, 0, &mut data_rng), dists[1].sample(n, 1, &mut data_rng)];
            let set = TrainingSet::new(samples, spec.intra_metrics())?;
            let rare = rare_estimates(cfg, repeat, delta, [&dists[0], &dists[1]], set.metrics())?;
            let mut pairs = DistributionPairs::new(&dists[0], &dists[1], (0, 1), trial_rng)?;
            execute(cfg, repeat, delta, spec, set, &mut pairs, rare)
        }
        Context::Real { spec, data, supports } => {
            let mut samplers = [0, 1].map(|g| {
                let mut rng = stream(cfg.seeds.data, &format!("permutation/{repeat}/{delta}/{g}"));
                PermutationSampler::new(g, data.groups[g].clone(), &mut rng)
            });
            let samples = samplers
                .iter_mut()
                .enumerate()
                .map(|(g, s)| {
                    let elements = (0..n).map(|_| s.next_sample()).collect::<Result<Vec<_>, _>>()?;
                    Ok(GroupSample { group: g, elements })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let set = TrainingSet::new(samples, spec.intra_metrics())?;
            let rare = rare_estimates(cfg, repeat, delta, [&supports[0], &supports[1]], set.metrics())?;
            let [a, b] = samplers;
            let mut pairs = PermutationPairs::new(a, b);
            execute(cfg, repeat, delta, spec, set, &mut pairs, rare)
        }
        Context::Adversarial { inst } => {
            let samples = vec![
                inst.groups[0].sample(n, 0, &mut data_rng),
                inst.groups[1].sample(n, 1, &mut data_rng),
            ];
            let set = TrainingSet::new(samples, inst.metrics())?;
            let rare = rare_estimates(cfg, repeat, delta, [&inst.groups[0], &inst.groups[1]], set.metrics())?;
            let mut pairs = DistributionPairs::new(&inst.groups[0], &inst.groups[1], (0, 1), trial_rng)?;
            execute(cfg, repeat, delta, &inst.table, set, &mut pairs, rare)
        }
    }
}

fn execute<S: CrossSimilarity>(
    cfg: &ExperimentConfig,
    repeat: usize,
    delta: f64,
    truth: &S,
    set: TrainingSet,
    pairs: &mut dyn PairSource,
    rare: Vec<RareEstimate>,
) -> CliResult<JobOutput> {
    let mut violations = Vec::new();
    let n = set.samples()[0].len();
    let eager = eager_query_count(&set);
    let mode = if eager <= cfg.materialize_limit {
        QueryMode::Eager
    } else {
        warn!(
            "delta {delta}: {eager} simple pairs exceed the materialization limit {}; simple learner runs lazily",
            cfg.materialize_limit
        );
        QueryMode::Lazy
    };

    let mut simple_oracle = Oracle::new(truth);
    let mut simple = train_simple(set.clone(), &mut simple_oracle, mode)?;
    if mode == QueryMode::Eager && simple_oracle.count() as u64 != eager {
        violations.push(format!("simple ledger holds {} pairs, expected {eager}", simple_oracle.count()));
    }

    let params = Params::new(cfg.epsilon, delta, GAMMA, cfg.rho)?;
    let mut rep_oracle = Oracle::new(truth);
    let mut rep = train_queryopt_with_mode(set.clone(), &mut rep_oracle, params, QueryMode::Lazy)?;
    for g in 0..GAMMA {
        let reps = rep.representatives(g).expect("both groups trained");
        if let Err(e) = check_representatives(&set.samples()[g], &set.metrics()[g], reps, cfg.epsilon, cfg.rho, ASSIGNMENT_TOL)
        {
            violations.push(format!("group {g} representatives: {e}"));
        }
    }
    let rep_queries = rep.query_count();
    let rep_mode = if rep_queries <= cfg.materialize_limit {
        rep.materialize(&mut rep_oracle)?;
        QueryMode::Eager
    } else {
        warn!(
            "delta {delta}: {rep_queries} representative pairs exceed the materialization limit {}; queryopt learner runs lazily",
            cfg.materialize_limit
        );
        QueryMode::Lazy
    };
    if rep_mode == QueryMode::Eager && rep_queries != rep_oracle.count() as u64 {
        violations.push(format!("queryopt ledger holds {} pairs, model reports {rep_queries}", rep_oracle.count()));
    }
    if rep_queries > eager {
        violations.push(format!("queryopt used {rep_queries} queries, more than simple's {eager}"));
    }

    let mut lazy_simple;
    let mut lazy_rep;
    let simple_p: &mut dyn Predictor = match mode {
        QueryMode::Eager => &mut simple,
        QueryMode::Lazy => {
            lazy_simple = LazySimple {
                model: &mut simple,
                oracle: &mut simple_oracle,
            };
            &mut lazy_simple
        }
    };
    let rep_p: &mut dyn Predictor = match rep_mode {
        QueryMode::Eager => &mut rep,
        QueryMode::Lazy => {
            lazy_rep = LazyRep {
                model: &mut rep,
                oracle: &mut rep_oracle,
            };
            &mut lazy_rep
        }
    };
    let mut learners: Vec<(&str, &mut dyn Predictor)> = vec![(SIMPLE, simple_p), (QUERYOPT, rep_p)];
    let records = run_trials(&mut learners, &set, truth, pairs, cfg.n_trials, cfg.epsilon)?;
    drop(learners);
    if rep_mode == QueryMode::Eager && rep_oracle.count() as u64 != rep_queries {
        violations.push("queryopt queried the oracle during evaluation".into());
    }

    let conditional = check_conditional_accuracy(&records, cfg.epsilon, cfg.rho);
    if conditional.violations() > 0 {
        violations.push(format!(
            "conditional accuracy: {} simple and {} queryopt violations on {} eligible trials",
            conditional.simple_violations, conditional.queryopt_violations, conditional.eligible
        ));
    }

    let rare = rare
        .into_iter()
        .enumerate()
        .map(|(g, e)| {
            let reps = rep.representatives(g).map_or(0, |r| r.len());
            let bound = expected_opt_bound(delta, e.p_hat, n);
            GroupRare {
                group: g,
                p_hat: e.p_hat,
                outer: e.outer,
                inner: e.inner,
                representatives: reps,
                expected_opt_bound: bound,
                within_bound: reps as f64 <= bound,
                method: e.method,
            }
        })
        .collect();

    let summary = RunSummary {
        repeat,
        delta,
        samples_per_group: n,
        simple: SimpleQueries {
            mode,
            queries: eager,
            ordered_queries: 2 * eager,
            fetched: (mode == QueryMode::Lazy).then_some(simple_oracle.count() as u64),
        },
        queryopt: RepQueries {
            mode: rep_mode,
            queries: rep_queries,
            ordered_queries: 2 * rep_queries,
            representatives: (0..GAMMA).map(|g| rep.representatives(g).map_or(0, |r| r.len())).collect(),
        },
        query_decrease_pct: query_decrease_pct(eager, rep_queries)?,
        conditional,
        rare,
        errors: summarize_errors(&records, cfg.epsilon, &RELATIVE_PCT_EDGES, &ABS_OVER_EPS_EDGES)?,
    };
    Ok(JobOutput {
        summary,
        records,
        violations,
    })
}

/// Runs every `(repeat, delta)` job and returns outputs indexed
/// `[delta][repeat]` in grid order, whatever order they finished in.
pub fn run_grid(cfg: &ExperimentConfig) -> CliResult<Vec<Vec<JobOutput>>> {
    cfg.validate()?;
    let dataset = match cfg.mode {
        Mode::Real => {
            let data = load_dataset(cfg)?;
            check_real_sizes(cfg, &data)?;
            Some(data)
        }
        _ => None,
    };
    let supports = dataset
        .as_ref()
        .map(|d| -> CliResult<[FiniteSupportSpec; 2]> {
            Ok([
                FiniteSupportSpec::uniform(d.groups[0].clone())?,
                FiniteSupportSpec::uniform(d.groups[1].clone())?,
            ])
        })
        .transpose()?;
    let real = dataset.as_ref().zip(supports.as_ref());

    let contexts = (0..cfg.repeats)
        .map(|r| build_context(cfg, r, real))
        .collect::<CliResult<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.deltas.len())
        .flat_map(|d| (0..cfg.repeats).map(move |r| (d, r)))
        .collect();

    let results: Vec<CliResult<JobOutput>> = if cfg.parallel {
        thread::scope(|s| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|&(d, r)| {
                    let ctx = &contexts[r];
                    s.spawn(move || run_job(cfg, ctx, r, cfg.deltas[d]))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("experiment worker panicked"))
                .collect()
        })
    } else {
        jobs.iter()
            .map(|&(d, r)| run_job(cfg, &contexts[r], r, cfg.deltas[d]))
            .collect()
    };

    let mut grid: Vec<Vec<JobOutput>> = (0..cfg.deltas.len()).map(|_| Vec::new()).collect();
    for ((d, _), res) in jobs.into_iter().zip(results) {
        grid[d].push(res?);
    }
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RareRow {
    pub delta: f64,
    pub group: usize,
    pub estimate: RareEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RareReport {
    pub config: ExperimentConfig,
    pub rows: Vec<RareRow>,
}

/// `p_l(eps, delta)` estimates for both groups of repeat 0 at every delta.
pub fn rare_report(cfg: &ExperimentConfig) -> CliResult<RareReport> {
    cfg.validate()?;
    let dataset = match cfg.mode {
        Mode::Real => Some(load_dataset(cfg)?),
        _ => None,
    };
    let supports = dataset
        .as_ref()
        .map(|d| -> CliResult<[FiniteSupportSpec; 2]> {
            Ok([
                FiniteSupportSpec::uniform(d.groups[0].clone())?,
                FiniteSupportSpec::uniform(d.groups[1].clone())?,
            ])
        })
        .transpose()?;
    let ctx = build_context(cfg, 0, dataset.as_ref().zip(supports.as_ref()))?;
    let mut rows = Vec::new();
    for &delta in &cfg.deltas {
        let estimates = match &ctx {
            Context::Synthetic { spec, dists } => {
                rare_estimates(cfg, 0, delta, [&dists[0], &dists[1]], &spec.intra_metrics())?
            }
            Context::Real { spec, supports, .. } => {
                rare_estimates(cfg, 0, delta, [&supports[0], &supports[1]], &spec.intra_metrics())?
            }
            Context::Adversarial { inst } => {
                rare_estimates(cfg, 0, delta, [&inst.groups[0], &inst.groups[1]], &inst.metrics())?
            }
        };
        rows.extend(
            estimates
                .into_iter()
                .enumerate()
                .map(|(group, estimate)| RareRow { delta, group, estimate }),
        );
    }
    Ok(RareReport {
        config: cfg.clone(),
        rows,
    })
}

/// Group matrices as the `run` command would see them: the training samples
/// of repeat 0 per delta, or the standardized groups of a real dataset.
pub struct GeneratedGroup {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn generate_data(cfg: &ExperimentConfig) -> CliResult<Vec<GeneratedGroup>> {
    cfg.validate()?;
    let numbered = |dim: usize| (0..dim).map(|i| format!("x{i}")).collect::<Vec<_>>();
    let features = |s: GroupSample| s.elements.into_iter().map(|e| e.features).collect::<Vec<_>>();
    let mut out = Vec::new();
    match cfg.mode {
        Mode::Real => {
            let data = load_dataset(cfg)?;
            for (g, rows) in data.groups.iter().enumerate() {
                out.push(GeneratedGroup {
                    name: format!("group_{g}"),
                    header: data.feature_names.clone(),
                    rows: rows.clone(),
                });
            }
        }
        Mode::Synthetic | Mode::Adversarial => {
            let ctx = build_context(cfg, 0, None)?;
            for &delta in &cfg.deltas {
                let n = cfg.sample_size(delta)?;
                let mut rng = stream(cfg.seeds.data, &format!("samples/0/{delta}"));
                let samples = match &ctx {
                    Context::Synthetic { dists, .. } => [dists[0].sample(n, 0, &mut rng), dists[1].sample(n, 1, &mut rng)],
                    Context::Adversarial { inst } => {
                        [inst.groups[0].sample(n, 0, &mut rng), inst.groups[1].sample(n, 1, &mut rng)]
                    }
                    Context::Real { .. } => unreachable!("real mode handled above"),
                };
                for (g, s) in samples.into_iter().enumerate() {
                    let dim = s.dim().unwrap_or(0);
                    out.push(GeneratedGroup {
                        name: format!("delta_{delta}/group_{g}"),
                        header: numbered(dim),
                        rows: features(s),
                    });
                }
            }
        }
    }
    Ok(out)
}
