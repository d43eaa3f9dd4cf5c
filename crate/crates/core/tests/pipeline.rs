use xgroup_core::analysis::{
    check_conditional_accuracy, run_trials, summarize_errors, DistributionPairs, ABS_OVER_EPS_EDGES,
    QUERYOPT, RELATIVE_PCT_EDGES, SIMPLE,
};
use xgroup_core::datagen::{make_mixture_group, sample_from_mixture, no_free_lunch_instance, GroupDistribution};
use xgroup_core::learners::{train_queryopt, train_simple, LazySimple, Predictor, QueryMode, TrainingSet};
use xgroup_core::oracle::draw_weights;
use xgroup_core::rng::stream;
use xgroup_core::{Oracle, Params};

const EPS: f64 = 0.1;
const RHO: f64 = 12.0;

#[test]
fn synthetic_run_respects_conditional_bounds() {
    let params = Params::new(EPS, 0.1, 2, RHO).unwrap();
    let n = params.sample_budget();
    let mut w = stream(11, "weights");
    let spec = draw_weights(6, 2, &mut w).unwrap();
    let mut g = stream(11, "groups");
    let dists = [
        make_mixture_group(6, 4, 0.05, &mut g).unwrap(),
        make_mixture_group(6, 4, 0.05, &mut g).unwrap(),
    ];
    let mut d = stream(11, "data");
    let samples = vec![
        sample_from_mixture(&dists[0], n, 0, &mut d).unwrap(),
        sample_from_mixture(&dists[1], n, 1, &mut d).unwrap(),
    ];
    let set = TrainingSet::new(samples, spec.intra_metrics()).unwrap();

    let mut simple_oracle = Oracle::new(spec.clone());
    let mut simple = train_simple(set.clone(), &mut simple_oracle, QueryMode::Eager).unwrap();
    let mut rep_oracle = Oracle::new(spec.clone());
    let mut rep = train_queryopt(set.clone(), &mut rep_oracle, params).unwrap();
    assert_eq!(simple_oracle.count(), n * n);
    assert!(rep_oracle.count() <= simple_oracle.count());
    assert_eq!(rep.query_count() as usize, rep_oracle.count());

    let mut pairs = DistributionPairs::new(&dists[0], &dists[1], (0, 1), stream(11, "trials")).unwrap();
    let mut learners: Vec<(&str, &mut dyn Predictor)> = vec![(SIMPLE, &mut simple), (QUERYOPT, &mut rep)];
    let records = run_trials(&mut learners, &set, &spec, &mut pairs, 400, EPS).unwrap();
    assert_eq!(records.len(), 400);
    let report = check_conditional_accuracy(&records, EPS, RHO);
    assert_eq!(report.violations(), 0, "{report:?}");

    let summary = summarize_errors(&records, EPS, &RELATIVE_PCT_EDGES, &ABS_OVER_EPS_EDGES).unwrap();
    for name in [SIMPLE, QUERYOPT] {
        assert_eq!(summary.learners[name].abs_error_over_eps.histogram.total(), 400);
    }
    // evaluation never bills the oracles
    assert_eq!(simple_oracle.count(), n * n);
}

#[test]
fn lazy_simple_matches_eager_and_bills_less() {
    let params = Params::new(EPS, 0.1, 2, RHO).unwrap();
    let n = params.sample_budget();
    let spec = draw_weights(3, 2, &mut stream(5, "weights")).unwrap();
    let mut g = stream(5, "groups");
    let dists = [
        make_mixture_group(3, 2, 1.0, &mut g).unwrap(),
        make_mixture_group(3, 2, 1.0, &mut g).unwrap(),
    ];
    let mut d = stream(5, "data");
    let set = TrainingSet::new(
        vec![dists[0].sample(n, 0, &mut d), dists[1].sample(n, 1, &mut d)],
        spec.intra_metrics(),
    )
    .unwrap();

    let mut eager_oracle = Oracle::new(spec.clone());
    let eager = train_simple(set.clone(), &mut eager_oracle, QueryMode::Eager).unwrap();
    let mut lazy_oracle = Oracle::new(spec.clone());
    let mut lazy_model = train_simple(set.clone(), &mut lazy_oracle, QueryMode::Lazy).unwrap();
    let mut lazy = LazySimple {
        model: &mut lazy_model,
        oracle: &mut lazy_oracle,
    };
    let mut rng = stream(5, "trials");
    for i in 0..200 {
        let x = dists[0].draw_element(0, i, &mut rng);
        let y = dists[1].draw_element(1, i, &mut rng);
        assert_eq!(eager.predict(&x, &y).unwrap(), lazy.predict(&x, &y).unwrap());
    }
    assert!(lazy_oracle.count() <= eager_oracle.count());
}

#[test]
fn adversarial_fixture_is_no_better_than_guessing() {
    let inst = no_free_lunch_instance(1_000_000, 1, &mut stream(21, "adversary")).unwrap();
    let mut d = stream(21, "data");
    let set = TrainingSet::new(
        vec![inst.groups[0].sample(100, 0, &mut d), inst.groups[1].sample(100, 1, &mut d)],
        inst.metrics(),
    )
    .unwrap();
    let mut oracle = Oracle::new(inst.table.clone());
    let mut simple = train_simple(set.clone(), &mut oracle, QueryMode::Eager).unwrap();
    let mut pairs = DistributionPairs::new(&inst.groups[0], &inst.groups[1], (0, 1), stream(21, "trials")).unwrap();
    let mut learners: Vec<(&str, &mut dyn Predictor)> = vec![(SIMPLE, &mut simple)];
    let records = run_trials(&mut learners, &set, &inst.table, &mut pairs, 1000, EPS).unwrap();
    let miss = records.iter().filter(|r| r.outcomes[0].abs_error_over_eps > 1.0).count() as f64 / 1000.0;
    // two independent uniforms differ by more than eps with probability 1 - (2 eps - eps^2)
    let analytic = 1.0 - (2.0 * EPS - EPS * EPS);
    assert!(miss >= 0.70, "miss rate {miss}");
    assert!((miss - analytic).abs() < 0.06, "miss rate {miss} vs {analytic}");
}
