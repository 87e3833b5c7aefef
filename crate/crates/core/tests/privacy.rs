use std::sync::Arc;

use crnpriv::models;
use crnpriv::privacy::*;
use crnpriv::stochastic::{cme_steady_state, reachable_states, DistributionTable, Horizon};
use crnpriv::{parse_spec, Composition, Error, ModelFile, QuerySpec};
use proptest::prelude::*;

fn load(text: &str) -> ModelFile {
    parse_spec(text).unwrap()
}

fn motivational_kappa1(k1: f64) -> ModelFile {
    let mut m = load(models::MOTIVATIONAL);
    let mut rates = m.crn.rates();
    rates[0] = k1;
    m.crn = m.crn.with_rates(&rates).unwrap();
    m
}

fn with_counts(db: &Composition, counts: &[u64]) -> Composition {
    let mut out = db.clone();
    for (name, &c) in db.type_counts.keys().zip(counts) {
        out = out.with_count(name, c);
    }
    out
}

#[test]
fn initial_states_of_the_resource_example() {
    let m = load(models::MOTIVATIONAL);
    assert_eq!(initial_state(&m.composition, &m.crn).unwrap().0, vec![2, 1, 2, 0, 0]);
    let variant = with_counts(&m.composition, &[1, 2]);
    assert_eq!(initial_state(&variant, &m.crn).unwrap().0, vec![1, 2, 2, 0, 0]);
    let empty = with_counts(&m.composition, &[0, 0]);
    assert_eq!(initial_state(&empty, &m.crn).unwrap().0, vec![0, 0, 2, 0, 0]);
    let unknown = m.composition.with_count("C", 1);
    assert!(matches!(initial_state(&unknown, &m.crn), Err(Error::MissingInitialState(t)) if t == "C"));
}

#[test]
fn observable_bars_of_the_resource_example() {
    let m = motivational_kappa1(3.0);
    let x0 = initial_state(&m.composition, &m.crn).unwrap();
    let obs = observable_distribution(&cme_steady_state(&m.crn, &x0).unwrap(), &m.query);
    let expect = [
        (vec![3, 0], 1.0 / 45.0),
        (vec![2, 1], 14.0 / 45.0),
        (vec![1, 2], 2.0 / 3.0),
    ];
    assert_eq!(obs.len(), 3);
    for (y, p) in expect {
        assert!((obs[&y] - p).abs() < 1e-12, "{y:?}");
    }
}

#[test]
fn posterior_of_resource_user_type() {
    let m = motivational_kappa1(3.0);
    let variant = with_counts(&m.composition, &[1, 2]);
    let obs = |db: &Composition| {
        let x0 = initial_state(db, &m.crn).unwrap();
        observable_distribution(&cme_steady_state(&m.crn, &x0).unwrap(), &m.query)
    };
    let y = vec![2, 1];
    let (p, q) = (obs(&m.composition)[&y], obs(&variant)[&y]);
    assert!((p / (p + q) - 7.0 / 16.0).abs() < 1e-12);
}

#[test]
fn snapshot_leakage_of_resource_example() {
    let m = motivational_kappa1(3.0);
    let r = leakage_snapshot(
        &m.crn,
        &m.composition,
        &m.query,
        Horizon::Steady,
        &LeakageOptions::default(),
    )
    .unwrap();
    assert_eq!(r.variants, 2);
    assert!(r.epsilon >= (0.43f64 / 0.57).ln().abs());
    let expected_max = [
        ((1.0f64 / 45.0) / 0.04).ln().abs(),
        ((14.0f64 / 45.0) / 0.4).ln().abs(),
        ((2.0f64 / 3.0) / 0.56).ln().abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    assert!(r.epsilon >= expected_max - 1e-9);
    assert!(r.epsilon.is_finite());
}

#[test]
fn snapshot_at_time_zero() {
    let m = load(models::MOTIVATIONAL);
    let nu = 1e-12;
    let opts = LeakageOptions {
        nu,
        ..Default::default()
    };
    let blind = QuerySpec::new(vec![], m.crn.n_states()).unwrap();
    let r = leakage_snapshot(&m.crn, &m.composition, &blind, Horizon::Time(0.0), &opts).unwrap();
    assert_eq!(r.epsilon, 0.0);
    let r = leakage_snapshot(
        &m.crn,
        &m.composition,
        &QuerySpec::identity(&m.crn),
        Horizon::Time(0.0),
        &opts,
    )
    .unwrap();
    assert!((r.epsilon - ((1.0 + nu) / nu).ln()).abs() < 1e-9);
    assert!(r.argmaxima.len() >= 2);
    assert!(r.argmaxima.iter().all(|a| a.outside_class));
}

#[test]
fn invalid_smoothing_is_rejected() {
    let m = load(models::MOTIVATIONAL);
    let opts = LeakageOptions {
        nu: 0.0,
        ..Default::default()
    };
    let err = leakage_snapshot(&m.crn, &m.composition, &m.query, Horizon::Steady, &opts).unwrap_err();
    assert!(matches!(err, Error::Range(_)));
}

#[test]
fn closed_form_requires_complex_balance() {
    let m = load(models::TASKS);
    let err = leakage_steady_query(
        &m.crn,
        &m.composition,
        &m.query,
        StationaryLaw::Renormalized,
        &LeakageOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(
        err,
        Error::NotComplexBalanced {
            weakly_reversible: false,
            ..
        }
    ));
}

fn pairing(counts: &[u64]) -> ModelFile {
    let mut m = load(models::PAIRING);
    m.composition = with_counts(&m.composition, counts);
    m
}

#[test]
fn renormalized_law_matches_master_equation() {
    for counts in [[3, 3, 2], [4, 2, 3], [5, 5, 1]] {
        let m = pairing(&counts);
        let x0 = initial_state(&m.composition, &m.crn).unwrap();
        let cme = cme_steady_state(&m.crn, &x0).unwrap();
        let x0f: Vec<f64> = x0.iter().map(|&v| v as f64).collect();
        let xbar = crnpriv::deterministic::steady_state(&m.crn, &x0f, &Default::default()).unwrap();
        let space = reachable_states(&m.crn, &x0).unwrap();
        let probs = space
            .iter()
            .map(|x| stationary_product_poisson(&xbar, x, Some(&space)))
            .collect();
        let closed = DistributionTable {
            space: Arc::new(space),
            probs,
            horizon: Horizon::Steady,
            pruned_mass: 0.0,
        };
        assert!(closed.total_variation(&cme) < 1e-8, "{counts:?}");
    }
}

#[test]
fn closed_form_query_leakage_matches_master_equation() {
    let m = pairing(&[3, 3, 2]);
    let opts = LeakageOptions::default();
    let closed = leakage_steady_query(&m.crn, &m.composition, &m.query, StationaryLaw::Renormalized, &opts).unwrap();
    let cme = leakage_snapshot(&m.crn, &m.composition, &m.query, Horizon::Steady, &opts).unwrap();
    assert!((closed.epsilon - cme.epsilon).abs() < 1e-6);
    assert_eq!(closed.method, LeakageMethod::ClosedFormQuery);
    assert_eq!(cme.method, LeakageMethod::CmeSnapshot);
}

#[test]
fn identity_leakage_modes() {
    let m = pairing(&[3, 3, 2]);
    let opts = LeakageOptions::default();
    let cme = leakage_snapshot(
        &m.crn,
        &m.composition,
        &QuerySpec::identity(&m.crn),
        Horizon::Steady,
        &opts,
    )
    .unwrap();
    let renorm = leakage_steady_identity(&m.crn, &m.composition, StationaryLaw::Renormalized, &opts).unwrap();
    assert!((renorm.epsilon - cme.epsilon).abs() < 2e-2);
    let raw = leakage_steady_identity(&m.crn, &m.composition, StationaryLaw::Unnormalized, &opts).unwrap();
    assert!(raw.epsilon.is_finite() && raw.epsilon >= 0.0);
    assert_eq!(raw.method, LeakageMethod::ClosedFormIdentity);
    assert!(raw.out_of_class_evaluations > 0);
}

#[test]
fn exchangeable_types_give_equal_leakage() {
    let opts = LeakageOptions::default();
    let a = pairing(&[4, 2, 3]);
    let b = pairing(&[2, 4, 3]);
    let ea = leakage_steady_query(&a.crn, &a.composition, &a.query, StationaryLaw::Renormalized, &opts).unwrap();
    let eb = leakage_steady_query(&b.crn, &b.composition, &b.query, StationaryLaw::Renormalized, &opts).unwrap();
    assert!((ea.epsilon - eb.epsilon).abs() < 1e-12);
}

#[test]
fn engine_caches_compositions() {
    let m = pairing(&[3, 3, 2]);
    let engine = LeakageEngine::new(
        &m.crn,
        m.query.clone(),
        Analysis::SteadyClosedForm(StationaryLaw::Renormalized),
        LeakageOptions::default(),
    )
    .unwrap();
    let first = engine.observable(&m.composition).unwrap();
    let second = engine.observable(&m.composition).unwrap();
    assert!(Arc::ptr_eq(&first, &second));
    let total: f64 = first.values().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_antisymmetric(
        a in proptest::collection::vec(0.1f64..20.0, 3),
        b in proptest::collection::vec(0.1f64..20.0, 3),
        x in proptest::collection::vec(0u32..30, 3),
    ) {
        let forward = identity_kernel(&a, &b, &x);
        let backward = identity_kernel(&b, &a, &x);
        prop_assert!((forward + backward).abs() < 1e-9 * (1.0 + forward.abs()));
        let direct = log_product_poisson(&a, &x) - log_product_poisson(&b, &x);
        prop_assert!((forward - direct).abs() < 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn adjacency_preserves_total(counts in proptest::collection::vec(0u64..5, 2..5)) {
        let names: indexmap::IndexMap<String, u64> =
            counts.iter().enumerate().map(|(i, &c)| (format!("t{i}"), c)).collect();
        let db = Composition::new(names, Default::default());
        let pairs = adjacent_compositions(&db);
        let nonempty = counts.iter().filter(|&&c| c > 0).count();
        prop_assert_eq!(pairs.len(), nonempty * (counts.len() - 1));
        for p in &pairs {
            prop_assert_eq!(p.variant.total(), db.total());
            let diff: u64 = p.variant.counts().iter().zip(db.counts()).map(|(a, b)| a.abs_diff(b)).sum();
            prop_assert_eq!(diff, 2);
        }
    }
}
