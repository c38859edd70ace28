mod common;

use mixent::cem::{intermediate_criterion, MONOTONE_TOL};
use mixent::oracle::brute_force_min;
use mixent::sample::Decomposition;
use mixent::search::{random_initial_assignment, InitScheme};
use mixent::{
    c_step, criterion_of_assignment, decomposition_from_assignment, e_step, gaussian_split_test, mixing_entropy, run_cem,
    search, soft_from_hard, EngineOptions, Family, FamilyKind, HardAssignment, Init, InnerMode, ModelState, Params,
    ProbVector, SearchConfig, SoftAssignment, WeightedSample,
};
use proptest::prelude::*;

fn sample_strategy() -> impl Strategy<Value = WeightedSample> {
    prop::collection::vec(-20i32..20, 2..30).prop_filter_map("needs two distinct values", |v| {
        let raw: Vec<f64> = v.into_iter().map(|k| f64::from(k) * 0.25).collect();
        let w = WeightedSample::ingest(&raw, 0.0).ok()?;
        (w.len() >= 2).then_some(w)
    })
}

fn soft_strategy(len: usize, r: usize) -> impl Strategy<Value = SoftAssignment> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, r), len).prop_map(move |rows| {
        let phi = rows
            .into_iter()
            .flat_map(|row| {
                let s: f64 = row.iter().sum();
                row.into_iter().map(move |v| v / s)
            })
            .collect();
        SoftAssignment::new(r, phi).unwrap()
    })
}

fn gaussian(w: &WeightedSample) -> Family {
    common::bind(FamilyKind::Gaussian, w, true)
}

fn permute(d: &Decomposition, perm: &[usize]) -> Decomposition {
    let nu = ProbVector::new(perm.iter().map(|&p| d.nu[p]).collect()).unwrap();
    Decomposition {
        nu,
        components: perm.iter().map(|&p| d.components[p].clone()).collect(),
        empty: perm.iter().map(|&p| d.empty[p]).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn criterion_ignores_label_order((w, s, shift) in sample_strategy().prop_flat_map(|w| {
        let len = w.len();
        (Just(w), soft_strategy(len, 3), 0usize..3)
    })) {
        let fam = gaussian(&w);
        let d = decomposition_from_assignment(&s, &w).unwrap();
        let perm: Vec<usize> = (0..3).map(|k| (k + shift) % 3).rev().collect();
        let a = mixing_entropy(&d, &w, &fam).unwrap().value;
        let b = mixing_entropy(&permute(&d, &perm), &w, &fam).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn empty_classes_leave_criterion_unchanged((w, s, extra) in sample_strategy().prop_flat_map(|w| {
        let len = w.len();
        (Just(w), soft_strategy(len, 2), 1usize..4)
    })) {
        let fam = gaussian(&w);
        let d = decomposition_from_assignment(&s, &w).unwrap();
        prop_assert_eq!(mixing_entropy(&d, &w, &fam).unwrap().value, mixing_entropy(&d.padded(extra), &w, &fam).unwrap().value);
    }

    #[test]
    fn decomposition_reconstructs_sample((w, s) in sample_strategy().prop_flat_map(|w| {
        let len = w.len();
        (Just(w), soft_strategy(len, 4))
    })) {
        let d = decomposition_from_assignment(&s, &w).unwrap();
        for (got, want) in d.reconstruct().iter().zip(w.weights()) {
            prop_assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn criterion_matches_classification_loglik(seed in any::<u64>(), kind in 0usize..3, r in 1usize..5) {
        let kind = [FamilyKind::Gaussian, FamilyKind::BiExp, FamilyKind::Bernoulli][kind];
        let mut rng = common::rng(seed);
        let w = common::random_sample(&mut rng, kind, 25);
        let fam = common::bind(kind, &w, true);
        let h = common::random_labels(&mut rng, r, w.len());
        let score = criterion_of_assignment(&h, &w, &fam).unwrap();
        let loglik = common::classification_loglik(&w, &h, &fam);
        prop_assert!((score.criterion.value + loglik / w.n() as f64).abs() < 1e-10);
        prop_assert!((score.classification_loglik - loglik).abs() < 1e-10 * w.n() as f64);
    }

    #[test]
    fn posterior_rows_are_normalized(w in sample_strategy(), spread in -6i32..6, shift in -50.0f64..50.0) {
        let sigma2 = 10f64.powi(spread);
        let state = ModelState::new(
            ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap(),
            vec![
                Params::Gaussian(mixent::family::GaussianParams { mu: shift, sigma2 }),
                Params::Gaussian(mixent::family::GaussianParams { mu: -shift, sigma2: 1.0 }),
                Params::Gaussian(mixent::family::GaussianParams { mu: 0.0, sigma2: sigma2 * 1e-3 }),
            ],
        )
        .unwrap();
        let s = e_step(&state, &w, &gaussian(&w)).unwrap();
        for row in s.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let h = c_step(&s);
        prop_assert_eq!(c_step(&soft_from_hard(&h)), h);
    }

    #[test]
    fn classification_runs_never_worsen(w in sample_strategy(), r in 2usize..5, seed in any::<u64>()) {
        let fam = gaussian(&w);
        let mut rng = common::rng(seed);
        let init = random_initial_assignment(r, &w, &mut rng);
        let opts = EngineOptions { stop_em: 100, mode: InnerMode::Cem, max_iter: 500 };
        let (res, trace) = run_cem(Init::Assignment(init), &w, &fam, &opts).unwrap();
        prop_assert!(trace.is_non_increasing(MONOTONE_TOL));
        prop_assert!(trace.bound_holds(MONOTONE_TOL));
        let again = criterion_of_assignment(&res.best_assignment, &w, &fam).unwrap().criterion.value;
        prop_assert!((again - res.best_h).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_is_deterministic_and_monotone(w in sample_strategy(), seed in any::<u64>(), dirichlet in any::<bool>()) {
        let fam = common::bind(FamilyKind::Gaussian, &w, false);
        let init = if dirichlet { InitScheme::Dirichlet } else { InitScheme::Centers };
        let cfg = SearchConfig { n_init: 4, seed, init, r_max_guard: 5, ..SearchConfig::default() };
        let a = search(&w, &fam, &cfg);
        let b = search(&w, &fam, &cfg);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!(a.levels.windows(2).all(|l| l[1].best_h <= l[0].best_h));
                prop_assert!(a.r_n <= a.r_searched);
                let again = criterion_of_assignment(&a.best_assignment, &w, &fam).unwrap().criterion.value;
                prop_assert!((again - a.best_h).abs() < 1e-12);
                prop_assert_eq!(a, b);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "runs disagree"),
        }
    }

    #[test]
    fn exhaustive_minimum_never_increases_with_more_classes(w in sample_strategy().prop_filter("small", |w| w.len() <= 8)) {
        let fam = common::bind(FamilyKind::Gaussian, &w, false);
        let mut prev = f64::INFINITY;
        for r in 1..=3 {
            let m = brute_force_min(&w, &fam, r).unwrap().min_h;
            prop_assert!(m <= prev + 1e-12);
            prev = m;
        }
    }

    #[test]
    fn split_test_symmetries(nu1 in 0.05f64..0.95, m1 in -5.0f64..5.0, s1 in 0.1f64..5.0, m2 in -5.0f64..5.0, s2 in 0.1f64..5.0, t in -100.0f64..100.0) {
        let a = gaussian_split_test(nu1, m1, s1, 1.0 - nu1, m2, s2).unwrap();
        let b = gaussian_split_test(1.0 - nu1, m2, s2, nu1, m1, s1).unwrap();
        let c = gaussian_split_test(nu1, m1 + t, s1, 1.0 - nu1, m2 + t, s2).unwrap();
        prop_assert!((a.lhs - b.lhs).abs() < 1e-12 && (a.rhs - b.rhs).abs() < 1e-12);
        prop_assert!((a.lhs - c.lhs).abs() < 1e-9 && (a.rhs - c.rhs).abs() < 1e-12);
        let want = nu1 * s1 * s1 + (1.0 - nu1) * s2 * s2 + nu1 * (1.0 - nu1) * (m1 - m2).powi(2);
        prop_assert!((a.sigma_star2 - want).abs() < 1e-12 * want.max(1.0));
    }
}

#[test]
fn soft_bound_holds_in_expectation_mode() {
    let mut rng = common::rng(17);
    for _ in 0..20 {
        let w = common::random_sample(&mut rng, FamilyKind::Gaussian, 40);
        let fam = gaussian(&w);
        let init = random_initial_assignment(3, &w, &mut rng);
        let opts = EngineOptions { stop_em: 30, mode: InnerMode::Em, max_iter: 200 };
        let (_, trace) = run_cem(Init::Assignment(init), &w, &fam, &opts).unwrap();
        assert!(trace.bound_holds(MONOTONE_TOL));
    }
}

#[test]
fn intermediate_criterion_of_hard_fit_is_the_criterion() {
    let w = WeightedSample::ingest(&[0.0, 0.5, 1.5, 4.0, 4.25, 5.0], 0.0).unwrap();
    let fam = gaussian(&w);
    let h = HardAssignment::new(2, vec![0, 0, 0, 1, 1, 1]).unwrap();
    let (state, c) = mixent::m_step(&soft_from_hard(&h), &w, &fam).unwrap();
    assert!((intermediate_criterion(&soft_from_hard(&h), &state, &w) - c.value).abs() < 1e-12);
}

