use proptest::prelude::*;

use lossq::blocking::{
    approximate_blocking, iterate_prior, lower_bound, spillover_prior, upper_bound, DemodModel, PriorKind,
};
use lossq::counts::{discrete_counts, outage_thin, poisson_counts, CountPmf, DEFAULT_EPS_MERGE};
use lossq::dist::Discrete;
use lossq::reference::{brute_force_counts, erlang_b};

fn model() -> impl Strategy<Value = DemodModel> {
    prop_oneof![Just(DemodModel::Clipped), Just(DemodModel::Full)]
}

/// Inter-arrival atoms with min time large enough that brute force stays shallow.
fn atoms() -> impl Strategy<Value = Discrete> {
    prop::collection::vec((0.1f64..2.0, 0.05f64..1.0), 1..4).prop_filter_map("distinct atoms", |pairs| {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Discrete::new(pairs.into_iter().map(|(t, p)| ((t * 100.0).round() / 100.0, p / total))).ok()
    })
}

fn arbitrary_counts() -> impl Strategy<Value = CountPmf> {
    prop::collection::vec(0.0f64..1.0, 1..12).prop_filter_map("nonzero mass", |w| {
        let total: f64 = w.iter().sum();
        (total > 0.0).then(|| CountPmf::new(w.iter().map(|x| x / total).collect(), 0.0, 1.0).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn poisson_mass_and_mean(lambda in 0.01f64..20.0, tau in 0.01f64..5.0) {
        let c = poisson_counts(lambda, tau, 1e-12).unwrap();
        prop_assert!((c.total_mass() - 1.0).abs() < 1e-9);
        prop_assert!(c.tail_mass() <= 1e-12);
        prop_assert!((c.mean() - lambda * tau).abs() < 1e-6 * (1.0 + lambda * tau));
    }

    #[test]
    fn thinning_keeps_mass_and_scales_mean(lambda in 0.01f64..10.0, p_o in 0.0f64..=1.0) {
        let c = poisson_counts(lambda, 1.0, 1e-12).unwrap();
        let t = outage_thin(&c, p_o).unwrap();
        prop_assert!((t.total_mass() - 1.0).abs() < 1e-9);
        prop_assert!((t.mean() - lambda * (1.0 - p_o)).abs() < 1e-6);
    }

    #[test]
    fn thinned_poisson_is_poisson(lambda in 0.01f64..10.0, p_o in 0.0f64..0.99) {
        let t = outage_thin(&poisson_counts(lambda, 1.0, 1e-12).unwrap(), p_o).unwrap();
        let direct = poisson_counts(lambda * (1.0 - p_o), 1.0, 1e-12).unwrap();
        for k in 0..direct.probs().len() {
            prop_assert!((t.prob(k) - direct.prob(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn discrete_counts_match_brute_force(d in atoms(), tau in 0.05f64..3.0) {
        prop_assume!(tau / d.min_time() <= 12.0);
        let dp = discrete_counts(&d, tau, DEFAULT_EPS_MERGE).unwrap();
        let bf = brute_force_counts(&d, tau, 12).unwrap();
        prop_assert!((dp.total_mass() - 1.0).abs() < 1e-9);
        let len = dp.probs().len().max(bf.probs().len());
        for k in 0..len {
            prop_assert!((dp.prob(k) - bf.prob(k)).abs() < 1e-12, "k={} dp={} bf={}", k, dp.prob(k), bf.prob(k));
        }
    }

    #[test]
    fn lower_never_exceeds_upper(c in arbitrary_counts(), n in 1usize..10) {
        prop_assert!(lower_bound(&c, n) <= upper_bound(&c, n) + 1e-15);
    }

    #[test]
    fn erlang_b_between_bounds(rho in 0.01f64..10.0, n in 1usize..16) {
        let c = poisson_counts(rho, 1.0, 1e-12).unwrap();
        let eb = erlang_b(n, rho);
        prop_assert!(lower_bound(&c, n) <= eb + 1e-9);
        prop_assert!(eb <= upper_bound(&c, n) + 1e-9);
    }

    #[test]
    fn approximation_clamped(c in arbitrary_counts(), n in 1usize..6, m in model(), general in any::<bool>()) {
        let kind = if general { PriorKind::General } else { PriorKind::DegenerateN1 };
        let prior = spillover_prior(&c, n, kind);
        let r = approximate_blocking(&c, n, &prior, m).unwrap();
        prop_assert!(r.p_lower <= r.p_approx && r.p_approx <= r.p_upper);
        prop_assert!((0.0..=1.0).contains(&r.p_lower) && r.p_upper <= 1.0);
        if r.p_upper == 0.0 {
            prop_assert_eq!(r.p_approx, 0.0);
        }
    }

    #[test]
    fn zero_padding_invariance(c in arbitrary_counts(), n in 1usize..6, m in model(), extra in 1usize..8) {
        let padded = c.padded(c.probs().len() + extra);
        let prior = spillover_prior(&c, n, PriorKind::General);
        let a = approximate_blocking(&c, n, &prior, m).unwrap();
        let b = approximate_blocking(&padded, n, &spillover_prior(&padded, n, PriorKind::General), m).unwrap();
        prop_assert!((a.p_raw - b.p_raw).abs() < 1e-12);
        prop_assert!((a.p_lower - b.p_lower).abs() < 1e-15);
        prop_assert!((a.p_upper - b.p_upper).abs() < 1e-15);
    }

    #[test]
    fn outage_commutes_with_blocking(lambda in 0.05f64..5.0, p_o in 0.0f64..0.95, n in 1usize..6, m in model()) {
        let thinned = outage_thin(&poisson_counts(lambda, 1.0, 1e-12).unwrap(), p_o).unwrap();
        let direct = poisson_counts(lambda * (1.0 - p_o), 1.0, 1e-12).unwrap();
        let a = approximate_blocking(&thinned, n, &spillover_prior(&thinned, n, PriorKind::General), m).unwrap();
        let b = approximate_blocking(&direct, n, &spillover_prior(&direct, n, PriorKind::General), m).unwrap();
        prop_assert!((a.p_approx - b.p_approx).abs() < 1e-9);
        prop_assert!((a.p_lower - b.p_lower).abs() < 1e-9);
        prop_assert!((a.p_upper - b.p_upper).abs() < 1e-9);
    }

    #[test]
    fn iterated_prior_within_bounds(lambda in 0.05f64..5.0, n in 1usize..5, m in model()) {
        let c = poisson_counts(lambda, 1.0, 1e-12).unwrap();
        let r = iterate_prior(&c, n, m, 50, 1e-12).unwrap();
        prop_assert!(r.p_lower <= r.p_approx && r.p_approx <= r.p_upper);
        prop_assert!(r.iterations >= 1 && r.iterations <= 50);
    }
}

#[test]
fn bounds_monotone_in_load() {
    for n in [1, 2, 4, 8] {
        let mut prev = (0.0, 0.0);
        for i in 1..=60 {
            let c = poisson_counts(i as f64 * 0.1, 1.0, 1e-12).unwrap();
            let cur = (lower_bound(&c, n), upper_bound(&c, n));
            assert!(
                cur.0 >= prev.0 - 1e-15 && cur.1 >= prev.1 - 1e-15,
                "n={n} rho={}",
                i as f64 * 0.1
            );
            prev = cur;
        }
    }
}

#[test]
fn one_pass_iteration_equals_single_pass() {
    let c = poisson_counts(1.3, 1.0, 1e-12).unwrap();
    for m in DemodModel::ALL {
        let single = approximate_blocking(&c, 3, &spillover_prior(&c, 3, PriorKind::General), m).unwrap();
        let iter = iterate_prior(&c, 3, m, 1, 1e-12).unwrap();
        assert_eq!(single.p_approx, iter.p_approx);
        assert_eq!(iter.iterations, 1);
    }
}

#[test]
fn supported_below_capacity_never_blocks() {
    let c = CountPmf::new(vec![0.2, 0.5, 0.3], 0.0, 1.0).unwrap();
    assert_eq!(lower_bound(&c, 3), 0.0);
    assert_eq!(upper_bound(&c, 3), 0.0);
    let r = approximate_blocking(&c, 3, &spillover_prior(&c, 3, PriorKind::General), DemodModel::Clipped).unwrap();
    assert_eq!(r.p_approx, 0.0);
}
