//! Oracle checks for the estimators, the FCLT paths and the Strassen paths.

use approx::assert_relative_eq;
use nlhawkes::estimate::{
    bin_counts, estimate_sigma2, linear_oracle, tail_diagnostic, CountSeries, EstimateError, TailVerdict,
    TruncationPolicy,
};
use nlhawkes::fclt::{build_rescaled, test_marginal_normality, uniform_grid, variance_at};
use nlhawkes::lil::{
    build_eta, build_lil_sequence, calibrate_iid_normal, lil_schedule, LilSequence, S2Profile, MIN_SCHEDULE,
};
use nlhawkes::model::{HawkesModel, History, Kernel, RateFunction};
use nlhawkes::rng::{replicate, substream};
use nlhawkes::simulate::{simulate, simulate_replication, stationary_burnin, EventSequence, SimulationOptions};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

fn poisson_series(rate: f64, m: usize, reps: usize, seed: u64) -> Vec<CountSeries> {
    (0..reps)
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let dist = Poisson::new(rate).unwrap();
            CountSeries::new((0..m).map(|_| dist.sample(&mut rng) as u32).collect())
        })
        .collect()
}

fn linear() -> HawkesModel {
    HawkesModel::new(Kernel::exponential(1.0, 2.0).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap()
}

fn linear_series(m: usize, reps: usize, seed: u64) -> Vec<CountSeries> {
    let model = linear();
    let burnin = stationary_burnin(&model, 1e-3).unwrap();
    let opts = SimulationOptions::default();
    replicate(reps, |r| {
        let out = simulate_replication(&model, m as f64, burnin, seed, r, &opts).unwrap();
        bin_counts(&out.events, 0.0, m).unwrap()
    })
}

#[test]
fn bin_count_examples() {
    let ev = EventSequence::new(History::empty(), vec![0.5, 1.2, 3.7], 4.0).unwrap();
    assert_eq!(bin_counts(&ev, 0.0, 4).unwrap().counts(), &[1, 1, 0, 1]);
    let empty = EventSequence::new(History::empty(), vec![], 5.0).unwrap();
    assert_eq!(bin_counts(&empty, 0.0, 5).unwrap().counts(), &[0; 5]);
    assert!(matches!(bin_counts(&ev, 1.0, 4), Err(EstimateError::Range { .. })));
}

#[test]
fn iid_poisson_sigma2_equals_rate() {
    let series = poisson_series(3.0, 20_000, 5, 11);
    let stats = estimate_sigma2(&series, TruncationPolicy::Auto { cap: 10 }).unwrap();
    let se = &stats.standard_errors;
    assert!((stats.mu_hat - 3.0).abs() < 4.0 * se.mu);
    assert!((stats.sigma2_series - 3.0).abs() < 4.0 * se.sigma2_series);
    assert!((stats.sigma2_batch - 3.0).abs() < 4.0 * se.sigma2_batch);
    for (j, g) in stats.gamma_hat.iter().enumerate().skip(1) {
        assert!(g.abs() < 3.0 * se.gamma[j], "lag {j}: {g} vs se {}", se.gamma[j]);
    }
}

#[test]
fn linear_sigma2_approaches_closed_form() {
    let (mu, sigma2) = linear_oracle(1.0, 0.5).unwrap();
    let series = linear_series(5000, 40, 5);
    let stats = estimate_sigma2(&series, TruncationPolicy::for_model(&linear())).unwrap();
    let se = &stats.standard_errors;
    assert!((stats.mu_hat - mu).abs() < 4.0 * se.mu, "{stats:?}");
    assert!((stats.sigma2_series - sigma2).abs() < 4.0 * se.sigma2_series + 0.3, "{stats:?}");
    assert!((stats.sigma2_batch - sigma2).abs() < 4.0 * se.sigma2_batch + 0.3, "{stats:?}");
    assert!(stats.estimator_discrepancy() < 3.0, "{stats:?}");
}

#[test]
fn linear_oracle_examples() {
    assert_eq!(linear_oracle(1.0, 0.5).unwrap(), (2.0, 8.0));
    assert_eq!(linear_oracle(3.0, 0.0).unwrap(), (3.0, 3.0));
    let (m, s) = linear_oracle(1.0, 0.9).unwrap();
    assert_relative_eq!(m, 10.0, max_relative = 1e-14);
    assert_relative_eq!(s, 1000.0, max_relative = 1e-12);
    assert!(linear_oracle(1.0, 1.0).is_err());
}

#[test]
fn poisson_mgf_example() {
    let series = poisson_series(2.0, 50_000, 2, 3);
    let diag = tail_diagnostic(&series, &[0.1, 0.5]).unwrap();
    let exact = (2.0 * (0.1f64.exp() - 1.0)).exp();
    assert_relative_eq!(exact, 1.234, max_relative = 1e-3);
    assert!((diag.empirical_mgf[0] - exact).abs() < 4.0 * diag.mgf_standard_errors[0]);
    assert!(diag.empirical_mgf.iter().all(|&v| v >= 1.0));
    assert_eq!(diag.verdict, TailVerdict::ConsistentWithExponentialTail);

    let zeros = vec![CountSeries::new(vec![0; 10_000])];
    let diag = tail_diagnostic(&zeros, &[0.1, 1.0]).unwrap();
    assert!(diag.empirical_mgf.iter().all(|&v| v == 1.0));
    assert_eq!(diag.verdict, TailVerdict::Inconclusive);
}

#[test]
fn linear_tail_slope_is_negative() {
    let series = linear_series(5000, 4, 21);
    let diag = tail_diagnostic(&series, &[0.1, 0.2, 0.5]).unwrap();
    assert!(diag.log_survival_slope < 0.0);
    assert!(diag.log_survival_slope + 2.576 * diag.slope_standard_error < 0.0, "{diag:?}");
    assert_eq!(diag.verdict, TailVerdict::ConsistentWithExponentialTail);
}

#[test]
fn rescaled_path_examples() {
    let t = 16.0;
    let ev = EventSequence::new(History::empty(), vec![8.0], t).unwrap();
    let p = build_rescaled(&ev, 0.0, t, 3).unwrap();
    assert_eq!(p.values, vec![0.0, 0.25, 0.25]);
    let shift = build_rescaled(&ev, 0.5, t, 3).unwrap();
    for (i, s) in p.grid.iter().enumerate() {
        assert_relative_eq!(shift.values[i], p.values[i] - 0.5 * s * t / t.sqrt(), epsilon = 1e-15);
    }
}

#[test]
fn poisson_rescaled_endpoint_variance() {
    let m = HawkesModel::new(Kernel::zero(), RateFunction::linear(3.0).unwrap()).unwrap();
    let paths: Vec<_> = replicate(400, |r| {
        let out = simulate(&m, &History::empty(), 400.0, 500 + r as u64).unwrap();
        build_rescaled(&out.events, 3.0, 400.0, 101).unwrap()
    });
    let (v, se) = variance_at(&paths, 1.0).unwrap();
    assert!((v - 3.0).abs() < 3.0 * se, "{v} ± {se}");
    assert!(test_marginal_normality(&paths, 1.0, 3.0, 0.01).unwrap().pass);
}

/// Direct evaluation of the interpolation formula by a linear scan.
fn eta_reference(x: &[f64], s2: &[f64], n: usize, t: f64) -> f64 {
    let target = s2[n] * t;
    let mut k = 0;
    while k + 1 < n && s2[k + 1] <= target {
        k += 1;
    }
    let s_k: f64 = x[..k].iter().sum();
    let num = s_k + (target - s2[k]) / (s2[k + 1] - s2[k]) * x[k];
    num / (2.0 * s2[n] * s2[n].ln().ln()).sqrt()
}

#[test]
fn eta_matches_independent_evaluation() {
    let mut rng = substream(77, 0);
    let x: Vec<f64> = (0..3000).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let increments: Vec<f64> = (0..3000).map(|_| 0.5 + rng.random::<f64>()).collect();
    let profile: Vec<f64> = increments
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    let seq = LilSequence::from_centered(x.clone(), &S2Profile::Empirical { values: profile.clone() }).unwrap();
    let mut s2 = vec![0.0];
    s2.extend(&profile);
    let first = seq.first_valid_index();
    for _ in 0..1000 {
        let n = rng.random_range(first..=3000);
        let t = rng.random::<f64>();
        let got = build_eta(&seq, n, &[t]).unwrap().values[0];
        let want = eta_reference(&x, &s2, n, t);
        let scale = want.abs().max(1e-300);
        assert!((got - want).abs() <= 1e-12 * scale.max(1e-3), "n={n} t={t}: {got} vs {want}");
    }
}

#[test]
fn knots_are_normalized_partial_sums() {
    let mut rng = substream(8, 0);
    let x: Vec<f64> = (0..200).map(|_| rng.random::<f64>() - 0.5).collect();
    let seq = LilSequence::from_centered(x, &S2Profile::PlugIn { sigma2: 0.7 }).unwrap();
    let n = 200;
    let knots: Vec<f64> = (0..=n).map(|k| seq.s2[k] / seq.s2[n]).collect();
    let path = build_eta(&seq, n, &knots).unwrap();
    for k in 0..=n {
        assert_relative_eq!(path.values[k], seq.knot_value(n, k), epsilon = 1e-14);
    }
    assert_eq!(path.values[0], 0.0);
}

#[test]
fn scaling_changes_eta_only_through_log_log() {
    // with s² recomputed from cX, the prefactor √(2 s_n² ln ln s_n²) changes by c·√(lnln(c²s²)/lnln(s²))
    let mut rng = substream(9, 0);
    let x: Vec<f64> = (0..500).map(|_| rng.random::<f64>() - 0.5).collect();
    let c: f64 = 3.0;
    let seq = LilSequence::from_centered(x.clone(), &S2Profile::PlugIn { sigma2: 1.0 }).unwrap();
    let scaled =
        LilSequence::from_centered(x.iter().map(|v| c * v).collect(), &S2Profile::PlugIn { sigma2: c * c }).unwrap();
    let grid = uniform_grid(51);
    for n in [50, 200, 500] {
        let a = build_eta(&seq, n, &grid).unwrap();
        let b = build_eta(&scaled, n, &grid).unwrap();
        let s2 = seq.s2[n];
        let factor = (s2.ln().ln() / (c * c * s2).ln().ln()).sqrt();
        for (va, vb) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(*vb, va * factor, max_relative = 1e-12, epsilon = 1e-15);
        }
    }
}

#[test]
fn linear_s2_over_n_approaches_sigma2() {
    // s_n²/n from the cross-replication second moment at n = 10⁴
    let model = linear();
    let (mu, sigma2) = linear_oracle(1.0, 0.5).unwrap();
    let burnin = stationary_burnin(&model, 1e-3).unwrap();
    let n = 10_000;
    let opts = SimulationOptions::default();
    let endpoint: Vec<f64> = replicate(300, |r| {
        let out = simulate_replication(&model, n as f64, burnin, 404, r, &opts).unwrap();
        let counts = bin_counts(&out.events, 0.0, n).unwrap();
        let seq = build_lil_sequence(&counts, mu, &S2Profile::PlugIn { sigma2 }).unwrap();
        seq.s_partial[n].powi(2)
    });
    let ratio = endpoint.iter().sum::<f64>() / endpoint.len() as f64 / n as f64;
    assert!((ratio - sigma2).abs() < 0.1 * sigma2, "s_n^2/n = {ratio}");
}

#[test]
fn iid_normal_tail_statistic_is_near_one() {
    // the tail statistic of a single draw is random; its median is the stable quantity
    let seq = LilSequence::from_centered(vec![0.0; 1_000_000], &S2Profile::PlugIn { sigma2: 1.0 }).unwrap();
    let schedule = lil_schedule(&seq, MIN_SCHEDULE).unwrap();
    let band = calibrate_iid_normal(&schedule, 1.0, 60, &uniform_grid(11), 31).unwrap();
    assert!((0.7..=1.3).contains(&band.tail_median), "{band:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_zero_nonnegative_and_sigma2_positive(counts in proptest::collection::vec(0u32..20, 60..400)) {
        let series = vec![CountSeries::new(counts)];
        match estimate_sigma2(&series, TruncationPolicy::Fixed(3)) {
            Ok(stats) => {
                prop_assert!(stats.gamma_hat[0] >= 0.0);
                prop_assert!(stats.sigma2_series > 0.0);
                prop_assert!(stats.truncation_lag >= 1);
            }
            Err(e) => { let degenerate = matches!(e, EstimateError::DegenerateVariance(_)); prop_assert!(degenerate) }
        }
    }

    #[test]
    fn eta_starts_at_zero_and_is_bounded_by_knots(xs in proptest::collection::vec(-5.0f64..5.0, 10..200)) {
        let n = xs.len();
        let seq = LilSequence::from_centered(xs, &S2Profile::PlugIn { sigma2: 1.3 }).unwrap();
        let path = build_eta(&seq, n, &uniform_grid(64)).unwrap();
        prop_assert_eq!(path.values[0], 0.0);
        let knot_max = (0..=n).map(|k| seq.knot_value(n, k).abs()).fold(0.0f64, f64::max);
        prop_assert!(path.norm_sup <= knot_max * (1.0 + 1e-12));
    }

    #[test]
    fn g_index_is_monotone(ts in proptest::collection::vec(0.0f64..400.0, 2..50)) {
        let seq = LilSequence::from_centered(vec![0.0; 100], &S2Profile::PlugIn { sigma2: 2.0 }).unwrap();
        let mut sorted = ts.clone();
        sorted.sort_by(f64::total_cmp);
        let gs: Vec<usize> = sorted.iter().map(|&t| seq.g_index(t).value).collect();
        prop_assert!(gs.windows(2).all(|w| w[0] <= w[1]));
        for n in 0..=100 {
            prop_assert_eq!(seq.g_index(seq.s2[n]).value, n);
        }
    }
}
