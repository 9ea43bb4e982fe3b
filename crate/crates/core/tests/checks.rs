//! Calibration of the statistical machinery itself, plus property-based
//! checks of the numeric helpers the verdicts rest on.

use proptest::prelude::*;

use perfsim::density::FiniteDensity;
use perfsim::rng::UniformSource;
use perfsim::stats::{
    binomial_mean_test, chi_squared_gof, ln_gamma, regularized_gamma_q, tv_distance,
};

#[test]
fn gof_accepts_a_true_null_at_the_calibrated_rate() {
    // 1000 independent tests on genuinely uniform data at significance
    // 1e-3: about one false rejection expected, six would be a 3-in-10000
    // event.
    let mut src = UniformSource::new(5_150);
    let probs = vec![1.0f64 / 6.0; 6];
    let mut passes = 0u32;
    for _ in 0..1000 {
        let mut counts = [0u64; 6];
        for _ in 0..3000 {
            counts[src.uniform_int(6) as usize] += 1;
        }
        if chi_squared_gof(&counts, &probs).unwrap().passes(1e-3) {
            passes += 1;
        }
    }
    assert!(passes >= 995, "only {passes}/1000 true-null passes");
}

#[test]
fn gof_rejects_a_wrong_distribution() {
    let mut src = UniformSource::new(6_160);
    let skewed = vec![0.30f64, 0.14, 0.14, 0.14, 0.14, 0.14];
    let mut counts = [0u64; 6];
    for _ in 0..3000 {
        counts[src.uniform_int(6) as usize] += 1;
    }
    let report = chi_squared_gof(&counts, &skewed).unwrap();
    assert!(!report.passes(1e-3), "p = {} should reject", report.p_value);
}

#[test]
fn binomial_z_stays_calibrated_under_the_null() {
    let mut src = UniformSource::new(7_170);
    let mut outside = 0u32;
    for _ in 0..1000 {
        let mut hits = 0u64;
        for _ in 0..2000 {
            if src.bern_known(0.3f64) {
                hits += 1;
            }
        }
        if !binomial_mean_test(hits, 2000, 0.3).unwrap().within(4.0) {
            outside += 1;
        }
    }
    // Per-test escape probability at 4 sigma is about 6e-5.
    assert!(outside <= 2, "{outside}/1000 outside 4 sigma");
}

fn normalized(ws: &[f64]) -> Vec<f64> {
    let total: f64 = ws.iter().sum();
    ws.iter().map(|w| w / total).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tv_behaves_like_a_bounded_metric(
        trip in prop::collection::vec((1e-6..1.0f64, 1e-6..1.0f64, 1e-6..1.0f64), 2..12)
    ) {
        let p = normalized(&trip.iter().map(|t| t.0).collect::<Vec<_>>());
        let q = normalized(&trip.iter().map(|t| t.1).collect::<Vec<_>>());
        let r = normalized(&trip.iter().map(|t| t.2).collect::<Vec<_>>());
        prop_assert!(tv_distance::<f64>(&p, &p) <= 1e-15);
        let pq = tv_distance::<f64>(&p, &q);
        prop_assert!((pq - tv_distance::<f64>(&q, &p)).abs() <= 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        let pr = tv_distance::<f64>(&p, &r);
        let qr = tv_distance::<f64>(&q, &r);
        prop_assert!(pr <= pq + qr + 1e-12);
    }

    #[test]
    fn gamma_q_satisfies_the_recurrence(a in 0.5..30.0f64, x in 0.0..60.0f64) {
        // Q(a+1, x) = Q(a, x) + x^a e^-x / Gamma(a+1)
        let lhs = regularized_gamma_q(a + 1.0, x);
        let term = if x == 0.0 {
            0.0
        } else {
            (a * x.ln() - x - ln_gamma(a + 1.0)).exp()
        };
        let rhs = regularized_gamma_q(a, x) + term;
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.max(1e-6), "a={a} x={x}: {lhs} vs {rhs}");
    }

    #[test]
    fn uniform_int_is_in_range_and_replayable(seed in any::<u64>(), n in 1..2_000u64) {
        let mut a = UniformSource::new(seed);
        let mut b = UniformSource::new(seed);
        for _ in 0..32 {
            let x = a.uniform_int(n);
            prop_assert!(x < n);
            prop_assert_eq!(x, b.uniform_int(n));
        }
    }

    #[test]
    fn density_json_round_trips(ws in prop::collection::vec(1e-3..1e3f64, 1..10)) {
        let labels: Vec<String> = (0..ws.len()).map(|i| format!("s{i}")).collect();
        let d = FiniteDensity::new(labels, ws).unwrap();
        let back = FiniteDensity::<f64>::from_json(&d.to_json()).unwrap();
        prop_assert_eq!(d, back);
    }

    #[test]
    fn normalization_always_sums_to_one(ws in prop::collection::vec(1e-3..1e3f64, 1..10)) {
        let labels: Vec<String> = (0..ws.len()).map(|i| format!("s{i}")).collect();
        let d = FiniteDensity::new(labels, ws).unwrap();
        let total: f64 = d.normalize().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }
}
