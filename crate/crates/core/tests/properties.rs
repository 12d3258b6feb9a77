use proptest::prelude::*;
use stampwait::multi::{as_metrics, ASSchedule, Estimator};
use stampwait::single::{self, aoi_of_threshold, dinkelbach_p, error_of_threshold, solve_weighted};
use stampwait::{ProcessSpec, RecoveryFunction, ServiceDistribution, SystemConfig};

fn cfg(lambda: f64, mean: f64, alpha: f64, beta: f64) -> SystemConfig {
    SystemConfig::single(lambda, mean, alpha, beta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn h_gamma_round_trip(alpha in 0.0f64..5.0, gamma in 0.0f64..10.0, x in 0.0f64..20.0) {
        let rf = RecoveryFunction::exponential_decay(alpha).unwrap();
        let t = rf.h_gamma(gamma, x).unwrap();
        let back = rf.h_gamma_inverse(gamma, t).unwrap();
        prop_assert!((back - x).abs() < 1e-8, "x={x} back={back}");
    }

    #[test]
    fn h_gamma_strictly_increasing(alpha in 0.0f64..5.0, gamma in 0.0f64..10.0,
                                   a in 0.0f64..20.0, d in 1e-6f64..5.0) {
        let rf = RecoveryFunction::exponential_decay(alpha).unwrap();
        prop_assert!(rf.h_gamma(gamma, a + d).unwrap() > rf.h_gamma(gamma, a).unwrap());
    }

    #[test]
    fn error_non_increasing_in_threshold(lambda in 0.5f64..20.0, mean in 0.1f64..3.0,
                                         alpha in 0.0f64..5.0, a in 0.0f64..10.0, d in 0.0f64..5.0) {
        let c = cfg(lambda, mean, alpha, 1.0);
        let lo = error_of_threshold(&c, a).unwrap();
        let hi = error_of_threshold(&c, a + d).unwrap();
        prop_assert!(hi <= lo + 1e-15);
        prop_assert!((0.0..=1.0).contains(&hi));
    }

    #[test]
    fn aoi_increasing_past_its_minimizer(lambda in 0.5f64..20.0, mean in 0.1f64..3.0,
                                         a in 0.0f64..10.0, d in 1e-3f64..5.0) {
        let c = cfg(lambda, mean, 1.0, 1.0);
        let s = single::solve_single(&c, None).unwrap();
        let x = s.threshold + a;
        prop_assert!(aoi_of_threshold(&c, x + d).unwrap() > aoi_of_threshold(&c, x).unwrap());
    }

    #[test]
    fn dinkelbach_p_decreasing_with_one_sign_change(lambda in 0.5f64..20.0, mean in 0.1f64..3.0,
                                                    alpha in 0.1f64..5.0, tau_frac in 0.1f64..1.0) {
        let c = cfg(lambda, mean, alpha, 1.0);
        let tau = tau_frac * error_of_threshold(&c, 0.0).unwrap();
        let upper = 4.0 * aoi_of_threshold(&c, 20.0).unwrap();
        let mut prev = f64::INFINITY;
        let mut changes = 0;
        let mut sign = None;
        for j in 0..=200 {
            let th = upper * j as f64 / 200.0;
            let v = dinkelbach_p(&c, Some(tau), th).unwrap().value;
            prop_assert!(v < prev);
            prev = v;
            let s = v > 0.0;
            if sign.is_some_and(|p| p != s) {
                changes += 1;
            }
            sign = Some(s);
        }
        prop_assert_eq!(changes, 1);
    }

    #[test]
    fn weighted_tradeoff_is_monotone_in_beta(lambda in 1.0f64..20.0, alpha in 0.2f64..3.0,
                                             b1 in 0.02f64..1.0, b2 in 0.02f64..1.0) {
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let a = solve_weighted(&cfg(lambda, 1.0, alpha, lo)).unwrap();
        let b = solve_weighted(&cfg(lambda, 1.0, alpha, hi)).unwrap();
        prop_assert!(b.aoi <= a.aoi + 1e-7);
        prop_assert!(b.err >= a.err - 1e-7);
    }

    #[test]
    fn as_longer_bursts_lengthen_other_epochs(alpha1 in 0.1f64..5.0, alpha2 in 0.1f64..5.0,
                                              m1 in 1u32..8, m2 in 1u32..8, extra in 1u32..5) {
        let p = |a| ProcessSpec::new(3.0, RecoveryFunction::exponential_decay(a).unwrap(), 0.5).unwrap();
        let c = SystemConfig::new(vec![p(alpha1), p(alpha2)], ServiceDistribution::exponential(0.7).unwrap()).unwrap();
        let base = as_metrics(&c, &ASSchedule::new(vec![m1, m2]).unwrap(), Estimator::Analytic).unwrap();
        let more = as_metrics(&c, &ASSchedule::new(vec![m1 + extra, m2]).unwrap(), Estimator::Analytic).unwrap();
        prop_assert!(more.processes[1].aoi > base.processes[1].aoi);
        // the other process also sleeps longer, so its error cannot grow
        prop_assert!(more.processes[1].err <= base.processes[1].err + 1e-15);
    }
}
