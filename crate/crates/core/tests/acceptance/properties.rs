//! Property tests across the harness and the bounds.

use proptest::prelude::*;
use underlay::channel::{prewhiten, sample_realization, QpPolicy, ScenarioConfig};
use underlay::harness::presets::rate_sweep;
use underlay::harness::{run_experiment, run_trial};
use underlay::numerics::RngStream;
use underlay::outage::{ilop_bound, itop_bound, BoundSpec};
use underlay::precoders::{cwf, fwf, Method, Mode};

fn small(eta: f64, sigma_p2: f64) -> BoundSpec {
    BoundSpec {
        na: 2,
        nr: 2,
        ns: 2,
        np: 2,
        rho: 1.0,
        sigma_s2: 1.0,
        sigma_p2,
        k: 1,
        mu_tilde: 2.5,
        eta,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn itop_monotone(a in 0.01f64..80.0, b in 0.01f64..80.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let x = itop_bound(&small(lo, 1.0)).unwrap().bound_value;
        let y = itop_bound(&small(hi, 1.0)).unwrap().bound_value;
        prop_assert!(y <= x + 1e-12);
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn ilop_monotone(a in -25.0f64..10.0, b in -25.0f64..10.0, s in prop_oneof![Just(1e-3), Just(1.0)]) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let x = ilop_bound(&small(lo, s)).unwrap().bound_value;
        let y = ilop_bound(&small(hi, s)).unwrap().bound_value;
        prop_assert!(y <= x + 1e-12);
    }

    #[test]
    fn paired_rank_and_power_ordering(seed in any::<u64>(), rb in 1.0f64..16.0, ps in 5.0f64..200.0) {
        let cfg = ScenarioConfig::single(4, 4, 3, 3, ps, 10.0, rb);
        let mut rng = RngStream::new(seed, 0);
        let real = sample_realization(&cfg, &QpPolicy::Uniform, &mut rng).unwrap();
        let eff = prewhiten(&real.g1[0], &real.g2[0], &real.qp, 1.0).unwrap();
        let c = cwf(&eff, ps, rb, Mode::Simulation).unwrap();
        let f = fwf(&eff, ps, rb, Mode::Simulation).unwrap();
        if c.feasible && f.feasible {
            prop_assert!(f.rank <= c.rank);
            prop_assert!(c.power <= f.power * (1.0 + 1e-12));
            prop_assert!(f.power <= ps * (1.0 + 1e-12));
        }
    }

    #[test]
    fn single_trial_reproducible(seed in any::<u64>(), t in 0usize..6) {
        let mut spec = rate_sweep();
        spec.trials = 6;
        spec.master_seed = seed;
        spec.methods = vec![Method::Cwf, Method::Logdet];
        spec.sweep.values = vec![6.0, 12.0];
        let table = run_experiment(&spec).unwrap();
        let rerun = run_trial(&spec, t).unwrap();
        let batch: Vec<_> = table.rows.iter().filter(|r| r.trial == t).cloned().collect();
        prop_assert_eq!(batch, rerun);
    }
}

#[test]
fn aggregates_independent_of_thread_count() {
    let mut spec = rate_sweep();
    spec.trials = 64;
    spec.master_seed = 99;
    let with = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| run_experiment(&spec).unwrap())
    };
    let a = with(1);
    let b = with(4);
    assert_eq!(a, b);
}
