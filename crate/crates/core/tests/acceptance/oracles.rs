//! Further oracle checks of the analytic machinery.

use nalgebra::DMatrix;
use underlay::harness::{run_bound_validation, BoundValidationConfig};
use underlay::numerics::RngStream;
use underlay::outage::quad::integrate;
use underlay::outage::quadform::{sample_alpha1, sup_distance};
use underlay::outage::wishart::sample_wishart_eigs;
use underlay::outage::{
    cauchy_binet_integral, statistical_waterlevel, wishart_topk_density, BackendPolicy, CdfBackend,
    GainModel, LargestEigCdf, QuadformParams,
};
use underlay::Error;

fn sorted_alpha(p: &QuadformParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 7);
    let mut v: Vec<f64> = (0..n)
        .map(|_| sample_alpha1(p, &mut rng).unwrap())
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

#[test]
fn cauchy_binet_with_constant_columns() {
    // N = 2, M = 1: det [[c1(x), k1], [c2(x), k2]] u(x) φ(x)
    let c1 = |x: f64| x;
    let c2 = |x: f64| 1.0 + x * x;
    let u = |x: f64| 2.0 - x;
    let phi = |x: f64| (-x).exp();
    let k = DMatrix::from_row_slice(2, 1, &[0.5, -1.5]);
    let r = cauchy_binet_integral(2, 1, &[&c1, &c2], &k, &[&u], &phi, 0.0, 3.0, 1e-13).unwrap();
    let brute = integrate(
        |x| (c1(x) * -1.5 - c2(x) * 0.5) * u(x) * phi(x),
        0.0,
        3.0,
        1e-13,
    )
    .value;
    assert!(
        (r.ordered - brute).abs() <= 1e-10 * brute.abs(),
        "{} vs {brute}",
        r.ordered
    );
    assert_eq!(r.unordered, r.ordered);
}

#[test]
fn cauchy_binet_unordered_box_is_factorial_multiple() {
    let p0 = |_x: f64| 1.0;
    let p1 = |x: f64| x;
    let one = |_x: f64| 1.0;
    let r = cauchy_binet_integral(
        2,
        2,
        &[&p0, &p1],
        &DMatrix::zeros(2, 0),
        &[&p0, &p1],
        &one,
        0.0,
        1.0,
        1e-13,
    )
    .unwrap();
    // ∫∫_{[0,1]^2} (x2 - x1)^2 = 1/6
    assert!((r.unordered - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn printed_determinant_form_is_rejected_at_small_config() {
    let p = QuadformParams {
        ns: 2,
        na: 2,
        np: 2,
        rho: 1.0,
        sigma2: 1.0,
    };
    match LargestEigCdf::build(p, BackendPolicy::Only(CdfBackend::Printed)) {
        Err(Error::Numerical(msg)) => assert!(msg.contains("printed"), "{msg}"),
        other => panic!(
            "printed backend unexpectedly accepted: {:?}",
            other.map(|c| c.describe())
        ),
    }
    let auto = LargestEigCdf::build(p, BackendPolicy::Auto).unwrap();
    assert_eq!(auto.backend, CdfBackend::ConditionalExact);
}

#[test]
fn conditional_backend_outside_printed_regime() {
    let p = QuadformParams {
        ns: 2,
        na: 3,
        np: 1,
        rho: 2.0,
        sigma2: 0.5,
    };
    let cdf = LargestEigCdf::build(p, BackendPolicy::Only(CdfBackend::ConditionalExact)).unwrap();
    let s = sorted_alpha(&p, 40_000, 21);
    let d = sup_distance(|x| cdf.eval(x), &s);
    assert!(d <= 0.02, "{d}");
}

#[test]
fn conditional_backend_with_sampled_interference() {
    let p = QuadformParams {
        ns: 4,
        na: 2,
        np: 4,
        rho: 1.5,
        sigma2: 1.0,
    };
    let cdf = LargestEigCdf::build(p, BackendPolicy::Only(CdfBackend::ConditionalExact)).unwrap();
    let s = sorted_alpha(&p, 40_000, 22);
    let d = sup_distance(|x| cdf.eval(x), &s);
    assert!(d <= 0.02, "{d}");
}

#[test]
fn empirical_backend_is_a_cdf() {
    let p = QuadformParams {
        ns: 3,
        na: 2,
        np: 2,
        rho: 1.0,
        sigma2: 1.0,
    };
    let cdf = LargestEigCdf::build(p, BackendPolicy::Only(CdfBackend::Empirical)).unwrap();
    assert_eq!(cdf.eval(0.0), 0.0);
    assert_eq!(cdf.eval(1e9), 1.0);
    let mut prev = 0.0;
    for i in 0..200 {
        let v = cdf.eval(i as f64 * 0.1);
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn top1_of_3x3_matches_sampling() {
    let mut rng = RngStream::new(31, 0);
    let n = 100_000;
    let mut s: Vec<f64> = (0..n)
        .map(|_| sample_wishart_eigs(3, 3, &mut rng).unwrap()[0])
        .collect();
    s.sort_by(|a, b| a.total_cmp(b));
    let cdf = |x: f64| {
        integrate(
            |t| wishart_topk_density(&[t], 3, 3).unwrap_or(0.0),
            0.0,
            x,
            1e-10,
        )
        .value
    };
    let grid: Vec<f64> = (1..40).map(|i| i as f64 * 0.5).collect();
    let mut worst = 0.0f64;
    for x in grid {
        let emp = s.partition_point(|&v| v <= x) as f64 / n as f64;
        worst = worst.max((emp - cdf(x)).abs());
    }
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn top2_of_3x3_normalizes() {
    let total = integrate(
        |x1| {
            integrate(
                |x2| wishart_topk_density(&[x1, x2], 3, 3).unwrap_or(0.0),
                0.0,
                x1,
                1e-10,
            )
            .value
        },
        0.0,
        f64::INFINITY,
        1e-9,
    )
    .value;
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn waterlevel_closed_form_and_error_scaling() {
    let fixed = statistical_waterlevel(&GainModel::Fixed(vec![4.0, 1.0]), 10.0, 3.0, None, 1000, 0)
        .unwrap();
    assert!((fixed.mu_tilde - 2f64.sqrt()).abs() < 1e-12);
    let p = QuadformParams {
        ns: 2,
        na: 2,
        np: 2,
        rho: 1.0,
        sigma2: 1.0,
    };
    let small =
        statistical_waterlevel(&GainModel::Whitened(p), 10.0, 2.0, Some(1), 1000, 1).unwrap();
    let large =
        statistical_waterlevel(&GainModel::Whitened(p), 10.0, 2.0, Some(1), 16_000, 2).unwrap();
    let ratio = small.std_error / large.std_error;
    assert!((3.0..5.0).contains(&ratio), "{ratio}");
}

#[test]
fn bounds_dominate_for_two_mode_covariance() {
    // k = 2 = d uses the joint eigenvalue density.
    let mut cfg = BoundValidationConfig::small();
    cfg.k = 2;
    cfg.trials = 4000;
    cfg.waterlevel_samples = 2000;
    let r = run_bound_validation(&cfg).unwrap();
    assert!(r.itop_trace.starts_with("r = d"), "{}", r.itop_trace);
    for row in &r.rows {
        assert!(row.dominates(), "{row:?}");
    }
}

#[test]
fn bounds_dominate_with_sampled_eigenvalues() {
    // k = 2 < d = 3 falls back to sampling the PR channel eigenvalues.
    let mut cfg = BoundValidationConfig::small();
    cfg.na = 3;
    cfg.nr = 3;
    cfg.ns = 3;
    cfg.k = 2;
    cfg.trials = 4000;
    cfg.waterlevel_samples = 2000;
    cfg.itop_eta = (0..10).map(|i| 0.5 * 2f64.powi(i)).collect();
    cfg.ilop_eta = (0..10).map(|i| -28.0 + 2.5 * i as f64).collect();
    let r = run_bound_validation(&cfg).unwrap();
    assert!(r.itop_trace.contains("Monte Carlo"), "{}", r.itop_trace);
    for row in &r.rows {
        assert!(row.dominates(), "{row:?}");
    }
}
