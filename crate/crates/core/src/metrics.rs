//! Primary and secondary rates, interference measures and empirical CCDFs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_part, identity, inv_psd, log2det_psd, trace_re, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    #[serde(rename = "Rp")]
    pub rp: f64,
    #[serde(rename = "Rs")]
    pub rs: f64,
    pub interference_temperature: f64,
    pub leakage_rate: f64,
    pub rank: usize,
    pub power: f64,
}

fn noise(n: usize, sigma2: f64) -> ComplexMatrix {
    identity(n) * Complex64::new(sigma2, 0.0)
}

fn check_square(m: &ComplexMatrix, n: usize, what: &str) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::contract(format!(
            "{what} must be {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `log2 det(I + H1 Qp H1^H (Kp + σp² I)^{-1})`
pub fn primary_rate(
    h1: &ComplexMatrix,
    qp: &ComplexMatrix,
    kp: &ComplexMatrix,
    sigma_p2: f64,
) -> Result<f64> {
    let nr = h1.nrows();
    check_square(qp, h1.ncols(), "Qp")?;
    check_square(kp, nr, "Kp")?;
    let signal = hermitian_part(&(h1 * qp * h1.adjoint()));
    let interference = hermitian_part(kp) + noise(nr, sigma_p2);
    // det(I + S N^{-1}) = det(N^{-1/2}(N + S)N^{-1/2}), evaluated through the Hermitian form.
    let n_inv = inv_psd(&interference)?;
    let w = crate::numerics::sqrt_psd(&n_inv)?;
    let m = identity(nr) + &w * signal * &w;
    Ok(log2det_psd(&m)?.max(0.0))
}

/// Difference of the two log-dets of the virtual PT/UCT multiple access channel.
pub fn primary_rate_mac(
    h1: &ComplexMatrix,
    qp: &ComplexMatrix,
    kp: &ComplexMatrix,
    sigma_p2: f64,
) -> Result<f64> {
    let nr = h1.nrows();
    let signal = hermitian_part(&(h1 * qp * h1.adjoint()));
    let floor = hermitian_part(kp) + noise(nr, sigma_p2);
    Ok(log2det_psd(&(&floor + signal))? - log2det_psd(&floor)?)
}

/// `log2 det(I + G1 Qs G1^H (Ks + σs² I)^{-1})`
pub fn secondary_rate(
    g1: &ComplexMatrix,
    qs: &ComplexMatrix,
    ks: &ComplexMatrix,
    sigma_s2: f64,
) -> Result<f64> {
    primary_rate(g1, qs, ks, sigma_s2)
}

/// `Tr(H2 Qs H2^H)`
pub fn interference_temperature(h2: &ComplexMatrix, qs: &ComplexMatrix) -> Result<f64> {
    check_square(qs, h2.ncols(), "Qs")?;
    Ok(trace_re(&(h2 * qs * h2.adjoint())).max(0.0))
}

/// `log2 det(σp² I + H2 Qs H2^H)`
pub fn leakage_rate(h2: &ComplexMatrix, qs: &ComplexMatrix, sigma_p2: f64) -> Result<f64> {
    check_square(qs, h2.ncols(), "Qs")?;
    if !(sigma_p2 > 0.0) {
        return Err(Error::domain(format!(
            "sigma_p2 must be positive, got {sigma_p2}"
        )));
    }
    let kp = hermitian_part(&(h2 * qs * h2.adjoint()));
    log2det_psd(&(kp + noise(h2.nrows(), sigma_p2)))
}

/// Fraction of samples at or above each threshold.
pub fn empirical_ccdf(samples: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::contract("empirical_ccdf needs samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&x| x < t);
            (sorted.len() - below) as f64 / n
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{psd_eig, real_diagonal, sample_cn01, RngStream};
    use proptest::prelude::*;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn primary_rate_examples() {
        let i2 = identity(2);
        let z = ComplexMatrix::zeros(2, 2);
        assert!((primary_rate(&i2, &i2, &z, 1.0).unwrap() - 2.0).abs() < 1e-14);
        let r = primary_rate(&i2, &i2, &i2, 1.0).unwrap();
        assert!((r - 2.0 * 1.5f64.log2()).abs() < 1e-12);
        assert!((r - 1.169925).abs() < 1e-6);
    }

    #[test]
    fn secondary_rate_examples() {
        let i2 = identity(2);
        let z = ComplexMatrix::zeros(2, 2);
        assert_eq!(secondary_rate(&i2, &z, &z, 1.0).unwrap(), 0.0);
        assert!((secondary_rate(&i2, &i2, &z, 1.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interference_examples() {
        let i2 = identity(2);
        let z = ComplexMatrix::zeros(2, 2);
        assert_eq!(interference_temperature(&i2, &z).unwrap(), 0.0);
        let q = real_diagonal(&[1.75, 0.0]);
        assert!((interference_temperature(&i2, &q).unwrap() - 1.75).abs() < 1e-15);
        assert_eq!(
            leakage_rate(&identity(3), &ComplexMatrix::zeros(3, 3), 1.0).unwrap(),
            0.0
        );
        let q = real_diagonal(&[1.0, 0.0]);
        assert!((leakage_rate(&i2, &q, 1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ccdf_examples() {
        let c = empirical_ccdf(&[1.0, 2.0, 3.0], &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!(c, vec![1.0, 2.0 / 3.0, 0.0]);
        let c = empirical_ccdf(&[5.0; 4], &[4.9, 5.0, 5.1]).unwrap();
        assert_eq!(c, vec![1.0, 1.0, 0.0]);
        assert!(empirical_ccdf(&[], &[1.0]).is_err());

        let mut rng = RngStream::new(31, 0);
        let s: Vec<f64> = (0..100_000).map(|_| Exp1.sample(&mut rng)).collect();
        let p = empirical_ccdf(&s, &[1.0]).unwrap()[0];
        assert!((p - (-1.0f64).exp()).abs() <= 0.01);
    }

    fn random_psd(n: usize, rng: &mut RngStream) -> ComplexMatrix {
        let x = sample_cn01(n, n, rng);
        hermitian_part(&(&x * x.adjoint()))
    }

    #[test]
    fn primary_rate_non_increasing_in_interference() {
        let mut rng = RngStream::new(12, 0);
        for _ in 0..50 {
            let h1 = sample_cn01(3, 3, &mut rng);
            let qp = random_psd(3, &mut rng);
            let kp = random_psd(3, &mut rng);
            let bigger = &kp + identity(3) * Complex64::new(0.1, 0.0);
            assert!(
                primary_rate(&h1, &qp, &bigger, 1.0).unwrap()
                    <= primary_rate(&h1, &qp, &kp, 1.0).unwrap() + 1e-12
            );
        }
    }

    proptest! {
        #[test]
        fn mac_identity(seed in any::<u64>(), nr in 1usize..7, np in 1usize..7, na in 1usize..7, sp in 0.01f64..10.0) {
            let mut rng = RngStream::new(seed, 0);
            let h1 = sample_cn01(nr, np, &mut rng);
            let h2 = sample_cn01(nr, na, &mut rng);
            let qp = random_psd(np, &mut rng);
            let qs = random_psd(na, &mut rng);
            let kp = hermitian_part(&(&h2 * &qs * h2.adjoint()));
            let a = primary_rate(&h1, &qp, &kp, sp).unwrap();
            let b = primary_rate_mac(&h1, &qp, &kp, sp).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
            let leak = leakage_rate(&h2, &qs, sp).unwrap();
            let normalized = log2det_psd(&(identity(nr) + &kp * Complex64::new(1.0 / sp, 0.0))).unwrap();
            prop_assert!((leak - nr as f64 * sp.log2() - normalized).abs() <= 1e-10 * leak.abs().max(1.0));
            let it = interference_temperature(&h2, &qs).unwrap();
            let alt = trace_re(&(h2.adjoint() * &h2 * &qs));
            prop_assert!((it - alt).abs() <= 1e-10 * it.max(1.0));
        }

        #[test]
        fn trace_product_bound(seed in any::<u64>(), n in 1usize..9) {
            let mut rng = RngStream::new(seed, 5);
            let h2 = sample_cn01(n, n, &mut rng);
            let gram = hermitian_part(&(h2.adjoint() * &h2));
            let qs = random_psd(n, &mut rng);
            let lhs = trace_re(&(&gram * &qs));
            let a = psd_eig(&gram).unwrap().eigenvalues;
            let b = psd_eig(&qs).unwrap().eigenvalues;
            let rhs: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-10);
        }
    }
}
