//! Ordered eigenvalue densities of uncorrelated complex Wishart matrices.
//!
//! For an `Nr x Na` matrix with i.i.d. CN(0,1) entries, `m = min(Nr, Na)` and
//! `c = max(Nr, Na)`, the `m` nonzero eigenvalues of the Gram matrix have the
//! ordered joint density `K_w Π_{i<j} (λ_i - λ_j)² Π λ_i^{c-m} e^{-λ_i}`.

use nalgebra::DMatrix;
use statrs::function::gamma::gamma;

use super::cauchy_binet::cauchy_binet_integral;
use super::quad::lower_gamma;
use crate::error::{Error, Result};
use crate::numerics::{psd_eig, sample_cn01, RngStream};

/// `(m, c)` for an `nr x na` Gaussian matrix.
pub fn wishart_dims(nr: usize, na: usize) -> (usize, usize) {
    (nr.min(na), nr.max(na))
}

/// Normalization of the ordered joint density: `1 / det[Γ(c - m + i + j - 1)]`.
pub fn wishart_kw(m: usize, c: usize) -> f64 {
    let base = (c - m) as f64;
    let g = DMatrix::from_fn(m, m, |i, j| gamma(base + (i + j) as f64 + 1.0));
    1.0 / g.determinant()
}

/// The same constant recovered from the Cauchy-Binet reduction by quadrature.
pub fn wishart_kw_by_quadrature(m: usize, c: usize, tol: f64) -> Result<f64> {
    let powers: Vec<Box<dyn Fn(f64) -> f64>> = (0..m)
        .map(|p| Box::new(move |x: f64| x.powi(p as i32)) as Box<dyn Fn(f64) -> f64>)
        .collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = powers.iter().map(|b| b.as_ref()).collect();
    let e = (c - m) as i32;
    let phi = move |x: f64| x.powi(e) * (-x).exp();
    let r = cauchy_binet_integral(
        m,
        m,
        &refs,
        &DMatrix::zeros(m, 0),
        &refs,
        &phi,
        0.0,
        f64::INFINITY,
        tol,
    )?;
    Ok(1.0 / r.ordered)
}

fn check_descending(lambdas: &[f64]) -> Result<()> {
    if lambdas.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
        return Err(Error::contract(
            "eigenvalues must be finite and nonnegative",
        ));
    }
    if lambdas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::contract("eigenvalues must be strictly descending"));
    }
    Ok(())
}

/// Ordered joint density of all `m` eigenvalues.
pub fn wishart_joint_density(lambdas: &[f64], nr: usize, na: usize) -> Result<f64> {
    let (m, c) = wishart_dims(nr, na);
    if lambdas.len() != m {
        return Err(Error::contract(format!(
            "expected {m} eigenvalues, got {}",
            lambdas.len()
        )));
    }
    check_descending(lambdas)?;
    let mut v2 = 1.0;
    for i in 0..m {
        for j in i + 1..m {
            let d = lambdas[i] - lambdas[j];
            v2 *= d * d;
        }
    }
    let e = (c - m) as i32;
    let weight: f64 = lambdas.iter().map(|&l| l.powi(e) * (-l).exp()).product();
    Ok(wishart_kw(m, c) * v2 * weight)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Ordered joint density of the `s` largest eigenvalues.
///
/// The remaining `m - s` eigenvalues are integrated out over `[0, λ_s]`. A
/// Laplace expansion of both Vandermonde factors along the `s` retained
/// variables leaves, for every pair of row subsets `(S, T)`, a determinant of
/// lower incomplete gamma functions over the complementary rows.
pub fn wishart_topk_density(lambdas: &[f64], nr: usize, na: usize) -> Result<f64> {
    let (m, c) = wishart_dims(nr, na);
    let s = lambdas.len();
    if s == 0 || s > m {
        return Err(Error::contract(format!("need 1 <= s <= {m}, got {s}")));
    }
    check_descending(lambdas)?;
    if s == m {
        return wishart_joint_density(lambdas, nr, na);
    }
    let base = (c - m) as f64;
    let last = lambdas[s - 1];
    let gam = DMatrix::from_fn(m, m, |a, b| lower_gamma(base + (a + b) as f64 + 1.0, last));
    let sets = subsets(m, s);
    let shift: usize = (1..=s).sum();
    let signed_minor: Vec<f64> = sets
        .iter()
        .map(|set| {
            let v = DMatrix::from_fn(s, s, |r, j| lambdas[j].powi(set[r] as i32));
            let parity: usize = set.iter().map(|a| a + 1).sum::<usize>() + shift;
            let sign = if parity.is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * v.determinant()
        })
        .collect();
    let complements: Vec<Vec<usize>> = sets
        .iter()
        .map(|set| (0..m).filter(|i| !set.contains(i)).collect())
        .collect();
    let mut total = 0.0;
    for (si, sc) in complements.iter().enumerate() {
        if signed_minor[si] == 0.0 {
            continue;
        }
        for (ti, tc) in complements.iter().enumerate() {
            let g = DMatrix::from_fn(m - s, m - s, |r, q| gam[(sc[r], tc[q])]);
            total += signed_minor[si] * signed_minor[ti] * g.determinant();
        }
    }
    let e = (c - m) as i32;
    let weight: f64 = lambdas.iter().map(|&l| l.powi(e) * (-l).exp()).product();
    Ok(wishart_kw(m, c) * weight * total)
}

/// Descending nonzero eigenvalues of the Gram matrix of an `nr x na` Gaussian draw.
pub fn sample_wishart_eigs(nr: usize, na: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let x = sample_cn01(nr, na, rng);
    let gram = if nr <= na {
        &x * x.adjoint()
    } else {
        x.adjoint() * &x
    };
    let eig = psd_eig(&gram)?;
    Ok(eig.eigenvalues.into_iter().map(|l| l.max(0.0)).collect())
}
