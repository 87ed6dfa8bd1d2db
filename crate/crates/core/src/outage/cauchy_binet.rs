//! Generalized Cauchy-Binet reduction of determinant-product integrals.
//!
//! For `M` variables and `N >= M`, let `Φ(x)` be `N x N` with function
//! columns `Φ[i][j] = c_i(x_j)` for `j < M` and constant columns after them,
//! and let `Ψ(x)[i][j] = u_i(x_j)` be `M x M`. Then
//!
//! ```text
//! ∫_{b ≥ x_1 ≥ … ≥ x_M ≥ a} det Φ(x) det Ψ(x) Π φ(x_k) dx = det B
//! ```
//!
//! with `B[i][j] = ∫_a^b φ c_i u_j` for `j < M` and the constants otherwise.
//! Over the unordered box the same integral is `M! det B`.

use nalgebra::DMatrix;

use super::quad::integrate;
use crate::error::{Error, Result};

pub type ScalarFn<'a> = &'a dyn Fn(f64) -> f64;

#[derive(Debug, Clone)]
pub struct CauchyBinetResult {
    /// Integral over the ordered region.
    pub ordered: f64,
    /// Integral over the unordered region, `M! det B`.
    pub unordered: f64,
    pub b: DMatrix<f64>,
    /// Largest per-entry quadrature error estimate.
    pub error_estimate: f64,
}

/// Assembles `B` by one-dimensional quadrature and returns its determinant.
///
/// `c_const_block` is `N x (N - M)`; `a` and `b` bound the domain and `b` may
/// be infinite. Each entry must reach an estimated error of `tol` (relative to
/// the entry magnitude when that exceeds one).
#[allow(clippy::too_many_arguments)]
pub fn cauchy_binet_integral(
    n: usize,
    m: usize,
    c_funcs: &[ScalarFn<'_>],
    c_const_block: &DMatrix<f64>,
    u_funcs: &[ScalarFn<'_>],
    phi: ScalarFn<'_>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<CauchyBinetResult> {
    if m == 0 || m > n {
        return Err(Error::contract(format!(
            "need 1 <= M <= N, got M={m}, N={n}"
        )));
    }
    if c_funcs.len() != n || u_funcs.len() != m {
        return Err(Error::contract(format!(
            "expected {n} column functions and {m} Vandermonde-side functions"
        )));
    }
    if c_const_block.shape() != (n, n - m) {
        return Err(Error::contract(format!(
            "constant block must be {n}x{}, got {:?}",
            n - m,
            c_const_block.shape()
        )));
    }
    if !(b > a) {
        return Err(Error::contract("integration domain is empty"));
    }
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let mut worst = (0usize, 0usize, 0.0f64);
    let mut worst_ratio = 0.0f64;
    for i in 0..n {
        for j in 0..m {
            let r = integrate(|x| phi(x) * c_funcs[i](x) * u_funcs[j](x), a, b, tol);
            if !r.value.is_finite() {
                return Err(Error::Quadrature {
                    row: i,
                    col: j,
                    error: f64::INFINITY,
                });
            }
            mat[(i, j)] = r.value;
            let ratio = r.error_estimate / (tol * r.value.abs().max(1.0));
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst = (i, j, r.error_estimate);
            }
        }
        for j in m..n {
            mat[(i, j)] = c_const_block[(i, j - m)];
        }
    }
    if worst_ratio > 1.0 {
        return Err(Error::Quadrature {
            row: worst.0,
            col: worst.1,
            error: worst.2,
        });
    }
    let det = mat.clone().determinant();
    let factorial: f64 = (1..=m).map(|k| k as f64).product();
    Ok(CauchyBinetResult {
        ordered: det,
        unordered: factorial * det,
        b: mat,
        error_estimate: worst.2,
    })
}
