//! One-dimensional quadrature helpers and special functions.

use gauss_quad::{GaussLaguerre, GaussLegendre};
use statrs::function::gamma::{gamma, gamma_li};

use crate::error::{Error, Result};

/// Lower incomplete gamma `γ(a, x)`, extended by continuity to `x = 0` and `x = ∞`.
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        gamma(a)
    } else {
        gamma_li(a, x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

/// Adaptive double-exponential quadrature on `[a, b]`; `b` may be infinite.
///
/// The half-line is mapped onto `[0, 1)` by `x = a + t / (1 - t)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Integral {
    let out = if b.is_infinite() {
        quadrature::integrate(
            |t: f64| {
                if t >= 1.0 {
                    return 0.0;
                }
                let s = 1.0 - t;
                let v = f(a + t / s) / (s * s);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            tol,
        )
    } else {
        quadrature::integrate(f, a, b, tol)
    };
    Integral {
        value: out.integral,
        error_estimate: out.error_estimate,
    }
}

/// Fixed positive-weight rule on `[0, ∞)`: composite Gauss-Legendre in `t`
/// with `x = scale · t / (1 - t)`.
#[derive(Debug, Clone)]
pub struct HalfLineRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HalfLineRule {
    pub fn new(scale: f64, panels: usize, order: usize) -> Result<Self> {
        if !(scale > 0.0) || panels == 0 {
            return Err(Error::contract(
                "half-line rule needs a positive scale and panels",
            ));
        }
        let gl = GaussLegendre::new(order).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        let h = 1.0 / panels as f64;
        for p in 0..panels {
            let lo = p as f64 * h;
            for &(z, w) in gl.as_node_weight_pairs() {
                let t = lo + 0.5 * h * (z + 1.0);
                let s = 1.0 - t;
                nodes.push(scale * t / s);
                weights.push(0.5 * h * w * scale / (s * s));
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Generalized Gauss-Laguerre rule for `∫ x^alpha e^{-x} f(x) dx`.
pub fn laguerre(deg: usize, alpha: f64) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLaguerre::new(deg, alpha).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(rule.as_node_weight_pairs().to_vec())
}

/// `Σ a_i` accumulated with Neumaier compensation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
