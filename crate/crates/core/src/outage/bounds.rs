//! ITOP and ILOP upper bounds and the statistical water level.

use num_complex::Complex64;
use serde::Serialize;

use super::quad::{compensated_sum, laguerre, HalfLineRule};
use super::quadform::{shared_cdf, LargestEigCdf, QuadformParams};
use super::wishart::{sample_wishart_eigs, wishart_dims, wishart_topk_density};
use crate::channel::{prewhiten, EffectiveChannel};
use crate::error::{Error, Result};
use crate::numerics::{identity, sample_cn01, ComplexMatrix, RngStream};
use crate::waterfilling::{max_rate_for_power, min_power_for_rate};

const H_SAMPLES: usize = 20_000;
const H_SEED: u64 = 0x0b0e_11d5_0000_0002;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSpec {
    pub na: usize,
    pub nr: usize,
    pub ns: usize,
    pub np: usize,
    /// Per-antenna PT power `Pp / Np`.
    pub rho: f64,
    pub sigma_s2: f64,
    pub sigma_p2: f64,
    pub k: usize,
    pub mu_tilde: f64,
    /// Power units for ITOP, bits for ILOP.
    pub eta: f64,
}

impl BoundSpec {
    pub fn validate(&self) -> Result<()> {
        if self.na == 0 || self.nr == 0 || self.ns == 0 || self.np == 0 || self.k == 0 {
            return Err(Error::contract("bound dimensions and k must be positive"));
        }
        if !(self.mu_tilde > 0.0 && self.mu_tilde.is_finite()) {
            return Err(Error::contract("mu_tilde must be positive"));
        }
        if !(self.sigma_s2 > 0.0 && self.sigma_p2 > 0.0 && self.rho >= 0.0) {
            return Err(Error::contract(
                "noise variances must be positive and rho nonnegative",
            ));
        }
        if !self.eta.is_finite() {
            return Err(Error::contract("eta must be finite"));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.nr.min(self.na)
    }

    pub fn r(&self) -> usize {
        self.k.min(self.d())
    }

    pub fn quadform(&self) -> QuadformParams {
        QuadformParams {
            ns: self.ns,
            na: self.na,
            np: self.np,
            rho: self.rho,
            sigma2: self.sigma_s2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    pub bound_value: f64,
    pub method_trace: String,
    pub quadrature_error_estimate: f64,
}

/// `Pr(q_1 <= y)` with `q_1 = (μ̃ - 1/α_1)^+`.
fn q1_cdf(cdf: &LargestEigCdf, mu_tilde: f64, y: f64) -> f64 {
    if y >= mu_tilde {
        1.0
    } else {
        cdf.eval(1.0 / (mu_tilde - y))
    }
}

/// `Pr(q_1 >= threshold)`; a nonpositive threshold is met surely.
fn tail(cdf: &LargestEigCdf, mu_tilde: f64, threshold: f64) -> f64 {
    if threshold <= 0.0 {
        1.0
    } else {
        1.0 - q1_cdf(cdf, mu_tilde, threshold)
    }
}

/// `E_h[g(h)]` over the `r` largest eigenvalues of `H2^H H2`, with the rule chosen by case.
fn expect_over_h(
    spec: &BoundSpec,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<(f64, f64, String)> {
    let (d, c) = wishart_dims(spec.nr, spec.na);
    let r = spec.r();
    if r == 1 {
        let density = |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                wishart_topk_density(&[x], spec.nr, spec.na).unwrap_or(0.0)
            }
        };
        let scale = c as f64 + d as f64;
        let run = |panels: usize| -> Result<f64> {
            let rule = HalfLineRule::new(scale, panels, 16)?;
            Ok(compensated_sum(
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| w * density(x) * g(&[x])),
            ))
        };
        let fine = run(64)?;
        let coarse = run(32)?;
        let case = if d == 1 { "r = d = 1" } else { "r = k < d" };
        return Ok((
            fine,
            (fine - coarse).abs(),
            format!("{case}: largest-eigenvalue density on a fixed half-line rule"),
        ));
    }
    if r == d && d <= 3 {
        let run = |deg: usize| -> Result<f64> {
            let nodes = laguerre(deg, (c - d) as f64)?;
            let mut num = Vec::new();
            let mut den = Vec::new();
            let mut idx = vec![0usize; d];
            loop {
                if idx.windows(2).all(|w| w[0] < w[1]) {
                    let h: Vec<f64> = idx.iter().rev().map(|&i| nodes[i].0).collect();
                    let mut w: f64 = idx.iter().map(|&i| nodes[i].1).product();
                    for a in 0..d {
                        for b in a + 1..d {
                            let dd = h[a] - h[b];
                            w *= dd * dd;
                        }
                    }
                    num.push(w * g(&h));
                    den.push(w);
                }
                let mut pos = 0;
                loop {
                    idx[pos] += 1;
                    if idx[pos] < deg {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                    if pos == d {
                        return Ok(compensated_sum(num) / compensated_sum(den));
                    }
                }
            }
        };
        let (hi, lo) = if d == 2 { (40, 32) } else { (24, 20) };
        let fine = run(hi)?;
        let coarse = run(lo)?;
        return Ok((
            fine,
            (fine - coarse).abs(),
            "r = d: joint eigenvalue density on a Gauss-Laguerre product rule".into(),
        ));
    }
    let mut rng = RngStream::new(H_SEED, 0);
    let mut vals = Vec::with_capacity(H_SAMPLES);
    for _ in 0..H_SAMPLES {
        let eigs = sample_wishart_eigs(spec.nr, spec.na, &mut rng)?;
        vals.push(g(&eigs[..r]));
    }
    let n = vals.len() as f64;
    let mean = compensated_sum(vals.iter().copied()) / n;
    let var = compensated_sum(vals.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    Ok((
        mean,
        (var / n).sqrt(),
        format!("r = {r}: Monte Carlo over {H_SAMPLES} eigenvalue draws"),
    ))
}

fn finish(value: f64, error: f64, case: String, cdf: &LargestEigCdf) -> Result<BoundResult> {
    if !value.is_finite() {
        return Err(Error::Numerical("bound integral is not finite".into()));
    }
    let mut trace = format!("{case}; F backend {}", cdf.backend);
    let fallback = cdf.checks.iter().any(|c| !c.accepted);
    if fallback {
        trace.push_str(&format!(" after [{}]", cdf.describe()));
    }
    let clamped = value.clamp(0.0, 1.0);
    if clamped != value {
        trace.push_str(&format!("; clamped from {value:.3e}"));
    }
    Ok(BoundResult {
        bound_value: clamped,
        method_trace: trace,
        quadrature_error_estimate: error,
    })
}

/// Upper bound on `Pr(Tr(H2 Q̃s H2^H) >= η)`: `E_h[1 - F_q1(η / Σ h_i)]`.
pub fn itop_bound(spec: &BoundSpec) -> Result<BoundResult> {
    spec.validate()?;
    let cdf = shared_cdf(spec.quadform())?;
    itop_bound_with(spec, &cdf)
}

pub fn itop_bound_with(spec: &BoundSpec, cdf: &LargestEigCdf) -> Result<BoundResult> {
    spec.validate()?;
    if !(spec.eta > 0.0) {
        return Err(Error::contract("ITOP threshold must be positive"));
    }
    let mu = spec.mu_tilde;
    let eta = spec.eta;
    let g = move |h: &[f64]| {
        let s: f64 = h.iter().sum();
        if s <= 0.0 {
            0.0
        } else {
            tail(cdf, mu, eta / s)
        }
    };
    let (v, e, case) = expect_over_h(spec, &g)?;
    finish(v, e, case, cdf)
}

/// Smallest `q >= 0` with `Π_i (σ² + q h_i) >= target`, or zero if `q = 0` already suffices.
fn leakage_threshold(h: &[f64], sigma2: f64, target_log2: f64) -> f64 {
    let f = |q: f64| -> f64 { h.iter().map(|&x| (sigma2 + q * x).log2()).sum::<f64>() };
    if f(0.0) >= target_log2 {
        return 0.0;
    }
    let hmin = h.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(hmin > 0.0) {
        return f64::INFINITY;
    }
    if h.len() == 1 {
        return (target_log2.exp2() - sigma2) / h[0];
    }
    let per = target_log2 / h.len() as f64;
    let mut lo = 0.0;
    let mut hi = per.exp2() / hmin;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= target_log2 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    hi
}

/// Upper bound on `Pr(log2 det(σp² I + H2 Q̃s H2^H) >= η)`.
///
/// With `q_i <= q_1` and interlacing, the determinant is at most
/// `σp^{2(Nr - r)} Π_{i<=r} (σp² + q_1 h_i)`, so the event implies `q_1` exceeds
/// the root of that product. When `σp² -> 0` and `Nr = r` the root is
/// `(2^η / Π h_i)^{1/r}`.
pub fn ilop_bound(spec: &BoundSpec) -> Result<BoundResult> {
    spec.validate()?;
    let cdf = shared_cdf(spec.quadform())?;
    ilop_bound_with(spec, &cdf)
}

pub fn ilop_bound_with(spec: &BoundSpec, cdf: &LargestEigCdf) -> Result<BoundResult> {
    spec.validate()?;
    let mu = spec.mu_tilde;
    let s2 = spec.sigma_p2;
    let target = spec.eta - (spec.nr - spec.r()) as f64 * s2.log2();
    let g = move |h: &[f64]| tail(cdf, mu, leakage_threshold(h, s2, target));
    let (v, e, case) = expect_over_h(spec, &g)?;
    finish(v, e, case, cdf)
}

/// Channel statistics for the statistical water level.
#[derive(Debug, Clone, PartialEq)]
pub enum GainModel {
    /// Every draw has these effective gains.
    Fixed(Vec<f64>),
    /// Gains of the pre-whitened Rayleigh channel.
    Whitened(QuadformParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaterLevelEstimate {
    pub mu_tilde: f64,
    pub std_error: f64,
    /// Fraction of draws that could not meet the rate within `Ps`.
    pub capped_fraction: f64,
}

fn draw_gains(model: &GainModel, rng: &mut RngStream) -> Result<Vec<f64>> {
    match model {
        GainModel::Fixed(g) => Ok(g.clone()),
        GainModel::Whitened(p) => {
            let x = sample_cn01(p.ns, p.na, rng);
            let y = sample_cn01(p.ns, p.np, rng);
            let qp = identity(p.np) * Complex64::new(p.rho, 0.0);
            Ok(prewhiten(&x, &y, &qp, p.sigma2)?.active_alpha().to_vec())
        }
    }
}

/// Sample mean of the per-draw rate-constrained water level over the `k`
/// strongest modes (all modes when `k` is `None`). Draws that cannot reach
/// `rb` within `ps` contribute their full-power water level.
pub fn statistical_waterlevel(
    model: &GainModel,
    ps: f64,
    rb: f64,
    k: Option<usize>,
    n_samples: usize,
    seed: u64,
) -> Result<WaterLevelEstimate> {
    if n_samples < 1000 {
        return Err(Error::contract(
            "statistical water level needs at least 1000 samples",
        ));
    }
    if !(ps > 0.0 && rb > 0.0) {
        return Err(Error::contract("Ps and Rb must be positive"));
    }
    let mut rng = RngStream::new(seed, 0);
    let mut levels = Vec::with_capacity(n_samples);
    let mut capped = 0usize;
    for _ in 0..n_samples {
        let mut gains = draw_gains(model, &mut rng)?;
        gains.sort_by(|a, b| b.total_cmp(a));
        gains.retain(|&g| g > 0.0);
        if let Some(k) = k {
            gains.truncate(k);
        }
        if gains.is_empty() {
            return Err(Error::Numerical("channel draw has no usable modes".into()));
        }
        let alloc = min_power_for_rate(&gains, gains.len(), rb)?;
        if alloc.total_power > ps {
            capped += 1;
            levels.push(max_rate_for_power(&gains, ps)?.water_level);
        } else {
            levels.push(alloc.water_level);
        }
    }
    let n = n_samples as f64;
    let mean = compensated_sum(levels.iter().copied()) / n;
    let var = compensated_sum(levels.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    Ok(WaterLevelEstimate {
        mu_tilde: mean,
        std_error: (var / n).sqrt(),
        capped_fraction: capped as f64 / n,
    })
}

/// `Q̃s = Σ_{i<=k} (μ̃ - 1/α_i)^+ v_i v_i^H` for one realization.
pub fn statistical_covariance(eff: &EffectiveChannel, mu_tilde: f64, k: usize) -> ComplexMatrix {
    let na = eff.na();
    let mut q = ComplexMatrix::zeros(na, na);
    for (i, &a) in eff.active_alpha().iter().take(k).enumerate() {
        let p = (mu_tilde - 1.0 / a).max(0.0);
        if p > 0.0 {
            let v = eff.eigenvectors.column(i);
            q += v * v.adjoint() * Complex64::new(p, 0.0);
        }
    }
    q
}
