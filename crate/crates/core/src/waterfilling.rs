//! Water level solvers over the eigenmodes of a pre-whitened channel.
//!
//! Every eigenmode sees unit noise, so a mode with gain `λ` and power `p`
//! carries `log2(1 + p λ)` bits.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillAllocation {
    /// Aligned with the supplied (descending) eigenvalues.
    pub powers: Vec<f64>,
    pub water_level: f64,
    pub total_power: f64,
    pub active_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelAllocation {
    pub powers: Vec<f64>,
    pub mu: f64,
    pub nu: f64,
    pub total_power: f64,
    /// `Σ a_i p_i`
    pub weighted_power: f64,
}

/// `Σ log2(1 + p_i λ_i)`
pub fn rate_of(eigs: &[f64], powers: &[f64]) -> f64 {
    eigs.iter()
        .zip(powers)
        .map(|(&l, &p)| (p * l).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

fn check_eigs(eigs: &[f64]) -> Result<()> {
    if eigs.is_empty() {
        return Err(Error::contract("eigenvalue list is empty"));
    }
    if eigs.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::contract("eigenvalues must be positive and finite"));
    }
    if eigs.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::contract("eigenvalues must be sorted descending"));
    }
    Ok(())
}

fn allocation(eigs: &[f64], mu: f64, active: usize) -> WaterfillAllocation {
    let mut powers = vec![0.0; eigs.len()];
    for (p, &l) in powers.iter_mut().zip(eigs).take(active) {
        *p = (mu - 1.0 / l).max(0.0);
    }
    let total_power = powers.iter().sum();
    let active_count = powers.iter().filter(|&&p| p > 0.0).count();
    WaterfillAllocation {
        powers,
        water_level: mu,
        total_power,
        active_count,
    }
}

/// Minimum total power reaching `rb` bits over the `m` strongest modes.
///
/// The water level has the closed form `log2 μ = (rb - Σ log2 λ_i) / a` on an
/// active set of size `a`; the set shrinks until the weakest active mode is
/// above water.
pub fn min_power_for_rate(eigs: &[f64], m: usize, rb: f64) -> Result<WaterfillAllocation> {
    check_eigs(eigs)?;
    if m == 0 || m > eigs.len() {
        return Err(Error::contract(format!(
            "dimension budget {m} outside 1..={}",
            eigs.len()
        )));
    }
    if !(rb.is_finite() && rb > 0.0) {
        return Err(Error::contract(format!(
            "rate target must be positive, got {rb}"
        )));
    }
    let mut log_sum: f64 = eigs[..m].iter().map(|l| l.log2()).sum();
    let mut active = m;
    loop {
        let mu = ((rb - log_sum) / active as f64).exp2();
        if active == 1 || mu > 1.0 / eigs[active - 1] {
            return Ok(allocation(eigs, mu, active));
        }
        active -= 1;
        log_sum -= eigs[active].log2();
    }
}

/// Same problem as [`min_power_for_rate`] solved by bisection on `log μ`.
pub fn min_power_for_rate_bisection(
    eigs: &[f64],
    m: usize,
    rb: f64,
) -> Result<WaterfillAllocation> {
    check_eigs(eigs)?;
    if m == 0 || m > eigs.len() || !(rb > 0.0) {
        return Err(Error::contract("invalid bisection inputs"));
    }
    let modes = &eigs[..m];
    let rate_at = |log_mu: f64| -> f64 {
        modes
            .iter()
            .map(|&l| (log_mu + l.log2()).max(0.0))
            .sum::<f64>()
    };
    // rate is zero at μ = 1/λ_1 and at least rb at the single-mode level.
    let mut lo = -eigs[0].log2();
    let mut hi = rb - eigs[0].log2();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid) < rb {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    let mu = (0.5 * (lo + hi)).exp2();
    let active = modes.iter().filter(|&&l| mu > 1.0 / l).count().max(1);
    Ok(allocation(eigs, mu, active))
}

/// Classic waterfilling: maximum rate with total power `p`.
pub fn max_rate_for_power(eigs: &[f64], p: f64) -> Result<WaterfillAllocation> {
    check_eigs(eigs)?;
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::contract(format!(
            "power budget must be positive, got {p}"
        )));
    }
    let mut inv_sum: f64 = eigs.iter().map(|l| 1.0 / l).sum();
    let mut active = eigs.len();
    loop {
        let mu = (p + inv_sum) / active as f64;
        if active == 1 || mu > 1.0 / eigs[active - 1] {
            return Ok(allocation(eigs, mu, active));
        }
        active -= 1;
        inv_sum -= 1.0 / eigs[active];
    }
}

/// Min-power allocation for gains in arbitrary order; powers returned in input order.
fn min_power_unsorted(gains: &[f64], rb: f64) -> Result<(Vec<f64>, f64)> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&i, &j| gains[j].total_cmp(&gains[i]));
    let sorted: Vec<f64> = order.iter().map(|&i| gains[i]).collect();
    let alloc = min_power_for_rate(&sorted, sorted.len(), rb)?;
    let mut powers = vec![0.0; gains.len()];
    for (pos, &i) in order.iter().enumerate() {
        powers[i] = alloc.powers[pos];
    }
    Ok((powers, alloc.water_level))
}

fn max_rate_unsorted(gains: &[f64], p: f64) -> Result<f64> {
    let mut sorted = gains.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let alloc = max_rate_for_power(&sorted, p)?;
    Ok(rate_of(&sorted, &alloc.powers))
}

/// Minimum plain power for rate `rb` subject to the weighted budget `Σ a_i p_i <= ps`.
///
/// The solution has the form `p_i = (1/(μ + a_i ν) - 1/λ_i)^+`. For a fixed
/// ratio `ν' = ν/μ` the problem is ordinary waterfilling on the gains
/// `λ_i / (1 + a_i ν')`, and the weighted power falls as `ν'` grows, so `ν'`
/// is found by bisection.
pub fn multilevel_waterfill(
    eigs: &[f64],
    weights: &[f64],
    rb: f64,
    ps: f64,
) -> Result<MultilevelAllocation> {
    if eigs.is_empty() || eigs.len() != weights.len() {
        return Err(Error::contract(
            "eigenvalues and weights must have equal nonzero length",
        ));
    }
    if eigs
        .iter()
        .chain(weights)
        .any(|&x| !(x.is_finite() && x > 0.0))
    {
        return Err(Error::contract("eigenvalues and weights must be positive"));
    }
    if !(rb.is_finite() && rb > 0.0 && ps.is_finite() && ps > 0.0) {
        return Err(Error::contract(
            "rate target and power budget must be positive",
        ));
    }

    let weighted = |p: &[f64]| -> f64 { p.iter().zip(weights).map(|(p, a)| p * a).sum() };
    let solve = |nu_ratio: f64| -> Result<(Vec<f64>, f64)> {
        let gains: Vec<f64> = eigs
            .iter()
            .zip(weights)
            .map(|(&l, &a)| l / (1.0 + a * nu_ratio))
            .collect();
        let (pt, w) = min_power_unsorted(&gains, rb)?;
        // pt_i is the power on gain λ_i/(1+a_i ν'), i.e. c_i p_i with c_i = 1 + a_i ν'.
        let p: Vec<f64> = pt
            .iter()
            .zip(weights)
            .map(|(&x, &a)| x / (1.0 + a * nu_ratio))
            .collect();
        Ok((p, w))
    };
    let finish = |p: Vec<f64>, w: f64, nu_ratio: f64| -> MultilevelAllocation {
        let total_power = p.iter().sum();
        let weighted_power = weighted(&p);
        MultilevelAllocation {
            powers: p,
            mu: 1.0 / w,
            nu: nu_ratio / w,
            total_power,
            weighted_power,
        }
    };

    let (p0, w0) = solve(0.0)?;
    if weighted(&p0) <= ps {
        return Ok(finish(p0, w0, 0.0));
    }

    let scaled: Vec<f64> = eigs.iter().zip(weights).map(|(l, a)| l / a).collect();
    // On gains λ_i / a_i the allocated power is a_i p_i.
    let (floor_weighted, floor_level) = min_power_unsorted(&scaled, rb)?;
    let min_weighted: f64 = floor_weighted.iter().sum();
    if min_weighted > ps {
        return Err(Error::Outage {
            best_rate: max_rate_unsorted(&scaled, ps)?,
        });
    }

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut hi_sol = solve(hi)?;
    while weighted(&hi_sol.0) > ps {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            // The budget equals the weighted floor up to round-off.
            let floor: Vec<f64> = floor_weighted
                .iter()
                .zip(weights)
                .map(|(x, a)| x / a)
                .collect();
            let total_power = floor.iter().sum();
            return Ok(MultilevelAllocation {
                powers: floor,
                mu: 0.0,
                nu: 1.0 / floor_level,
                total_power,
                weighted_power: min_weighted,
            });
        }
        hi_sol = solve(hi)?;
    }
    for _ in 0..400 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let sol = solve(mid)?;
        if weighted(&sol.0) > ps {
            lo = mid;
        } else {
            hi = mid;
            hi_sol = sol;
        }
    }
    Ok(finish(hi_sol.0, hi_sol.1, hi))
}
