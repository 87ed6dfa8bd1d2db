//! Single-UCR transmit covariance designs.
//!
//! All designs work on the pre-whitened channel, so a covariance `Q` yields
//! the rate `log2 det(I + Gt Q Gt^H)` with unit noise.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::EffectiveChannel;
use crate::error::{Error, Result};
use crate::numerics::{
    hermitian_eig, hermitian_part, identity, log2det_psd, psd_eig, real_diagonal, sqrt_psd,
    ComplexMatrix,
};
use crate::waterfilling::{max_rate_for_power, min_power_for_rate, multilevel_waterfill};

/// Covariance eigenvalues above `RANK_TOL * Ps` count towards the rank.
pub const RANK_TOL: f64 = 1e-8;

/// A larger dimension count must cut the required power by more than this fraction.
const CWF_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cwf,
    Fwf,
    Nuclear,
    Logdet,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cwf, Method::Fwf, Method::Nuclear, Method::Logdet];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cwf => "cwf",
            Method::Fwf => "fwf",
            Method::Nuclear => "nuclear",
            Method::Logdet => "logdet",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cwf" => Ok(Method::Cwf),
            "fwf" => Ok(Method::Fwf),
            "nuclear" => Ok(Method::Nuclear),
            "logdet" => Ok(Method::Logdet),
            other => Err(Error::config(format!("unknown method '{other}'"))),
        }
    }
}

/// What to do when the rate target cannot be met within the budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Spend the full budget on classic waterfilling and flag the result.
    #[default]
    Simulation,
    /// Report an outage error.
    Strict,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulation" => Ok(Mode::Simulation),
            "strict" => Ok(Mode::Strict),
            other => Err(Error::config(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogdetOptions {
    pub delta: f64,
    /// Stop once the surrogate `log2 det(Q + δI)` drops by less than this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for LogdetOptions {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            tolerance: 1e-3,
            max_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogdetTrace {
    /// Surrogate of every accepted iterate, starting from `Q = I`.
    pub surrogate: Vec<f64>,
    /// `Σ a_i p_i / Ps` of the last accepted subproblem.
    pub power_ratio: f64,
    pub converged: bool,
    /// A later subproblem had no solution and the previous iterate was kept.
    pub subproblem_infeasible: bool,
    /// A candidate raised the surrogate and was discarded.
    pub surrogate_rose: bool,
}

#[derive(Debug, Clone)]
pub struct PrecoderResult {
    pub qs: ComplexMatrix,
    pub rank: usize,
    pub power: f64,
    /// Rate on the pre-whitened channel.
    pub achieved_rate: f64,
    pub feasible: bool,
    pub fallback_applied: bool,
    pub iterations: usize,
    pub logdet: Option<LogdetTrace>,
}

/// `log2 det(I + Gt Q Gt^H)`
pub fn whitened_rate(eff: &EffectiveChannel, q: &ComplexMatrix) -> Result<f64> {
    let g = &eff.gtilde;
    let m = identity(g.nrows()) + g * q * g.adjoint();
    log2det_psd(&m)
}

pub fn numerical_rank(q: &ComplexMatrix, ps: f64) -> Result<usize> {
    let eig = psd_eig(&hermitian_part(q))?;
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > RANK_TOL * ps)
        .count())
}

fn check_inputs(ps: f64, rb: f64) -> Result<()> {
    if !(ps.is_finite() && ps > 0.0) {
        return Err(Error::contract(format!("Ps must be positive, got {ps}")));
    }
    if !(rb.is_finite() && rb > 0.0) {
        return Err(Error::contract(format!("Rb must be positive, got {rb}")));
    }
    Ok(())
}

/// `V diag(p) V^H` over the leading channel eigenvectors.
fn eigenbasis_covariance(eff: &EffectiveChannel, powers: &[f64]) -> ComplexMatrix {
    let na = eff.na();
    let mut full = vec![0.0; na];
    full[..powers.len()].copy_from_slice(powers);
    let v = &eff.eigenvectors;
    hermitian_part(&(v * real_diagonal(&full) * v.adjoint()))
}

fn finish(
    eff: &EffectiveChannel,
    qs: ComplexMatrix,
    ps: f64,
    feasible: bool,
    iterations: usize,
    logdet: Option<LogdetTrace>,
) -> Result<PrecoderResult> {
    let rank = numerical_rank(&qs, ps)?;
    let power = crate::numerics::trace_re(&qs);
    let achieved_rate = whitened_rate(eff, &qs)?;
    Ok(PrecoderResult {
        qs,
        rank,
        power,
        achieved_rate,
        feasible,
        fallback_applied: !feasible,
        iterations,
        logdet,
    })
}

/// Full-budget classic waterfilling, or the outage error in strict mode.
fn infeasible(eff: &EffectiveChannel, ps: f64, mode: Mode) -> Result<PrecoderResult> {
    let alpha = eff.active_alpha();
    let (qs, best_rate) = if alpha.is_empty() {
        let na = eff.na();
        (identity(na) * Complex64::new(ps / na as f64, 0.0), 0.0)
    } else {
        let alloc = max_rate_for_power(alpha, ps)?;
        let rate = crate::waterfilling::rate_of(alpha, &alloc.powers);
        (eigenbasis_covariance(eff, &alloc.powers), rate)
    };
    match mode {
        Mode::Strict => Err(Error::Outage { best_rate }),
        Mode::Simulation => finish(eff, qs, ps, false, 1, None),
    }
}

/// Classic waterfilling with the whole budget `p`, flagged as a fallback.
pub fn full_power_fallback(eff: &EffectiveChannel, p: f64) -> Result<PrecoderResult> {
    infeasible(eff, p, Mode::Simulation)
}

/// Required power `p(M)` for `M = 1..=d'`.
pub fn power_profile(eff: &EffectiveChannel, rb: f64) -> Result<Vec<f64>> {
    let alpha = eff.active_alpha();
    (1..=alpha.len())
        .map(|m| min_power_for_rate(alpha, m, rb).map(|a| a.total_power))
        .collect()
}

fn waterfill_on(eff: &EffectiveChannel, m: usize, rb: f64, ps: f64) -> Result<PrecoderResult> {
    let alloc = min_power_for_rate(eff.active_alpha(), m, rb)?;
    finish(
        eff,
        eigenbasis_covariance(eff, &alloc.powers),
        ps,
        true,
        1,
        None,
    )
}

/// Classic waterfilling: the dimension count with the least required power.
pub fn cwf(eff: &EffectiveChannel, ps: f64, rb: f64, mode: Mode) -> Result<PrecoderResult> {
    check_inputs(ps, rb)?;
    let profile = power_profile(eff, rb)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in profile.iter().enumerate() {
        match best {
            Some((_, bp)) if p >= bp * (1.0 - CWF_TIE_TOL) => {}
            _ => best = Some((i + 1, p)),
        }
    }
    match best {
        Some((m, p)) if p <= ps => waterfill_on(eff, m, rb, ps),
        _ => infeasible(eff, ps, mode),
    }
}

/// Frugal waterfilling: the fewest dimensions whose required power fits the budget.
pub fn fwf(eff: &EffectiveChannel, ps: f64, rb: f64, mode: Mode) -> Result<PrecoderResult> {
    check_inputs(ps, rb)?;
    let profile = power_profile(eff, rb)?;
    match profile.iter().position(|&p| p <= ps) {
        Some(i) => waterfill_on(eff, i + 1, rb, ps),
        None => infeasible(eff, ps, mode),
    }
}

/// Trace minimization; the nuclear norm of a PSD matrix is its trace.
pub fn nuclear_norm(
    eff: &EffectiveChannel,
    ps: f64,
    rb: f64,
    mode: Mode,
) -> Result<PrecoderResult> {
    cwf(eff, ps, rb, mode)
}

/// One reweighted trace-minimization step around `q`.
///
/// With `A = (Q + δI)^{-1}` the new covariance is `A^{-1/2} U diag(p) U^H A^{-1/2}`
/// where `U` diagonalizes `A^{-1/2} R A^{-1/2}` and `p` solves the multilevel
/// problem with weights `diag(U^H A^{-1} U)`.
fn logdet_step(
    gram: &ComplexMatrix,
    q: &ComplexMatrix,
    delta: f64,
    ps: f64,
    rb: f64,
) -> Result<(ComplexMatrix, f64)> {
    let na = q.nrows();
    let shifted = hermitian_part(&(q + identity(na) * Complex64::new(delta, 0.0)));
    let a_inv_sqrt = sqrt_psd(&shifted)?;
    let r_tilde = hermitian_part(&(&a_inv_sqrt * gram * &a_inv_sqrt));
    let eig = psd_eig(&r_tilde)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let keep = eig
        .eigenvalues
        .iter()
        .take_while(|&&l| l > 1e-12 * top && l > 0.0)
        .count();
    if keep == 0 {
        return Err(Error::Outage { best_rate: 0.0 });
    }
    let u = eig.eigenvectors.columns(0, keep).into_owned();
    let lambdas = &eig.eigenvalues[..keep];
    let weights: Vec<f64> = (0..keep)
        .map(|i| {
            let col = u.column(i);
            (col.adjoint() * &shifted * col)[(0, 0)].re
        })
        .collect();
    let alloc = multilevel_waterfill(lambdas, &weights, rb, ps)?;
    let f_sq = &a_inv_sqrt * &u * real_diagonal(&alloc.powers) * u.adjoint() * &a_inv_sqrt;
    Ok((hermitian_part(&f_sq), alloc.weighted_power / ps))
}

fn surrogate(q: &ComplexMatrix, delta: f64) -> Result<f64> {
    log2det_psd(&(q + identity(q.nrows()) * Complex64::new(delta, 0.0)))
}

/// Iterative log-det rank heuristic starting from `Q = I`.
pub fn logdet_heuristic(
    eff: &EffectiveChannel,
    ps: f64,
    rb: f64,
    opts: LogdetOptions,
    mode: Mode,
) -> Result<PrecoderResult> {
    check_inputs(ps, rb)?;
    if !(opts.delta > 0.0 && opts.tolerance > 0.0 && opts.max_iters >= 1) {
        return Err(Error::contract("log-det options must be positive"));
    }
    let gram = eff.gram();
    let mut q = identity(eff.na());
    let mut history = vec![surrogate(&q, opts.delta)?];
    let mut trace = LogdetTrace {
        surrogate: Vec::new(),
        power_ratio: 0.0,
        converged: false,
        subproblem_infeasible: false,
        surrogate_rose: false,
    };
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let (next, ratio) = match logdet_step(&gram, &q, opts.delta, ps, rb) {
            Ok(step) => step,
            Err(Error::Outage { .. }) if iterations == 0 => return infeasible(eff, ps, mode),
            Err(Error::Outage { .. }) => {
                trace.subproblem_infeasible = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let s_next = surrogate(&next, opts.delta)?;
        let s_prev = *history.last().unwrap_or(&f64::INFINITY);
        // Q = I is not a feasible point, so the first step may raise the surrogate.
        if iterations > 0 && s_next > s_prev {
            trace.surrogate_rose = true;
            trace.converged = true;
            break;
        }
        q = next;
        trace.power_ratio = ratio;
        history.push(s_next);
        iterations += 1;
        if iterations > 1 && s_prev - s_next < opts.tolerance {
            trace.converged = true;
            break;
        }
    }
    trace.surrogate = history;
    finish(eff, q, ps, true, iterations, Some(trace))
}

/// Dispatches on the method selector.
pub fn design(
    method: Method,
    eff: &EffectiveChannel,
    ps: f64,
    rb: f64,
    mode: Mode,
    opts: LogdetOptions,
) -> Result<PrecoderResult> {
    match method {
        Method::Cwf => cwf(eff, ps, rb, mode),
        Method::Fwf => fwf(eff, ps, rb, mode),
        Method::Nuclear => nuclear_norm(eff, ps, rb, mode),
        Method::Logdet => logdet_heuristic(eff, ps, rb, opts, mode),
    }
}

/// Checks that `q` commutes with `Gt^H Gt`; used by tests of the eigenbasis designs.
pub fn commutator_norm(eff: &EffectiveChannel, q: &ComplexMatrix) -> f64 {
    let g = eff.gram();
    crate::numerics::frobenius(&(&g * q - q * &g))
}

/// Eigenvalues of a covariance, descending.
pub fn covariance_spectrum(q: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eig(&hermitian_part(q))?.eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{frobenius, sample_cn01, RngStream};
    use proptest::prelude::*;

    fn diag_channel(gains: &[f64]) -> EffectiveChannel {
        let g: Vec<f64> = gains.iter().map(|x| x.sqrt()).collect();
        EffectiveChannel::from_whitened(real_diagonal(&g)).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cwf_examples() {
        let e = diag_channel(&[4.0, 1.0]);
        let r = cwf(&e, 10.0, 3.0, Mode::Simulation).unwrap();
        assert!(r.feasible && r.rank == 2);
        assert!(close(r.power, 1.57843, 1e-5));
        assert!(frobenius(&(&r.qs - real_diagonal(&[1.164214, 0.414214]))) < 1e-5);
        assert!(close(r.achieved_rate, 3.0, 1e-9));

        let e1 = diag_channel(&[1.0]);
        let r = cwf(&e1, 10.0, 1.0, Mode::Simulation).unwrap();
        assert!(r.rank == 1 && close(r.power, 1.0, 1e-12));
    }

    #[test]
    fn cwf_fallback_and_strict() {
        let e = diag_channel(&[4.0, 1.0]);
        let r = cwf(&e, 1.0, 3.0, Mode::Simulation).unwrap();
        assert!(!r.feasible && r.fallback_applied);
        assert!(close(r.power, 1.0, 1e-9));
        assert!(r.achieved_rate < 3.0);
        match cwf(&e, 1.0, 3.0, Mode::Strict) {
            Err(Error::Outage { best_rate }) => assert!(close(best_rate, r.achieved_rate, 1e-9)),
            other => panic!("expected outage, got {other:?}"),
        }
    }

    #[test]
    fn fwf_examples() {
        let e = diag_channel(&[4.0, 1.0]);
        let r = fwf(&e, 10.0, 3.0, Mode::Simulation).unwrap();
        assert!(r.rank == 1 && close(r.power, 1.75, 1e-12));
        assert!(frobenius(&(&r.qs - real_diagonal(&[1.75, 0.0]))) < 1e-12);

        let r = fwf(&e, 1.6, 3.0, Mode::Simulation).unwrap();
        assert!(r.feasible && r.rank == 2);

        let e = diag_channel(&[1.0, 1.0]);
        let f = fwf(&e, 10.0, 2.0, Mode::Simulation).unwrap();
        assert!(f.rank == 1 && close(f.power, 3.0, 1e-12));
        let c = cwf(&e, 10.0, 2.0, Mode::Simulation).unwrap();
        assert!(c.rank == 2 && close(c.power, 2.0, 1e-12));
    }

    #[test]
    fn nuclear_is_cwf() {
        let e = diag_channel(&[4.0, 1.0]);
        let n = nuclear_norm(&e, 10.0, 3.0, Mode::Simulation).unwrap();
        let c = cwf(&e, 10.0, 3.0, Mode::Simulation).unwrap();
        assert!(frobenius(&(&n.qs - &c.qs)) <= 1e-12);
        assert!(close(n.power, 1.57843, 1e-5));
    }

    #[test]
    fn logdet_first_iterate_is_cwf() {
        let mut rng = RngStream::new(8, 0);
        let g = sample_cn01(4, 4, &mut rng);
        let e = EffectiveChannel::from_whitened(g).unwrap();
        let opts = LogdetOptions {
            max_iters: 1,
            ..LogdetOptions::default()
        };
        let l = logdet_heuristic(&e, 100.0, 6.0, opts, Mode::Simulation).unwrap();
        let c = cwf(&e, 100.0, 6.0, Mode::Simulation).unwrap();
        assert_eq!(l.iterations, 1);
        assert!(
            frobenius(&(&l.qs - &c.qs)) <= 1e-8,
            "{}",
            frobenius(&(&l.qs - &c.qs))
        );
    }

    #[test]
    fn logdet_small_example() {
        let e = diag_channel(&[4.0, 1.0]);
        let l =
            logdet_heuristic(&e, 10.0, 3.0, LogdetOptions::default(), Mode::Simulation).unwrap();
        let c = cwf(&e, 10.0, 3.0, Mode::Simulation).unwrap();
        assert!(l.feasible && l.rank <= 2 && l.rank <= c.rank);
        assert!(close(l.achieved_rate, 3.0, 1e-6));
        let s = &l.logdet.as_ref().unwrap().surrogate;
        assert!(s[1..].windows(2).all(|w| w[1] <= w[0] + 1e-8));
    }

    #[test]
    fn logdet_vanishing_rate() {
        let e = diag_channel(&[4.0, 1.0]);
        let l =
            logdet_heuristic(&e, 10.0, 1e-6, LogdetOptions::default(), Mode::Simulation).unwrap();
        assert!(l.power < 1e-5);
        assert!(l.rank <= 1);
    }

    #[test]
    fn logdet_infeasible_falls_back() {
        let e = diag_channel(&[4.0, 1.0]);
        let l = logdet_heuristic(&e, 1.0, 3.0, LogdetOptions::default(), Mode::Simulation).unwrap();
        assert!(!l.feasible && close(l.power, 1.0, 1e-9));
        assert!(matches!(
            logdet_heuristic(&e, 1.0, 3.0, LogdetOptions::default(), Mode::Strict),
            Err(Error::Outage { .. })
        ));
    }

    #[test]
    fn method_strings_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("svd".parse::<Method>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn eigenbasis_designs(seed in any::<u64>(), na in 1usize..6, ns in 1usize..6, rb in 0.5f64..12.0, ps in 1.0f64..200.0) {
            let g = sample_cn01(ns, na, &mut RngStream::new(seed, 0));
            let e = EffectiveChannel::from_whitened(g).unwrap();
            let c = cwf(&e, ps, rb, Mode::Simulation).unwrap();
            let f = fwf(&e, ps, rb, Mode::Simulation).unwrap();
            let n = nuclear_norm(&e, ps, rb, Mode::Simulation).unwrap();
            prop_assert!(frobenius(&(&c.qs - &n.qs)) <= 1e-12);
            prop_assert_eq!(c.feasible, f.feasible);
            if c.feasible {
                prop_assert!(f.rank <= c.rank);
                prop_assert!(c.power <= f.power * (1.0 + 1e-12));
                prop_assert!(f.power <= ps + 1e-9);
                prop_assert!((c.achieved_rate - rb).abs() <= 1e-6);
                prop_assert!((f.achieved_rate - rb).abs() <= 1e-6);
            } else {
                prop_assert!((c.power - ps).abs() <= 1e-9 * ps.max(1.0));
            }
            let scale = frobenius(&e.gram()) * ps;
            prop_assert!(commutator_norm(&e, &c.qs) <= 1e-8 * scale.max(1.0));
            prop_assert!(commutator_norm(&e, &f.qs) <= 1e-8 * scale.max(1.0));
        }

        #[test]
        fn logdet_surrogate_monotone(seed in any::<u64>(), na in 2usize..5, rb in 1.0f64..10.0) {
            let g = sample_cn01(na, na, &mut RngStream::new(seed, 1));
            let e = EffectiveChannel::from_whitened(g).unwrap();
            let l = logdet_heuristic(&e, 100.0, rb, LogdetOptions::default(), Mode::Simulation).unwrap();
            if let Some(trace) = &l.logdet {
                for w in trace.surrogate[1..].windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-8);
                }
            }
            if l.feasible {
                prop_assert!((l.achieved_rate - rb).abs() <= 1e-6);
                prop_assert!(l.power <= 100.0 + 1e-9);
            }
        }
    }
}
