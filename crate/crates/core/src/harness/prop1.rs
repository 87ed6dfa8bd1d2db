//! Monte Carlo check that a rank-one PR-blind allocation maximizes the mean PR rate.
//!
//! The UCT eigenbasis is absorbed into `H2` (its distribution is unitarily
//! invariant), so each allocation is a diagonal `Λ` with `Tr Λ = Ps`.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::primary_rate;
use crate::numerics::{identity, real_diagonal, sample_cn01, RngStream};
use crate::outage::quad::compensated_sum;
use num_complex::Complex64;

pub const RANDOM_ALLOCATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prop1Config {
    #[serde(rename = "Na")]
    pub na: usize,
    #[serde(rename = "Nr")]
    pub nr: usize,
    #[serde(rename = "Np")]
    pub np: usize,
    #[serde(rename = "Ps")]
    pub ps: f64,
    #[serde(rename = "Pp")]
    pub pp: f64,
    #[serde(default = "unit")]
    pub sigma_p2: f64,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationEstimate {
    pub label: String,
    pub diagonal: Vec<f64>,
    pub mean_rp: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Report {
    pub rank_one: AllocationEstimate,
    pub uniform: AllocationEstimate,
    pub random: Vec<AllocationEstimate>,
    /// Standard error of the per-draw difference rank-one minus uniform.
    pub paired_difference_se: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Prop1Report {
    /// `sqrt(se_a² + se_b²)` for two estimates.
    pub fn combined_se(a: &AllocationEstimate, b: &AllocationEstimate) -> f64 {
        a.std_error.hypot(b.std_error)
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = compensated_sum(v.iter().copied()) / n;
    let var = compensated_sum(v.iter().map(|x| (x - m) * (x - m))) / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Random diagonals with trace `ps`, uniform on the simplex, from a dedicated stream.
fn random_diagonals(na: usize, ps: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = RngStream::new(seed, u64::MAX);
    (0..RANDOM_ALLOCATIONS)
        .map(|_| {
            let e: Vec<f64> = (0..na).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| ps * x / s).collect()
        })
        .collect()
}

pub fn run_proposition1_check(cfg: &Prop1Config) -> Result<Prop1Report> {
    if cfg.trials < 1000 {
        return Err(Error::config(
            "proposition 1 check needs at least 1000 trials",
        ));
    }
    if cfg.na == 0
        || cfg.nr == 0
        || cfg.np == 0
        || !(cfg.ps > 0.0 && cfg.pp > 0.0 && cfg.sigma_p2 > 0.0)
    {
        return Err(Error::config("invalid proposition 1 configuration"));
    }
    let mut rank_one = vec![0.0; cfg.na];
    rank_one[0] = cfg.ps;
    let uniform = vec![cfg.ps / cfg.na as f64; cfg.na];
    let mut diagonals = vec![rank_one, uniform];
    diagonals.extend(random_diagonals(cfg.na, cfg.ps, cfg.master_seed));
    let lambdas: Vec<_> = diagonals.iter().map(|d| real_diagonal(d)).collect();
    let qp = identity(cfg.np) * Complex64::new(cfg.pp / cfg.np as f64, 0.0);

    let mut samples = vec![Vec::with_capacity(cfg.trials); diagonals.len()];
    for t in 0..cfg.trials {
        let mut rng = RngStream::new(cfg.master_seed, t as u64);
        let h1 = sample_cn01(cfg.nr, cfg.np, &mut rng);
        let h2 = sample_cn01(cfg.nr, cfg.na, &mut rng);
        for (i, lam) in lambdas.iter().enumerate() {
            let kp = &h2 * lam * h2.adjoint();
            samples[i].push(primary_rate(&h1, &qp, &kp, cfg.sigma_p2)?);
        }
    }
    let diff: Vec<f64> = samples[0]
        .iter()
        .zip(&samples[1])
        .map(|(a, b)| a - b)
        .collect();
    let mut est: Vec<AllocationEstimate> = diagonals
        .into_iter()
        .zip(&samples)
        .enumerate()
        .map(|(i, (diagonal, s))| {
            let (mean_rp, std_error) = mean_se(s);
            let label = match i {
                0 => "rank-one".to_string(),
                1 => "uniform".to_string(),
                _ => format!("random-{}", i - 2),
            };
            AllocationEstimate {
                label,
                diagonal,
                mean_rp,
                std_error,
            }
        })
        .collect();
    let random = est.split_off(2);
    let uniform = est.pop().expect("two fixed allocations");
    let rank_one = est.pop().expect("two fixed allocations");
    Ok(Prop1Report {
        rank_one,
        uniform,
        random,
        paired_difference_se: mean_se(&diff).1,
        trials: cfg.trials,
        seed: cfg.master_seed,
    })
}
