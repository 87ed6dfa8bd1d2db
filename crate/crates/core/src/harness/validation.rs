//! Analytic outage bounds against Monte Carlo outage on the same network.

use serde::{Deserialize, Serialize};

use crate::channel::{prewhiten, sample_realization, QpPolicy, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics::{interference_temperature, leakage_rate};
use crate::numerics::RngStream;
use crate::outage::quadform::shared_cdf;
use crate::outage::{
    ilop_bound_with, itop_bound_with, statistical_covariance, statistical_waterlevel, BoundSpec,
    GainModel, QuadformParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundValidationConfig {
    #[serde(rename = "Na")]
    pub na: usize,
    #[serde(rename = "Nr")]
    pub nr: usize,
    #[serde(rename = "Ns")]
    pub ns: usize,
    #[serde(rename = "Np")]
    pub np: usize,
    #[serde(rename = "Ps")]
    pub ps: f64,
    #[serde(rename = "Pp")]
    pub pp: f64,
    #[serde(rename = "Rb")]
    pub rb: f64,
    pub k: usize,
    pub sigma_s2: f64,
    /// PR noise for the interference-temperature study.
    pub itop_sigma_p2: f64,
    /// PR noise for the interference-limited leakage study.
    pub ilop_sigma_p2: f64,
    pub itop_eta: Vec<f64>,
    pub ilop_eta: Vec<f64>,
    pub trials: usize,
    pub waterlevel_samples: usize,
    #[serde(default)]
    pub master_seed: u64,
}

impl BoundValidationConfig {
    /// All dimensions 2, `k = 1`, `Ps = 10`, `Rb = 2`, `Pp = 2`.
    pub fn small() -> Self {
        Self {
            na: 2,
            nr: 2,
            ns: 2,
            np: 2,
            ps: 10.0,
            pp: 2.0,
            rb: 2.0,
            k: 1,
            sigma_s2: 1.0,
            itop_sigma_p2: 1.0,
            ilop_sigma_p2: 1e-3,
            itop_eta: (0..20)
                .map(|i| 0.1 * 400f64.powf(i as f64 / 19.0))
                .collect(),
            ilop_eta: (0..20).map(|i| -19.0 + 16.0 * i as f64 / 19.0).collect(),
            trials: 10_000,
            waterlevel_samples: 10_000,
            master_seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 2 || self.itop_eta.is_empty() || self.ilop_eta.is_empty() {
            return Err(Error::config(
                "bound validation needs trials >= 2 and nonempty grids",
            ));
        }
        if self.itop_eta.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::config("ITOP thresholds must be positive"));
        }
        self.scenario(self.itop_sigma_p2).validate()
    }

    fn scenario(&self, sigma_p2: f64) -> ScenarioConfig {
        let mut s = ScenarioConfig::single(
            self.na, self.ns, self.np, self.nr, self.ps, self.pp, self.rb,
        );
        s.sigma_s2 = self.sigma_s2;
        s.sigma_p2 = sigma_p2;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub metric: &'static str,
    pub eta: f64,
    pub bound: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub quadrature_error_estimate: f64,
}

impl BoundRow {
    pub fn dominates(&self) -> bool {
        self.bound >= self.empirical - 2.0 * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValidationReport {
    pub mu_tilde: f64,
    pub mu_tilde_std_error: f64,
    pub rows: Vec<BoundRow>,
    pub itop_trace: String,
    pub ilop_trace: String,
}

fn outage(samples: &[f64], eta: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let p = samples.iter().filter(|&&x| x >= eta).count() as f64 / n;
    (p, (p * (1.0 - p) / (n - 1.0)).sqrt())
}

pub fn run_bound_validation(cfg: &BoundValidationConfig) -> Result<BoundValidationReport> {
    cfg.validate()?;
    let rho = cfg.pp / cfg.np as f64;
    let params = QuadformParams {
        ns: cfg.ns,
        na: cfg.na,
        np: cfg.np,
        rho,
        sigma2: cfg.sigma_s2,
    };
    let wl = statistical_waterlevel(
        &GainModel::Whitened(params),
        cfg.ps,
        cfg.rb,
        Some(cfg.k),
        cfg.waterlevel_samples,
        cfg.master_seed ^ 0x5757_5757,
    )?;
    let mu = wl.mu_tilde;

    let scenario = cfg.scenario(cfg.itop_sigma_p2);
    let mut it = Vec::with_capacity(cfg.trials);
    let mut leak = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let mut rng = RngStream::new(cfg.master_seed, t as u64);
        let real = sample_realization(&scenario, &QpPolicy::Uniform, &mut rng)?;
        let eff = prewhiten(&real.g1[0], &real.g2[0], &real.qp, cfg.sigma_s2)?;
        let q = statistical_covariance(&eff, mu, cfg.k);
        it.push(interference_temperature(&real.h2, &q)?);
        leak.push(leakage_rate(&real.h2, &q, cfg.ilop_sigma_p2)?);
    }

    let cdf = shared_cdf(params)?;
    let spec = |sigma_p2: f64, eta: f64| BoundSpec {
        na: cfg.na,
        nr: cfg.nr,
        ns: cfg.ns,
        np: cfg.np,
        rho,
        sigma_s2: cfg.sigma_s2,
        sigma_p2,
        k: cfg.k,
        mu_tilde: mu,
        eta,
    };
    let mut rows = Vec::new();
    let mut itop_trace = String::new();
    for &eta in &cfg.itop_eta {
        let b = itop_bound_with(&spec(cfg.itop_sigma_p2, eta), &cdf)?;
        let (p, se) = outage(&it, eta);
        itop_trace = b.method_trace.clone();
        rows.push(BoundRow {
            metric: "itop",
            eta,
            bound: b.bound_value,
            empirical: p,
            std_error: se,
            quadrature_error_estimate: b.quadrature_error_estimate,
        });
    }
    let mut ilop_trace = String::new();
    for &eta in &cfg.ilop_eta {
        let b = ilop_bound_with(&spec(cfg.ilop_sigma_p2, eta), &cdf)?;
        let (p, se) = outage(&leak, eta);
        ilop_trace = b.method_trace.clone();
        rows.push(BoundRow {
            metric: "ilop",
            eta,
            bound: b.bound_value,
            empirical: p,
            std_error: se,
            quadrature_error_estimate: b.quadrature_error_estimate,
        });
    }
    Ok(BoundValidationReport {
        mu_tilde: mu,
        mu_tilde_std_error: wl.std_error,
        rows,
        itop_trace,
        ilop_trace,
    })
}
