//! Paired Monte Carlo experiments over a sweep of rate targets or budgets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{prewhiten, sample_realization, ChannelRealization, QpPolicy, ScenarioConfig};
use crate::downlink::downlink_precode;
use crate::error::{Error, Result};
use crate::metrics::{
    empirical_ccdf, interference_temperature, leakage_rate, primary_rate, secondary_rate,
};
use crate::numerics::{hermitian_part, trace_re, ComplexMatrix, RngStream};
use crate::outage::quad::compensated_sum;
use crate::precoders::{design, LogdetOptions, Method, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    Rb,
    Ps,
    #[serde(rename = "eta")]
    Eta,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::Rb => "Rb",
            SweepVar::Ps => "Ps",
            SweepVar::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub var: SweepVar,
    /// `Ps` values are in dB.
    pub values: Vec<f64>,
}

/// Thresholds at which per-point CCDFs are reported.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcdfGrids {
    #[serde(default)]
    pub interference_temperature: Vec<f64>,
    #[serde(default)]
    pub leakage_rate: Vec<f64>,
    #[serde(default, rename = "Rp")]
    pub rp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub rows: bool,
    #[serde(default)]
    pub ccdf: CcdfGrids,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            rows: true,
            ccdf: CcdfGrids::default(),
        }
    }
}

fn yes() -> bool {
    true
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub sweep: Sweep,
    pub methods: Vec<Method>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub outputs: Outputs,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("at least one method is required"));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::config("sweep grid is empty"));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep values must be finite"));
        }
        match self.sweep.var {
            SweepVar::Eta => {
                return Err(Error::config(
                    "eta sweeps are evaluated by the bounds subcommand, not simulate",
                ))
            }
            SweepVar::Rb if self.sweep.values.iter().any(|&v| v <= 0.0) => {
                return Err(Error::config("rate targets must be positive"))
            }
            _ => {}
        }
        for v in &self.sweep.values {
            self.scenario_at(*v).validate()?;
        }
        Ok(())
    }

    /// The scenario with the sweep variable set to `value`.
    pub fn scenario_at(&self, value: f64) -> ScenarioConfig {
        let mut s = self.scenario.clone();
        match self.sweep.var {
            SweepVar::Rb => s.rate_targets = vec![value; s.k],
            SweepVar::Ps => s.ps = db_to_linear(value),
            SweepVar::Eta => {}
        }
        s
    }
}

/// One (trial, sweep value, method) record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub trial: usize,
    pub method: Method,
    pub sweep_var: &'static str,
    pub sweep_value: f64,
    pub rank: usize,
    pub power: f64,
    #[serde(rename = "Rs")]
    pub rs: f64,
    #[serde(rename = "Rp")]
    pub rp: f64,
    pub interference_temperature: f64,
    pub leakage_rate: f64,
    pub feasible: bool,
    pub fallback_applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
}

fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let std_error = if values.len() > 1 {
        (compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    MeanSe { mean, std_error }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: Method,
    pub sweep_value: f64,
    pub trials: usize,
    #[serde(rename = "Rp")]
    pub rp: MeanSe,
    #[serde(rename = "Rs")]
    pub rs: MeanSe,
    pub interference_temperature: MeanSe,
    pub leakage_rate: MeanSe,
    pub rank: MeanSe,
    pub power: MeanSe,
    /// Mean over trials of `power / Ps`.
    pub fractional_power_mean_of_ratios: f64,
    /// Mean power divided by `Ps`.
    pub fractional_power_ratio_of_means: f64,
    pub feasible_fraction: f64,
    pub fallback_fraction: f64,
    pub ccdf_interference_temperature: Vec<f64>,
    pub ccdf_leakage_rate: Vec<f64>,
    #[serde(rename = "ccdf_Rp")]
    pub ccdf_rp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub seed: u64,
    pub config_hash: String,
    pub version: &'static str,
    pub trials: usize,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
    pub metadata: Metadata,
}

fn metrics_row(
    real: &ChannelRealization,
    config: &ScenarioConfig,
    qs: &ComplexMatrix,
) -> Result<(f64, f64, f64)> {
    let kp = crate::channel::interference_covariance(&real.h2, qs)?;
    let rp = primary_rate(&real.h1, &real.qp, &kp, config.sigma_p2)?;
    let it = interference_temperature(&real.h2, qs)?;
    let leak = leakage_rate(&real.h2, qs, config.sigma_p2)?;
    Ok((rp, it, leak))
}

/// All rows of trial `t`, drawn from substream `(master_seed, t)`.
pub fn run_trial(spec: &ExperimentSpec, t: usize) -> Result<Vec<Row>> {
    let mut rng = RngStream::new(spec.master_seed, t as u64);
    let real = sample_realization(&spec.scenario, &QpPolicy::Uniform, &mut rng)?;
    let single = spec.scenario.k == 1;
    let eff = if single {
        Some(prewhiten(
            &real.g1[0],
            &real.g2[0],
            &real.qp,
            spec.scenario.sigma_s2,
        )?)
    } else {
        None
    };
    let opts = LogdetOptions::default();
    let mut rows = Vec::with_capacity(spec.sweep.values.len() * spec.methods.len());
    for &value in &spec.sweep.values {
        let config = spec.scenario_at(value);
        for &method in &spec.methods {
            let (qs, per_user, rank, feasible, fallback) = if let Some(eff) = &eff {
                match design(
                    method,
                    eff,
                    config.ps,
                    config.rate_targets[0],
                    spec.mode,
                    opts,
                ) {
                    Ok(r) => (
                        r.qs.clone(),
                        vec![r.qs],
                        r.rank,
                        r.feasible,
                        r.fallback_applied,
                    ),
                    Err(Error::Outage { .. }) => {
                        let zero = ComplexMatrix::zeros(config.na, config.na);
                        (zero.clone(), vec![zero], 0, false, false)
                    }
                    Err(e) => return Err(e),
                }
            } else {
                let d = downlink_precode(&real, &config, method, spec.mode, opts)?;
                let fallback = d.per_user_fallback.iter().any(|&f| f);
                let rank = d.per_user_rank.iter().sum();
                (d.aggregate_q, d.per_user_q, rank, d.feasible, fallback)
            };
            let (rp, it, leak) = metrics_row(&real, &config, &qs)?;
            // Rs sums each user's rate; other users' signals count as interference.
            let mut rs = 0.0;
            for (user, q_user) in per_user.iter().enumerate() {
                let g1 = &real.g1[user];
                let others = &qs - q_user;
                let ks =
                    hermitian_part(&(real.ucr_interference(user) + g1 * others * g1.adjoint()));
                rs += secondary_rate(g1, q_user, &ks, config.sigma_s2)?;
            }
            rows.push(Row {
                trial: t,
                method,
                sweep_var: spec.sweep.var.as_str(),
                sweep_value: value,
                rank,
                power: trace_re(&qs),
                rs,
                rp,
                interference_temperature: it,
                leakage_rate: leak,
                feasible,
                fallback_applied: fallback,
            });
        }
    }
    Ok(rows)
}

/// Recomputes the per-(method, sweep value) aggregates from rows in trial order.
pub fn aggregate(spec: &ExperimentSpec, rows: &[Row]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    for &value in &spec.sweep.values {
        let ps = spec.scenario_at(value).ps;
        for &method in &spec.methods {
            let sel: Vec<&Row> = rows
                .iter()
                .filter(|r| r.method == method && r.sweep_value.to_bits() == value.to_bits())
                .collect();
            if sel.is_empty() {
                return Err(Error::Numerical("aggregate over an empty cell".into()));
            }
            let col = |f: fn(&Row) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let rp = col(|r| r.rp);
            let it = col(|r| r.interference_temperature);
            let leak = col(|r| r.leakage_rate);
            let power = col(|r| r.power);
            let n = sel.len() as f64;
            let ccdf = |samples: &[f64], grid: &[f64]| -> Result<Vec<f64>> {
                if grid.is_empty() {
                    Ok(Vec::new())
                } else {
                    empirical_ccdf(samples, grid)
                }
            };
            let power_stats = mean_se(&power);
            out.push(Aggregate {
                method,
                sweep_value: value,
                trials: sel.len(),
                rp: mean_se(&rp),
                rs: mean_se(&col(|r| r.rs)),
                interference_temperature: mean_se(&it),
                leakage_rate: mean_se(&leak),
                rank: mean_se(&col(|r| r.rank as f64)),
                power: power_stats,
                fractional_power_mean_of_ratios: compensated_sum(power.iter().map(|p| p / ps)) / n,
                fractional_power_ratio_of_means: power_stats.mean / ps,
                feasible_fraction: sel.iter().filter(|r| r.feasible).count() as f64 / n,
                fallback_fraction: sel.iter().filter(|r| r.fallback_applied).count() as f64 / n,
                ccdf_interference_temperature: ccdf(
                    &it,
                    &spec.outputs.ccdf.interference_temperature,
                )?,
                ccdf_leakage_rate: ccdf(&leak, &spec.outputs.ccdf.leakage_rate)?,
                ccdf_rp: ccdf(&rp, &spec.outputs.ccdf.rp)?,
            });
        }
    }
    Ok(out)
}

/// Runs every trial on the current rayon pool and aggregates in trial order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let per_trial: Vec<Vec<Row>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, t))
        .collect::<Result<_>>()?;
    let rows: Vec<Row> = per_trial.into_iter().flatten().collect();
    let aggregates = aggregate(spec, &rows)?;
    Ok(ResultTable {
        rows: if spec.outputs.rows { rows } else { Vec::new() },
        aggregates,
        metadata: Metadata {
            seed: spec.master_seed,
            config_hash: super::output::config_hash(spec)?,
            version: env!("CARGO_PKG_VERSION"),
            trials: spec.trials,
            mode: spec.mode,
        },
    })
}
