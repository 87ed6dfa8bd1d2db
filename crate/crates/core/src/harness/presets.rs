//! Named configurations for the simulation studies.

use super::experiment::{CcdfGrids, ExperimentSpec, Outputs, Sweep, SweepVar};
use super::prop1::Prop1Config;
use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::precoders::{Method, Mode};

pub const SIMULATE_PRESETS: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

fn single_six(ps: f64, pp: f64) -> ScenarioConfig {
    ScenarioConfig::single(6, 6, 6, 6, ps, pp, 2.0)
}

fn downlink(ps: f64) -> ScenarioConfig {
    let mut s = ScenarioConfig::single(12, 4, 4, 4, ps, 10.0, 5.0);
    s.k = 3;
    s.rate_targets = vec![5.0; 3];
    s
}

fn spec(
    scenario: ScenarioConfig,
    var: SweepVar,
    values: Vec<f64>,
    methods: Vec<Method>,
) -> ExperimentSpec {
    ExperimentSpec {
        scenario,
        sweep: Sweep { var, values },
        methods,
        trials: 1000,
        master_seed: 0,
        mode: Mode::Simulation,
        outputs: Outputs::default(),
    }
}

/// Rate sweep on the six-antenna single-UCR network.
pub fn rate_sweep() -> ExperimentSpec {
    spec(
        single_six(100.0, 10.0),
        SweepVar::Rb,
        (1..=7).map(|i| 2.0 * i as f64).collect(),
        Method::ALL.to_vec(),
    )
}

pub fn simulate_preset(name: &str) -> Result<ExperimentSpec> {
    match name {
        "fig2" | "fig3" => Ok(rate_sweep()),
        "fig4" => {
            let mut s = spec(
                single_six(200.0, 40.0),
                SweepVar::Rb,
                vec![8.0],
                vec![Method::Cwf, Method::Fwf],
            );
            s.outputs.ccdf = CcdfGrids {
                interference_temperature: (0..26).map(|i| (i as f64 / 2.0).exp2()).collect(),
                leakage_rate: (0..31).map(|i| 2.0 * i as f64).collect(),
                rp: (0..31).map(|i| i as f64).collect(),
            };
            Ok(s)
        }
        "fig5" => Ok(spec(
            downlink(100.0),
            SweepVar::Rb,
            (1..=5).map(|i| 2.0 * i as f64).collect(),
            Method::ALL.to_vec(),
        )),
        "fig6" | "fig7" => Ok(spec(
            downlink(100.0),
            SweepVar::Ps,
            (0..=5).map(|i| 10.0 + 2.0 * i as f64).collect(),
            Method::ALL.to_vec(),
        )),
        other => Err(Error::config(format!("unknown simulate preset '{other}'"))),
    }
}

pub fn prop1_preset() -> Prop1Config {
    Prop1Config {
        na: 4,
        nr: 4,
        np: 4,
        ps: 10.0,
        pp: 10.0,
        sigma_p2: 1.0,
        trials: 2000,
        master_seed: 0,
    }
}
