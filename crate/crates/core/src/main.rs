use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use underlay::harness::output::{records_csv, to_csv, to_json};
use underlay::harness::presets::{prop1_preset, simulate_preset};
use underlay::harness::{
    run_bound_validation, run_experiment, run_proposition1_check, BoundValidationConfig,
    ExperimentSpec, Prop1Config,
};
use underlay::precoders::Mode;
use underlay::Error;

#[derive(Parser)]
#[command(
    name = "underlay-sim",
    version,
    about = "Underlay MIMO cognitive radio experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paired Monte Carlo comparison of the covariance designs.
    Simulate(Common),
    /// Mean PR rate under rank-one, uniform and random diagonal allocations.
    Prop1(Common),
    /// Analytic ITOP/ILOP bounds against Monte Carlo outage.
    Bounds(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML file with the experiment fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Contract(_) | Error::Domain(_) | Error::Dimension(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn load<T: DeserializeOwned>(path: &PathBuf) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn pick<T: DeserializeOwned>(
    c: &Common,
    preset: impl FnOnce(&str) -> Result<T, Error>,
    default: Option<T>,
) -> Result<T, Failure> {
    match (&c.config, &c.preset) {
        (Some(_), Some(_)) => Err(Failure::Config("use either --config or --preset".into())),
        (Some(path), None) => load(path),
        (None, Some(name)) => Ok(preset(name)?),
        (None, None) => {
            default.ok_or_else(|| Failure::Config("--config or --preset is required".into()))
        }
    }
}

fn emit(c: &Common, text: String) -> Result<(), Failure> {
    match &c.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(c: &Common) -> Result<(), Failure> {
    let mut spec: ExperimentSpec = pick(c, simulate_preset, None)?;
    if let Some(seed) = c.seed {
        spec.master_seed = seed;
    }
    if let Some(t) = c.trials {
        spec.trials = t;
    }
    if let Some(m) = c.mode {
        spec.mode = m;
    }
    spec.validate()?;
    let table = run_experiment(&spec)?;
    emit(
        c,
        match c.format {
            Format::Csv => to_csv(&table),
            Format::Json => to_json(&table)?,
        },
    )
}

fn prop1(c: &Common) -> Result<(), Failure> {
    let mut cfg: Prop1Config = pick(
        c,
        |name| match name {
            "prop1" => Ok(prop1_preset()),
            other => Err(Error::Config(format!("unknown prop1 preset '{other}'"))),
        },
        Some(prop1_preset()),
    )?;
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    let report = run_proposition1_check(&cfg)?;
    let text = match c.format {
        Format::Json => to_json(&report)?,
        Format::Csv => records_csv(
            "allocation,mean_Rp,std_error,diagonal",
            std::iter::once(&report.rank_one)
                .chain(std::iter::once(&report.uniform))
                .chain(&report.random)
                .map(|a| {
                    let diag: Vec<String> = a.diagonal.iter().map(|d| format!("{d:?}")).collect();
                    format!(
                        "{},{:?},{:?},{}",
                        a.label,
                        a.mean_rp,
                        a.std_error,
                        diag.join(";")
                    )
                }),
        ),
    };
    emit(c, text)
}

fn fig4_bounds() -> BoundValidationConfig {
    BoundValidationConfig {
        na: 6,
        nr: 6,
        ns: 6,
        np: 6,
        ps: 200.0,
        pp: 40.0,
        rb: 8.0,
        itop_sigma_p2: 1.0,
        ilop_sigma_p2: 1.0,
        itop_eta: (0..26).map(|i| (i as f64 / 2.0).exp2()).collect(),
        ilop_eta: (0..21).map(|i| 2.5 * i as f64).collect(),
        trials: 1000,
        ..BoundValidationConfig::small()
    }
}

fn bounds(c: &Common) -> Result<(), Failure> {
    let mut cfg: BoundValidationConfig = pick(
        c,
        |name| match name {
            "small" => Ok(BoundValidationConfig::small()),
            "fig4" => Ok(fig4_bounds()),
            other => Err(Error::Config(format!("unknown bounds preset '{other}'"))),
        },
        Some(BoundValidationConfig::small()),
    )?;
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    let report = run_bound_validation(&cfg)?;
    let text = match c.format {
        Format::Json => to_json(&report)?,
        Format::Csv => records_csv(
            "metric,eta,bound,empirical,std_error",
            report.rows.iter().map(|r| {
                format!(
                    "{},{:?},{:?},{:?},{:?}",
                    r.metric, r.eta, r.bound, r.empirical, r.std_error
                )
            }),
        ),
    };
    emit(c, text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Simulate(c) | Command::Prop1(c) | Command::Bounds(c) => c,
    };
    let run = || match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Prop1(c) => prop1(c),
        Command::Bounds(c) => bounds(c),
    };
    let result = match common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(Failure::Config(format!("cannot build thread pool: {e}"))),
        },
        None => run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
