//! CSV and JSON serialization of experiment results.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::experiment::{ExperimentSpec, ResultTable};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "trial,method,sweep_var,sweep_value,rank,power,Rs,Rp,interference_temperature,leakage_rate,feasible,fallback_applied";

/// SHA-256 of the canonical JSON encoding of the spec.
pub fn config_hash(spec: &ExperimentSpec) -> Result<String> {
    let bytes = serde_json::to_vec(spec).map_err(|e| Error::Numerical(e.to_string()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Per-trial rows. Floats use the shortest representation that round-trips.
pub fn to_csv(table: &ResultTable) -> String {
    let mut out = String::with_capacity(64 * (table.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{:?},{},{:?},{:?},{:?},{:?},{:?},{},{}",
            r.trial,
            r.method,
            r.sweep_var,
            r.sweep_value,
            r.rank,
            r.power,
            r.rs,
            r.rp,
            r.interference_temperature,
            r.leakage_rate,
            r.feasible,
            r.fallback_applied
        );
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))
}

/// Simple CSV for any list of flat records with the given header.
pub fn records_csv(header: &str, lines: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}
