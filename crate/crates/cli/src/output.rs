//! Time-series CSV and run manifests.

use crate::error::CliError;
use capeuler::wave::DiagnosticsRow;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Column order of the diagnostics CSV.
pub const TIMESERIES_HEADER: [&str; 12] = [
    "t",
    "E0",
    "E_dtJ",
    "E_eps",
    "E_vort",
    "E_RT",
    "rt_margin",
    "max_kappa",
    "area",
    "monitor_curvature",
    "monitor_velocity",
    "monitor_rt_curvature",
];

/// 17 significant digits, fixed formatting.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        // -0.0 prints as 0
        format!("{:.16e}", x + 0.0)
    } else {
        format!("{x}")
    }
}

pub fn timeseries_record(r: &DiagnosticsRow) -> Vec<String> {
    let e = &r.report;
    let mut out: Vec<String> =
        [r.t, e.e0, e.e_dtj, e.e_eps, e.e_vort, e.e_rt, e.rt_margin, r.max_kappa, r.area, e.monitors.curvature, e.monitors.velocity]
            .iter()
            .map(|&x| fmt17(x))
            .collect();
    // absent when the RT margin is not positive
    out.push(e.monitors.rt_curvature.map(fmt17).unwrap_or_default());
    out
}

pub struct TimeseriesWriter {
    w: csv::Writer<std::fs::File>,
}

impl TimeseriesWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(TIMESERIES_HEADER)?;
        Ok(TimeseriesWriter { w })
    }

    pub fn row(&mut self, r: &DiagnosticsRow) -> Result<(), CliError> {
        self.w.write_record(timeseries_record(r))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush()?;
        Ok(())
    }
}

/// Write a table with an arbitrary header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub subcommand: String,
    pub outputs: Vec<String>,
    pub checks: Vec<CheckRecord>,
}

/// SHA-256 of the canonical JSON form of any serialisable configuration.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let text = serde_json::to_string(cfg).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

impl RunManifest {
    pub fn start(subcommand: &str, config_hash: String) -> Self {
        RunManifest {
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: String::new(),
            subcommand: subcommand.into(),
            outputs: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.display().to_string());
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckRecord { name: name.into(), pass, detail: detail.into() });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Stamp the end time and write `manifest.json` into `dir`; every listed output must exist.
    pub fn finish(mut self, dir: &Path) -> Result<(PathBuf, Self), CliError> {
        if let Some(missing) = self.outputs.iter().find(|o| !Path::new(o).exists()) {
            return Err(CliError::Checkpoint(format!("manifest lists missing output {missing}")));
        }
        self.finished = now();
        let p = dir.join("manifest.json");
        std::fs::write(&p, serde_json::to_string_pretty(&self)?)?;
        Ok((p, self))
    }
}
