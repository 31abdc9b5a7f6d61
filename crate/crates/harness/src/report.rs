//! Report serialization and the input hash.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::suite::{SuiteConfig, SuiteReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// SHA-256 over `blob <len>\0<canonical config>`, the output directory excluded.
pub fn input_hash(config: &SuiteConfig) -> Result<String> {
    let mut c = config.clone();
    c.out_dir = None;
    let body = serde_json::to_vec(&c)?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// CSV with one row per check.
pub fn checks_csv(report: &SuiteReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "passed", "statistic", "threshold", "runtime_ms", "detail"])?;
    for c in &report.checks {
        w.write_record([
            c.id.clone(),
            c.passed.to_string(),
            format!("{:e}", c.statistic),
            format!("{:e}", c.threshold),
            format!("{:.3}", c.runtime_ms),
            c.detail.clone(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf8 csv"))
}

/// Write `<suite>.json`, `<suite>-checks.csv` and each artifact under `dir`;
/// returns the paths written.
pub fn write_report(report: &SuiteReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let json = dir.join(format!("{}.json", report.suite));
    fs::write(&json, serde_json::to_string_pretty(report)?)?;
    out.push(json);
    let checks = dir.join(format!("{}-checks.csv", report.suite));
    fs::write(&checks, checks_csv(report)?)?;
    out.push(checks);
    for a in &report.artifacts {
        let path = dir.join(format!("{}.csv", a.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&a.header)?;
        for r in &a.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        out.push(path);
    }
    Ok(out)
}

/// Serialize any value as pretty JSON.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
