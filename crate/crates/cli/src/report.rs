//! JSON reports and CSV tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use capillary_core::scenarios::{CheckRecord, Comparison};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "capillary-report/1";
pub const CSV_HEADER: [&str; 8] = [
    "schema",
    "check_id",
    "param",
    "value",
    "measured",
    "expected",
    "tolerance",
    "pass",
];

/// Everything one `run` produces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: String,
    pub run_config_echo: serde_json::Value,
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                SCHEMA_VERSION.to_string(),
                r.check_id.clone(),
                r.param.clone().unwrap_or_default(),
                r.value.map(num).unwrap_or_default(),
                num(r.measured),
                num(r.expected),
                num(r.tolerance),
                r.pass.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Shortest round-trip text; scientific outside a readable range.
pub fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e9).contains(&x.abs()) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(contents.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

// JSON has no NaN, so non-finite numbers come back as null.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredRecord {
    check_id: String,
    param: Option<String>,
    value: Option<f64>,
    measured: Option<f64>,
    expected: Option<f64>,
    tolerance: Option<f64>,
    comparison: Comparison,
    pass: bool,
    metadata: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredReport {
    schema_version: String,
    run_config_echo: serde_json::Value,
    records: Vec<StoredRecord>,
}

/// Parses a JSON report and rejects records whose pass flag disagrees with
/// their numbers.
pub fn parse_report(text: &str) -> Result<Report> {
    let stored: StoredReport = serde_json::from_str(text).context("parsing report")?;
    if stored.schema_version != SCHEMA_VERSION {
        bail!("unsupported report schema `{}`", stored.schema_version);
    }
    let records: Vec<CheckRecord> = stored
        .records
        .into_iter()
        .map(|s| CheckRecord {
            check_id: s.check_id,
            param: s.param,
            value: s.value,
            measured: s.measured.unwrap_or(f64::NAN),
            expected: s.expected.unwrap_or(f64::NAN),
            tolerance: s.tolerance.unwrap_or(f64::NAN),
            comparison: s.comparison,
            pass: s.pass,
            metadata: s.metadata,
        })
        .collect();
    if let Some(bad) = records.iter().find(|r| !r.is_consistent()) {
        bail!(
            "record `{}` claims pass = {} but measured {} vs expected {} (tolerance {}, {:?})",
            bad.check_id,
            bad.pass,
            bad.measured,
            bad.expected,
            bad.tolerance,
            bad.comparison
        );
    }
    Ok(Report {
        schema_version: stored.schema_version,
        run_config_echo: stored.run_config_echo,
        records,
    })
}

pub fn load_report(path: &Path) -> Result<Report> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_report(&text).with_context(|| format!("in {}", path.display()))
}
