//! Convergence tables over the cutoff radius, the grid level or the
//! difference-quotient step.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use capillary_core::scenarios::ScenarioKind;
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::num;
use crate::run_records;

pub const SWEEP_SCHEMA: &str = "capillary-sweep/1";
pub const SWEEP_HEADER: [&str; 6] = ["schema", "check_id", "param", "value", "measured", "rate"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Cutoff radius of the coalescence family, as a fraction of the window.
    R0,
    /// Grid refinement level.
    Resolution,
    /// Base step of the difference quotients.
    TStep,
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r0" => Ok(Self::R0),
            "resolution" | "level" => Ok(Self::Resolution),
            "t-step" | "t_step" => Ok(Self::TStep),
            _ => bail!("unknown sweep parameter `{s}`; expected R0, resolution or t-step"),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::R0 => "r0",
            Self::Resolution => "resolution",
            Self::TStep => "t-step",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub check_id: String,
    pub measured: Vec<f64>,
    /// `log(|d_{j-1}| / |d_j|) / log(h_{j-1} / h_j)` with `d_j = m_j - m_{j-1}`;
    /// undefined for the first two entries.
    pub rates: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub schema_version: String,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// Estimated rates from a sequence of values at scales `h`.
pub fn convergence_rates(h: &[f64], m: &[f64]) -> Vec<Option<f64>> {
    (0..m.len())
        .map(|j| {
            if j < 2 {
                return None;
            }
            let d0 = (m[j - 1] - m[j - 2]).abs();
            let d1 = (m[j] - m[j - 1]).abs();
            let r = (d0 / d1).ln() / (h[j - 1] / h[j]).ln();
            r.is_finite().then_some(r)
        })
        .collect()
}

/// Runs the configured scenario once per value and tabulates every record
/// that appears at all of them.
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<SweepTable> {
    if values.len() < 3 {
        bail!("a sweep needs at least 3 values, got {}", values.len());
    }
    let min = if param == SweepParam::Resolution {
        0.0
    } else {
        f64::MIN_POSITIVE
    };
    if values.iter().any(|v| !(*v >= min && v.is_finite())) {
        bail!("{param} sweep values must be positive");
    }

    let mut columns: Vec<BTreeMap<String, f64>> = Vec::new();
    let scales: Vec<f64>;
    match param {
        SweepParam::R0 => {
            let mut c = cfg.clone();
            let ScenarioKind::TouchingCaps {
                r0_fractions,
                r_window,
                ..
            } = &mut c.scenario
            else {
                bail!("an R0 sweep needs the touching_caps scenario");
            };
            let r = *r_window;
            *r0_fractions = values.to_vec();
            c.scenario.validate()?;
            let recs = run_records(&c)?;
            for f in values {
                let r0 = f * r;
                columns.push(
                    recs.iter()
                        .filter(|rec| rec.value == Some(r0))
                        .map(|rec| (rec.check_id.clone(), rec.measured))
                        .collect(),
                );
            }
            scales = values.to_vec();
        }
        SweepParam::Resolution => {
            for v in values {
                if v.fract() != 0.0 || *v > 12.0 {
                    bail!("resolution levels must be integers up to 12, got {v}");
                }
                let mut c = cfg.clone();
                c.run.level = *v as u32;
                columns.push(keyed(&run_records(&c)?));
            }
            scales = values.iter().map(|l| 0.5f64.powf(*l)).collect();
        }
        SweepParam::TStep => {
            for v in values {
                let mut c = cfg.clone();
                c.run.t_step = Some(*v);
                columns.push(keyed(&run_records(&c)?));
            }
            scales = values.to_vec();
        }
    }

    let rows = columns[0]
        .keys()
        .filter(|k| columns.iter().all(|c| c.contains_key(*k)))
        .map(|k| {
            let measured: Vec<f64> = columns.iter().map(|c| c[k]).collect();
            SweepRow {
                check_id: k.clone(),
                rates: convergence_rates(&scales, &measured),
                measured,
            }
        })
        .collect();
    Ok(SweepTable {
        schema_version: SWEEP_SCHEMA.into(),
        param,
        values: values.to_vec(),
        rows,
    })
}

fn keyed(recs: &[capillary_core::scenarios::CheckRecord]) -> BTreeMap<String, f64> {
    recs.iter()
        .map(|r| {
            let key = match (&r.param, r.value) {
                (Some(p), Some(v)) => format!("{}@{p}={}", r.check_id, num(v)),
                _ => r.check_id.clone(),
            };
            (key, r.measured)
        })
        .collect()
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SWEEP_HEADER)?;
        for row in &self.rows {
            for (j, v) in self.values.iter().enumerate() {
                w.write_record([
                    SWEEP_SCHEMA.to_string(),
                    row.check_id.clone(),
                    self.param.to_string(),
                    num(*v),
                    num(row.measured[j]),
                    row.rates[j].map(num).unwrap_or_default(),
                ])?;
            }
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn row(&self, check_id: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.check_id == check_id)
    }
}
