//! Run configuration: flat `[section]` / `key = value` files.
//!
//! ```toml
//! [scenario]
//! name = "touching_caps"
//! alpha = 0.05
//! r0_fractions = [0.1666, 0.0833]
//!
//! [run]
//! seed = 7
//! level = 2
//!
//! [lambda]
//! 0 = 2.0
//!
//! [tolerances]
//! stationarity = 1e-5
//!
//! [output]
//! json = "report.json"
//! csv = "report.csv"
//! ```
//!
//! Missing keys take the scenario's documented defaults. Unknown keys are
//! rejected by name. Relative output paths resolve against the directory of
//! the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use capillary_core::energy::ComponentId;
use capillary_core::quadrature::Resolution;
use capillary_core::scenarios::{Check, Scenario, ScenarioKind, Tolerances};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub level: u32,
    pub order: usize,
    /// Base step of the difference-quotient sequences.
    pub t_step: Option<f64>,
    /// Subset of check ids to run; all declared checks when empty.
    pub checks: Vec<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        let r = Resolution::default();
        Self {
            seed: 0,
            level: r.level,
            order: r.order,
            t_step: None,
            checks: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// Validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub run: RunSection,
    /// Multiplier overrides per component.
    pub lambda: BTreeMap<ComponentId, f64>,
    pub tolerances: Tolerances,
    /// Not echoed into reports, so that reports do not depend on where
    /// they are written.
    #[serde(skip)]
    pub output: OutputSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: toml::Table,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    lambda: BTreeMap<String, f64>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    output: OutputSection,
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| anyhow!("invalid config: {e}"))?;
    let scenario = scenario_from_table(raw.scenario)?;

    let mut lambda = BTreeMap::new();
    for (k, v) in raw.lambda {
        let c: ComponentId = k
            .parse()
            .map_err(|_| anyhow!("[lambda]: key `{k}` is not a component index"))?;
        if !v.is_finite() {
            bail!("[lambda]: multiplier of component {c} must be finite");
        }
        lambda.insert(c, v);
    }

    let run = raw.run;
    if run.order == 0 {
        bail!("[run]: order must be positive");
    }
    if let Some(h) = run.t_step {
        if !(h > 0.0 && h.is_finite()) {
            bail!("[run]: t_step must be positive, got {h}");
        }
    }
    for id in &run.checks {
        if !CHECK_IDS.contains(&id.as_str()) {
            bail!(
                "[run]: unknown check `{id}`; known: {}",
                CHECK_IDS.join(", ")
            );
        }
    }
    validate_tolerances(&raw.tolerances)?;

    Ok(RunConfig {
        scenario,
        run,
        lambda,
        tolerances: raw.tolerances,
        output: raw.output,
    })
}

/// Reads a config file and resolves its output paths against its directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut cfg.output.json, &mut cfg.output.csv]
        .into_iter()
        .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

const CHECK_IDS: [&str; 12] = [
    "closed_form",
    "stationarity",
    "stability",
    "sphere_harmonics",
    "fd_oracle",
    "breakup",
    "coalescence",
    "mean_curvature_constancy",
    "curvature_supremum",
    "wedge_angles",
    "joint_constraint_control",
    "volume_drift",
];

fn scenario_from_table(mut user: toml::Table) -> Result<ScenarioKind> {
    let name = match user.remove("name") {
        Some(toml::Value::String(s)) => s,
        Some(_) => bail!("[scenario]: `name` must be a string"),
        None => bail!("[scenario]: missing `name`"),
    };
    let default = ScenarioKind::default_for(&name)?;
    let mut table = toml::Table::try_from(&default).context("serialising scenario defaults")?;
    for (k, v) in user {
        if k == "scenario" || !table.contains_key(&k) {
            let known: Vec<&str> = table
                .keys()
                .map(String::as_str)
                .filter(|k| *k != "scenario")
                .collect();
            bail!(
                "[scenario]: unknown key `{k}` for `{name}`; known: {}",
                known.join(", ")
            );
        }
        table.insert(k, v);
    }
    let kind: ScenarioKind = table.try_into().map_err(|e| anyhow!("[scenario]: {e}"))?;
    kind.validate()?;
    Ok(kind)
}

fn validate_tolerances(t: &Tolerances) -> Result<()> {
    let all = [
        ("closed_form", t.closed_form),
        ("multiplier", t.multiplier),
        ("stationarity", t.stationarity),
        ("stability", t.stability),
        ("fd_relative", t.fd_relative),
        ("fd_order", t.fd_order),
        ("breakup_fd", t.breakup_fd),
        ("breakup_prediction", t.breakup_prediction),
        ("boundary", t.boundary),
        ("first_variation", t.first_variation),
        ("curvature_constancy", t.curvature_constancy),
        ("volume_drift", t.volume_drift),
    ];
    for (k, v) in all {
        if !(v > 0.0 && v.is_finite()) {
            bail!("[tolerances]: `{k}` must be positive, got {v}");
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn resolution(&self) -> Resolution {
        Resolution::with_order(self.run.level, self.run.order)
    }

    /// Builds the scenario with overrides applied and checks filtered.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::build(&self.scenario)?.with_tolerances(self.tolerances.clone());
        if let Some(h) = self.run.t_step {
            s = s.with_t_step(h);
        }
        for (c, l) in &self.lambda {
            if !s.lambda.contains_key(c) {
                bail!(
                    "[lambda]: scenario `{}` has no component {c}",
                    self.scenario.name()
                );
            }
            s = s.with_lambda(*c, *l);
        }
        if !self.run.checks.is_empty() {
            let keep = |c: &Check| self.run.checks.iter().any(|id| id == c.id());
            s.checks.retain(keep);
            if s.checks.is_empty() {
                bail!(
                    "[run]: none of the selected checks is declared by `{}`",
                    self.scenario.name()
                );
            }
        }
        Ok(s)
    }
}
