use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use capillary_cli::config::parse_config;
use capillary_cli::report::{load_report, parse_report, CSV_HEADER};
use capillary_cli::{sweep, SweepParam, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_PASS};
use capillary_core::scenarios::{CapShape, ScenarioKind};
use tempfile::TempDir;

fn capillary(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capillary"))
        .args(args)
        .output()
        .expect("spawn capillary")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SPHERE_QUICK: &str = r#"
[scenario]
name = "sphere"

[run]
seed = 3
checks = ["closed_form", "stationarity"]

[output]
json = "report.json"
csv = "report.csv"
"#;

#[test]
fn passing_run_exits_zero_and_writes_consistent_reports() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sphere.toml", SPHERE_QUICK);
    let out = capillary(&["run", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_PASS),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report = load_report(&dir.path().join("report.json")).unwrap();
    assert!(report.all_pass());
    assert_eq!(report.run_config_echo["run"]["seed"], 3);
    assert_eq!(report.run_config_echo["scenario"]["radius"], 1.0);
    assert!(report
        .records
        .iter()
        .any(|r| r.check_id == "sphere/stationarity/lambda/0"));

    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), report.records.len());
}

#[test]
fn wrong_multiplier_exits_one() {
    let dir = TempDir::new().unwrap();
    let text = SPHERE_QUICK.replace("[output]", "[lambda]\n0 = 1.0\n\n[output]");
    let cfg = write_config(dir.path(), "wrong.toml", &text);
    let out = capillary(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_CHECK_FAILED));

    let report = load_report(&dir.path().join("report.json")).unwrap();
    let defect = report
        .records
        .iter()
        .find(|r| r.check_id.ends_with("first_variation_defect"))
        .unwrap();
    assert!(!defect.pass);
    assert!(defect.measured > 0.1, "defect {}", defect.measured);
}

#[test]
fn unwritable_output_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sphere.toml", SPHERE_QUICK);
    let bad = dir.path().join("missing").join("report.json");
    let out = capillary(&[
        "run",
        cfg.to_str().unwrap(),
        "--json",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[scenario]\nname = \"sphere\"\nfoo = 1\n",
    );
    let out = capillary(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));

    let out = capillary(&["run", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sphere.toml", SPHERE_QUICK);
    let mut files = Vec::new();
    for k in 0..2 {
        let json = dir.path().join(format!("r{k}.json"));
        let csv = dir.path().join(format!("r{k}.csv"));
        let out = capillary(&[
            "run",
            cfg.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(EXIT_PASS));
        files.push((std::fs::read(json).unwrap(), std::fs::read(csv).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn touching_caps_run_has_total_below_minus_three_pi_at_smallest_r0() {
    let dir = TempDir::new().unwrap();
    let text = "[scenario]\nname = \"touching_caps\"\n\n[run]\nchecks = [\"coalescence\"]\n\n[output]\ncsv = \"caps.csv\"\n";
    let cfg = write_config(dir.path(), "caps.toml", text);
    let out = capillary(&["run", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_PASS),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );

    let mut reader = csv::Reader::from_path(dir.path().join("caps.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let totals: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[1].ends_with("/second_variation_total"))
        .map(|r| (r[3].parse().unwrap(), r[4].parse().unwrap()))
        .collect();
    assert_eq!(totals.len(), 4);
    let (_, smallest) =
        totals
            .iter()
            .copied()
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    assert!(smallest < -3.0 * PI, "total {smallest}");
}

#[test]
fn list_scenarios_names_every_family() {
    let out = capillary(&["list-scenarios"]);
    assert_eq!(out.status.code(), Some(EXIT_PASS));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in capillary_core::scenarios::SCENARIO_NAMES {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn minimal_touching_caps_config_fills_defaults() {
    let cfg = parse_config("[scenario]\nname = \"touching_caps\"\n").unwrap();
    let ScenarioKind::TouchingCaps {
        alpha,
        r_window,
        shape,
        r0_fractions,
    } = &cfg.scenario
    else {
        panic!("wrong kind");
    };
    assert_eq!(*r_window, 1.0);
    assert_eq!(*alpha, 0.05);
    assert_eq!(*shape, CapShape::Sphere);
    assert_eq!(
        r0_fractions,
        &vec![1.0 / 6.0, 1.0 / 12.0, 1.0 / 24.0, 1.0 / 48.0]
    );
    assert_eq!(cfg.run.seed, 0);
    assert_eq!(cfg.run.level, 2);
}

#[test]
fn negative_r0_is_rejected() {
    let err = parse_config("[scenario]\nname = \"touching_caps\"\nr0_fractions = [0.1, -0.05]\n")
        .unwrap_err();
    assert!(format!("{err:#}").contains("R0"));
}

#[test]
fn unknown_keys_are_named() {
    for (text, key) in [
        ("[scenario]\nname = \"sphere\"\nfoo = 1\n", "foo"),
        ("[scenario]\nname = \"sphere\"\n[run]\nfoo = 1\n", "foo"),
        ("[scenario]\nname = \"sphere\"\n[extra]\nx = 1\n", "extra"),
        (
            "[scenario]\nname = \"sphere\"\n[tolerances]\nbogus = 1.0\n",
            "bogus",
        ),
    ] {
        let err = format!("{:#}", parse_config(text).unwrap_err());
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn syntax_errors_report_the_line() {
    let err = format!(
        "{:#}",
        parse_config("[scenario]\nname = \"sphere\"\nradius = \n").unwrap_err()
    );
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn invalid_values_are_rejected() {
    for text in [
        "[scenario]\nname = \"nothing\"\n",
        "[scenario]\nname = \"sphere\"\nradius = -1.0\n",
        "[scenario]\nname = \"sphere\"\n[run]\norder = 0\n",
        "[scenario]\nname = \"sphere\"\n[run]\nt_step = 0.0\n",
        "[scenario]\nname = \"sphere\"\n[run]\nchecks = [\"nope\"]\n",
        "[scenario]\nname = \"sphere\"\n[tolerances]\nstationarity = -1.0\n",
        "[scenario]\nname = \"sphere\"\n[lambda]\nx = 1.0\n",
        "[run]\nseed = 1\n",
    ] {
        assert!(parse_config(text).is_err(), "{text}");
    }
}

#[test]
fn lambda_for_missing_component_fails_when_building() {
    let cfg = parse_config("[scenario]\nname = \"sphere\"\n[lambda]\n4 = 1.0\n").unwrap();
    assert!(cfg.scenario().is_err());
}

#[test]
fn inconsistent_records_are_rejected_on_load() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sphere.toml", SPHERE_QUICK);
    assert_eq!(
        capillary(&["run", cfg.to_str().unwrap()]).status.code(),
        Some(EXIT_PASS)
    );
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(parse_report(&text).is_ok());
    let tampered = text.replacen("\"pass\": true", "\"pass\": false", 1);
    assert!(parse_report(&tampered).is_err());
}

#[test]
fn sweeps_need_three_values() {
    let cfg =
        parse_config("[scenario]\nname = \"sphere\"\n[run]\nchecks = [\"closed_form\"]\n").unwrap();
    assert!(sweep(&cfg, SweepParam::Resolution, &[0.0, 1.0]).is_err());

    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), "s.toml", "[scenario]\nname = \"sphere\"\n");
    let out = capillary(&[
        "sweep",
        path.to_str().unwrap(),
        "--param",
        "resolution",
        "--values",
        "1,2",
    ]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
}

#[test]
fn r0_sweep_volume_rate_decreases() {
    let cfg = parse_config(
        "[scenario]\nname = \"touching_caps\"\n[run]\nlevel = 1\nchecks = [\"coalescence\"]\n",
    )
    .unwrap();
    let table = sweep(&cfg, SweepParam::R0, &[0.2, 0.1, 0.05]).unwrap();
    let rates = &table
        .row("touching_caps/coalescence/volume_rate")
        .unwrap()
        .measured;
    assert!(
        rates.windows(2).all(|w| w[1].abs() < w[0].abs()),
        "{rates:?}"
    );
    let totals = &table
        .row("touching_caps/coalescence/second_variation_total")
        .unwrap()
        .measured;
    assert!(totals.windows(2).all(|w| w[1] < w[0]), "{totals:?}");
    // |V'(0)| scales like R0^3 on the caps.
    let order = table
        .row("touching_caps/coalescence/volume_rate")
        .unwrap()
        .rates[2]
        .unwrap();
    assert!((order - 3.0).abs() < 0.1, "order {order}");
}

#[test]
fn sweep_cli_writes_a_versioned_table() {
    let dir = TempDir::new().unwrap();
    let path = write_config(
        dir.path(),
        "s.toml",
        "[scenario]\nname = \"sphere\"\n[run]\nchecks = [\"closed_form\"]\n",
    );
    let csv = dir.path().join("sweep.csv");
    let out = capillary(&[
        "sweep",
        path.to_str().unwrap(),
        "--param",
        "resolution",
        "--values",
        "0,1,2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_PASS),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("schema,check_id,param,value,measured,rate\n"));
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.starts_with("capillary-sweep/1,")));
    assert_eq!(text.lines().count(), 1 + 4 * 3);
}

#[test]
fn t_step_sweep_of_fd_first_variation_converges() {
    let cfg =
        parse_config("[scenario]\nname = \"cylinder\"\n[run]\nchecks = [\"fd_oracle\"]\n").unwrap();
    let table = sweep(&cfg, SweepParam::TStep, &[0.1, 0.05, 0.025]).unwrap();
    let first = table
        .rows
        .iter()
        .find(|r| r.check_id.ends_with("/first"))
        .unwrap();
    let spread = first
        .measured
        .iter()
        .fold(0f64, |m, v| m.max((v - first.measured[2]).abs()));
    assert!(
        spread <= 1e-4 * first.measured[2].abs().max(1.0),
        "{:?}",
        first.measured
    );
}
