// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration: a TOML document with explicit unit strings,
//! layered as preset, then file, then command-line overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    TwoIonSingle,
    TwoIonComposite,
    ThreeIonW,
    DressedScan,
    TomographyDemo,
    Sweep,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::TwoIonSingle => "two_ion_single",
            Scenario::TwoIonComposite => "two_ion_composite",
            Scenario::ThreeIonW => "three_ion_w",
            Scenario::DressedScan => "dressed_scan",
            Scenario::TomographyDemo => "tomography_demo",
            Scenario::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    OmegaRatio,
    T1,
    NBar,
    Gamma,
}

/// A number, or a number with a unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Cyclic frequency, converted to rad/s.
    Frequency,
    /// Seconds.
    Time,
    /// Events per second, no factor 2π.
    Rate,
    Dimensionless,
}

impl Quantity {
    /// Value in base units. Dimensionful quantities must carry a unit.
    pub fn resolve(&self, key: &str, dim: Dimension) -> Result<f64, CliError> {
        let bad = |msg: String| CliError::Config(format!("{key}: {msg}"));
        let (value, unit) = match self {
            Quantity::Number(v) => (*v, ""),
            Quantity::Text(s) => {
                let s = s.trim();
                let split = s
                    .find(|ch: char| !(ch.is_ascii_digit() || "+-.eE".contains(ch)))
                    .unwrap_or(s.len());
                let (num, unit) = s.split_at(split);
                let v: f64 = num
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("cannot read a number from {s:?}")))?;
                (v, unit.trim())
            }
        };
        if !value.is_finite() {
            return Err(bad(format!("value {value} is not finite")));
        }
        let scale = match (dim, unit) {
            (Dimension::Dimensionless, "") => 1.0,
            (Dimension::Frequency, "Hz") => std::f64::consts::TAU,
            (Dimension::Frequency, "kHz") => std::f64::consts::TAU * 1e3,
            (Dimension::Frequency, "MHz") => std::f64::consts::TAU * 1e6,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Time, "us") => 1e-6,
            (Dimension::Rate, "/s") => 1.0,
            (Dimension::Rate, "/ms") => 1e3,
            (_, "") => return Err(bad(format!("{value} needs a unit ({})", dim.units()))),
            (_, u) => return Err(bad(format!("unit {u:?} not allowed here ({})", dim.units()))),
        };
        Ok(value * scale)
    }
}

impl Dimension {
    fn units(self) -> &'static str {
        match self {
            Dimension::Frequency => "Hz, kHz or MHz",
            Dimension::Time => "s, ms or us",
            Dimension::Rate => "/s or /ms",
            Dimension::Dimensionless => "no unit",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub omega_s: Option<Quantity>,
    pub omega_d: Option<Quantity>,
    pub delta: Option<Quantity>,
    pub m: Option<u32>,
    pub t1: Option<Quantity>,
    pub t2: Option<Quantity>,
    /// Parameters handed to the fine tuner: `omega_d`, `delta`, `t1`, `t2`.
    pub fine_tune: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// `none` or `experimental`.
    pub preset: Option<String>,
    pub gamma_du: Option<Quantity>,
    pub gamma_ud: Option<Quantity>,
    pub gamma_ou: Option<Quantity>,
    pub gamma_od: Option<Quantity>,
    pub gamma_heat: Option<Quantity>,
    pub n_bar: Option<f64>,
    pub stark_shifts: Option<Vec<Quantity>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: Option<f64>,
    pub n_samples: Option<usize>,
    pub n_fock: Option<usize>,
    /// `end` or `peak`.
    pub merit: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub delta_from: Option<Quantity>,
    pub delta_to: Option<Quantity>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `single` or `composite`.
    pub scheme: Option<String>,
    pub axis: Option<SweepAxis>,
    pub from: Option<Quantity>,
    pub to: Option<Quantity>,
    pub points: Option<usize>,
    pub axis2: Option<SweepAxis>,
    pub from2: Option<Quantity>,
    pub to2: Option<Quantity>,
    pub points2: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    pub enabled: Option<bool>,
    /// `T` or `W`.
    pub target: Option<String>,
    /// White-noise weight mixed into the target for the demo state.
    pub depolarize: Option<f64>,
    pub reference_shots: Option<usize>,
    pub identity_shots: Option<usize>,
    pub analysis_shots: Option<usize>,
    pub n_bins: Option<usize>,
    pub resamples: Option<usize>,
}

/// Every key optional, so presets, files and overrides each validate on
/// their own.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub tomography: TomographySection,
}

pub const PRESETS: [&str; 5] = ["fig2", "fig3", "fig_s4", "fig_s6a", "three_ion"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2" => {
            r#"
scenario = "two_ion_single"
[pulse]
omega_s = "17.6 kHz"
omega_d = "1.52 kHz"
delta = "27.1 kHz"
[noise]
preset = "experimental"
[run]
horizon = 1.5
merit = "peak"
"#
        }
        "fig3" => {
            r#"
scenario = "two_ion_composite"
[pulse]
omega_s = "17.3 kHz"
omega_d = "2.55 kHz"
delta = "26.8 kHz"
t1 = "25.4 us"
t2 = "47.3 us"
[noise]
preset = "experimental"
[run]
horizon = 1.5
merit = "peak"
"#
        }
        "fig_s4" => {
            r#"
scenario = "dressed_scan"
[pulse]
omega_s = "17.6 kHz"
omega_d = "1.52 kHz"
[scan]
delta_from = "-60 kHz"
delta_to = "60 kHz"
points = 601
"#
        }
        "fig_s6a" => {
            r#"
scenario = "sweep"
[pulse]
omega_s = "17.6 kHz"
[noise]
preset = "none"
[sweep]
scheme = "single"
axis = "omega_ratio"
from = 2.0
to = 14.0
points = 121
"#
        }
        "three_ion" => {
            r#"
scenario = "three_ion_w"
[pulse]
omega_s = "19.0 kHz"
omega_d = "1.24 kHz"
delta = "0 kHz"
[noise]
preset = "experimental"
[run]
horizon = 1.5
merit = "peak"
"#
        }
        _ => return None,
    })
}

/// Recursive merge; tables merge key by key, everything else is replaced.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn override_value(value: &str) -> Value {
    let doc = format!("v = {value}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => Value::String(value.trim().to_string()),
    }
}

/// Applies `a.b.c=value`.
fn apply_override(table: &mut Table, spec: &str) -> Result<(), CliError> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} is malformed")));
    }
    let (last, parents) = path.split_last().expect("non-empty");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {p} is not a section")))?;
    }
    cur.insert(last.to_string(), override_value(value));
    Ok(())
}

fn parse_layer(text: &str, origin: &str) -> Result<Table, CliError> {
    // Parse into the typed form first: its errors carry line and column.
    toml::from_str::<RawConfig>(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    text.parse::<Table>().map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// Resolves `preset → file → overrides` into one raw configuration. The
/// `preset` argument takes precedence over a `preset` key in the file.
pub fn load(file_text: &str, origin: &str, preset: Option<&str>, overrides: &[String]) -> Result<RawConfig, CliError> {
    let file = parse_layer(file_text, origin)?;
    let name = preset
        .map(str::to_string)
        .or_else(|| file.get("preset").and_then(Value::as_str).map(str::to_string));
    let mut table = match &name {
        Some(n) => {
            let text = preset_text(n)
                .ok_or_else(|| CliError::Config(format!("unknown preset {n:?}; known: {}", PRESETS.join(", "))))?;
            parse_layer(text, &format!("preset {n}"))?
        }
        None => Table::new(),
    };
    merge(&mut table, file);
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    if let Some(n) = name {
        table.insert("preset".into(), Value::String(n));
    }
    table
        .try_into::<RawConfig>()
        .map_err(|e| CliError::Config(format!("after overrides: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_convert_to_base() {
        let q = Quantity::Text("17.6 kHz".into());
        assert!((q.resolve("x", Dimension::Frequency).unwrap() - std::f64::consts::TAU * 17.6e3).abs() < 1e-9);
        let t = Quantity::Text("25.4us".into());
        assert!((t.resolve("t", Dimension::Time).unwrap() - 25.4e-6).abs() < 1e-18);
        assert_eq!(Quantity::Text("1.5e2 /s".into()).resolve("g", Dimension::Rate).unwrap(), 150.0);
        assert_eq!(Quantity::Number(3.0).resolve("r", Dimension::Dimensionless).unwrap(), 3.0);
    }

    #[test]
    fn missing_or_wrong_units_fail() {
        assert!(Quantity::Number(17.6).resolve("x", Dimension::Frequency).is_err());
        assert!(Quantity::Text("17.6 us".into()).resolve("x", Dimension::Frequency).is_err());
        assert!(Quantity::Text("kHz".into()).resolve("x", Dimension::Frequency).is_err());
    }

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            let c = load("", "file", Some(p), &[]).unwrap();
            assert!(c.scenario.is_some(), "{p}");
        }
        assert!(load("", "file", Some("fig9"), &[]).is_err());
    }

    #[test]
    fn layers_merge_in_order() {
        let file = "preset = \"fig2\"\n[pulse]\nomega_d = \"1.6 kHz\"\n";
        let c = load(file, "file", None, &["pulse.delta=30 kHz".into(), "run.horizon=2.0".into()]).unwrap();
        assert_eq!(c.pulse.omega_s, Some(Quantity::Text("17.6 kHz".into())));
        assert_eq!(c.pulse.omega_d, Some(Quantity::Text("1.6 kHz".into())));
        assert_eq!(c.pulse.delta, Some(Quantity::Text("30 kHz".into())));
        assert_eq!(c.run.horizon, Some(2.0));
    }

    #[test]
    fn unknown_keys_report_position() {
        let err = load("scenario = \"sweep\"\n[pulse]\nomega_z = \"1 kHz\"\n", "cfg.toml", None, &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("omega_z"), "{msg}");
        assert!(load("", "f", None, &["pulse.bogus=1".into()]).is_err());
    }
}
