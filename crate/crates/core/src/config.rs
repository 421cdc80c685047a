//! TOML habitat configuration.
//!
//! ```toml
//! [kernel]
//! shape = "uniform"        # uniform | triangle | cosine-bump
//! radius = 1.0
//!
//! [periods]
//! T = 1.0
//! p = 1.0
//!
//! [coefficients]          # expressions in t, x, T, p and [params] names
//! a1 = "2 + eps*cos(2*pi*x/p)"
//! b1 = "1"
//! c1 = "0.5"
//! a2 = "1"
//! b2 = "1"
//! c2 = "1"
//!
//! [params]
//! eps = 0.3
//!
//! [grid]                  # optional, defaults shown
//! nx = 32                 # nodes per spatial period
//! nt = 64                 # steps per time period (raised if the stability cap needs it)
//! check_nt = 64           # hypothesis sampling grid
//! check_nx = 64
//!
//! [run]                   # optional, defaults shown
//! half_length = 300.0     # line half-length, rounded up to a multiple of p
//! periods = 200           # front run length in time periods
//! delta = 0.1
//! s0 = -150.0             # default -half_length/2
//! stride = 1              # snapshot every `stride` periods
//! csv_x_stride = 32
//! tol_orbit = 1e-8
//! max_periods = 100000
//! seed = 1
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::habitat::{HabitatError, HabitatSpec, KernelShape, KernelSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kernel: RawKernel,
    periods: RawPeriods,
    coefficients: RawCoefficients,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    grid: GridSettings,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    shape: String,
    radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPeriods {
    #[serde(rename = "T")]
    t: f64,
    p: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NumOrText {
    Num(f64),
    Text(String),
}

impl NumOrText {
    fn text(&self) -> String {
        match self {
            NumOrText::Num(v) => format!("{v}"),
            NumOrText::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    a1: NumOrText,
    b1: NumOrText,
    c1: NumOrText,
    a2: NumOrText,
    b2: NumOrText,
    c2: NumOrText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    pub nx: usize,
    pub nt: usize,
    pub check_nt: usize,
    pub check_nx: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            nx: 32,
            nt: 64,
            check_nt: 64,
            check_nx: 64,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    half_length: f64,
    periods: usize,
    delta: f64,
    s0: Option<f64>,
    stride: usize,
    csv_x_stride: usize,
    tol_orbit: f64,
    max_periods: usize,
    seed: u64,
}

impl Default for RawRun {
    fn default() -> Self {
        RawRun {
            half_length: 300.0,
            periods: 200,
            delta: 0.1,
            s0: None,
            stride: 1,
            csv_x_stride: 32,
            tol_orbit: 1e-8,
            max_periods: 100_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub half_length: f64,
    pub periods: usize,
    pub delta: f64,
    pub s0: f64,
    pub stride: usize,
    pub csv_x_stride: usize,
    pub tol_orbit: f64,
    pub max_periods: usize,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        let r = RawRun::default();
        RunSettings {
            half_length: r.half_length,
            periods: r.periods,
            delta: r.delta,
            s0: -r.half_length / 2.0,
            stride: r.stride,
            csv_x_stride: r.csv_x_stride,
            tol_orbit: r.tol_orbit,
            max_periods: r.max_periods,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub habitat: HabitatSpec,
    pub grid: GridSettings,
    pub run: RunSettings,
}

fn cfg_err(msg: impl Into<String>) -> HabitatError {
    HabitatError::Config(msg.into())
}

pub fn parse_config(text: &str) -> Result<Config, HabitatError> {
    parse_config_with(text, &[])
}

/// Parse with `section.key=value` overrides applied on top of the file.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<Config, HabitatError> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
    for ov in overrides {
        apply_override(&mut doc, ov)?;
    }
    let raw: RawConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
    build(raw)
}

fn apply_override(doc: &mut toml::Table, ov: &str) -> Result<(), HabitatError> {
    let (path, value) = ov
        .split_once('=')
        .ok_or_else(|| cfg_err(format!("override `{ov}` is not of the form section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| cfg_err(format!("override key `{path}` needs a section, e.g. run.periods")))?;
    let value = value.trim();
    let parsed = if section == "coefficients" || section == "kernel" && key == "shape" {
        toml::Value::String(value.to_string())
    } else {
        format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()))
    };
    let entry = doc
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), parsed);
            Ok(())
        }
        _ => Err(cfg_err(format!("`{section}` is not a section"))),
    }
}

fn build(raw: RawConfig) -> Result<Config, HabitatError> {
    let shape = KernelShape::parse(&raw.kernel.shape).ok_or_else(|| {
        cfg_err(format!(
            "unknown kernel shape `{}` (expected uniform, triangle or cosine-bump)",
            raw.kernel.shape
        ))
    })?;
    if !(raw.kernel.radius > 0.0 && raw.kernel.radius.is_finite()) {
        return Err(cfg_err("kernel radius must be positive"));
    }
    let g = raw.grid;
    if g.nx < 16 {
        return Err(cfg_err("grid.nx must be at least 16"));
    }
    if g.nt < 1 || g.check_nt < 8 || g.check_nx < 8 {
        return Err(cfg_err("grid.nt must be positive and check_nt, check_nx at least 8"));
    }
    let c = &raw.coefficients;
    let srcs = [&c.a1, &c.b1, &c.c1, &c.a2, &c.b2, &c.c2].map(|v| v.text());
    let refs: [&str; 6] = std::array::from_fn(|i| srcs[i].as_str());
    let habitat = HabitatSpec::new(
        refs,
        raw.periods.t,
        raw.periods.p,
        KernelSpec::new(shape, raw.kernel.radius),
        raw.params,
        (g.check_nt, g.check_nx),
    )?;
    let r = raw.run;
    if !(r.half_length > 0.0) {
        return Err(cfg_err("run.half_length must be positive"));
    }
    if !(r.delta > 0.0 && r.delta < 1.0) {
        return Err(cfg_err("run.delta must lie in (0, 1)"));
    }
    if r.periods == 0 || r.stride == 0 || r.csv_x_stride == 0 {
        return Err(cfg_err("run.periods, run.stride and run.csv_x_stride must be positive"));
    }
    let p = habitat.period_x;
    let half_length = (r.half_length / p).ceil() * p;
    let run = RunSettings {
        half_length,
        periods: r.periods,
        delta: r.delta,
        s0: r.s0.unwrap_or(-half_length / 2.0),
        stride: r.stride,
        csv_x_stride: r.csv_x_stride,
        tol_orbit: r.tol_orbit,
        max_periods: r.max_periods,
        seed: r.seed,
    };
    Ok(Config {
        habitat,
        grid: g,
        run,
    })
}
