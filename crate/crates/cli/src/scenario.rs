//! Versioned scenario documents and their expansion into parameter grids.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use heralded_core::params::{bose_occupation, PhysicalSetup};
use heralded_core::{DetectorModel, DimensionlessParams, FilterShape, FilterSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// A configuration document: one or more scenarios sharing a schema version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub schema_version: u32,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Lossless pulsed two-mode squeezing, Fock route for the heralded state.
    Pulsed,
    /// Pulsed protocol with mechanical damping into a thermal bath.
    PulsedThermal,
    /// Continuous drive with a filtered stationary output mode.
    Cw,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Pulsed => "pulsed",
            ProtocolKind::PulsedThermal => "pulsed_thermal",
            ProtocolKind::Cw => "cw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutputKind {
    #[serde(rename = "E_N")]
    LogNegativity,
    #[serde(rename = "p_click")]
    PClick,
    #[serde(rename = "N_W")]
    WignerNegativity,
    #[serde(rename = "wigner_grid")]
    WignerGrid,
    #[serde(rename = "regime_report")]
    RegimeReport,
}

impl OutputKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            OutputKind::LogNegativity => "E_N",
            OutputKind::PClick => "p_click",
            OutputKind::WignerNegativity => "N_W",
            OutputKind::WignerGrid => "wigner_grid",
            OutputKind::RegimeReport => "regime_report",
        }
    }

    fn needs_detector(self) -> bool {
        matches!(
            self,
            OutputKind::PClick | OutputKind::WignerNegativity | OutputKind::WignerGrid
        )
    }
}

/// Base parameter values; every field can be swept by an axis of the same name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseParams {
    /// κ/Ω.
    pub kappa: f64,
    /// g/Ω.
    pub g: f64,
    /// Γ/Ω.
    #[serde(default)]
    pub gamma: f64,
    /// Δ/Ω.
    pub delta: f64,
    /// Bath occupation; mutually exclusive with `temperature`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    /// Bath temperature in kelvin, converted with `mech_freq`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Mechanical angular frequency in rad/s used for temperature conversion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mech_freq: Option<f64>,
    /// Initial mechanical occupation; defaults to the bath occupation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    /// Pulse duration Ωτ (pulsed protocols).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Tau,
    N0,
    G,
    Kappa,
    Gamma,
    Delta,
    Nbar,
    Temperature,
    Eta,
    Dark,
    Nu,
    TauM,
    GammaF,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Tau => "tau",
            AxisName::N0 => "n0",
            AxisName::G => "g",
            AxisName::Kappa => "kappa",
            AxisName::Gamma => "gamma",
            AxisName::Delta => "delta",
            AxisName::Nbar => "nbar",
            AxisName::Temperature => "temperature",
            AxisName::Eta => "eta",
            AxisName::Dark => "dark",
            AxisName::Nu => "nu",
            AxisName::TauM => "tau_m",
            AxisName::GammaF => "gamma_f",
        }
    }

    fn allowed_for(self, protocol: ProtocolKind) -> bool {
        use AxisName::*;
        match protocol {
            ProtocolKind::Pulsed => matches!(self, Tau | N0 | G | Kappa | Eta | Dark),
            ProtocolKind::PulsedThermal => {
                matches!(
                    self,
                    Tau | N0 | G | Kappa | Gamma | Nbar | Temperature | Eta | Dark
                )
            }
            ProtocolKind::Cw => matches!(
                self,
                G | Kappa | Gamma | Delta | Nbar | Temperature | Eta | Dark | Nu | TauM | GammaF
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// One sweep axis: either `start`/`stop`/`count`/`scale` or explicit `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Axis {
    /// Grid values along the axis.
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let name = self.name.as_str();
        if let Some(values) = &self.values {
            if self.start.is_some() || self.stop.is_some() || self.count.is_some() {
                return Err(format!(
                    "axis `{name}`: give either `values` or `start`/`stop`/`count`"
                ));
            }
            if values.is_empty() {
                return Err(format!("axis `{name}`: `values` must not be empty"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(format!("axis `{name}`: values must be finite"));
            }
            return Ok(values.clone());
        }
        let count = self
            .count
            .ok_or_else(|| format!("axis `{name}`: missing `count`"))?;
        let start = self
            .start
            .ok_or_else(|| format!("axis `{name}`: missing `start`"))?;
        if count == 0 {
            return Err(format!("axis `{name}`: `count` must be at least 1"));
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        let stop = self
            .stop
            .ok_or_else(|| format!("axis `{name}`: missing `stop`"))?;
        if !(start.is_finite() && stop.is_finite()) {
            return Err(format!("axis `{name}`: bounds must be finite"));
        }
        let last = (count - 1) as f64;
        match self.scale {
            Scale::Linear => Ok((0..count)
                .map(|i| {
                    if i == count - 1 {
                        stop
                    } else {
                        start + (stop - start) * i as f64 / last
                    }
                })
                .collect()),
            Scale::Log => {
                if !(start > 0.0 && stop > 0.0) {
                    return Err(format!("axis `{name}`: log scale needs positive bounds"));
                }
                let (a, b) = (start.ln(), stop.ln());
                Ok((0..count)
                    .map(|i| match i {
                        0 => start,
                        i if i == count - 1 => stop,
                        i => (a + (b - a) * i as f64 / last).exp(),
                    })
                    .collect())
            }
        }
    }
}

/// Phase-space window of the exported Wigner grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerWindow {
    pub half_width: f64,
    pub points: usize,
}

impl Default for WignerWindow {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub protocol: ProtocolKind,
    pub params: BaseParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSpec>,
    #[serde(default)]
    pub axes: Vec<Axis>,
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub wigner: WignerWindow,
}

/// Fully specified inputs of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub params: DimensionlessParams,
    pub tau: Option<f64>,
    pub detector: Option<DetectorModel>,
    pub filter: Option<FilterSpec>,
}

/// The expanded sweep: axis values and points in row-major grid order (first
/// axis outermost).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<(AxisName, Vec<f64>)>,
    /// Axis coordinates of every point, aligned with `points`.
    pub coords: Vec<Vec<f64>>,
    pub points: Vec<Point>,
}

impl Scenario {
    /// Checks the schema-level invariants that serde cannot express.
    pub fn check(&self) -> Result<(), String> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(format!(
                "scenario name `{}` must be non-empty and use only letters, digits, `_` or `-`",
                self.name
            ));
        }
        if self.outputs.is_empty() {
            return Err("at least one output must be requested".into());
        }
        let unique: BTreeSet<_> = self.outputs.iter().collect();
        if unique.len() != self.outputs.len() {
            return Err("outputs must not repeat".into());
        }
        match (self.protocol, &self.filter) {
            (ProtocolKind::Cw, None) => return Err("protocol `cw` requires a `filter`".into()),
            (ProtocolKind::Pulsed | ProtocolKind::PulsedThermal, Some(_)) => {
                return Err(format!(
                    "protocol `{}` does not take a `filter`",
                    self.protocol
                ))
            }
            _ => {}
        }
        if self.detector.is_none() {
            if let Some(o) = self.outputs.iter().find(|o| o.needs_detector()) {
                return Err(format!("output `{}` requires a `detector`", o.file_stem()));
            }
        }
        if self.params.nbar.is_some() && self.params.temperature.is_some() {
            return Err("give either `params.nbar` or `params.temperature`, not both".into());
        }
        let mut seen = BTreeSet::new();
        for axis in &self.axes {
            if !seen.insert(axis.name) {
                return Err(format!("axis `{}` appears twice", axis.name.as_str()));
            }
            if !axis.name.allowed_for(self.protocol) {
                return Err(format!(
                    "axis `{}` is not a parameter of protocol `{}`",
                    axis.name.as_str(),
                    self.protocol
                ));
            }
            axis.values()?;
        }
        if seen.contains(&AxisName::Nbar) && seen.contains(&AxisName::Temperature) {
            return Err("axes `nbar` and `temperature` are mutually exclusive".into());
        }
        if let Some(f) = &self.filter {
            let rect = matches!(f.shape, FilterShape::RectWindow { .. });
            if seen.contains(&AxisName::TauM) && !rect {
                return Err("axis `tau_m` needs a `rect_window` filter".into());
            }
            if seen.contains(&AxisName::GammaF) && rect {
                return Err("axis `gamma_f` needs an `exponential` filter".into());
            }
        }
        if matches!(
            self.protocol,
            ProtocolKind::Pulsed | ProtocolKind::PulsedThermal
        ) && self.params.tau.is_none()
            && !seen.contains(&AxisName::Tau)
        {
            return Err("pulsed protocols need `params.tau` or a `tau` axis".into());
        }
        if !(self.wigner.half_width > 0.0 && self.wigner.half_width.is_finite())
            || self.wigner.points < 2
        {
            return Err("`wigner` needs a positive `half_width` and at least 2 `points`".into());
        }
        Ok(())
    }

    /// Expands the axes into the point list.
    pub fn grid(&self) -> Result<Grid, String> {
        self.check()?;
        let axes: Vec<(AxisName, Vec<f64>)> = self
            .axes
            .iter()
            .map(|a| a.values().map(|v| (a.name, v)))
            .collect::<Result<_, _>>()?;
        let total: usize = axes.iter().map(|(_, v)| v.len()).product();
        let mut coords = Vec::with_capacity(total);
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut c = vec![0.0; axes.len()];
            for (slot, (_, values)) in c.iter_mut().zip(&axes).rev() {
                *slot = values[rem % values.len()];
                rem /= values.len();
            }
            points.push(self.point(axes.iter().map(|(n, _)| *n).zip(c.iter().copied())));
            coords.push(c);
        }
        Ok(Grid {
            axes,
            coords,
            points,
        })
    }

    fn point(&self, assignments: impl Iterator<Item = (AxisName, f64)>) -> Point {
        let b = &self.params;
        let mut kappa = b.kappa;
        let mut g = b.g;
        let mut gamma = b.gamma;
        let mut delta = b.delta;
        let mut nbar = b.nbar;
        let mut temperature = b.temperature;
        let mut n0 = b.n0;
        let mut tau = b.tau;
        let mut detector = self.detector;
        let mut filter = self.filter;
        for (name, v) in assignments {
            match name {
                AxisName::Tau => tau = Some(v),
                AxisName::N0 => n0 = Some(v),
                AxisName::G => g = v,
                AxisName::Kappa => kappa = v,
                AxisName::Gamma => gamma = v,
                AxisName::Delta => delta = v,
                AxisName::Nbar => nbar = Some(v),
                AxisName::Temperature => temperature = Some(v),
                AxisName::Eta => detector.iter_mut().for_each(|d| d.eta = v),
                AxisName::Dark => detector.iter_mut().for_each(|d| d.dark = v),
                AxisName::Nu => filter.iter_mut().for_each(|f| f.nu = v),
                AxisName::TauM => filter
                    .iter_mut()
                    .for_each(|f| f.shape = FilterShape::RectWindow { tau_m: v }),
                AxisName::GammaF => filter
                    .iter_mut()
                    .for_each(|f| f.shape = FilterShape::Exponential { gamma_f: v }),
            }
        }
        let mech_freq = b
            .mech_freq
            .unwrap_or_else(|| PhysicalSetup::reference().mech_freq);
        let nbar = match temperature {
            Some(t) => bose_occupation(t, mech_freq),
            None => nbar.unwrap_or(0.0),
        };
        Point {
            params: DimensionlessParams {
                kappa,
                g,
                gamma,
                delta,
                nbar,
                n0: n0.unwrap_or(nbar),
            },
            tau,
            detector,
            filter,
        }
    }
}

impl ConfigDocument {
    /// Parses a document, reporting schema violations with their JSON path.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ConfigDocument = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.inner()))
        })?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "at `schema_version`: unsupported version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        if doc.scenarios.is_empty() {
            return Err(CliError::Config(
                "at `scenarios`: no scenarios defined".into(),
            ));
        }
        let mut names = BTreeSet::new();
        for (i, s) in doc.scenarios.iter().enumerate() {
            s.check()
                .map_err(|m| CliError::Config(format!("at `scenarios[{i}]` ({}): {m}", s.name)))?;
            if !names.insert(s.name.as_str()) {
                return Err(CliError::Config(format!(
                    "at `scenarios[{i}]`: duplicate name `{}`",
                    s.name
                )));
            }
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Keeps only the scenario called `name`.
    pub fn select(mut self, name: &str) -> Result<Self, CliError> {
        self.scenarios.retain(|s| s.name == name);
        if self.scenarios.is_empty() {
            return Err(CliError::Config(format!(
                "no scenario named `{name}` in the configuration"
            )));
        }
        Ok(self)
    }
}
