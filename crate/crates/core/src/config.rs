//! TOML run configuration.
//!
//! Physical quantities are plain numbers in units of the mechanical frequency
//! ω_m, or strings with an SI suffix (`"10 MHz"`, `"31.8 us"`, `"400 mK"`).
//! Hz-family suffixes denote cyclic frequencies f = ω/2π; `rad/s` denotes an
//! angular one. SI values need `omega_m` in the same section.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{
    Axis, Grid, LossSpec, OptimizeOptions, Scenario, Spacing, SweepSpec, ValidationOptions,
};
use crate::gaussian::FidelityForm;
use crate::model::{
    solve_steady_state, thermal_occupation, DriveMode, DriveParams, FeedbackScheme, FeedbackSpec,
    OpticalMode, SystemParams,
};
use crate::spectra::{FilterPair, FilterSpec, QuadratureConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error: {0}")]
    Syntax(String),

    #[error("`{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("`{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<crate::Error> for ConfigError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidParameter { field, reason } => {
                ConfigError::Invalid { field, reason }
            }
            other => ConfigError::invalid("system", other.to_string()),
        }
    }
}

/// A number in ω_m units or a string with a unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Value(f64),
    Text(String),
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Value(v)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Value(v) => write!(f, "{v}"),
            Quantity::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Rate or angular frequency, returned in units of ω_m.
    Rate,
    /// Time, returned in units of 1/ω_m.
    Time,
    /// Temperature, returned in kelvin.
    Temperature,
    /// ω_m itself, returned as a cyclic frequency in Hz.
    MechanicalFrequency,
}

fn split_unit(text: &str) -> (&str, &str) {
    let t = text.trim();
    let start = t
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_alphabetic() || *c == '/')
        .last()
        .map_or(t.len(), |(i, _)| i);
    (t[..start].trim(), &t[start..])
}

fn scale_of(unit: &str, kind: Kind) -> Option<f64> {
    let cyclic = |s: f64| Some(TAU * s);
    match kind {
        Kind::Rate => match unit {
            "Hz" => cyclic(1.0),
            "kHz" => cyclic(1e3),
            "MHz" => cyclic(1e6),
            "GHz" => cyclic(1e9),
            "rad/s" => Some(1.0),
            _ => None,
        },
        Kind::MechanicalFrequency => match unit {
            "Hz" => Some(1.0),
            "kHz" => Some(1e3),
            "MHz" => Some(1e6),
            "GHz" => Some(1e9),
            "rad/s" => Some(1.0 / TAU),
            _ => None,
        },
        Kind::Time => match unit {
            "s" => Some(1.0),
            "ms" => Some(1e-3),
            "us" | "µs" => Some(1e-6),
            "ns" => Some(1e-9),
            "ps" => Some(1e-12),
            _ => None,
        },
        Kind::Temperature => match unit {
            "K" => Some(1.0),
            "mK" => Some(1e-3),
            "uK" | "µK" => Some(1e-6),
            _ => None,
        },
    }
}

impl Quantity {
    /// Value in simulation units. `omega_m_hz` is the mechanical frequency
    /// f_m = ω_m/2π, needed only for SI rates and times.
    fn resolve(
        &self,
        field: &str,
        kind: Kind,
        omega_m_hz: Option<f64>,
    ) -> Result<f64, ConfigError> {
        let text = match self {
            Quantity::Value(v) => {
                return match kind {
                    Kind::Temperature => Err(ConfigError::invalid(
                        field,
                        "temperature needs a unit (K, mK, uK)",
                    )),
                    _ => Ok(*v),
                };
            }
            Quantity::Text(s) => s,
        };
        let (number, unit) = split_unit(text);
        let value: f64 = number.parse().map_err(|_| {
            ConfigError::invalid(field, format!("cannot read a number from `{text}`"))
        })?;
        if unit.is_empty() {
            return Quantity::Value(value).resolve(field, kind, omega_m_hz);
        }
        let scale = scale_of(unit, kind).ok_or_else(|| {
            ConfigError::invalid(field, format!("unit `{unit}` does not fit this quantity"))
        })?;
        let si = value * scale;
        match kind {
            Kind::Temperature | Kind::MechanicalFrequency => Ok(si),
            Kind::Rate | Kind::Time => {
                let f_m = omega_m_hz.ok_or_else(|| {
                    ConfigError::invalid(field, "SI units need `omega_m` in the same section")
                })?;
                Ok(if kind == Kind::Rate {
                    si / (TAU * f_m)
                } else {
                    si * TAU * f_m
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub kappa: Quantity,
    pub detuning: Quantity,
    pub coupling: Quantity,
}

/// Effective (linearized) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<Quantity>,
    pub gamma_m: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<Quantity>,
    pub mode_a: ModeSection,
    pub mode_b: ModeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_c: Option<ModeSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveModeSection {
    pub amplitude: Quantity,
    pub detuning: Quantity,
    pub coupling: Quantity,
    pub kappa: Quantity,
}

/// Bare drive parameters; the linearized ones follow from the classical
/// steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<Quantity>,
    pub gamma_m: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<Quantity>,
    pub modes: Vec<DriveModeSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackSection {
    pub scheme: FeedbackScheme,
    pub gain: f64,
    pub reflectivity: f64,
    pub efficiency: f64,
}

impl Default for FeedbackSection {
    fn default() -> Self {
        Self {
            scheme: FeedbackScheme::None,
            gain: 0.0,
            reflectivity: 0.0,
            efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub center: Quantity,
    pub tau: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersSection {
    pub a: FilterSection,
    pub b: FilterSection,
}

impl Default for FiltersSection {
    fn default() -> Self {
        let r = FilterPair::reference();
        let section = |f: FilterSpec| FilterSection {
            center: f.center.into(),
            tau: f.tau.into(),
        };
        Self {
            a: section(r.a),
            b: section(r.b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub fidelity_form: FidelityForm,
}

/// One sweep axis: either `start`/`stop`/`points` or explicit `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axes: Vec<AxisSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
    #[serde(default)]
    pub feedback: FeedbackSection,
    #[serde(default)]
    pub filters: FiltersSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSpec>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeOptions>,
    #[serde(default)]
    pub validate: ValidationOptions,
    #[serde(default)]
    pub output: OutputSection,
}

fn mechanical_frequency(
    section: &str,
    omega_m: &Option<Quantity>,
) -> Result<Option<f64>, ConfigError> {
    omega_m
        .as_ref()
        .map(|q| {
            let field = format!("{section}.omega_m");
            let hz = match q {
                Quantity::Value(v) => *v,
                Quantity::Text(_) => q.resolve(&field, Kind::MechanicalFrequency, None)?,
            };
            if hz > 0.0 && hz.is_finite() {
                Ok(hz)
            } else {
                Err(ConfigError::invalid(field, "must be > 0"))
            }
        })
        .transpose()
}

fn occupation(
    section: &str,
    n_th: Option<f64>,
    temperature: &Option<Quantity>,
    f_m: Option<f64>,
) -> Result<f64, ConfigError> {
    match (n_th, temperature) {
        (Some(n), None) => Ok(n),
        (None, Some(t)) => {
            let f_m = f_m.ok_or_else(|| {
                ConfigError::invalid(format!("{section}.temperature"), "needs `omega_m`")
            })?;
            let kelvin = t.resolve(&format!("{section}.temperature"), Kind::Temperature, None)?;
            Ok(thermal_occupation(f_m, kelvin))
        }
        (Some(_), Some(_)) => Err(ConfigError::invalid(
            format!("{section}.n_th"),
            "give either `n_th` or `temperature`, not both",
        )),
        (None, None) => Err(ConfigError::invalid(
            format!("{section}.n_th"),
            "missing `n_th` or `temperature`",
        )),
    }
}

fn parse_toml(text: &str) -> Result<RunConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().message().to_string(),
    })
}

impl RunConfig {
    /// Two-mode homodyne-feedback operating point at (g_cd, r) = (0.047, 0.56)
    /// without loss.
    pub fn reference() -> Self {
        let s = Scenario::two_mode_reference();
        let mode = |m: &OpticalMode| ModeSection {
            kappa: m.kappa.into(),
            detuning: m.detuning.into(),
            coupling: m.coupling.into(),
        };
        Self {
            system: Some(SystemSection {
                omega_m: Some(Quantity::Text("10 MHz".into())),
                gamma_m: s.params.gamma_m.into(),
                n_th: None,
                temperature: Some(Quantity::Text("400 mK".into())),
                mode_a: mode(&s.params.mode_a),
                mode_b: mode(&s.params.mode_b),
                mode_c: None,
            }),
            feedback: FeedbackSection {
                scheme: s.feedback.scheme,
                gain: s.feedback.gain,
                reflectivity: s.feedback.reflectivity,
                efficiency: s.feedback.efficiency,
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config = parse_toml(text)?;
        config.check_sections()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        config.check_sections()?;
        Ok(config)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        Self::from_json_str(&value.to_string())
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes to JSON")
    }

    fn check_sections(&self) -> Result<(), ConfigError> {
        match (&self.system, &self.drive) {
            (Some(_), Some(_)) => Err(ConfigError::invalid(
                "system",
                "give either [system] or [drive], not both",
            )),
            (None, None) => Err(ConfigError::invalid(
                "system",
                "missing [system] or [drive] section",
            )),
            _ => Ok(()),
        }
    }

    /// Mechanical frequency in Hz, when one is configured.
    pub fn mechanical_frequency_hz(&self) -> Result<Option<f64>, ConfigError> {
        match (&self.system, &self.drive) {
            (Some(s), _) => mechanical_frequency("system", &s.omega_m),
            (_, Some(d)) => mechanical_frequency("drive", &d.omega_m),
            _ => Ok(None),
        }
    }

    pub fn system_params(&self) -> Result<SystemParams, ConfigError> {
        self.check_sections()?;
        let f_m = self.mechanical_frequency_hz()?;
        let rate = |field: &str, q: &Quantity| q.resolve(field, Kind::Rate, f_m);
        if let Some(s) = &self.system {
            let mode = |name: &str, m: &ModeSection| -> Result<OpticalMode, ConfigError> {
                Ok(OpticalMode::new(
                    rate(&format!("system.{name}.kappa"), &m.kappa)?,
                    rate(&format!("system.{name}.detuning"), &m.detuning)?,
                    rate(&format!("system.{name}.coupling"), &m.coupling)?,
                ))
            };
            let params = SystemParams {
                gamma_m: rate("system.gamma_m", &s.gamma_m)?,
                n_th: occupation("system", s.n_th, &s.temperature, f_m)?,
                mode_a: mode("mode_a", &s.mode_a)?,
                mode_b: mode("mode_b", &s.mode_b)?,
                mode_c: s.mode_c.as_ref().map(|m| mode("mode_c", m)).transpose()?,
            };
            params.validate().map_err(|e| prefix("system", e))?;
            return Ok(params);
        }
        let d = self.drive.as_ref().expect("checked above");
        let modes = d
            .modes
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let f = |name: &str, q: &Quantity| rate(&format!("drive.modes[{j}].{name}"), q);
                Ok(DriveMode {
                    amplitude: f("amplitude", &m.amplitude)?,
                    bare_detuning: f("detuning", &m.detuning)?,
                    bare_coupling: f("coupling", &m.coupling)?,
                    kappa: f("kappa", &m.kappa)?,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let drive = DriveParams { modes };
        let state = solve_steady_state(&drive)?;
        let gamma_m = rate("drive.gamma_m", &d.gamma_m)?;
        let n_th = occupation("drive", d.n_th, &d.temperature, f_m)?;
        let params = state.to_system_params(&drive, gamma_m, n_th)?;
        params.validate().map_err(|e| prefix("drive", e))?;
        Ok(params)
    }

    pub fn filter_pair(&self) -> Result<FilterPair, ConfigError> {
        let f_m = self.mechanical_frequency_hz()?;
        let spec = |name: &str, s: &FilterSection| -> Result<FilterSpec, ConfigError> {
            Ok(FilterSpec::new(
                s.center
                    .resolve(&format!("filters.{name}.center"), Kind::Rate, f_m)?,
                s.tau
                    .resolve(&format!("filters.{name}.tau"), Kind::Time, f_m)?,
            ))
        };
        Ok(FilterPair {
            a: spec("a", &self.filters.a)?,
            b: spec("b", &self.filters.b)?,
        })
    }

    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let fb = &self.feedback;
        let scenario = Scenario {
            params: self.system_params()?,
            feedback: FeedbackSpec {
                scheme: fb.scheme,
                gain: fb.gain,
                // No beam splitter in the third-mode scheme.
                reflectivity: if fb.scheme == FeedbackScheme::ThirdMode {
                    1.0
                } else {
                    fb.reflectivity
                },
                efficiency: fb.efficiency,
            },
            filters: self.filter_pair()?,
            loss: self.loss,
            quadrature: self.quadrature,
            fidelity_form: self.metrics.fidelity_form,
        };
        scenario.validate()?;
        if scenario.feedback.scheme == FeedbackScheme::ThirdMode && scenario.params.mode_c.is_none()
        {
            return Err(ConfigError::invalid(
                "feedback.scheme",
                "the third-mode scheme needs `mode_c`",
            ));
        }
        Ok(scenario)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let section = self
            .sweep
            .as_ref()
            .ok_or_else(|| ConfigError::invalid("sweep", "missing [sweep] section"))?;
        let axes = section
            .axes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let field = format!("sweep.axes[{i}]");
                let grid = match (&a.values, a.start, a.stop, a.points) {
                    (Some(v), None, None, None) => Grid::Values(v.clone()),
                    (None, Some(start), Some(stop), Some(points)) => Grid::Range {
                        start,
                        stop,
                        points,
                        spacing: a.spacing,
                    },
                    _ => {
                        return Err(ConfigError::invalid(
                            field,
                            "give either `values` or all of `start`, `stop`, `points`",
                        ))
                    }
                };
                Ok(Axis::new(a.name.clone(), grid))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let spec = SweepSpec {
            base: self.to_scenario()?,
            axes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        self.optimize.clone().unwrap_or_default()
    }
}

fn prefix(section: &str, e: crate::Error) -> ConfigError {
    match e {
        crate::Error::InvalidParameter { field, reason } => ConfigError::Invalid {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other.into(),
    }
}
