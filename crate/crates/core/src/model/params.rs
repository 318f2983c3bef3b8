use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mechanical frequency. Every rate and frequency in the crate is expressed
/// in units of it.
pub const OMEGA_M: f64 = 1.0;

const HBAR: f64 = 1.054_571_817e-34;
const BOLTZMANN: f64 = 1.380_649e-23;

/// Mean thermal occupation `1 / (exp(ħω/k_B T) − 1)` of a mode with ordinary
/// frequency `frequency_hz` at `temperature_k`.
pub fn thermal_occupation(frequency_hz: f64, temperature_k: f64) -> f64 {
    if temperature_k <= 0.0 {
        return 0.0;
    }
    let x = HBAR * 2.0 * std::f64::consts::PI * frequency_hz / (BOLTZMANN * temperature_k);
    1.0 / x.exp_m1()
}

/// Linearized parameters of one driven cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalMode {
    /// Amplitude decay rate κ.
    pub kappa: f64,
    /// Effective detuning Δ.
    pub detuning: f64,
    /// Dressed optomechanical coupling G.
    pub coupling: f64,
}

impl OpticalMode {
    pub fn new(kappa: f64, detuning: f64, coupling: f64) -> Self {
        Self {
            kappa,
            detuning,
            coupling,
        }
    }
}

/// Physical rates of the linearized model, in units of the mechanical frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub gamma_m: f64,
    pub n_th: f64,
    pub mode_a: OpticalMode,
    pub mode_b: OpticalMode,
    /// Auxiliary mode used only for detection in the three-mode scheme.
    pub mode_c: Option<OpticalMode>,
}

impl SystemParams {
    /// Operating point of the two-mode homodyne-feedback scheme
    /// (ω_m/2π = 10 MHz, T = 400 mK).
    pub fn two_mode_reference() -> Self {
        Self {
            gamma_m: 1.5e-5,
            n_th: thermal_occupation(10e6, 0.4),
            mode_a: OpticalMode::new(0.01, 1.0, 0.065),
            mode_b: OpticalMode::new(0.01, -1.0, 0.04),
            mode_c: None,
        }
    }

    /// Operating point of the three-mode scheme: the two-mode point plus a
    /// blue-detuned detection mode.
    pub fn three_mode_reference() -> Self {
        Self {
            mode_c: Some(OpticalMode::new(0.01, -1.0, 0.05)),
            ..Self::two_mode_reference()
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = &OpticalMode> {
        [&self.mode_a, &self.mode_b]
            .into_iter()
            .chain(self.mode_c.as_ref())
    }

    pub fn mechanical_quality(&self) -> f64 {
        OMEGA_M / self.gamma_m
    }

    /// Thermal diffusion γ_m (2 n_th + 1) of the Brownian force.
    pub fn thermal_diffusion(&self) -> f64 {
        self.gamma_m * (2.0 * self.n_th + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        positive("gamma_m", self.gamma_m)?;
        if !(self.n_th.is_finite() && self.n_th >= 0.0) {
            return Err(Error::invalid(
                "n_th",
                format!("must be finite and >= 0, got {}", self.n_th),
            ));
        }
        let named = [
            ("a", Some(&self.mode_a)),
            ("b", Some(&self.mode_b)),
            ("c", self.mode_c.as_ref()),
        ];
        for (name, mode) in named {
            let Some(mode) = mode else { continue };
            positive(&format!("mode_{name}.kappa"), mode.kappa)?;
            finite(&format!("mode_{name}.detuning"), mode.detuning)?;
            finite(&format!("mode_{name}.coupling"), mode.coupling)?;
        }
        Ok(())
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

fn finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite, got {value}"),
        ))
    }
}

/// Which output is measured and fed back to the mechanical momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackScheme {
    #[default]
    None,
    /// Part of mode B's output is split off by a beam splitter and homodyned.
    ModeBHomodyne,
    /// The whole output of an auxiliary mode C is homodyned.
    ThirdMode,
}

/// Cold-damping feedback loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSpec {
    pub scheme: FeedbackScheme,
    /// Feedback gain g_cd.
    pub gain: f64,
    /// Beam-splitter amplitude reflectivity r (mode-B scheme only).
    pub reflectivity: f64,
    /// Homodyne detection efficiency σ.
    pub efficiency: f64,
}

impl Default for FeedbackSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl FeedbackSpec {
    pub fn none() -> Self {
        Self {
            scheme: FeedbackScheme::None,
            gain: 0.0,
            reflectivity: 0.0,
            efficiency: 1.0,
        }
    }

    pub fn mode_b(gain: f64, reflectivity: f64, efficiency: f64) -> Self {
        Self {
            scheme: FeedbackScheme::ModeBHomodyne,
            gain,
            reflectivity,
            efficiency,
        }
    }

    pub fn third_mode(gain: f64, efficiency: f64) -> Self {
        Self {
            scheme: FeedbackScheme::ThirdMode,
            gain,
            reflectivity: 1.0,
            efficiency,
        }
    }

    /// Beam-splitter amplitude transmissivity t = √(1 − r²). The three-mode
    /// scheme has no beam splitter, so t = 0 there.
    pub fn transmissivity(&self) -> f64 {
        match self.scheme {
            FeedbackScheme::ModeBHomodyne => (1.0 - self.reflectivity * self.reflectivity)
                .max(0.0)
                .sqrt(),
            FeedbackScheme::ThirdMode => 0.0,
            FeedbackScheme::None => 1.0,
        }
    }

    /// Gain acting on the detected intracavity quadrature: √σ·r·g_cd for the
    /// mode-B scheme, √σ·g_cd for the three-mode scheme.
    pub fn effective_gain(&self) -> f64 {
        match self.scheme {
            FeedbackScheme::None => 0.0,
            FeedbackScheme::ModeBHomodyne => self.efficiency.sqrt() * self.reflectivity * self.gain,
            FeedbackScheme::ThirdMode => self.efficiency.sqrt() * self.gain,
        }
    }

    pub fn is_active(&self) -> bool {
        self.scheme != FeedbackScheme::None && self.gain != 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() {
            return Err(Error::invalid("feedback.gain", "must be finite"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(
                "feedback.efficiency",
                format!("must lie in (0, 1], got {}", self.efficiency),
            ));
        }
        if self.scheme == FeedbackScheme::ModeBHomodyne && !(0.0..=1.0).contains(&self.reflectivity)
        {
            return Err(Error::invalid(
                "feedback.reflectivity",
                format!("must lie in [0, 1], got {}", self.reflectivity),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_occupation_at_reference_point() {
        // ħω/kT ≈ 1.19984e-3 at 10 MHz, 400 mK, so n ≈ kT/ħω − 1/2.
        let n = thermal_occupation(10e6, 0.4);
        assert!((n - 832.9649).abs() < 1e-3, "n_th = {n}");
        assert_eq!(thermal_occupation(10e6, 0.0), 0.0);
    }

    #[test]
    fn beam_splitter_is_lossless() {
        for r in [0.0, 0.3, 0.56, 1.0] {
            let fb = FeedbackSpec::mode_b(0.05, r, 0.92);
            let t = fb.transmissivity();
            assert!((r * r + t * t - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn validation_names_offending_field() {
        let mut p = SystemParams::two_mode_reference();
        p.mode_b.kappa = -0.01;
        match p.validate() {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "mode_b.kappa"),
            other => panic!("unexpected {other:?}"),
        }
        let fb = FeedbackSpec::mode_b(0.05, 0.5, 0.0);
        assert!(fb.validate().is_err());
    }
}
