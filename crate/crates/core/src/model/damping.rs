//! Effective mechanical damping from the mechanical susceptibility, with the
//! radiation-pressure backaction of each cavity mode and the cold-damping term.

use serde::{Deserialize, Serialize};

use super::params::{FeedbackScheme, FeedbackSpec, OpticalMode, SystemParams, OMEGA_M};
use crate::error::{Error, Result};

/// Additive contributions to the effective damping rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingBreakdown {
    pub bare: f64,
    /// Backaction of modes a, b[, c] in that order.
    pub backaction: Vec<f64>,
    pub feedback: f64,
}

impl DampingBreakdown {
    pub fn total(&self) -> f64 {
        self.bare + self.backaction.iter().sum::<f64>() + self.feedback
    }

    /// Backaction of the detected mode plus the feedback it drives (mode B for
    /// the homodyne scheme, mode C for the three-mode scheme).
    pub fn detected_mode_contribution(&self, scheme: FeedbackScheme) -> f64 {
        match scheme {
            FeedbackScheme::ModeBHomodyne => self.backaction[1] + self.feedback,
            FeedbackScheme::ThirdMode => {
                self.backaction.get(2).copied().unwrap_or(0.0) + self.feedback
            }
            FeedbackScheme::None => 0.0,
        }
    }

    /// Sum of the negative (heating) backaction terms.
    pub fn heating(&self) -> f64 {
        self.backaction.iter().filter(|b| **b < 0.0).sum()
    }
}

fn lorentz_pair(mode: &OpticalMode, omega: f64) -> f64 {
    let k2 = mode.kappa * mode.kappa;
    (k2 + (omega - mode.detuning).powi(2)) * (k2 + (omega + mode.detuning).powi(2))
}

fn detected_mode<'a>(params: &'a SystemParams, fb: &FeedbackSpec) -> Option<&'a OpticalMode> {
    match fb.scheme {
        FeedbackScheme::None => None,
        FeedbackScheme::ModeBHomodyne => Some(&params.mode_b),
        FeedbackScheme::ThirdMode => params.mode_c.as_ref(),
    }
}

/// Full frequency-dependent effective damping γ_eff(ω).
pub fn effective_damping(params: &SystemParams, fb: &FeedbackSpec, omega: f64) -> DampingBreakdown {
    let backaction = params
        .modes()
        .map(|m| 2.0 * OMEGA_M * m.coupling.powi(2) * m.detuning * m.kappa / lorentz_pair(m, omega))
        .collect();
    let feedback = detected_mode(params, fb).map_or(0.0, |m| {
        let numerator =
            (m.detuning.powi(2) + omega * omega + m.kappa.powi(2)) * m.kappa * m.coupling;
        OMEGA_M * numerator * fb.effective_gain() / lorentz_pair(m, omega)
    });
    DampingBreakdown {
        bare: params.gamma_m,
        backaction,
        feedback,
    }
}

/// Resolved-sideband limit of [`effective_damping`] at ω = ω_m for
/// |Δ_j| = ω_m: each mode contributes sign(Δ_j)·G_j²/2κ_j and the feedback
/// contributes G·g_eff·ω_m/2κ of the detected mode.
pub fn resolved_sideband_damping(params: &SystemParams, fb: &FeedbackSpec) -> DampingBreakdown {
    let backaction = params
        .modes()
        .map(|m| m.detuning.signum() * m.coupling.powi(2) / (2.0 * m.kappa))
        .collect();
    let feedback = detected_mode(params, fb).map_or(0.0, |m| {
        m.coupling * fb.effective_gain() * OMEGA_M / (2.0 * m.kappa)
    });
    DampingBreakdown {
        bare: params.gamma_m,
        backaction,
        feedback,
    }
}

/// Gain at which cold damping cancels the heating backaction at ω = ω_m.
///
/// Two-mode scheme: g_cd = G_b/(√σ r ω_m). Three-mode scheme: the gain that
/// zeroes the sum of the negative backaction terms of the full
/// [`effective_damping`] at ω_m.
pub fn heating_cancellation_gain(params: &SystemParams, fb: &FeedbackSpec) -> Result<f64> {
    match fb.scheme {
        FeedbackScheme::ModeBHomodyne => {
            if fb.reflectivity == 0.0 || fb.efficiency == 0.0 {
                return Err(Error::DivisionByZero(
                    "reflectivity and efficiency must be non-zero",
                ));
            }
            Ok(params.mode_b.coupling / (fb.efficiency.sqrt() * fb.reflectivity * OMEGA_M))
        }
        FeedbackScheme::ThirdMode => {
            let c = params
                .mode_c
                .as_ref()
                .ok_or_else(|| Error::invalid("mode_c", "three-mode scheme requires mode c"))?;
            if c.coupling == 0.0 {
                return Err(Error::DivisionByZero("G_c must be non-zero"));
            }
            let unit = FeedbackSpec { gain: 1.0, ..*fb };
            let at_unit = effective_damping(params, &unit, OMEGA_M);
            Ok(-at_unit.heating() / at_unit.feedback)
        }
        FeedbackScheme::None => Err(Error::invalid(
            "feedback.scheme",
            "no feedback loop to tune",
        )),
    }
}

/// Closed-form three-mode cancellation gains in circulation, for comparison
/// with the numerically derived one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeModeGainForms {
    /// (κ_c G_b² + κ_b G_c²)/(κ_b ω_m G_c)
    pub over_kappa_b: f64,
    /// (κ_c G_b² + κ_b G_c²)/(κ_c ω_m G_c)
    pub over_kappa_c: f64,
    /// (2κ_c G_b² + κ_b G_c²)/(κ_b ω_m G_c), from a G_b²/κ_b heating term.
    pub doubled_b: f64,
}

pub fn three_mode_gain_forms(params: &SystemParams) -> Result<ThreeModeGainForms> {
    let c = params
        .mode_c
        .as_ref()
        .ok_or_else(|| Error::invalid("mode_c", "three-mode scheme requires mode c"))?;
    if c.coupling == 0.0 {
        return Err(Error::DivisionByZero("G_c must be non-zero"));
    }
    let b = &params.mode_b;
    let gb2 = b.coupling.powi(2);
    let gc2 = c.coupling.powi(2);
    Ok(ThreeModeGainForms {
        over_kappa_b: (c.kappa * gb2 + b.kappa * gc2) / (b.kappa * OMEGA_M * c.coupling),
        over_kappa_c: (c.kappa * gb2 + b.kappa * gc2) / (c.kappa * OMEGA_M * c.coupling),
        doubled_b: (2.0 * c.kappa * gb2 + b.kappa * gc2) / (b.kappa * OMEGA_M * c.coupling),
    })
}
