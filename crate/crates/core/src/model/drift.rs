//! Drift matrices of the linearized quadrature dynamics.
//!
//! Quadrature ordering is fixed as (δq, δp, δX_a, δY_a, δX_b, δY_b[, δX_c, δY_c]).

use nalgebra::DMatrix;

use super::params::{FeedbackScheme, FeedbackSpec, OpticalMode, SystemParams, OMEGA_M};
use crate::error::{Error, Result};

pub const Q: usize = 0;
pub const P: usize = 1;
pub const XA: usize = 2;
pub const YA: usize = 3;
pub const XB: usize = 4;
pub const YB: usize = 5;
pub const XC: usize = 6;
pub const YC: usize = 7;

/// Drift matrix plus the parameters it was built from. Noise correlators are
/// frequency dependent under feedback and live in [`crate::spectra`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub dim: usize,
    pub drift: DMatrix<f64>,
    pub feedback: FeedbackSpec,
    pub params: SystemParams,
}

impl LinearModel {
    /// Builds the model for any supported configuration: 6×6 when the
    /// parameters carry two modes, 8×8 when mode C is present.
    pub fn build(params: &SystemParams, fb: &FeedbackSpec) -> Result<Self> {
        params.validate()?;
        fb.validate()?;
        match (params.mode_c.is_some(), fb.scheme) {
            (false, FeedbackScheme::None) => Ok(build_drift_two_mode(params)),
            (false, FeedbackScheme::ModeBHomodyne) => {
                apply_feedback_two_mode(&build_drift_two_mode(params), fb)
            }
            (true, FeedbackScheme::None | FeedbackScheme::ThirdMode) => {
                build_drift_three_mode(params, fb)
            }
            (false, FeedbackScheme::ThirdMode) => Err(Error::invalid(
                "feedback.scheme",
                "third-mode feedback requires parameters for mode c",
            )),
            (true, FeedbackScheme::ModeBHomodyne) => Err(Error::invalid(
                "feedback.scheme",
                "mode-b homodyne feedback is defined for the two-mode cavity only",
            )),
        }
    }

    pub fn is_three_mode(&self) -> bool {
        self.dim == 8
    }
}

fn cavity_block(a: &mut DMatrix<f64>, x: usize, mode: &OpticalMode) {
    let y = x + 1;
    a[(x, x)] = -mode.kappa;
    a[(x, y)] = mode.detuning;
    a[(y, x)] = -mode.detuning;
    a[(y, y)] = -mode.kappa;
    a[(y, Q)] = mode.coupling;
    a[(P, x)] = mode.coupling;
}

fn bare_drift(params: &SystemParams, dim: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, dim);
    a[(Q, P)] = OMEGA_M;
    a[(P, Q)] = -OMEGA_M;
    a[(P, P)] = -params.gamma_m;
    cavity_block(&mut a, XA, &params.mode_a);
    cavity_block(&mut a, XB, &params.mode_b);
    a
}

/// Two-mode drift matrix without feedback.
pub fn build_drift_two_mode(params: &SystemParams) -> LinearModel {
    LinearModel {
        dim: 6,
        drift: bare_drift(params, 6),
        feedback: FeedbackSpec::none(),
        params: SystemParams {
            mode_c: None,
            ..params.clone()
        },
    }
}

/// Adds the homodyne cold-damping force on δp. The force is
/// −G_cd·dδY_b/dt with G_cd = √σ·r·g_cd, which after substituting the
/// equation of motion of δY_b contributes −G_cd·G_b on δq, +G_cd·Δ_b on δX_b
/// and +G_cd·κ_b on δY_b.
pub fn apply_feedback_two_mode(model: &LinearModel, fb: &FeedbackSpec) -> Result<LinearModel> {
    if fb.scheme != FeedbackScheme::ModeBHomodyne || model.dim != 6 {
        return Err(Error::invalid(
            "feedback.scheme",
            "apply_feedback_two_mode needs a two-mode model and mode-b homodyne feedback",
        ));
    }
    let b = &model.params.mode_b;
    let g = fb.effective_gain();
    let mut drift = model.drift.clone();
    drift[(P, Q)] += -g * b.coupling;
    drift[(P, XB)] += g * b.detuning;
    drift[(P, YB)] += g * b.kappa;
    Ok(LinearModel {
        drift,
        feedback: *fb,
        ..model.clone()
    })
}

/// 8×8 drift with mode C and (optionally) feedback of mode C's output.
pub fn build_drift_three_mode(params: &SystemParams, fb: &FeedbackSpec) -> Result<LinearModel> {
    let Some(c) = params.mode_c.as_ref() else {
        return Err(Error::invalid("mode_c", "three-mode drift requires mode c"));
    };
    if fb.scheme == FeedbackScheme::ModeBHomodyne {
        return Err(Error::invalid(
            "feedback.scheme",
            "expected third-mode or no feedback",
        ));
    }
    let mut a = bare_drift(params, 8);
    cavity_block(&mut a, XC, c);
    let g = fb.effective_gain();
    a[(P, Q)] += -g * c.coupling;
    a[(P, XC)] += g * c.detuning;
    a[(P, YC)] += g * c.kappa;
    Ok(LinearModel {
        dim: 8,
        drift: a,
        feedback: *fb,
        params: params.clone(),
    })
}
