//! Linearized optomechanical model: parameters, operating point, drift
//! matrix, stability and effective damping.

pub mod damping;
pub mod drift;
pub mod params;
pub mod stability;
pub mod steady_state;

pub use damping::{
    effective_damping, heating_cancellation_gain, resolved_sideband_damping, three_mode_gain_forms,
    DampingBreakdown, ThreeModeGainForms,
};
pub use drift::{
    apply_feedback_two_mode, build_drift_three_mode, build_drift_two_mode, LinearModel,
};
pub use params::{
    thermal_occupation, FeedbackScheme, FeedbackSpec, OpticalMode, SystemParams, OMEGA_M,
};
pub use stability::{is_stable, stability_of, StabilityReport, Verdict, STABILITY_TOLERANCE};
pub use steady_state::{solve_steady_state, DriveMode, DriveParams, SteadyState};
