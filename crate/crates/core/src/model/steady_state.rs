//! Classical operating point of the driven cavity.

use num_complex::Complex64;

use super::params::{OpticalMode, SystemParams, OMEGA_M};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 10_000;
const DAMPING: f64 = 0.5;
const STEP_TOLERANCE: f64 = 1e-12;

/// Bare drive of one cavity mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveMode {
    /// Drive amplitude E.
    pub amplitude: f64,
    /// Laser-cavity detuning δ.
    pub bare_detuning: f64,
    /// Single-photon coupling g.
    pub bare_coupling: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveParams {
    pub modes: Vec<DriveMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub amplitudes: Vec<Complex64>,
    pub q_s: f64,
    pub p_s: f64,
    /// Effective detunings Δ_j = δ_j − g_j q_s.
    pub detunings: Vec<f64>,
    /// Dressed couplings G_j = g_j |A_js| √2.
    pub couplings: Vec<f64>,
    pub iterations: usize,
}

impl SteadyState {
    /// Linearized parameters around this operating point. Requires two or
    /// three driven modes, mapped to a, b[, c] in order.
    pub fn to_system_params(
        &self,
        drive: &DriveParams,
        gamma_m: f64,
        n_th: f64,
    ) -> Result<SystemParams> {
        let mode =
            |j: usize| OpticalMode::new(drive.modes[j].kappa, self.detunings[j], self.couplings[j]);
        match drive.modes.len() {
            2 | 3 => Ok(SystemParams {
                gamma_m,
                n_th,
                mode_a: mode(0),
                mode_b: mode(1),
                mode_c: (drive.modes.len() == 3).then(|| mode(2)),
            }),
            n => Err(Error::invalid(
                "drive.modes",
                format!("expected 2 or 3 modes, got {n}"),
            )),
        }
    }
}

fn intracavity(mode: &DriveMode, q: f64) -> (Complex64, f64) {
    let detuning = mode.bare_detuning - mode.bare_coupling * q;
    (
        Complex64::new(mode.amplitude, 0.0) / Complex64::new(mode.kappa, detuning),
        detuning,
    )
}

fn displacement(drive: &DriveParams, q: f64) -> f64 {
    drive
        .modes
        .iter()
        .map(|m| m.bare_coupling * intracavity(m, q).0.norm_sqr())
        .sum::<f64>()
        / OMEGA_M
}

/// Solves A_js = E_j/(κ_j + iΔ_j), Δ_j = δ_j − g_j q_s, q_s = Σ g_j |A_js|²/ω_m
/// by damped fixed-point iteration on q_s.
pub fn solve_steady_state(drive: &DriveParams) -> Result<SteadyState> {
    for (j, m) in drive.modes.iter().enumerate() {
        if !(m.kappa > 0.0) {
            return Err(Error::invalid(
                format!("drive.modes[{j}].kappa"),
                "must be > 0",
            ));
        }
        if !(m.amplitude >= 0.0) {
            return Err(Error::invalid(
                format!("drive.modes[{j}].amplitude"),
                "must be >= 0",
            ));
        }
    }

    let mut q = 0.0;
    let mut step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let next = (1.0 - DAMPING) * q + DAMPING * displacement(drive, q);
        step = (next - q).abs();
        q = next;
        if !q.is_finite() {
            break;
        }
        if step < STEP_TOLERANCE {
            let (amplitudes, detunings): (Vec<_>, Vec<_>) =
                drive.modes.iter().map(|m| intracavity(m, q)).unzip();
            let couplings = drive
                .modes
                .iter()
                .zip(&amplitudes)
                .map(|(m, a)| m.bare_coupling * a.norm() * std::f64::consts::SQRT_2)
                .collect();
            return Ok(SteadyState {
                amplitudes,
                q_s: q,
                p_s: 0.0,
                detunings,
                couplings,
                iterations,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations,
        last_step: step,
    })
}
