use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Causal Lorentzian filter defining one output mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    /// Center frequency Ω.
    pub center: f64,
    /// Inverse bandwidth τ.
    pub tau: f64,
}

impl FilterSpec {
    pub fn new(center: f64, tau: f64) -> Self {
        Self { center, tau }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::invalid(format!("{field}.center"), "must be finite"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(
                format!("{field}.tau"),
                "must be finite and > 0",
            ));
        }
        Ok(())
    }
}

/// h(ω) = √(τ/π)/(1 + iτ(Ω − ω)), normalized so that ∫|h|² dω = 1.
pub fn filter_response(f: &FilterSpec, omega: f64) -> Complex64 {
    Complex64::new((f.tau / std::f64::consts::PI).sqrt(), 0.0)
        / Complex64::new(1.0, f.tau * (f.center - omega))
}

/// Frequency image of the real 2×2 quadrature filter built from Re h(t) and
/// Im h(t): [[h_R, −h_I], [h_I, h_R]].
pub fn filter_block(f: &FilterSpec, omega: f64) -> Matrix2<Complex64> {
    let plus = filter_response(f, omega);
    let minus = filter_response(f, -omega).conj();
    let re = (plus + minus) * 0.5;
    let im = (plus - minus) / Complex64::new(0.0, 2.0);
    Matrix2::new(re, -im, im, re)
}
