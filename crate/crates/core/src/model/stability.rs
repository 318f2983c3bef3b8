use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::drift::LinearModel;
use crate::error::{Error, Result};

/// Margin below which a model is treated as marginal rather than stable.
pub const STABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub verdict: Verdict,
    /// −max Re λ over the drift spectrum.
    pub margin: f64,
    /// Verdict of the Routh–Hurwitz table of the characteristic polynomial.
    pub routh_hurwitz: bool,
    pub eigenvalues: Vec<Complex64>,
}

impl StabilityReport {
    pub fn stable(&self) -> bool {
        self.verdict == Verdict::Stable
    }
}

pub fn is_stable(model: &LinearModel) -> Result<StabilityReport> {
    stability_of(&model.drift, STABILITY_TOLERANCE)
}

pub fn stability_of(drift: &DMatrix<f64>, tolerance: f64) -> Result<StabilityReport> {
    let eigenvalues: Vec<Complex64> = drift.complex_eigenvalues().iter().copied().collect();
    if eigenvalues
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::EigenFailure);
    }
    let margin = -eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = if margin > tolerance {
        Verdict::Stable
    } else if margin >= -tolerance {
        Verdict::Marginal
    } else {
        Verdict::Unstable
    };
    Ok(StabilityReport {
        verdict,
        margin,
        routh_hurwitz: routh_hurwitz_stable(&characteristic_polynomial(drift)),
        eigenvalues,
    })
}

/// Coefficients of det(λI − A), highest power first (leading coefficient 1),
/// by the Faddeev–LeVerrier recursion.
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let identity = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        m = a * &m + &identity * c;
        c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// True when every entry of the first column of the Routh table is positive.
pub fn routh_hurwitz_stable(coeffs: &[f64]) -> bool {
    let lead = coeffs[0];
    if coeffs.len() == 1 {
        return true;
    }
    let coeffs: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    if coeffs.iter().any(|c| *c <= 0.0) {
        return false;
    }
    let width = coeffs.len().div_ceil(2);
    let row = |start: usize| -> Vec<f64> {
        (0..width)
            .map(|i| coeffs.get(start + 2 * i).copied().unwrap_or(0.0))
            .collect()
    };
    let mut upper = row(0);
    let mut lower = row(1);
    for _ in 1..coeffs.len() - 1 {
        let pivot = lower[0];
        if !(pivot > 0.0) {
            return false;
        }
        let next: Vec<f64> = (0..width)
            .map(|i| {
                let u = upper.get(i + 1).copied().unwrap_or(0.0);
                let l = lower.get(i + 1).copied().unwrap_or(0.0);
                (pivot * u - upper[0] * l) / pivot
            })
            .collect();
        upper = lower;
        lower = next;
    }
    lower[0] > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_drift_two_mode, FeedbackSpec, SystemParams};

    #[test]
    fn decoupled_oscillators_are_stable() {
        let mut p = SystemParams::two_mode_reference();
        p.mode_a.coupling = 0.0;
        p.mode_b.coupling = 0.0;
        let report = is_stable(&build_drift_two_mode(&p)).unwrap();
        assert!(report.stable());
        assert!(report.routh_hurwitz);
        // Underdamped mechanics decays at γ_m/2.
        assert!((report.margin - p.gamma_m / 2.0).abs() < 1e-12);
    }

    #[test]
    fn reference_point_with_feedback_is_stable() {
        let p = SystemParams::two_mode_reference();
        let m = LinearModel::build(&p, &FeedbackSpec::mode_b(0.047, 0.56, 0.92)).unwrap();
        let report = is_stable(&m).unwrap();
        assert!(report.stable() && report.routh_hurwitz);
    }

    #[test]
    fn characteristic_polynomial_of_known_matrix() {
        // diag(-1, -2, -3): (λ+1)(λ+2)(λ+3) = λ³ + 6λ² + 11λ + 6
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -3.0]));
        let c = characteristic_polynomial(&a);
        for (got, want) in c.iter().zip([1.0, 6.0, 11.0, 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(routh_hurwitz_stable(&c));
        // λ³ + λ² + λ + 2 has a right-half-plane pair.
        assert!(!routh_hurwitz_stable(&[1.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn strong_blue_coupling_destabilizes() {
        let mut p = SystemParams::two_mode_reference();
        p.mode_a.coupling = 0.0;
        p.mode_b.coupling = 0.2;
        let report = is_stable(&build_drift_two_mode(&p)).unwrap();
        assert_eq!(report.verdict, Verdict::Unstable);
        assert!(!report.routh_hurwitz);
    }
}
