//! Stationary covariance from the Lyapunov equation, used as an independent
//! check of the frequency-domain integration when every noise is white.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{is_stable, LinearModel};

/// Solves A V + V Aᵀ = −D by a dense solve of the vectorized equation
/// (I ⊗ A + A ⊗ I) vec V = −vec D.
pub fn solve_lyapunov(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let identity = DMatrix::<f64>::identity(n, n);
    let kron = identity.kronecker(a) + a.kronecker(&identity);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-d).as_slice());
    let v = kron.lu().solve(&rhs).ok_or(Error::SingularBlock)?;
    let v = DMatrix::from_column_slice(n, n, v.as_slice());
    Ok((&v + v.transpose()) * 0.5)
}

/// White-noise diffusion Diag[0, γ_m(2n_th + 1), κ_a, κ_a, κ_b, κ_b, …].
pub fn white_diffusion(model: &LinearModel) -> DMatrix<f64> {
    let p = &model.params;
    let mut diag = vec![0.0, p.gamma_m * (2.0 * p.n_th + 1.0)];
    for m in p.modes() {
        diag.extend([m.kappa, m.kappa]);
    }
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
}

/// Intracavity stationary covariance of a feedback-free model.
pub fn lyapunov_oracle(model: &LinearModel) -> Result<DMatrix<f64>> {
    if model.feedback.is_active() {
        return Err(Error::invalid(
            "feedback.gain",
            "the Lyapunov oracle needs white noise and so no feedback",
        ));
    }
    let report = is_stable(model)?;
    if !report.stable() {
        return Err(Error::Unstable {
            margin: report.margin,
        });
    }
    solve_lyapunov(&model.drift, &white_diffusion(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeedbackSpec, OpticalMode, SystemParams};

    #[test]
    fn scalar_ou_process() {
        let a = DMatrix::from_element(1, 1, -0.7);
        let d = DMatrix::from_element(1, 1, 0.7);
        let v = solve_lyapunov(&a, &d).unwrap();
        assert!((v[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn thermal_oscillator() {
        let params = SystemParams {
            gamma_m: 1e-4,
            n_th: 50.0,
            mode_a: OpticalMode::new(0.2, -1.0, 0.0),
            mode_b: OpticalMode::new(0.2, 1.0, 0.0),
            mode_c: None,
        };
        let model = LinearModel::build(&params, &FeedbackSpec::none()).unwrap();
        let v = lyapunov_oracle(&model).unwrap();
        for i in 0..2 {
            assert!((v[(i, i)] - 50.5).abs() / 50.5 < 1e-3, "{}", v[(i, i)]);
        }
        for i in 2..6 {
            assert!((v[(i, i)] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_feedback_and_instability() {
        let p = SystemParams::two_mode_reference();
        let fb = LinearModel::build(&p, &FeedbackSpec::mode_b(0.05, 0.5, 0.9)).unwrap();
        assert!(matches!(
            lyapunov_oracle(&fb),
            Err(Error::InvalidParameter { .. })
        ));
        let mut hot = p;
        hot.mode_b.coupling = 2.0;
        hot.mode_a.coupling = 0.0;
        let unstable = LinearModel::build(&hot, &FeedbackSpec::none()).unwrap();
        assert!(matches!(
            lyapunov_oracle(&unstable),
            Err(Error::Unstable { .. })
        ));
    }
}
