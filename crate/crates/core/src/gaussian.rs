//! Two-mode Gaussian states in the vacuum = I/2 convention: entanglement,
//! loss, teleportation fidelity and steering.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on symmetry and on the uncertainty relation.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-9;

const Z: Matrix2<f64> = Matrix2::new(1.0, 0.0, 0.0, -1.0);

/// Symmetric 4×4 quadrature covariance matrix ordered (X_A, Y_A, X_B, Y_B)
/// with blocks [[A, C], [Cᵀ, B]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix(Matrix4<f64>);

impl CovarianceMatrix {
    /// Wraps `m` after checking finiteness and symmetry; the stored matrix is
    /// exactly symmetrized.
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonPhysical("non-finite entry".into()));
        }
        let asym = (m - m.transpose()).amax();
        if asym > PHYSICALITY_TOLERANCE * m.amax().max(1.0) {
            return Err(Error::NonPhysical(format!("asymmetry {asym:e}")));
        }
        Ok(Self((m + m.transpose()) * 0.5))
    }

    pub fn from_blocks(a: Matrix2<f64>, b: Matrix2<f64>, c: Matrix2<f64>) -> Result<Self> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&c);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&c.transpose());
        Self::new(m)
    }

    pub fn vacuum() -> Self {
        Self(Matrix4::identity() * 0.5)
    }

    /// Two-mode squeezed vacuum with squeezing s and EPR correlations
    /// (C = −sinh(2s)/2 · Z).
    pub fn two_mode_squeezed(s: f64) -> Self {
        let ch = (2.0 * s).cosh() / 2.0;
        let sh = (2.0 * s).sinh() / 2.0;
        Self::from_blocks(Matrix2::identity() * ch, Matrix2::identity() * ch, -Z * sh)
            .expect("finite by construction")
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn a(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn b(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn c(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// Mode-swapped matrix [[B, Cᵀ], [C, A]].
    pub fn swapped(&self) -> Self {
        Self::from_blocks(self.b(), self.a(), self.c().transpose()).expect("already valid")
    }

    /// Applies S V Sᵀ.
    pub fn transform(&self, s: &Matrix4<f64>) -> Result<Self> {
        Self::new(s * self.0 * s.transpose())
    }

    /// Smallest eigenvalue of V + iΩ/2; non-negative for physical states.
    pub fn uncertainty_margin(&self) -> f64 {
        let omega = Matrix4::new(
            0.0, 1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, -1.0, 0.0,
        );
        let h: Matrix4<Complex64> = self.0.zip_map(&omega, |v, o| Complex64::new(v, 0.5 * o));
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_physical(&self) -> bool {
        self.uncertainty_margin() >= -PHYSICALITY_TOLERANCE
    }
}

/// Extracts the 4×4 covariance of two modes whose X quadratures sit at rows
/// `first` and `second` of `full`.
pub fn reduce_bipartite(
    full: &DMatrix<f64>,
    first: usize,
    second: usize,
) -> Result<CovarianceMatrix> {
    let n = full.nrows();
    if full.ncols() != n || first + 1 >= n || second + 1 >= n || first == second {
        return Err(Error::invalid(
            "modes",
            format!("rows {first}, {second} do not fit a {n}×{n} matrix"),
        ));
    }
    let idx = [first, first + 1, second, second + 1];
    CovarianceMatrix::new(Matrix4::from_fn(|i, j| full[(idx[i], idx[j])]))
}

/// Smallest symplectic eigenvalue ν₋ of the partially transposed state.
pub fn pt_symplectic_min(v: &CovarianceMatrix) -> Result<f64> {
    let delta = v.a().determinant() + v.b().determinant() - 2.0 * v.c().determinant();
    let det = v.0.determinant();
    let mut disc = delta * delta - 4.0 * det;
    if disc < 0.0 {
        if disc < -1e-10 * delta * delta {
            return Err(Error::NonPhysical(format!(
                "negative discriminant {disc:e}"
            )));
        }
        disc = 0.0;
    }
    let nu2 = (delta - disc.sqrt()) / 2.0;
    if !(nu2 > 0.0) {
        return Err(Error::NonPhysical(format!("ν₋² = {nu2:e}")));
    }
    Ok(nu2.sqrt())
}

/// ν = 2ν₋, the normalization in which separable states have ν ≥ 1.
pub fn nu(v: &CovarianceMatrix) -> Result<f64> {
    Ok(2.0 * pt_symplectic_min(v)?)
}

pub fn log_negativity(v: &CovarianceMatrix) -> Result<f64> {
    Ok((-(2.0 * pt_symplectic_min(v)?).ln()).max(0.0))
}

/// V ↦ ηV + (1 − η) I/2 on both modes.
pub fn apply_loss(v: &CovarianceMatrix, eta: f64) -> CovarianceMatrix {
    CovarianceMatrix(v.0 * eta + Matrix4::identity() * (0.5 * (1.0 - eta)))
}

/// Base of the exponential converting fiber attenuation into transmissivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LossBase {
    /// η₀ e^{−αl/10}
    #[default]
    #[serde(rename = "e")]
    E,
    /// η₀ 10^{−αl/10}
    #[serde(rename = "10")]
    Ten,
}

pub fn transmissivity(alpha_db_per_km: f64, length_km: f64, eta0: f64, base: LossBase) -> f64 {
    let x = -alpha_db_per_km * length_km / 10.0;
    match base {
        LossBase::E => eta0 * x.exp(),
        LossBase::Ten => eta0 * 10f64.powf(x),
    }
}

/// F = 1/√det Γ, or the uncorrected 1/det Γ kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityForm {
    #[default]
    SquareRoot,
    InverseDeterminant,
}

/// Coherent-state teleportation fidelity with Γ = 2V_in + B + ZAZ + ZC + CᵀZ.
pub fn teleport_fidelity(
    v: &CovarianceMatrix,
    v_in: &Matrix2<f64>,
    form: FidelityForm,
) -> Result<f64> {
    let (a, b, c) = (v.a(), v.b(), v.c());
    let gamma = v_in * 2.0 + b + Z * a * Z + Z * c + c.transpose() * Z;
    let det = gamma.determinant();
    if !(det > 0.0) {
        return Err(Error::NonPositiveGamma(det));
    }
    Ok(match form {
        FidelityForm::SquareRoot => det.sqrt().recip(),
        FidelityForm::InverseDeterminant => det.recip(),
    })
}

/// Coherent input state.
pub fn coherent_input() -> Matrix2<f64> {
    Matrix2::identity() * 0.5
}

/// Fidelity reachable with optimal local operations: 1/(1 + e^{−E_N}).
pub fn fidelity_upper_bound(e_n: f64) -> f64 {
    1.0 / (1.0 + (-e_n).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// A steers B: E_{B|A}, conditioning on A.
    AToB,
    /// B steers A: E_{A|B}.
    BToA,
}

/// Gaussian steerability max(0, −ln(2√det Υ)) with Υ the Schur complement of
/// the steering party's block.
pub fn steering(v: &CovarianceMatrix, direction: Direction) -> Result<f64> {
    let (own, other, c) = match direction {
        Direction::AToB => (v.a(), v.b(), v.c()),
        Direction::BToA => (v.b(), v.a(), v.c().transpose()),
    };
    let inv = own.try_inverse().ok_or(Error::SingularBlock)?;
    if !inv.iter().all(|x| x.is_finite()) {
        return Err(Error::SingularBlock);
    }
    let schur = other - c.transpose() * inv * c;
    let det = schur.determinant();
    if !(det > 0.0) {
        return Err(Error::NonPhysical(format!(
            "Schur complement determinant {det:e}"
        )));
    }
    Ok((-(2.0 * det.sqrt()).ln()).max(0.0))
}

/// Two-way steerability certificate ν < 1/3.
pub fn two_way_steerable(v: &CovarianceMatrix) -> Result<bool> {
    Ok(nu(v)? < 1.0 / 3.0)
}

/// All figures of merit of one output state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub e_n: f64,
    pub nu: f64,
    pub fidelity: f64,
    pub fidelity_bound: f64,
    pub steering_ba: f64,
    pub steering_ab: f64,
    pub two_way: bool,
    pub margin: f64,
}

impl MetricsRecord {
    pub fn evaluate(v: &CovarianceMatrix, margin: f64, form: FidelityForm) -> Result<Self> {
        let nu_minus = pt_symplectic_min(v)?;
        let e_n = (-(2.0 * nu_minus).ln()).max(0.0);
        Ok(Self {
            e_n,
            nu: 2.0 * nu_minus,
            fidelity: teleport_fidelity(v, &coherent_input(), form)?,
            fidelity_bound: fidelity_upper_bound(e_n),
            steering_ba: steering(v, Direction::AToB)?,
            steering_ab: steering(v, Direction::BToA)?,
            two_way: 2.0 * nu_minus < 1.0 / 3.0,
            margin,
        })
    }
}
