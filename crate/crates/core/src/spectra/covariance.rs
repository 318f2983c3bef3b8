//! Spectral covariance of the filtered outputs and its integration over
//! frequency.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::filter::{filter_block, FilterSpec};
use super::noise::{noise_blocks, NoiseModel};
use super::quadrature::{integrate_real_line, QuadratureConfig};
use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::model::drift::{LinearModel, XA, XB};
use crate::model::stability::{is_stable, StabilityReport};

/// The pair of filtered output modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPair {
    pub a: FilterSpec,
    pub b: FilterSpec,
}

impl FilterPair {
    /// Ω_a = ω_m, Ω_b = −ω_m, τ = 2000/ω_m: each filter selects the
    /// sideband scattered by its mode.
    pub fn reference() -> Self {
        Self {
            a: FilterSpec::new(1.0, 2000.0),
            b: FilterSpec::new(-1.0, 2000.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.a.validate("filters.a")?;
        self.b.validate("filters.b")
    }
}

/// (iωI + A)⁻¹.
pub fn response_matrix(model: &LinearModel, omega: f64) -> Result<DMatrix<Complex64>> {
    resolvent(model, omega)?
        .try_inverse()
        .ok_or(Error::SingularMatrix { omega })
}

fn resolvent(
    model: &LinearModel,
    omega: f64,
) -> Result<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
    let n = model.dim;
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(model.drift[(i, j)], if i == j { omega } else { 0.0 })
    });
    let lu = shifted.lu();
    let pivots: Vec<f64> = (0..n).map(|i| lu.u()[(i, i)].norm()).collect();
    let largest = pivots.iter().copied().fold(0.0, f64::max);
    let smallest = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-14 * largest) {
        return Err(Error::SingularMatrix { omega });
    }
    Ok(lu)
}

/// Sign of the D₂ cross terms in the block assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossTermSign {
    /// +P M D₂ + D₂† M† P, consistent with the input–output relation.
    #[default]
    Consistent,
    /// −P M D₂ − D₂† M† P, the three-mode sign variant; kept only to
    /// demonstrate that it violates the vacuum limit.
    Reversed,
}

/// Symmetrized spectral density V(ω, −ω) of all output rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCovariance {
    pub omega: f64,
    /// Filtered two-frequency correlator S(ω) before symmetrization.
    pub raw: DMatrix<Complex64>,
    /// [S(ω) + S(−ω)]/2, real and symmetric up to `residual`.
    pub symmetrized: DMatrix<f64>,
    /// max |Im| and antisymmetric part of the symmetrized matrix relative to
    /// its largest entry.
    pub residual: f64,
}

/// Filter transformation on the full row space: the two filter blocks on the
/// rows of modes a and b, identity elsewhere.
fn full_filter(dim: usize, filters: &FilterPair, omega: f64) -> DMatrix<Complex64> {
    let mut t = DMatrix::identity(dim, dim);
    t.view_mut((XA, XA), (2, 2))
        .copy_from(&filter_block(&filters.a, omega));
    t.view_mut((XB, XB), (2, 2))
        .copy_from(&filter_block(&filters.b, omega));
    t
}

fn diag(v: &nalgebra::DVector<f64>) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&v.map(|x| Complex64::new(x, 0.0)))
}

/// S(ω) assembled from the correlator blocks:
/// T_t[P M D_fb M† P + D₁ + P M D₂ + D₂† M† P]T_t + T_r D₃ T_r
/// + T_t P M D₄ T_r + (T_t P M D₄ T_r)†.
pub fn block_spectrum(
    model: &LinearModel,
    noise: &NoiseModel,
    omega: f64,
    sign: CrossTermSign,
) -> Result<DMatrix<Complex64>> {
    let m = response_matrix(model, omega)?;
    let blocks = noise_blocks(noise, omega, -omega);
    let p = diag(&noise.extraction);
    let tt = diag(&noise.transmitted);
    let tr = diag(&noise.reflected);
    let pm = &p * &m;
    let cross = &pm * &blocks.d2;
    let cross = match sign {
        CrossTermSign::Consistent => &cross + cross.adjoint(),
        CrossTermSign::Reversed => -(&cross + cross.adjoint()),
    };
    let inner = &pm * &blocks.diffusion * pm.adjoint() + &blocks.d1 + cross;
    let splitter = &tt * &pm * &blocks.d4 * &tr;
    Ok(&tt * inner * &tt + &tr * &blocks.d3 * &tr + &splitter + splitter.adjoint())
}

/// Output transfer matrix H(ω) = −T_t P M B(ω) − T_t S_in − T_r S_bs, so that
/// S(ω) = H N H†.
pub fn output_transfer(
    model: &LinearModel,
    noise: &NoiseModel,
    omega: f64,
) -> Result<DMatrix<Complex64>> {
    let lu = resolvent(model, omega)?;
    let x = lu
        .solve(&noise.input_matrix(omega))
        .ok_or(Error::SingularMatrix { omega })?;
    let mut h = DMatrix::zeros(model.dim, noise.sources());
    for i in 0..model.dim {
        let t = noise.transmitted[i];
        let r = noise.reflected[i];
        for k in 0..noise.sources() {
            h[(i, k)] = -x[(i, k)] * (t * noise.extraction[i])
                - Complex64::new(
                    t * noise.cavity_input[(i, k)] + r * noise.splitter_input[(i, k)],
                    0.0,
                );
        }
    }
    Ok(h)
}

/// Filtered spectral covariance at ω via the block assembly, symmetrized over
/// ±ω.
pub fn output_spectral_covariance(
    model: &LinearModel,
    filters: &FilterPair,
    omega: f64,
    sign: CrossTermSign,
) -> Result<SpectralCovariance> {
    let noise = NoiseModel::new(model);
    let filtered = |w: f64| -> Result<DMatrix<Complex64>> {
        let t = full_filter(model.dim, filters, w);
        Ok(&t * block_spectrum(model, &noise, w, sign)? * t.adjoint())
    };
    let raw = filtered(omega)?;
    let mirrored = filtered(-omega)?;
    let sym = (&raw + &mirrored) * Complex64::new(0.5, 0.0);
    let symmetrized = sym.map(|z| z.re);
    let scale = symmetrized.amax().max(f64::MIN_POSITIVE);
    let imag = sym.map(|z| z.im).amax();
    let asym = (&symmetrized - symmetrized.transpose()).amax();
    Ok(SpectralCovariance {
        omega,
        raw,
        symmetrized,
        residual: imag.max(asym) / scale,
    })
}

/// Integrated covariance of the two filtered outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredCovariance {
    pub covariance: CovarianceMatrix,
    /// Quadrature error estimate (max-norm).
    pub error: f64,
    pub evaluations: usize,
    pub stability: StabilityReport,
}

fn pole_breakpoints(stability: &StabilityReport) -> Vec<f64> {
    let mut points = Vec::new();
    let mut largest = 0.0f64;
    for z in &stability.eigenvalues {
        largest = largest.max(z.norm());
        let width = z.re.abs();
        for c in [z.im, -z.im] {
            points.push(c);
            for k in [1.0, 3.0, 10.0] {
                points.push(c - k * width);
                points.push(c + k * width);
            }
        }
    }
    points.push(-5.0 * largest);
    points.push(5.0 * largest);
    points
}

fn filter_breakpoints(filters: &FilterPair, config: &QuadratureConfig) -> Vec<f64> {
    let mut points = Vec::new();
    for f in [&filters.a, &filters.b] {
        for c in [f.center, -f.center] {
            points.push(c);
            for k in [1.0, 3.0, 10.0, 30.0, 100.0, config.window] {
                points.push(c - k / f.tau);
                points.push(c + k / f.tau);
            }
        }
    }
    points
}

fn require_stable(model: &LinearModel) -> Result<StabilityReport> {
    let stability = is_stable(model)?;
    if !stability.stable() {
        return Err(Error::Unstable {
            margin: stability.margin,
        });
    }
    Ok(stability)
}

/// V = ∫dω V(ω, −ω) over the filtered outputs of modes a and b.
///
/// Only the four optical rows are integrated: with derivative feedback the
/// momentum is driven by noise whose spectrum does not decay, so its
/// variance is not finite.
pub fn integrate_covariance(
    model: &LinearModel,
    filters: &FilterPair,
    quad: &QuadratureConfig,
) -> Result<FilteredCovariance> {
    filters.validate()?;
    quad.validate()?;
    let stability = require_stable(model)?;
    let noise = NoiseModel::new(model);
    let rows = [XA, XA + 1, XB, XB + 1];
    let n = &noise.spectra;

    let integrand = |w: f64| -> Result<Vec<f64>> {
        let h = output_transfer(model, &noise, w)?;
        let fa = filter_block(&filters.a, w);
        let fb = filter_block(&filters.b, w);
        // Rows of T H restricted to the two filtered modes.
        let mut th = DMatrix::<Complex64>::zeros(4, noise.sources());
        for k in 0..noise.sources() {
            for i in 0..2 {
                th[(i, k)] = fa[(i, 0)] * h[(rows[0], k)] + fa[(i, 1)] * h[(rows[1], k)];
                th[(i + 2, k)] = fb[(i, 0)] * h[(rows[2], k)] + fb[(i, 1)] * h[(rows[3], k)];
            }
        }
        let mut out = vec![0.0; 16];
        for i in 0..4 {
            for j in i..4 {
                let mut acc = 0.0;
                for k in 0..noise.sources() {
                    acc += n[k] * (th[(i, k)] * th[(j, k)].conj()).re;
                }
                out[4 * i + j] = acc;
                out[4 * j + i] = acc;
            }
        }
        Ok(out)
    };

    let mut breakpoints = filter_breakpoints(filters, quad);
    breakpoints.extend(pole_breakpoints(&stability));
    let q = integrate_real_line(integrand, &breakpoints, quad)?;
    let covariance = CovarianceMatrix::new(Matrix4::from_row_slice(&q.value))?;
    Ok(FilteredCovariance {
        covariance,
        error: q.error,
        evaluations: q.evaluations,
        stability,
    })
}

/// Stationary intracavity covariance (1/2π)∫ M D M† dω. Defined only
/// without feedback, where the momentum noise is white.
pub fn integrate_intracavity_covariance(
    model: &LinearModel,
    quad: &QuadratureConfig,
) -> Result<(DMatrix<f64>, f64)> {
    quad.validate()?;
    if model.feedback.is_active() {
        return Err(Error::invalid(
            "feedback.gain",
            "the intracavity momentum variance diverges under derivative feedback",
        ));
    }
    let stability = require_stable(model)?;
    let noise = NoiseModel::new(model);
    let dim = model.dim;
    let n = &noise.spectra;
    let scale = 1.0 / (2.0 * std::f64::consts::PI);
    let b0 = noise.b0.map(|v| Complex64::new(v, 0.0));
    let integrand = |w: f64| -> Result<Vec<f64>> {
        let x = resolvent(model, w)?
            .solve(&b0)
            .ok_or(Error::SingularMatrix { omega: w })?;
        let mut out = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let mut acc = 0.0;
                for k in 0..noise.sources() {
                    acc += n[k] * (x[(i, k)] * x[(j, k)].conj()).re;
                }
                out[dim * i + j] = acc * scale;
                out[dim * j + i] = acc * scale;
            }
        }
        Ok(out)
    };
    let q = integrate_real_line(integrand, &pole_breakpoints(&stability), quad)?;
    Ok((DMatrix::from_row_slice(dim, dim, &q.value), q.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeedbackSpec, SystemParams};
    use rand::{Rng, SeedableRng};

    fn reference(g: f64, r: f64) -> LinearModel {
        LinearModel::build(
            &SystemParams::two_mode_reference(),
            &FeedbackSpec::mode_b(g, r, 0.92),
        )
        .unwrap()
    }

    #[test]
    fn scalar_response_is_lorentzian() {
        let mut model = reference(0.0, 0.5);
        model.dim = 1;
        model.drift = DMatrix::from_element(1, 1, -0.3);
        for w in [0.0, 0.2, 5.0] {
            let m = response_matrix(&model, w).unwrap()[(0, 0)];
            assert!((m.norm_sqr() - 1.0 / (0.09 + w * w)).abs() < 1e-14);
        }
        assert!((response_matrix(&model, 0.0).unwrap()[(0, 0)].re + 1.0 / 0.3).abs() < 1e-14);
    }

    #[test]
    fn response_inverts_resolvent() {
        let model = reference(0.047, 0.56);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let w: f64 = rng.random_range(-3.0..3.0);
            let m = response_matrix(&model, w).unwrap();
            let shifted = model.drift.map(|v| Complex64::new(v, 0.0))
                + DMatrix::<Complex64>::identity(6, 6) * Complex64::new(0.0, w);
            let residual = (m * shifted - DMatrix::<Complex64>::identity(6, 6)).camax();
            assert!(residual < 1e-12, "ω = {w}: {residual:e}");
        }
    }

    #[test]
    fn block_and_transfer_routes_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let models = [
            reference(0.047, 0.56),
            reference(0.0, 0.3),
            LinearModel::build(
                &SystemParams::three_mode_reference(),
                &FeedbackSpec::third_mode(0.06, 0.9),
            )
            .unwrap(),
        ];
        for model in &models {
            let noise = NoiseModel::new(model);
            for _ in 0..20 {
                let w: f64 = rng.random_range(-3.0..3.0);
                let blocks = block_spectrum(model, &noise, w, CrossTermSign::Consistent).unwrap();
                let h = output_transfer(model, &noise, w).unwrap();
                let n = DMatrix::from_diagonal(&noise.spectra.map(|v| Complex64::new(v, 0.0)));
                let transfer = &h * n * h.adjoint();
                let scale = transfer.camax();
                assert!((blocks - transfer).camax() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn symmetrized_integrand_is_real() {
        let model = reference(0.047, 0.56);
        let s = output_spectral_covariance(
            &model,
            &FilterPair::reference(),
            1.0,
            CrossTermSign::Consistent,
        )
        .unwrap();
        assert!(s.symmetrized.iter().all(|v| v.is_finite()));
        assert!(s.residual < 1e-10, "{:e}", s.residual);
    }

    #[test]
    fn filtered_vacuum() {
        let mut p = SystemParams::two_mode_reference();
        p.mode_a.coupling = 0.0;
        p.mode_b.coupling = 0.0;
        let model = LinearModel::build(&p, &FeedbackSpec::none()).unwrap();
        let v = integrate_covariance(
            &model,
            &FilterPair::reference(),
            &QuadratureConfig::default(),
        )
        .unwrap();
        let diff = (v.covariance.matrix() - Matrix4::identity() * 0.5).amax();
        assert!(diff < 1e-6, "{diff:e}");
    }

    #[test]
    fn fully_reflected_mode_b_leaves_splitter_vacuum() {
        let model = reference(0.03, 1.0);
        let v = integrate_covariance(
            &model,
            &FilterPair::reference(),
            &QuadratureConfig::default(),
        )
        .unwrap();
        let m = v.covariance.matrix();
        assert!((m[(2, 2)] - 0.5).abs() < 1e-6 && (m[(3, 3)] - 0.5).abs() < 1e-6);
        assert!(v.covariance.c().amax() < 1e-6);
    }

    #[test]
    fn reversed_cross_sign_breaks_vacuum() {
        let mut p = SystemParams::three_mode_reference();
        for m in [&mut p.mode_a, &mut p.mode_b] {
            m.coupling = 0.0;
        }
        p.mode_c.as_mut().unwrap().coupling = 0.0;
        let model = LinearModel::build(&p, &FeedbackSpec::none()).unwrap();
        let noise = NoiseModel::new(&model);
        // On the mode-a resonance the cross terms are of order one.
        let w = 1.0;
        let good = block_spectrum(&model, &noise, w, CrossTermSign::Consistent).unwrap();
        let reversed = block_spectrum(&model, &noise, w, CrossTermSign::Reversed).unwrap();
        // The unfiltered output of an empty cavity is white vacuum.
        assert!((good[(XA, XA)].re - 0.5).abs() < 1e-12);
        assert!((reversed[(XA, XA)].re - 0.5).abs() > 0.1);
    }

    #[test]
    fn intracavity_thermal_oscillator() {
        let mut p = SystemParams::two_mode_reference();
        p.mode_a.coupling = 0.0;
        p.mode_b.coupling = 0.0;
        let model = LinearModel::build(&p, &FeedbackSpec::none()).unwrap();
        let (v, _) =
            integrate_intracavity_covariance(&model, &QuadratureConfig::default()).unwrap();
        let expected = p.n_th + 0.5;
        assert!(((v[(0, 0)] - expected) / expected).abs() < 1e-4);
        assert!(((v[(1, 1)] - expected) / expected).abs() < 1e-4);
        assert!((v[(2, 2)] - 0.5).abs() < 1e-6);
        let active = reference(0.05, 0.56);
        assert!(integrate_intracavity_covariance(&active, &QuadratureConfig::default()).is_err());
    }
}
