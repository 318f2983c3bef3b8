//! Noise sources, their coupling into the cavity equations and into the
//! output fields, and the two-frequency correlator blocks built from them.
//!
//! Every noise is expanded on a set of independent white sources ξ_k with
//! symmetrized spectra N_k: ⟨{ξ_k(ω), ξ_l(ω′)}⟩/2 = N_k δ_kl δ(ω + ω′).
//! The intracavity quadratures obey (iω + A) R(ω) = −B(ω) ξ(ω) with
//! B(ω) = B₀ + iω B₁; B₁ carries the derivative action of the cold-damping
//! loop. The output quadratures are
//! R_out = T_t (P R − S_in ξ) − T_r S_bs ξ,
//! where S_in selects the cavity input noise, S_bs the vacuum entering the
//! free beam-splitter port, and T_t, T_r are the transmitted and reflected
//! beam-splitter amplitudes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::model::drift::{LinearModel, P, XA, XB, XC, YB, YC};
use crate::model::params::FeedbackScheme;

/// Labels of the two-mode sources in order. Sources a configuration does not
/// use keep their slot with a zero coupling column.
pub const TWO_MODE_SOURCES: [&str; 8] = [
    "zeta", "X_in_a", "Y_in_a", "X_in_b", "Y_in_b", "X_s", "Y_s", "Y_v",
];
/// Labels of the three-mode sources in order.
pub const THREE_MODE_SOURCES: [&str; 8] = [
    "zeta", "X_in_a", "Y_in_a", "X_in_b", "Y_in_b", "X_in_c", "Y_in_c", "Y_v",
];

const ZETA: usize = 0;
const X_S: usize = 5;
const Y_S: usize = 6;
const Y_V: usize = 7;

/// Linear noise description of a [`LinearModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Symmetrized spectra N of the sources.
    pub spectra: DVector<f64>,
    pub b0: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    /// B₀ without the feedback loop.
    pub b0_open_loop: DMatrix<f64>,
    /// Extraction amplitudes P: 1 on the mechanical rows, √(2κ_j) on mode j.
    pub extraction: DVector<f64>,
    /// S_in
    pub cavity_input: DMatrix<f64>,
    /// S_bs
    pub splitter_input: DMatrix<f64>,
    /// Diagonal of T_t.
    pub transmitted: DVector<f64>,
    /// Diagonal of T_r.
    pub reflected: DVector<f64>,
}

impl NoiseModel {
    pub fn new(model: &LinearModel) -> Self {
        let dim = model.dim;
        let params = &model.params;
        let fb = &model.feedback;
        let n_src = 8;

        let mut spectra = DVector::from_element(n_src, 0.5);
        spectra[ZETA] = params.thermal_diffusion();

        let mut b0 = DMatrix::zeros(dim, n_src);
        let mut b1 = DMatrix::zeros(dim, n_src);
        let mut extraction = DVector::zeros(dim);
        let mut cavity_input = DMatrix::zeros(dim, n_src);
        b0[(P, ZETA)] = 1.0;
        extraction[0] = 1.0;
        extraction[1] = 1.0;

        let mut optical = vec![(XA, &params.mode_a), (XB, &params.mode_b)];
        if let Some(c) = params.mode_c.as_ref() {
            optical.push((XC, c));
        }
        for (row, mode) in optical {
            let amp = (2.0 * mode.kappa).sqrt();
            // Sources follow the quadrature order, offset by the ζ slot.
            let src = row - 1;
            b0[(row, src)] = amp;
            b0[(row + 1, src + 1)] = amp;
            extraction[row] = amp;
            extraction[row + 1] = amp;
            cavity_input[(row, src)] = 1.0;
            cavity_input[(row + 1, src + 1)] = 1.0;
        }

        let mut transmitted = DVector::from_element(dim, 1.0);
        let mut reflected = DVector::zeros(dim);
        let mut splitter_input = DMatrix::zeros(dim, n_src);

        let detected = match fb.scheme {
            FeedbackScheme::ModeBHomodyne => Some((YB, &params.mode_b)),
            FeedbackScheme::ThirdMode => params.mode_c.as_ref().map(|c| (YC, c)),
            FeedbackScheme::None => None,
        };
        if fb.scheme == FeedbackScheme::ModeBHomodyne {
            let (t, r) = (fb.transmissivity(), fb.reflectivity);
            transmitted[XB] = t;
            transmitted[YB] = t;
            reflected[XB] = r;
            reflected[YB] = r;
            splitter_input[(XB, X_S)] = 1.0;
            splitter_input[(YB, Y_S)] = 1.0;
        }
        let b0_open_loop = b0.clone();
        if let Some((y_row, mode)) = detected {
            let g_eff = fb.effective_gain();
            let root = (2.0 * mode.kappa).sqrt();
            let y_src = y_row - 1;
            // −G_cd d/dt of the detected signal Y_out/√(2κ), with
            // Y_out = √(2κ) Y − Y_in and d/dt → −iω.
            b0[(P, y_src)] += -g_eff * root;
            b1[(P, y_src)] += -g_eff / root;
            if fb.scheme == FeedbackScheme::ModeBHomodyne {
                b1[(P, Y_S)] += fb.efficiency.sqrt() * fb.transmissivity() * fb.gain / root;
            }
            b1[(P, Y_V)] += (1.0 - fb.efficiency).sqrt() * fb.gain / root;
        }

        Self {
            spectra,
            b0,
            b1,
            b0_open_loop,
            extraction,
            cavity_input,
            splitter_input,
            transmitted,
            reflected,
        }
    }

    pub fn sources(&self) -> usize {
        self.spectra.len()
    }

    /// B(ω) = B₀ + iω B₁.
    pub fn input_matrix(&self, omega: f64) -> DMatrix<Complex64> {
        self.b0
            .zip_map(&self.b1, |a, b| Complex64::new(a, omega * b))
    }

    /// Diffusion matrix d of the open-loop system.
    pub fn white_diffusion(&self) -> DMatrix<f64> {
        &self.b0_open_loop * DMatrix::from_diagonal(&self.spectra) * self.b0_open_loop.transpose()
    }
}

/// Two-frequency correlator blocks ⟨·(ω)·(ω′)ᵀ⟩ of the output assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlocks {
    /// D_fb(ω, ω′) = B(ω) N B(ω′)ᵀ
    pub diffusion: DMatrix<Complex64>,
    /// Open-loop part d.
    pub white: DMatrix<f64>,
    /// D₁ = S_in N S_inᵀ
    pub d1: DMatrix<Complex64>,
    /// D₂(ω) = B(ω) N S_inᵀ
    pub d2: DMatrix<Complex64>,
    /// D₃ = S_bs N S_bsᵀ
    pub d3: DMatrix<Complex64>,
    /// D₄(ω) = B(ω) N S_bsᵀ
    pub d4: DMatrix<Complex64>,
}

impl NoiseBlocks {
    /// d_fb(ω, ω′) = D_fb − d.
    pub fn feedback_part(&self) -> DMatrix<Complex64> {
        &self.diffusion - self.white.map(|v| Complex64::new(v, 0.0))
    }
}

fn complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn noise_blocks(noise: &NoiseModel, omega: f64, omega_prime: f64) -> NoiseBlocks {
    let n = complex(&DMatrix::from_diagonal(&noise.spectra));
    let b = noise.input_matrix(omega);
    let b_prime = noise.input_matrix(omega_prime);
    let s_in = complex(&noise.cavity_input);
    let s_bs = complex(&noise.splitter_input);
    let bn = &b * &n;
    NoiseBlocks {
        diffusion: &bn * b_prime.transpose(),
        white: noise.white_diffusion(),
        d1: &s_in * &n * s_in.transpose(),
        d2: &bn * s_in.transpose(),
        d3: &s_bs * &n * s_bs.transpose(),
        d4: &bn * s_bs.transpose(),
    }
}
