use proptest::prelude::*;

use optofeedback::experiments::{simulate, LossSpec, Scenario};
use optofeedback::model::{is_stable, FeedbackSpec, LinearModel, SystemParams};
use optofeedback::spectra::{
    integrate_covariance, integrate_interval, integrate_real_line, output_spectral_covariance,
    CrossTermSign, FilterPair, QuadratureConfig,
};

/// Optical rows of the full output row space.
const OPTICAL: std::ops::Range<usize> = 2..6;

fn abs_optical(
    model: &LinearModel,
    filters: &FilterPair,
    w: f64,
) -> optofeedback::Result<Vec<f64>> {
    let s = output_spectral_covariance(model, filters, w, CrossTermSign::Consistent)?;
    let mut out = Vec::with_capacity(16);
    for i in OPTICAL {
        for j in OPTICAL {
            out.push(s.symmetrized[(i, j)].abs());
        }
    }
    Ok(out)
}

#[test]
fn filter_peaks_hold_the_spectral_mass() {
    let scenario = Scenario::two_mode_reference();
    let model = scenario.model().unwrap();
    let filters = scenario.filters;
    let quad = QuadratureConfig {
        rel_tol: 1e-7,
        ..Default::default()
    };
    let half = 100.0 / filters.a.tau;
    let mut breakpoints = vec![0.0];
    for c in [-1.0, 1.0] {
        for k in [1.0, 10.0, 100.0, 1000.0] {
            breakpoints.push(c - k / filters.a.tau);
            breakpoints.push(c + k / filters.a.tau);
        }
    }
    let f = |w| abs_optical(&model, &filters, w);
    let total = integrate_real_line(f, &breakpoints, &quad).unwrap();
    let mut inside = [0.0; 16];
    for c in [-1.0, 1.0] {
        let q = integrate_interval(f, c - half, c + half, &quad).unwrap();
        for (acc, v) in inside.iter_mut().zip(q.value) {
            *acc += v;
        }
    }
    // Same-mode X/Y correlations integrate to ~1e-7 of the diagonal; their
    // integrands are dispersive and the mass fraction is not meaningful.
    let v = integrate_covariance(&model, &filters, &quad)
        .unwrap()
        .covariance;
    let largest = v.matrix().amax();
    for (k, (inner, all)) in inside.iter().zip(&total.value).enumerate() {
        if v.matrix()[(k / 4, k % 4)].abs() > 1e-4 * largest {
            assert!(
                inner / all >= 0.99,
                "entry {k}: {:.5} of the mass inside",
                inner / all
            );
        }
    }
}

#[test]
fn tighter_tolerance_stays_within_error_estimate() {
    let scenario = Scenario::two_mode_reference();
    let model = scenario.model().unwrap();
    let coarse = QuadratureConfig::default();
    let fine = QuadratureConfig {
        rel_tol: coarse.rel_tol / 2.0,
        ..coarse
    };
    let a = integrate_covariance(&model, &scenario.filters, &coarse).unwrap();
    let b = integrate_covariance(&model, &scenario.filters, &fine).unwrap();
    let change = (a.covariance.matrix() - b.covariance.matrix()).amax();
    assert!(
        change <= a.error,
        "change {change:.3e} vs estimate {:.3e}",
        a.error
    );
    assert!(b.error <= a.error);
}

/// First coupling on `grid` at which the model is unstable.
fn flip_point(step: f64, stop: f64) -> f64 {
    let mut params = SystemParams::two_mode_reference();
    let n = (stop / step).round() as usize;
    for k in 0..=n {
        params.mode_b.coupling = k as f64 * step;
        let model = LinearModel::build(&params, &FeedbackSpec::none()).unwrap();
        if !is_stable(&model).unwrap().stable() {
            return params.mode_b.coupling;
        }
    }
    panic!("stable up to {stop}");
}

#[test]
fn instability_onset_is_resolution_limited() {
    let coarse = flip_point(0.01, 0.5);
    let fine = flip_point(0.001, 0.5);
    assert!(
        coarse >= fine && coarse - fine < 0.01 + 1e-12,
        "{coarse} vs {fine}"
    );
}

#[test]
fn fidelity_peaks_when_filter_b_sits_on_its_sideband() {
    let base = Scenario::two_mode_reference().with_loss(LossSpec::reference());
    let centers: Vec<f64> = (0..=16).map(|k| -1.2 + 0.025 * k as f64).collect();
    let fidelity: Vec<f64> = centers
        .iter()
        .map(|&c| {
            let mut s = base.clone();
            s.filters.b.center = c;
            simulate(&s).unwrap().metrics.fidelity
        })
        .collect();
    let best = (0..centers.len())
        .max_by(|&i, &j| fidelity[i].total_cmp(&fidelity[j]))
        .unwrap();
    assert!(
        (centers[best] + 1.0).abs() <= 0.025 + 1e-12,
        "peak at {}",
        centers[best]
    );
    assert!(fidelity[best] > fidelity[0] && fidelity[best] > fidelity[centers.len() - 1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filtered_states_are_physical(gain in 0.0f64..0.12, reflectivity in 0.0f64..0.95, efficiency in 0.5f64..1.0) {
        let mut s = Scenario::two_mode_reference();
        s.feedback = FeedbackSpec::mode_b(gain, reflectivity, efficiency);
        let stable = is_stable(&s.model().unwrap()).unwrap().stable();
        prop_assume!(stable);
        let sim = simulate(&s).unwrap();
        prop_assert!(sim.covariance.uncertainty_margin() >= -1e-9);
        prop_assert!(sim.metrics.fidelity <= sim.metrics.fidelity_bound + 1e-9);
        let lossy = simulate(&s.with_loss(LossSpec::reference())).unwrap();
        prop_assert!(lossy.lossy_covariance.unwrap().uncertainty_margin() >= -1e-9);
        prop_assert!(lossy.metrics.e_n <= sim.metrics.e_n + 1e-12);
    }

    #[test]
    fn symmetrized_integrand_is_real_symmetric(w in -3.0f64..3.0, gain in 0.0f64..0.1) {
        let s = Scenario::two_mode_reference().with_gain(gain);
        let model = s.model().unwrap();
        prop_assume!(is_stable(&model).unwrap().stable());
        let spec = output_spectral_covariance(&model, &s.filters, w, CrossTermSign::Consistent).unwrap();
        prop_assert!(spec.residual < 1e-8);
    }
}
