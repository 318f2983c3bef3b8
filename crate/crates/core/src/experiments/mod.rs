//! Single-point simulation, parameter sweeps, gain optimization and
//! validation against independent oracles.

mod io;
mod optimize;
mod oracle;
mod sweep;
mod validate;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    apply_loss, transmissivity, CovarianceMatrix, FidelityForm, LossBase, MetricsRecord,
};
use crate::model::{is_stable, FeedbackSpec, LinearModel, SystemParams};
use crate::spectra::{integrate_covariance, FilterPair, QuadratureConfig};

pub use io::{
    csv_header, render_csv, write_atomic, write_sweep, DerivedQuantities, PointError, SweepFiles,
    SweepMetadata, CSV_METRIC_COLUMNS,
};
pub use optimize::{maximize, optimize_gain, BracketStep, Objective, OptimizeOptions, Optimum};
pub use oracle::{lyapunov_oracle, solve_lyapunov, white_diffusion};
pub use sweep::{
    run_sweep, run_sweep_with, set_parameter, Axis, Grid, PointResult, ResultRow, ResultTable,
    Spacing, SweepOptions, SweepSpec, AXIS_NAMES,
};
pub use validate::{validate_suite, Check, CheckStatus, ValidationOptions, ValidationReport};

/// Free-space transmission channel applied to both outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub alpha_db_per_km: f64,
    pub length_km: f64,
    pub eta0: f64,
    #[serde(default)]
    pub base: LossBase,
}

impl LossSpec {
    /// 0.005 dB/km over 20 km with η₀ = 0.9.
    pub fn reference() -> Self {
        Self {
            alpha_db_per_km: 0.005,
            length_km: 20.0,
            eta0: 0.9,
            base: LossBase::E,
        }
    }

    pub fn eta(&self) -> f64 {
        transmissivity(self.alpha_db_per_km, self.length_km, self.eta0, self.base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_db_per_km >= 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(Error::invalid(
                "loss.alpha_db_per_km",
                "must be finite and >= 0",
            ));
        }
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return Err(Error::invalid("loss.length_km", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.eta0) {
            return Err(Error::invalid("loss.eta0", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Everything needed to evaluate one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub feedback: FeedbackSpec,
    pub filters: FilterPair,
    pub loss: Option<LossSpec>,
    pub quadrature: QuadratureConfig,
    pub fidelity_form: FidelityForm,
}

impl Scenario {
    /// Two-mode homodyne-feedback operating point at (g_cd, r) = (0.047, 0.56).
    pub fn two_mode_reference() -> Self {
        Self {
            params: SystemParams::two_mode_reference(),
            feedback: FeedbackSpec::mode_b(0.047, 0.56, 0.92),
            filters: FilterPair::reference(),
            loss: None,
            quadrature: QuadratureConfig::default(),
            fidelity_form: FidelityForm::SquareRoot,
        }
    }

    /// Three-mode operating point with ideal detection.
    pub fn three_mode_reference() -> Self {
        Self {
            params: SystemParams::three_mode_reference(),
            feedback: FeedbackSpec::third_mode(0.082, 1.0),
            ..Self::two_mode_reference()
        }
    }

    pub fn with_loss(mut self, loss: LossSpec) -> Self {
        self.loss = Some(loss);
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.feedback.gain = gain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.feedback.validate()?;
        self.filters.validate()?;
        self.quadrature.validate()?;
        if let Some(loss) = &self.loss {
            loss.validate()?;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<LinearModel> {
        LinearModel::build(&self.params, &self.feedback)
    }
}

/// Result of [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    /// Filtered output covariance before transmission.
    pub covariance: CovarianceMatrix,
    /// Covariance after the loss channel, when one is configured.
    pub lossy_covariance: Option<CovarianceMatrix>,
    /// Metrics of the state delivered to the parties (after loss if any).
    pub metrics: MetricsRecord,
    pub lossless_metrics: MetricsRecord,
    pub eta: Option<f64>,
    pub quad_error: f64,
    pub evaluations: usize,
}

/// Builds the model, checks stability, integrates the filtered covariance
/// and evaluates every metric.
pub fn simulate(scenario: &Scenario) -> Result<Simulation> {
    scenario.validate()?;
    let model = scenario.model()?;
    let filtered = integrate_covariance(&model, &scenario.filters, &scenario.quadrature)?;
    let margin = filtered.stability.margin;
    let lossless_metrics =
        MetricsRecord::evaluate(&filtered.covariance, margin, scenario.fidelity_form)?;
    let eta = scenario.loss.map(|l| l.eta());
    let lossy_covariance = eta.map(|eta| apply_loss(&filtered.covariance, eta));
    let metrics = match &lossy_covariance {
        Some(v) => MetricsRecord::evaluate(v, margin, scenario.fidelity_form)?,
        None => lossless_metrics,
    };
    Ok(Simulation {
        covariance: filtered.covariance,
        lossy_covariance,
        metrics,
        lossless_metrics,
        eta,
        quad_error: filtered.error,
        evaluations: filtered.evaluations,
    })
}

/// Evaluates one point, recording failures instead of returning them.
pub fn evaluate_point(scenario: &Scenario) -> PointResult {
    let start = Instant::now();
    let mut result = PointResult::default();
    let stability = scenario
        .validate()
        .and_then(|_| scenario.model())
        .and_then(|m| is_stable(&m));
    match stability {
        Ok(report) => {
            result.margin = Some(report.margin);
            result.stable = report.stable();
            if report.stable() {
                match simulate(scenario) {
                    Ok(sim) => {
                        result.metrics = Some(sim.metrics);
                        result.lossless = Some(sim.lossless_metrics);
                        result.quad_err = Some(sim.quad_error);
                    }
                    Err(e) => result.error = Some(e.to_string()),
                }
            }
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result.wall_time_s = start.elapsed().as_secs_f64();
    result
}
