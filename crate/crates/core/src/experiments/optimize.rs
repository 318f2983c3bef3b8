//! One-dimensional maximization of a metric over the feedback gain: a coarse
//! grid brackets the maximum, golden-section search refines it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::set_parameter;
use super::{simulate, Scenario};
use crate::error::{Error, Result};
use crate::model::{heating_cancellation_gain, FeedbackScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Logarithmic negativity E_N.
    #[default]
    #[serde(rename = "e_n")]
    Entanglement,
    /// Teleportation fidelity F.
    Fidelity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeOptions {
    pub parameter: String,
    pub lower: f64,
    pub upper: f64,
    pub grid_points: usize,
    /// Final bracket width.
    pub tolerance: f64,
    pub objective: Objective,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            parameter: "gain".into(),
            lower: 0.0,
            upper: 0.12,
            grid_points: 64,
            tolerance: 1e-4,
            objective: Objective::Entanglement,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::invalid(
                "optimize.lower",
                "bounds must be finite with lower < upper",
            ));
        }
        if self.grid_points < 3 {
            return Err(Error::invalid(
                "optimize.grid_points",
                "need at least 3 points",
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("optimize.tolerance", "must be > 0"));
        }
        Ok(())
    }
}

/// One golden-section iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketStep {
    pub lower: f64,
    pub upper: f64,
    pub x1: f64,
    pub f1: Option<f64>,
    pub x2: f64,
    pub f2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub argmax: f64,
    pub value: f64,
    /// Coarse grid samples; `None` marks unstable or failed points.
    pub grid: Vec<(f64, Option<f64>)>,
    pub history: Vec<BracketStep>,
    pub evaluations: usize,
    /// Heating-cancellation gain of the base scenario, when defined.
    pub cancellation_gain: Option<f64>,
    /// |g* − g_c| / g_c.
    pub cancellation_offset: Option<f64>,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn better(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x > y,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Maximizes `f` on [lower, upper]. `f` returns `None` where the objective is
/// undefined (unstable points); those never win.
pub fn maximize<F>(f: F, options: &OptimizeOptions) -> Result<Optimum>
where
    F: Fn(f64) -> Option<f64> + Sync,
{
    options.validate()?;
    let n = options.grid_points;
    let step = (options.upper - options.lower) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| options.lower + step * i as f64).collect();
    let grid: Vec<(f64, Option<f64>)> = xs
        .par_iter()
        .map(|&x| (x, f(x).filter(|v| v.is_finite())))
        .collect();
    let mut evaluations = n;

    let best = (0..n)
        .filter(|&i| grid[i].1.is_some())
        .reduce(|a, b| if better(grid[b].1, grid[a].1) { b } else { a })
        .ok_or(Error::NoStableRegion)?;
    let (mut argmax, mut value) = (grid[best].0, grid[best].1.unwrap());

    let mut lo = xs[best.saturating_sub(1)];
    let mut hi = xs[(best + 1).min(n - 1)];
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    evaluations += 2;
    let mut history = Vec::new();
    while hi - lo > options.tolerance {
        history.push(BracketStep {
            lower: lo,
            upper: hi,
            x1,
            f1,
            x2,
            f2,
        });
        if better(f1, f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        evaluations += 1;
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if better(fx, Some(value)) {
            argmax = x;
            value = fx.unwrap();
        }
    }
    Ok(Optimum {
        argmax,
        value,
        grid,
        history,
        evaluations,
        cancellation_gain: None,
        cancellation_offset: None,
    })
}

/// Maximizes the chosen metric of the delivered state (after loss, when the
/// scenario has a loss channel) over `options.parameter`.
pub fn optimize_gain(base: &Scenario, options: &OptimizeOptions) -> Result<Optimum> {
    base.validate()?;
    set_parameter(&mut base.clone(), &options.parameter, options.lower)?;
    let objective = |x: f64| {
        let mut s = base.clone();
        set_parameter(&mut s, &options.parameter, x).ok()?;
        let sim = simulate(&s).ok()?;
        Some(match options.objective {
            Objective::Entanglement => sim.metrics.e_n,
            Objective::Fidelity => sim.metrics.fidelity,
        })
    };
    let mut opt = maximize(objective, options)?;
    if options.parameter == "gain" && base.feedback.scheme != FeedbackScheme::None {
        if let Ok(gc) = heating_cancellation_gain(&base.params, &base.feedback) {
            opt.cancellation_gain = Some(gc);
            opt.cancellation_offset = Some((opt.argmax - gc).abs() / gc);
        }
    }
    Ok(opt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_quadratic_maximizer() {
        let opts = OptimizeOptions::default();
        let opt = maximize(|x| Some(1.0 - (x - 0.0371).powi(2)), &opts).unwrap();
        assert!((opt.argmax - 0.0371).abs() < 1e-4, "{}", opt.argmax);
        assert_eq!(opt.grid.len(), 64);
        assert!(!opt.history.is_empty());
    }

    #[test]
    fn maximum_at_the_boundary() {
        let opts = OptimizeOptions::default();
        let opt = maximize(|x| Some(-x), &opts).unwrap();
        assert!(opt.argmax < 1e-4);
        assert_eq!(opt.value, 0.0);
    }

    #[test]
    fn skips_undefined_points() {
        let opts = OptimizeOptions::default();
        let opt = maximize(|x| (x < 0.05).then_some(x), &opts).unwrap();
        assert!(opt.argmax < 0.05 && opt.argmax > 0.048);
        let none = maximize(|_| None, &opts).unwrap_err();
        assert_eq!(none, Error::NoStableRegion);
    }
}
