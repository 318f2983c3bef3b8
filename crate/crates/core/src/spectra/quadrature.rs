//! Globally adaptive Gauss–Kronrod (7/15) quadrature of vector-valued
//! integrands over the real line.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integration tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Target error relative to the largest entry of the integral.
    pub rel_tol: f64,
    /// Absolute error floor.
    pub abs_tol: f64,
    /// Half-width of the refined window around each filter center, in units
    /// of the filter inverse bandwidth.
    pub window: f64,
    /// Maximum number of interval bisections.
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            window: 200.0,
            max_subdivisions: 20_000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid("quadrature.rel_tol", "must lie in (0, 1)"));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(Error::invalid("quadrature.abs_tol", "must be >= 0"));
        }
        if !(self.window > 0.0) {
            return Err(Error::invalid("quadrature.window", "must be > 0"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("quadrature.max_subdivisions", "must be > 0"));
        }
        Ok(())
    }
}

/// Integral estimate with its error bound (max-norm over entries).
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub value: Vec<f64>,
    pub error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Map from the unit parameter t ∈ (0, 1] to a half-line.
#[derive(Debug, Clone, Copy)]
enum Domain {
    Finite,
    /// ω = origin + (1 − t)/t
    Upper(f64),
    /// ω = origin − (1 − t)/t
    Lower(f64),
}

impl Domain {
    fn map(self, x: f64) -> (f64, f64) {
        match self {
            Domain::Finite => (x, 1.0),
            Domain::Upper(o) => (o + (1.0 - x) / x, 1.0 / (x * x)),
            Domain::Lower(o) => (o - (1.0 - x) / x, 1.0 / (x * x)),
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    domain: Domain,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64, domain: Domain) -> Result<Segment>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<Vec<f64>> {
        let (w, jac) = domain.map(x);
        let mut v = f(w)?;
        v.iter_mut().for_each(|e| *e *= jac);
        Ok(v)
    };
    let mid = eval(center)?;
    let n = mid.len();
    let mut kronrod: Vec<f64> = mid.iter().map(|v| v * WGK[7]).collect();
    let mut gauss: Vec<f64> = mid.iter().map(|v| v * WG[3]).collect();
    for (k, x) in XGK.iter().take(7).enumerate() {
        let lo = eval(center - half * x)?;
        let hi = eval(center + half * x)?;
        for i in 0..n {
            let s = lo[i] + hi[i];
            kronrod[i] += WGK[k] * s;
            if k % 2 == 1 {
                gauss[i] += WG[k / 2] * s;
            }
        }
    }
    let mut error = 0.0f64;
    for i in 0..n {
        kronrod[i] *= half;
        error = error.max((kronrod[i] - gauss[i] * half).abs());
    }
    Ok(Segment {
        a,
        b,
        domain,
        value: kronrod,
        error,
    })
}

/// Integrates `f` over the whole real line. `breakpoints` split the line into
/// finite pieces (sorted and deduplicated here); the two outer tails are
/// mapped onto finite intervals.
pub fn integrate_real_line<F>(
    f: F,
    breakpoints: &[f64],
    config: &QuadratureConfig,
) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let mut points: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite())
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1.0));
    if points.is_empty() {
        points.push(0.0);
    }
    let mut initial = vec![(0.0, 1.0, Domain::Lower(points[0]))];
    initial.extend(points.windows(2).map(|w| (w[0], w[1], Domain::Finite)));
    initial.push((0.0, 1.0, Domain::Upper(*points.last().unwrap())));
    adaptive(&f, &initial, config)
}

/// Integrates `f` over the finite interval [a, b].
pub fn integrate_interval<F>(f: F, a: f64, b: f64, config: &QuadratureConfig) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    adaptive(&f, &[(a, b, Domain::Finite)], config)
}

fn adaptive<F>(
    f: &F,
    initial: &[(f64, f64, Domain)],
    config: &QuadratureConfig,
) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let mut heap = BinaryHeap::new();
    for &(a, b, d) in initial {
        heap.push(gk15(f, a, b, d)?);
    }
    let mut evaluations = 15 * initial.len();
    let mut subdivisions = 0;
    loop {
        let n = heap.peek().map_or(0, |s| s.value.len());
        let mut total = vec![0.0; n];
        let mut error = 0.0;
        for s in heap.iter() {
            for (t, v) in total.iter_mut().zip(&s.value) {
                *t += v;
            }
            error += s.error;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = config.abs_tol.max(config.rel_tol * scale);
        if error <= target {
            return Ok(Quadrature {
                value: total,
                error,
                evaluations,
                subdivisions,
            });
        }
        if subdivisions >= config.max_subdivisions {
            return Err(Error::ToleranceNotMet {
                estimate: error,
                target,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(gk15(f, worst.a, mid, worst.domain)?);
        heap.push(gk15(f, mid, worst.b, worst.domain)?);
        evaluations += 30;
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate_interval(
            |x| Ok(vec![x.powi(10), 1.0]),
            -1.0,
            2.0,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((q.value[0] - (2f64.powi(11) + 1.0) / 11.0).abs() < 1e-12);
        assert!((q.value[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn narrow_lorentzian_over_real_line() {
        let w = 1e-4;
        let f = |x: f64| Ok(vec![w / PI / ((x - 1.0).powi(2) + w * w)]);
        let q =
            integrate_real_line(f, &[1.0 - w, 1.0, 1.0 + w], &QuadratureConfig::default()).unwrap();
        assert!((q.value[0] - 1.0).abs() < 1e-6, "{}", q.value[0]);
        assert!(q.error < 1e-6);
    }

    #[test]
    fn gaussian_without_breakpoints() {
        let q = integrate_real_line(
            |x| Ok(vec![(-x * x).exp()]),
            &[],
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((q.value[0] - PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn stalls_report_tolerance_not_met() {
        let cfg = QuadratureConfig {
            max_subdivisions: 3,
            ..Default::default()
        };
        let err = integrate_interval(|x| Ok(vec![x.sqrt().recip()]), 0.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::ToleranceNotMet {
                subdivisions: 3,
                ..
            }
        ));
    }
}
