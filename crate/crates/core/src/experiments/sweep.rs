use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate_point, Scenario};
use crate::error::{Error, Result};
use crate::gaussian::MetricsRecord;
use crate::model::OpticalMode;

/// Names accepted by [`set_parameter`].
pub const AXIS_NAMES: [&str; 24] = [
    "gain",
    "reflectivity",
    "efficiency",
    "gamma_m",
    "n_th",
    "tau",
    "filter_a.center",
    "filter_a.tau",
    "filter_b.center",
    "filter_b.tau",
    "mode_a.kappa",
    "mode_a.detuning",
    "mode_a.coupling",
    "mode_b.kappa",
    "mode_b.detuning",
    "mode_b.coupling",
    "mode_c.kappa",
    "mode_c.detuning",
    "mode_c.coupling",
    "kappa",
    "loss.alpha_db_per_km",
    "loss.length_km",
    "loss.eta0",
    "loss.eta",
];

fn mode_field<'a>(scenario: &'a mut Scenario, mode: &str) -> Result<&'a mut OpticalMode> {
    match mode {
        "mode_a" => Ok(&mut scenario.params.mode_a),
        "mode_b" => Ok(&mut scenario.params.mode_b),
        "mode_c" => scenario
            .params
            .mode_c
            .as_mut()
            .ok_or_else(|| Error::invalid("mode_c", "the scenario has no mode c")),
        _ => unreachable!(),
    }
}

/// Sets the named parameter of `scenario`. `kappa` and `tau` set every mode
/// or both filters; `loss.eta` fixes η₀ with zero attenuation.
pub fn set_parameter(scenario: &mut Scenario, name: &str, value: f64) -> Result<()> {
    match name {
        "gain" => scenario.feedback.gain = value,
        "reflectivity" => scenario.feedback.reflectivity = value,
        "efficiency" => scenario.feedback.efficiency = value,
        "gamma_m" => scenario.params.gamma_m = value,
        "n_th" => scenario.params.n_th = value,
        "tau" => {
            scenario.filters.a.tau = value;
            scenario.filters.b.tau = value;
        }
        "filter_a.center" => scenario.filters.a.center = value,
        "filter_a.tau" => scenario.filters.a.tau = value,
        "filter_b.center" => scenario.filters.b.center = value,
        "filter_b.tau" => scenario.filters.b.tau = value,
        "kappa" => {
            scenario.params.mode_a.kappa = value;
            scenario.params.mode_b.kappa = value;
            if let Some(c) = scenario.params.mode_c.as_mut() {
                c.kappa = value;
            }
        }
        _ if name.starts_with("loss.") => {
            let loss = scenario
                .loss
                .as_mut()
                .ok_or_else(|| Error::invalid(name, "the scenario has no loss channel"))?;
            match &name[5..] {
                "alpha_db_per_km" => loss.alpha_db_per_km = value,
                "length_km" => loss.length_km = value,
                "eta0" => loss.eta0 = value,
                "eta" => {
                    loss.eta0 = value;
                    loss.alpha_db_per_km = 0.0;
                }
                _ => return Err(unknown_axis(name)),
            }
        }
        _ => {
            let Some((mode, field)) = name.split_once('.') else {
                return Err(unknown_axis(name));
            };
            if !matches!(mode, "mode_a" | "mode_b" | "mode_c") {
                return Err(unknown_axis(name));
            }
            let m = mode_field(scenario, mode)?;
            match field {
                "kappa" => m.kappa = value,
                "detuning" => m.detuning = value,
                "coupling" => m.coupling = value,
                _ => return Err(unknown_axis(name)),
            }
        }
    }
    Ok(())
}

fn unknown_axis(name: &str) -> Error {
    Error::invalid(
        "sweep.axes.name",
        format!(
            "unknown parameter `{name}`; expected one of {}",
            AXIS_NAMES.join(", ")
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Range {
        start: f64,
        stop: f64,
        points: usize,
        spacing: Spacing,
    },
    Values(Vec<f64>),
}

impl Grid {
    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        Grid::Range {
            start,
            stop,
            points,
            spacing: Spacing::Linear,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range {
                start,
                stop,
                points,
                spacing,
            } => {
                let n = *points;
                if n == 1 {
                    return vec![*start];
                }
                (0..n)
                    .map(|i| {
                        let f = i as f64 / (n - 1) as f64;
                        match spacing {
                            Spacing::Linear => start + (stop - start) * f,
                            Spacing::Log => (start.ln() + (stop.ln() - start.ln()) * f).exp(),
                        }
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if let Grid::Range {
            start,
            stop,
            points,
            spacing,
        } = self
        {
            if *points == 0 {
                return Err(Error::invalid(field, "a grid needs at least one point"));
            }
            if *spacing == Spacing::Log && !(*start > 0.0 && *stop > 0.0) {
                return Err(Error::invalid(field, "log grids need positive bounds"));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(Error::invalid(field, "empty grid"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(field, "grid values must be finite"));
        }
        let increasing = v.windows(2).all(|w| w[1] > w[0]);
        let decreasing = v.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::invalid(field, "grid must be strictly monotone"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub grid: Grid,
}

impl Axis {
    pub fn new(name: impl Into<String>, grid: Grid) -> Self {
        Self {
            name: name.into(),
            grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: Scenario,
    /// One or two axes; the last axis varies fastest.
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(1..=2).contains(&self.axes.len()) {
            return Err(Error::invalid("sweep.axes", "expected one or two axes"));
        }
        for (i, axis) in self.axes.iter().enumerate() {
            axis.grid.validate(&format!("sweep.axes[{i}]"))?;
            let mut probe = self.base.clone();
            set_parameter(&mut probe, &axis.name, axis.grid.values()[0])?;
        }
        Ok(())
    }

    /// Parameter tuples in row order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![vec![]];
        for axis in &self.axes {
            let values = axis.grid.values();
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn scenario_at(&self, values: &[f64]) -> Result<Scenario> {
        let mut s = self.base.clone();
        for (axis, v) in self.axes.iter().zip(values) {
            set_parameter(&mut s, &axis.name, *v)?;
        }
        Ok(s)
    }

    /// SHA-256 over the canonical JSON of the spec and the crate version.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(serde_json::to_vec(self).expect("spec serializes"));
        hex::encode(h.finalize())
    }
}

/// Outcome of one grid point. Unstable or failed points carry no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PointResult {
    pub metrics: Option<MetricsRecord>,
    pub lossless: Option<MetricsRecord>,
    pub stable: bool,
    pub margin: Option<f64>,
    pub quad_err: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub params: Vec<f64>,
    pub result: PointResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub axis_names: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub fingerprint: String,
    pub started_utc: String,
    pub finished_utc: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
    /// JSONL checkpoint appended after each batch of points.
    pub checkpoint: Option<PathBuf>,
    /// Reuse the points already stored in `checkpoint`.
    pub resume: bool,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<ResultTable> {
    run_sweep_with(spec, &SweepOptions::default())
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointEntry {
    index: usize,
    result: PointResult,
}

fn load_checkpoint(
    path: &PathBuf,
    fingerprint: &str,
    n: usize,
) -> Result<Vec<Option<PointResult>>> {
    let mut done = vec![None; n];
    let Ok(file) = File::open(path) else {
        return Ok(done);
    };
    let mut lines = BufReader::new(file).lines();
    let io_err = |e: std::io::Error| Error::io(path, e);
    if let Some(first) = lines.next() {
        let header: CheckpointHeader =
            serde_json::from_str(&first.map_err(io_err)?).map_err(|e| Error::io(path, e))?;
        if header.fingerprint != fingerprint {
            return Err(Error::invalid(
                "resume",
                "checkpoint was written by a different sweep",
            ));
        }
    }
    for line in lines {
        let line = line.map_err(io_err)?;
        // A torn final line from an interrupted run is ignored.
        if let Ok(entry) = serde_json::from_str::<CheckpointEntry>(&line) {
            if entry.index < n {
                done[entry.index] = Some(entry.result);
            }
        }
    }
    Ok(done)
}

/// Evaluates every grid point. Points are independent and run in parallel;
/// rows come back in grid order regardless of completion order.
pub fn run_sweep_with(spec: &SweepSpec, options: &SweepOptions) -> Result<ResultTable> {
    spec.validate()?;
    let started_utc = chrono::Utc::now().to_rfc3339();
    let fingerprint = spec.fingerprint();
    let points = spec.points();
    let scenarios = points
        .iter()
        .map(|p| spec.scenario_at(p))
        .collect::<Result<Vec<_>>>()?;

    let mut results: Vec<Option<PointResult>> = match (&options.checkpoint, options.resume) {
        (Some(path), true) => load_checkpoint(path, &fingerprint, points.len())?,
        _ => vec![None; points.len()],
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;

    let mut writer = match &options.checkpoint {
        Some(path) => {
            let fresh = !(options.resume && path.exists());
            let mut f = OpenOptions::new()
                .create(true)
                .append(!fresh)
                .write(true)
                .truncate(fresh)
                .open(path)
                .map_err(|e| Error::invalid("checkpoint", e.to_string()))?;
            if fresh {
                let header = serde_json::to_string(&CheckpointHeader {
                    fingerprint: fingerprint.clone(),
                })
                .expect("header serializes");
                writeln!(f, "{header}").map_err(|e| Error::invalid("checkpoint", e.to_string()))?;
            }
            Some(f)
        }
        None => None,
    };

    let pending: Vec<usize> = (0..points.len())
        .filter(|i| results[*i].is_none())
        .collect();
    let batch = pool.current_num_threads().max(1) * 8;
    for chunk in pending.chunks(batch) {
        let computed: Vec<(usize, PointResult)> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&i| (i, evaluate_point(&scenarios[i])))
                .collect()
        });
        if let Some(f) = writer.as_mut() {
            for (index, result) in &computed {
                let line = serde_json::to_string(&CheckpointEntry {
                    index: *index,
                    result: result.clone(),
                })
                .expect("entry serializes");
                writeln!(f, "{line}").map_err(|e| Error::invalid("checkpoint", e.to_string()))?;
            }
            f.flush()
                .map_err(|e| Error::invalid("checkpoint", e.to_string()))?;
        }
        for (i, r) in computed {
            results[i] = Some(r);
        }
    }
    if let Some(path) = &options.checkpoint {
        drop(writer);
        let _ = fs::remove_file(path);
    }

    Ok(ResultTable {
        axis_names: spec.axes.iter().map(|a| a.name.clone()).collect(),
        rows: points
            .into_iter()
            .zip(results)
            .map(|(params, r)| ResultRow {
                params,
                result: r.expect("every point evaluated"),
            })
            .collect(),
        fingerprint,
        started_utc,
        finished_utc: chrono::Utc::now().to_rfc3339(),
    })
}
