//! Sweep result files: a CSV table plus a JSON sidecar describing how it was
//! produced.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sweep::{Axis, PointResult, ResultTable, SweepSpec};
use super::Scenario;
use crate::error::{Error, Result};
use crate::gaussian::MetricsRecord;
use crate::model::{heating_cancellation_gain, FeedbackScheme};

/// Columns that follow the axis columns, in this order. Consumers depend on
/// the exact names.
pub const CSV_METRIC_COLUMNS: [&str; 10] = [
    "E_N", "F", "F_bound", "nu", "E_BA", "E_AB", "two_way", "stable", "margin", "quad_err",
];

pub const METADATA_VERSION: u32 = 1;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, "not a file path"))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn csv_header(axis_names: &[String]) -> Vec<String> {
    axis_names
        .iter()
        .cloned()
        .chain(CSV_METRIC_COLUMNS.iter().map(|c| c.to_string()))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn metric_fields(m: Option<&MetricsRecord>, r: &PointResult) -> Vec<String> {
    let mut out = match m {
        Some(m) => vec![
            m.e_n.to_string(),
            m.fidelity.to_string(),
            m.fidelity_bound.to_string(),
            m.nu.to_string(),
            m.steering_ba.to_string(),
            m.steering_ab.to_string(),
            m.two_way.to_string(),
        ],
        None => vec![String::new(); 7],
    };
    out.push(r.stable.to_string());
    out.push(opt(r.margin));
    out.push(opt(r.quad_err));
    out
}

/// Renders the table as CSV. `lossless` selects the metrics before the loss
/// channel instead of the delivered ones.
pub fn render_csv(table: &ResultTable, lossless: bool) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::io(Path::new("<csv>"), e);
    w.write_record(csv_header(&table.axis_names))
        .map_err(csv_err)?;
    for row in &table.rows {
        let metrics = if lossless {
            row.result.lossless.as_ref()
        } else {
            row.result.metrics.as_ref()
        };
        let record: Vec<String> = row
            .params
            .iter()
            .map(|p| p.to_string())
            .chain(metric_fields(metrics, &row.result))
            .collect();
        w.write_record(record).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::io(Path::new("<csv>"), e))
}

/// Quantities the plotting layer derives its overlays from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    pub coupling_b: f64,
    pub coupling_c: Option<f64>,
    pub efficiency: f64,
    pub reflectivity: f64,
    pub cancellation_gain: Option<f64>,
    pub eta: Option<f64>,
}

impl DerivedQuantities {
    pub fn of(s: &Scenario) -> Self {
        let cancellation_gain = match s.feedback.scheme {
            FeedbackScheme::None => None,
            _ => heating_cancellation_gain(&s.params, &s.feedback).ok(),
        };
        Self {
            coupling_b: s.params.mode_b.coupling,
            coupling_c: s.params.mode_c.map(|c| c.coupling),
            efficiency: s.feedback.efficiency,
            reflectivity: s.feedback.reflectivity,
            cancellation_gain,
            eta: s.loss.map(|l| l.eta()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub index: usize,
    pub params: Vec<f64>,
    pub message: String,
}

/// Sidecar metadata written next to every result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub format_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub spec_sha256: String,
    pub config_sha256: Option<String>,
    pub started_utc: String,
    pub finished_utc: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub axes: Vec<Axis>,
    pub scenario: Scenario,
    pub derived: DerivedQuantities,
    pub total_point_time_s: f64,
    pub max_point_time_s: f64,
    pub unstable_points: usize,
    pub errors: Vec<PointError>,
    pub lossless_csv: Option<String>,
    /// Verbatim run configuration, when the sweep came from a config file.
    pub config: Option<serde_json::Value>,
}

impl SweepMetadata {
    pub fn new(spec: &SweepSpec, table: &ResultTable, config: Option<serde_json::Value>) -> Self {
        let config_sha256 = config.as_ref().map(|c| {
            let bytes = serde_json::to_vec(c).expect("json value serializes");
            hex::encode(Sha256::digest(bytes))
        });
        let times = table.rows.iter().map(|r| r.result.wall_time_s);
        Self {
            format_version: METADATA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            spec_sha256: table.fingerprint.clone(),
            config_sha256,
            started_utc: table.started_utc.clone(),
            finished_utc: table.finished_utc.clone(),
            columns: csv_header(&table.axis_names),
            rows: table.rows.len(),
            axes: spec.axes.clone(),
            scenario: spec.base.clone(),
            derived: DerivedQuantities::of(&spec.base),
            total_point_time_s: times.clone().sum(),
            max_point_time_s: times.fold(0.0, f64::max),
            unstable_points: table.rows.iter().filter(|r| !r.result.stable).count(),
            errors: table
                .rows
                .iter()
                .enumerate()
                .filter_map(|(index, r)| {
                    r.result.error.as_ref().map(|m| PointError {
                        index,
                        params: r.params.clone(),
                        message: m.clone(),
                    })
                })
                .collect(),
            lossless_csv: None,
            config,
        }
    }
}

/// Paths produced by [`write_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFiles {
    pub csv: PathBuf,
    pub lossless_csv: Option<PathBuf>,
    pub metadata: PathBuf,
}

/// Writes `<stem>.csv`, `<stem>_lossless.csv` (only with a loss channel) and
/// `<stem>.json` into `dir`.
pub fn write_sweep(
    dir: &Path,
    stem: &str,
    spec: &SweepSpec,
    table: &ResultTable,
    config: Option<serde_json::Value>,
) -> Result<SweepFiles> {
    let csv = dir.join(format!("{stem}.csv"));
    write_atomic(&csv, &render_csv(table, false)?)?;
    let lossless_csv = match spec.base.loss {
        Some(_) => {
            let p = dir.join(format!("{stem}_lossless.csv"));
            write_atomic(&p, &render_csv(table, true)?)?;
            Some(p)
        }
        None => None,
    };
    let mut meta = SweepMetadata::new(spec, table, config);
    meta.lossless_csv = lossless_csv
        .as_ref()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned());
    let metadata = dir.join(format!("{stem}.json"));
    let json = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
    write_atomic(&metadata, &json)?;
    Ok(SweepFiles {
        csv,
        lossless_csv,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let leftovers = fs::read_dir(p.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn header_order() {
        let h = csv_header(&["gain".into(), "reflectivity".into()]);
        assert_eq!(
            h.join(","),
            "gain,reflectivity,E_N,F,F_bound,nu,E_BA,E_AB,two_way,stable,margin,quad_err"
        );
    }
}
