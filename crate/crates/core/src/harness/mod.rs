//! Experiment configuration, execution and report output.

pub mod config;
pub mod experiments;
pub mod report;
pub mod stats;

use std::fs;
use std::path::Path;

pub use config::ExperimentConfig;
pub use experiments::{
    run_concentration, run_contraction, run_experiment, run_galerkin_convergence, run_moment_check, run_rates,
    run_transport_certificates,
};
pub use report::{Check, Comparison, Curve, ExperimentReport, Status};

use crate::error::Result;

/// File format for curve artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFormat {
    Csv,
    Json,
}

/// Writes every curve and then `report.json` into `dir`, recording the
/// curve file names in the report's artifact list.
pub fn write_outputs(report: &mut ExperimentReport, dir: &Path, format: CurveFormat) -> Result<()> {
    fs::create_dir_all(dir)?;
    report.artifacts.clear();
    for curve in &report.series {
        let (file, text) = match format {
            CurveFormat::Csv => (format!("{}.csv", curve.name), curve.to_csv()),
            CurveFormat::Json => (
                format!("{}.json", curve.name),
                serde_json::to_string_pretty(curve).expect("curve serializes"),
            ),
        };
        fs::write(dir.join(&file), text)?;
        report.artifacts.push(file);
    }
    fs::write(dir.join("report.json"), report.to_json_pretty())?;
    Ok(())
}
