use std::path::PathBuf;

use anyhow::Result;
use blp_core::boxcount::{estimate_dimension, synthetic_ladder, synthetic_set, FitStrategy, SyntheticKind};
use clap::Args;
use serde::Serialize;

use crate::config::{Fit, Manifest};
use crate::exit::{self, from_boxcount};
use crate::output;

/// Calibration sets with the accepted distance from their analytic dimension.
pub const CORPUS: [(SyntheticKind, f64); 5] = [
    (SyntheticKind::Plane, 0.05),
    (SyntheticKind::Line, 0.05),
    (SyntheticKind::FilledSquare, 0.01),
    (SyntheticKind::SierpinskiCarpet(6), 0.05),
    (SyntheticKind::SierpinskiTriangle(7), 0.05),
];

#[derive(Debug, Args)]
pub struct CalibrateCmd {
    #[arg(long, default_value = "auto")]
    pub fit: Fit,
    #[arg(long, default_value = "calibration.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRow {
    pub set: String,
    pub mode: String,
    pub expected: f64,
    pub tolerance: f64,
    pub estimate: f64,
    pub r_squared: f64,
    pub fit_range: [usize; 2],
    pub counts: Vec<u64>,
    pub passed: bool,
}

pub fn calibrate(fit: FitStrategy) -> Result<Vec<CalibrationRow>> {
    CORPUS
        .iter()
        .map(|&(kind, tolerance)| {
            let set = synthetic_set(kind).map_err(from_boxcount)?;
            let mode = kind.natural_mode();
            let r = estimate_dimension(&set, mode, &synthetic_ladder(&set), fit).map_err(from_boxcount)?;
            let expected = kind.analytic_dimension();
            Ok(CalibrationRow {
                set: kind.label(),
                mode: mode.label().to_string(),
                expected,
                tolerance,
                estimate: r.slope,
                r_squared: r.r_squared,
                fit_range: r.fit_range,
                passed: (r.slope - expected).abs() <= tolerance,
                counts: r.counts,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct CalibrationOutput<'a> {
    manifest: String,
    rows: &'a [CalibrationRow],
}

pub fn run(cmd: &CalibrateCmd) -> Result<u8> {
    let fit: FitStrategy = cmd.fit.into();
    let manifest = Manifest::new("calibrate", None, None).with("fit", format!("{fit:?}"));
    let digest = manifest.digest();
    let rows = calibrate(fit)?;
    println!("{:<14}{:<9}{:>10}{:>10}{:>8}  result", "set", "mode", "expected", "estimate", "tol");
    for r in &rows {
        println!(
            "{:<14}{:<9}{:>10.4}{:>10.4}{:>8}  {}",
            r.set,
            r.mode,
            r.expected,
            r.estimate,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    let doc = CalibrationOutput { manifest: format!("sha256:{digest}"), rows: &rows };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    output::write(&cmd.out, &bytes)?;
    output::write(&output::sibling(&cmd.out, ".manifest", "json"), &manifest.to_file_bytes())?;
    Ok(if rows.iter().all(|r| r.passed) { exit::OK } else { exit::TOLERANCE })
}
