use std::path::PathBuf;

use anyhow::{Context, Result};
use blp_core::boxcount::{
    estimate_dimension, natural_ladder, normalize, pairs_csv, synthetic_ladder, synthetic_set, BoxCountReport, FitStrategy,
    SyntheticKind, VoxelizationMode,
};
use blp_core::sampler::{import_grid, sample, zoom_windows, Window};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::config::{CountArgs, FieldArgs, Fit, Manifest, RunConfig, ZoomArgs};
use crate::exit::{self, degenerate, from_boxcount, from_sample, usage};
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    Plane,
    Line,
    Square,
    Carpet,
    Triangle,
}

#[derive(Debug, Args)]
pub struct DimensionCmd {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub zoom: ZoomArgs,
    #[command(flatten)]
    pub count: CountArgs,
    /// Only this zoom level (0 is the outermost window)
    #[arg(long)]
    pub level: Option<usize>,
    /// Count a calibration set instead of a field
    #[arg(long, conflicts_with_all = ["preset", "family", "grid"])]
    pub synthetic: Option<Synthetic>,
    /// Recursion depth of the carpet (default 6) or triangle (default 7)
    #[arg(long, requires = "synthetic")]
    pub depth: Option<u32>,
    /// Count a grid file written by `sample`
    #[arg(long, conflicts_with_all = ["preset", "family"])]
    pub grid: Option<PathBuf>,
    /// Report file; the (ε, N) pairs go next to it as CSV
    #[arg(long, default_value = "dimension.json")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Estimate {
    level: Option<usize>,
    window: Option<Window>,
    report: BoxCountReport,
}

#[derive(Debug, Serialize)]
struct DimensionOutput {
    manifest: String,
    source: String,
    variant: Option<String>,
    estimates: Vec<Estimate>,
}

fn synthetic_kind(s: Synthetic, depth: Option<u32>) -> SyntheticKind {
    match s {
        Synthetic::Plane => SyntheticKind::Plane,
        Synthetic::Line => SyntheticKind::Line,
        Synthetic::Square => SyntheticKind::FilledSquare,
        Synthetic::Carpet => SyntheticKind::SierpinskiCarpet(depth.unwrap_or(6)),
        Synthetic::Triangle => SyntheticKind::SierpinskiTriangle(depth.unwrap_or(7)),
    }
}

pub fn run(cmd: &DimensionCmd) -> Result<u8> {
    let explicit_ladder = cmd.count.eps_min_exp.is_some() || cmd.count.eps_max_exp.is_some();
    let mut estimates = Vec::new();
    let manifest;
    let source;
    let mut variant = None;

    if let Some(which) = cmd.synthetic {
        let kind = synthetic_kind(which, cmd.depth);
        let set = synthetic_set(kind).map_err(|e| usage(e.to_string()))?;
        let mode = cmd.count.mode.map_or(kind.natural_mode(), Into::into);
        let ladder = if explicit_ladder { counting(&cmd.count).ladder()? } else { synthetic_ladder(&set) };
        let fit: FitStrategy = cmd.count.fit.unwrap_or(Fit::Auto).into();
        let report = estimate_dimension(&set, mode, &ladder, fit).map_err(from_boxcount)?;
        source = format!("synthetic:{}", kind.label());
        manifest = Manifest::new("dimension", None, None)
            .with("source", &source)
            .with("mode", mode.label())
            .with("ladder", format!("{ladder:?}"))
            .with("fit", format!("{fit:?}"));
        estimates.push(Estimate { level: None, window: None, report });
    } else if let Some(path) = &cmd.grid {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Err(degenerate(format!("{} is empty", path.display())));
        }
        let grid = import_grid(&bytes, output::grid_format(path)?).map_err(|e| usage(e.to_string()))?;
        let cfg = counting(&cmd.count);
        let ladder = if explicit_ladder {
            cfg.ladder()?
        } else {
            natural_ladder(grid.field.nx.max(grid.field.ny))
        };
        let normalized = normalize(&grid.field).map_err(from_boxcount)?;
        let mut report = estimate_dimension(&normalized.set, cfg.mode.into(), &ladder, cfg.fit.into())
            .map_err(from_boxcount)?;
        report.normalization = Some(normalized.affine);
        source = format!("grid:{}", path.display());
        manifest = Manifest::new("dimension", None, None)
            .with("source", &source)
            .with("grid_manifest", grid.manifest.unwrap_or_default())
            .with("mode", VoxelizationMode::from(cfg.mode).label())
            .with("ladder", format!("{ladder:?}"))
            .with("fit", format!("{:?}", FitStrategy::from(cfg.fit)));
        estimates.push(Estimate { level: None, window: Some(grid.field.window), report });
    } else {
        let mut cfg = cmd.field.resolve(RunConfig::base)?;
        cmd.zoom.apply(&mut cfg);
        cmd.count.apply(&mut cfg);
        cfg.validate()?;
        let windows = zoom_windows(&cfg.window()?, cfg.shrink, cfg.levels).map_err(from_sample)?;
        let levels: Vec<usize> = match cmd.level {
            Some(l) if l >= cfg.levels => {
                return Err(usage(format!("--level {l} out of range; the series has {} levels", cfg.levels)))
            }
            Some(l) => vec![l],
            None => (0..cfg.levels).collect(),
        };
        let family = cfg.family()?;
        let params = cfg.params()?;
        let ladder = cfg.ladder()?;
        for level in levels {
            let field = sample(&params, &family, cfg.variant.into(), &windows[level], cfg.resolution, cfg.resolution)
                .map_err(|e| from_sample(blp_core::sampler::SampleError::Level { level, source: Box::new(e) }))?;
            let normalized = normalize(&field).map_err(from_boxcount)?;
            let mut report = estimate_dimension(&normalized.set, cfg.mode.into(), &ladder, cfg.fit.into())
                .map_err(from_boxcount)?;
            report.normalization = Some(normalized.affine);
            estimates.push(Estimate { level: Some(level), window: Some(windows[level]), report });
        }
        source = format!("family:{}", family.kind.label());
        variant = Some(blp_core::solutions::GradientVariant::from(cfg.variant).label().to_string());
        manifest = Manifest::new("dimension", cmd.field.preset.clone(), Some(cfg.clone()))
            .with("levels", format!("{:?}", estimates.iter().map(|e| e.level).collect::<Vec<_>>()));
    }

    let digest = manifest.digest();
    let tag = format!("sha256:{digest}");
    let single = estimates.len() == 1;
    let mut any_degenerate = false;
    for e in &estimates {
        let suffix = match (single, e.level) {
            (false, Some(l)) => format!("_L{l}"),
            _ => String::new(),
        };
        let pairs = output::sibling(&cmd.out, &format!("{suffix}_pairs"), "csv");
        output::write(&pairs, pairs_csv(&e.report, Some(&tag)).as_bytes())?;
        let script = output::loglog_script(&pairs, e.report.slope, e.report.intercept, &digest);
        output::write(&output::sibling(&cmd.out, &suffix, "gp"), script.as_bytes())?;
        let r = &e.report;
        let level = e.level.map_or(String::new(), |l| format!("level {l}: "));
        println!(
            "{level}mode {} fit {:?} slope {:.4} r2 {:.6} range {:?} counts {:?}",
            r.mode.label(),
            r.fit,
            r.slope,
            r.r_squared,
            r.fit_range,
            r.counts
        );
        if r.degenerate {
            any_degenerate = true;
            eprintln!("{level}all box counts are equal; the field is degenerate");
        }
    }
    let doc = DimensionOutput { manifest: tag, source, variant, estimates };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    output::write(&cmd.out, &bytes)?;
    output::write(&output::sibling(&cmd.out, ".manifest", "json"), &manifest.to_file_bytes())?;
    Ok(if any_degenerate { exit::DEGENERATE } else { exit::OK })
}

/// Counting settings alone, for inputs that are not sampled here.
fn counting(args: &CountArgs) -> RunConfig {
    let mut cfg = RunConfig::base(crate::config::Family::One);
    args.apply(&mut cfg);
    cfg
}
