use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use blp_core::boxcount::{estimate_dimension, normalize, VoxelizationMode};
use blp_core::sampler::{sample, zoom_windows, Window};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::{preset, CountArgs, Manifest, RunConfig, Variant};
use crate::exit;
use crate::output;

/// Published estimates, one row per family, outermost window first.
pub const PUBLISHED: [[f64; 3]; 3] = [
    [1.6159, 1.4696, 1.3858],
    [1.7943, 1.5833, 1.5110],
    [1.5403, 1.3921, 1.3185],
];

const PRESETS: [&str; 3] = ["fig1", "fig2", "fig3"];
const FAMILY_LABELS: [&str; 3] = ["I", "II", "III"];

#[derive(Debug, Args)]
pub struct Table1Cmd {
    /// Grid points per axis at every level
    #[arg(long)]
    pub res: Option<usize>,
    /// Number of zoom levels per family
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[command(flatten)]
    pub count: CountArgs,
    /// Distance from the published values that counts as a match
    #[arg(long, default_value_t = 0.2)]
    pub tol: f64,
    /// Exit 1 if a level fails or the estimates break the expected pattern
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value = "table1.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeEstimate {
    pub slope: f64,
    pub r_squared: f64,
    pub fit_range: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub family: String,
    pub level: usize,
    pub window: Window,
    pub published: Option<f64>,
    /// Estimate under the selected mode; `None` if the level failed.
    pub estimate: Option<f64>,
    pub deviation: Option<f64>,
    pub error: Option<String>,
    /// Estimates under every voxelisation mode, keyed by mode label.
    pub per_mode: BTreeMap<String, ModeEstimate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSummary {
    pub max_deviation: Option<f64>,
    /// Every published value matched within the tolerance.
    pub within_tolerance: bool,
    /// Per family: estimates strictly decrease with zoom depth.
    pub decreasing: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub manifest: String,
    pub mode: String,
    pub fit: String,
    pub resolution: usize,
    pub levels: usize,
    pub variant: String,
    pub tolerance: f64,
    pub rows: Vec<Row>,
    /// Selected mode: every estimate lies in (1, 2) and is not an integer.
    pub all_fractional: bool,
    /// Selected mode: strictly decreasing within each family.
    pub decreasing: BTreeMap<String, bool>,
    pub modes: BTreeMap<String, ModeSummary>,
}

fn fractional(d: f64) -> bool {
    d > 1.0 && d < 2.0 && d.fract() != 0.0
}

fn strictly_decreasing(values: &[Option<f64>]) -> bool {
    values.iter().all(Option::is_some) && values.windows(2).all(|w| w[1].unwrap() < w[0].unwrap())
}

fn compute_row(cfg: &RunConfig, family_index: usize, level: usize, window: Window) -> Row {
    let published = PUBLISHED[family_index].get(level).copied();
    let mut row = Row {
        family: FAMILY_LABELS[family_index].to_string(),
        level,
        window,
        published,
        estimate: None,
        deviation: None,
        error: None,
        per_mode: BTreeMap::new(),
    };
    let attempt = || -> Result<BTreeMap<String, ModeEstimate>> {
        let field = sample(&cfg.params()?, &cfg.family()?, cfg.variant.into(), &window, cfg.resolution, cfg.resolution)
            .map_err(exit::from_sample)?;
        let set = normalize(&field).map_err(exit::from_boxcount)?.set;
        let ladder = cfg.ladder()?;
        let mut out = BTreeMap::new();
        for mode in VoxelizationMode::ALL {
            let r = estimate_dimension(&set, mode, &ladder, cfg.fit.into()).map_err(exit::from_boxcount)?;
            out.insert(
                mode.label().to_string(),
                ModeEstimate { slope: r.slope, r_squared: r.r_squared, fit_range: r.fit_range },
            );
        }
        Ok(out)
    };
    match attempt() {
        Ok(per_mode) => {
            let selected = VoxelizationMode::from(cfg.mode).label();
            row.estimate = per_mode.get(selected).map(|m| m.slope);
            row.deviation = row.estimate.zip(published).map(|(e, p)| (e - p).abs());
            row.per_mode = per_mode;
        }
        Err(e) => row.error = Some(format!("{e:#}")),
    }
    row
}

/// Runs every preset at every level. `overrides` is applied on top of each preset.
pub fn build(overrides: impl Fn(&mut RunConfig), tol: f64, manifest: &str) -> Result<Table> {
    let mut configs = Vec::new();
    for name in PRESETS {
        let mut cfg = preset(name)?;
        overrides(&mut cfg);
        cfg.validate()?;
        configs.push(cfg);
    }
    let first = &configs[0];
    let mut rows = Vec::new();
    for (f, cfg) in configs.iter().enumerate() {
        let windows = zoom_windows(&cfg.window()?, cfg.shrink, cfg.levels).map_err(exit::from_sample)?;
        for (level, w) in windows.into_iter().enumerate() {
            rows.push(compute_row(cfg, f, level, w));
        }
    }

    let by_family = |pick: &dyn Fn(&Row) -> Option<f64>| -> BTreeMap<String, bool> {
        FAMILY_LABELS
            .iter()
            .map(|fam| {
                let vals: Vec<Option<f64>> = rows.iter().filter(|r| r.family == *fam).map(pick).collect();
                (fam.to_string(), strictly_decreasing(&vals))
            })
            .collect()
    };

    let mut modes = BTreeMap::new();
    for mode in VoxelizationMode::ALL {
        let label = mode.label();
        let pick = |r: &Row| r.per_mode.get(label).map(|m| m.slope);
        let devs: Vec<Option<f64>> = rows
            .iter()
            .filter(|r| r.published.is_some())
            .map(|r| pick(r).zip(r.published).map(|(e, p)| (e - p).abs()))
            .collect();
        let max_deviation = devs.iter().copied().collect::<Option<Vec<f64>>>().map(|d| d.into_iter().fold(0.0, f64::max));
        modes.insert(
            label.to_string(),
            ModeSummary {
                max_deviation,
                within_tolerance: !devs.is_empty() && max_deviation.is_some_and(|m| m <= tol),
                decreasing: by_family(&pick),
            },
        );
    }

    Ok(Table {
        manifest: manifest.to_string(),
        mode: VoxelizationMode::from(first.mode).label().to_string(),
        fit: format!("{:?}", blp_core::boxcount::FitStrategy::from(first.fit)),
        resolution: first.resolution,
        levels: first.levels,
        variant: blp_core::solutions::GradientVariant::from(first.variant).label().to_string(),
        tolerance: tol,
        all_fractional: rows.iter().all(|r| r.estimate.is_some_and(fractional)),
        decreasing: by_family(&|r: &Row| r.estimate),
        rows,
        modes,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |v| format!("{v:.4}"))
}

pub fn render(t: &Table) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# manifest {}", t.manifest);
    let _ = writeln!(
        s,
        "box-counting dimension: mode {}, fit {}, {}x{} per level, variant {}",
        t.mode, t.fit, t.resolution, t.resolution, t.variant
    );
    let _ = writeln!(s, "{:<7}{:<6}{:>12}{:>11}{:>11}{:>11}  note", "family", "level", "half-width", "published", "estimate", "|dev|");
    for r in &t.rows {
        let _ = writeln!(
            s,
            "{:<7}{:<6}{:>12}{:>11}{:>11}{:>11}  {}",
            r.family,
            r.level,
            format!("{:.1e}", 0.5 * r.window.width()),
            fmt_opt(r.published),
            fmt_opt(r.estimate),
            fmt_opt(r.deviation),
            r.error.as_deref().unwrap_or("")
        );
    }
    let yn = |b: bool| if b { "yes" } else { "no" };
    let trend: Vec<String> = t.decreasing.iter().map(|(f, d)| format!("{f} {}", yn(*d))).collect();
    let _ = writeln!(s, "all estimates fractional in (1, 2): {}", yn(t.all_fractional));
    let _ = writeln!(s, "strictly decreasing with zoom: {}", trend.join(", "));
    let _ = writeln!(s);
    let _ = writeln!(s, "all modes (fit {}):", t.fit);
    let labels: Vec<&String> = t.modes.keys().collect();
    let mut header = format!("{:<7}{:<6}{:>11}", "family", "level", "published");
    for l in &labels {
        let _ = write!(header, "{l:>11}");
    }
    let _ = writeln!(s, "{header}");
    for r in &t.rows {
        let mut line = format!("{:<7}{:<6}{:>11}", r.family, r.level, fmt_opt(r.published));
        for l in &labels {
            let _ = write!(line, "{:>11}", fmt_opt(r.per_mode.get(*l).map(|m| m.slope)));
        }
        let _ = writeln!(s, "{line}");
    }
    for (l, m) in &t.modes {
        let trend: Vec<String> = m.decreasing.iter().map(|(f, d)| format!("{f} {}", yn(*d))).collect();
        let _ = writeln!(
            s,
            "{l}: max |dev| {}, all within {}: {}, decreasing: {}",
            fmt_opt(m.max_deviation),
            t.tolerance,
            yn(m.within_tolerance),
            trend.join(", ")
        );
    }
    s
}

pub fn run(cmd: &Table1Cmd) -> Result<u8> {
    let overrides = |cfg: &mut RunConfig| {
        if let Some(r) = cmd.res {
            cfg.resolution = r;
        }
        if let Some(l) = cmd.levels {
            cfg.levels = l;
        }
        if let Some(v) = cmd.variant {
            cfg.variant = v;
        }
        cmd.count.apply(cfg);
    };
    let mut probe = preset(PRESETS[0])?;
    overrides(&mut probe);
    let manifest = Manifest::new("table1", None, Some(probe)).with("tol", cmd.tol).with("presets", PRESETS.join(","));
    let digest = manifest.digest();
    let table = build(overrides, cmd.tol, &format!("sha256:{digest}"))?;

    let text = render(&table);
    print!("{text}");
    let mut bytes = serde_json::to_vec_pretty(&table)?;
    bytes.push(b'\n');
    output::write(&cmd.out, &bytes)?;
    output::write(&output::sibling(&cmd.out, "", "txt"), text.as_bytes())?;
    output::write(&output::sibling(&cmd.out, ".manifest", "json"), &manifest.to_file_bytes())?;

    let failed = table.rows.iter().any(|r| r.error.is_some());
    let pattern = table.all_fractional && table.decreasing.values().all(|d| *d);
    Ok(if cmd.strict && (failed || !pattern) { exit::TOLERANCE } else { exit::OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_and_range_checks() {
        assert!(strictly_decreasing(&[Some(1.7), Some(1.5), Some(1.4)]));
        assert!(!strictly_decreasing(&[Some(1.7), Some(1.7), Some(1.4)]));
        assert!(!strictly_decreasing(&[Some(1.7), None, Some(1.4)]));
        assert!(strictly_decreasing(&[Some(1.7)]));
        assert!(fractional(1.5));
        assert!(!fractional(2.0));
        assert!(!fractional(2.1));
        assert!(!fractional(1.0));
    }

    #[test]
    fn small_table_has_one_row_per_family_and_level() {
        let t = build(
            |cfg| {
                cfg.resolution = 64;
                cfg.levels = 1;
                cfg.eps_max_exp = 6;
            },
            0.2,
            "sha256:test",
        )
        .unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.level == 0 && r.error.is_none() && r.per_mode.len() == 3));
        assert_eq!(t.rows[1].published, Some(1.7943));
        let text = render(&t);
        assert!(text.starts_with("# manifest sha256:test\n"));
        assert!(text.contains("image2d"));
    }
}
