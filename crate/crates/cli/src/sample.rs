use std::path::PathBuf;

use anyhow::Result;
use blp_core::sampler::{export_grid, zoom_series, GridFormat};
use clap::Args;

use crate::config::{FieldArgs, Manifest, RunConfig, ZoomArgs};
use crate::exit::{self, from_sample};
use crate::output;

#[derive(Debug, Args)]
pub struct SampleCmd {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub zoom: ZoomArgs,
    /// Grid file (.csv or .json); zoom levels get an `_L<k>` suffix
    #[arg(long, default_value = "field.csv")]
    pub out: PathBuf,
    /// Replay the run recorded in a manifest file
    #[arg(long, conflicts_with_all = ["preset", "family"])]
    pub manifest: Option<PathBuf>,
}

pub fn run(cmd: &SampleCmd) -> Result<u8> {
    let (preset, cfg) = match &cmd.manifest {
        Some(path) => {
            let m = Manifest::load(path)?;
            let cfg = m.config.ok_or_else(|| exit::usage("manifest does not describe a sampled field"))?;
            (m.preset, cfg)
        }
        None => {
            let mut cfg = cmd.field.resolve(RunConfig::base)?;
            cmd.zoom.apply(&mut cfg);
            (cmd.field.preset.clone(), cfg)
        }
    };
    cfg.validate()?;
    let format = output::grid_format(&cmd.out)?;
    let family = cfg.family()?;
    let params = cfg.params()?;

    let manifest = Manifest::new("sample", preset, Some(cfg.clone())).with(
        "format",
        match format {
            GridFormat::Csv => "csv",
            GridFormat::Json => "json",
        },
    );
    let digest = manifest.digest();
    let tag = format!("sha256:{digest}");

    let series = zoom_series(
        &params,
        &family,
        cfg.variant.into(),
        &cfg.window()?,
        cfg.shrink,
        cfg.levels,
        cfg.resolution,
        cfg.resolution,
    )
    .map_err(from_sample)?;

    let mut paths = Vec::new();
    for (level, field) in series.fields.iter().enumerate() {
        let path = output::level_path(&cmd.out, level, cfg.levels);
        output::write(&path, &export_grid(field, format, Some(&tag)))?;
        let w = &field.window;
        println!(
            "level {level}: [{}, {}] x [{}, {}], {}x{}, {} masked -> {}",
            w.x_min,
            w.x_max,
            w.y_min,
            w.y_max,
            field.nx,
            field.ny,
            field.masked_count(),
            path.display()
        );
        paths.push(path);
    }
    output::write(&output::sibling(&cmd.out, ".manifest", "json"), &manifest.to_file_bytes())?;
    if format == GridFormat::Csv {
        output::write(&output::sibling(&cmd.out, "", "gp"), output::surface_script(&paths, &digest).as_bytes())?;
    }
    println!("manifest sha256:{digest}");
    Ok(exit::OK)
}
