use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use blp_core::sampler::GridFormat;

use crate::exit::usage;

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn grid_format(path: &Path) -> Result<GridFormat> {
    GridFormat::from_extension(&path.to_string_lossy())
        .ok_or_else(|| usage(format!("cannot tell grid format of {}; use .csv or .json", path.display())))
}

/// `dir/stem<suffix>.<ext>` next to `path`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Output path for zoom level `level`; single-level runs keep `path` as given.
pub fn level_path(path: &Path, level: usize, levels: usize) -> PathBuf {
    if levels == 1 {
        return path.to_path_buf();
    }
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    sibling(path, &format!("_L{level}"), &ext)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// gnuplot script drawing each CSV grid as a surface.
pub fn surface_script(grids: &[PathBuf], manifest: &str) -> String {
    let mut s = format!("# manifest {manifest}\nset datafile separator ','\nset datafile missing 'nan'\nset hidden3d\nset xlabel 'i'\nset ylabel 'j'\nset zlabel 'U'\n");
    for g in grids {
        let name = file_name(g);
        s.push_str(&format!("set title '{name}'\nsplot '{name}' matrix with lines notitle\npause -1\n"));
    }
    s
}

/// gnuplot script for `ln N` against `ln(1/ε)` with the fitted line.
pub fn loglog_script(pairs_csv: &Path, slope: f64, intercept: f64, manifest: &str) -> String {
    let name = file_name(pairs_csv);
    format!(
        "# manifest {manifest}\nset datafile separator ','\nset key top left\nset xlabel 'ln(1/eps)'\nset ylabel 'ln N'\n\
         f(x) = {slope:.6} * x + {intercept:.6}\n\
         plot '{name}' using (log(1/$1)):(log($2)) every ::1 with points pt 7 title 'counts', f(x) title 'slope {slope:.4}'\npause -1\n"
    )
}
