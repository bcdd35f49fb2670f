//! Sampling `U` on rectangular windows, nested zoom series, and grid I/O.
//!
//! Grids are sampled at cell centres, row-major with `y` as the row index.
//! Masked cells carry `NaN` in `values` and `false` in `mask`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solutions::{gradient_from_parts, phi_parts, psi_parts, Ansatz, GradientVariant, SolutionParams};

/// Fraction of masked cells above which a sample is rejected.
pub const MAX_MASKED_FRACTION: f64 = 0.9;

pub const DEFAULT_RESOLUTION: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("invalid window [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    BadWindow { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
    #[error("resolution must be at least 2x2, got {nx}x{ny}")]
    BadResolution { nx: usize, ny: usize },
    #[error("{masked} of {total} cells masked; the window sits on a singular line")]
    EmptyField { masked: usize, total: usize },
    #[error("shrink factor must lie strictly between 0 and 1, got {0}")]
    BadShrink(f64),
    #[error("zoom series needs at least one level")]
    NoLevels,
    #[error("zoom level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<SampleError>,
    },
    #[error("malformed grid file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Deserialize)]
struct RawWindow {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl TryFrom<RawWindow> for Window {
    type Error = SampleError;

    fn try_from(r: RawWindow) -> Result<Self, Self::Error> {
        Window::new(r.x_min, r.x_max, r.y_min, r.y_max)
    }
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, SampleError> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(SampleError::BadWindow { x_min, x_max, y_min, y_max });
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    /// `[-half, half]²`.
    pub fn square(half: f64) -> Result<Self, SampleError> {
        Self::new(-half, half, -half, half)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    /// Both axes scaled by `factor` about the centre.
    pub fn scaled(&self, factor: f64) -> Result<Self, SampleError> {
        let (cx, cy) = self.center();
        let hw = 0.5 * self.width() * factor;
        let hh = 0.5 * self.height() * factor;
        Self::new(cx - hw, cx + hw, cy - hh, cy + hh)
    }

    pub fn strictly_contains(&self, inner: &Window) -> bool {
        self.x_min < inner.x_min && inner.x_max < self.x_max && self.y_min < inner.y_min && inner.y_max < self.y_max
    }

    pub fn cell_center_x(&self, nx: usize, i: usize) -> f64 {
        self.x_min + self.width() * ((i as f64 + 0.5) / nx as f64)
    }

    pub fn cell_center_y(&self, ny: usize, j: usize) -> f64 {
        self.y_min + self.height() * ((j as f64 + 0.5) / ny as f64)
    }
}

/// A sampled real field with validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[j * nx + i]` at `(x_i, y_j)`.
    pub values: Vec<f64>,
    /// `true` where the value is valid.
    pub mask: Vec<bool>,
}

impl ScalarField {
    /// Builds a field from raw values; non-finite entries become masked.
    pub fn from_values(window: Window, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self, SampleError> {
        if nx < 2 || ny < 2 {
            return Err(SampleError::BadResolution { nx, ny });
        }
        if values.len() != nx * ny {
            return Err(SampleError::Parse(format!("expected {} values, found {}", nx * ny, values.len())));
        }
        let values: Vec<f64> = values.into_iter().map(|v| if v.is_finite() { v } else { f64::NAN }).collect();
        let mask = values.iter().map(|v| v.is_finite()).collect();
        Ok(Self { window, nx, ny, values, mask })
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = j * self.nx + i;
        self.mask[k].then_some(self.values[k])
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.window.cell_center_x(self.nx, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        self.window.cell_center_y(self.ny, j)
    }
}

/// Samples `U` at the cell centres of an `nx × ny` grid over `window`.
pub fn sample<A: Ansatz + Sync + ?Sized>(
    params: &SolutionParams,
    family: &A,
    variant: GradientVariant,
    window: &Window,
    nx: usize,
    ny: usize,
) -> Result<ScalarField, SampleError> {
    if nx < 2 || ny < 2 {
        return Err(SampleError::BadResolution { nx, ny });
    }
    // ψ-parts depend on x only, φ-parts on y only.
    let columns: Vec<_> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let x = window.cell_center_x(nx, i);
            (x, psi_parts(params, family, x))
        })
        .collect();
    let rows: Vec<_> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let y = window.cell_center_y(ny, j);
            (y, phi_parts(params, family, y))
        })
        .collect();

    let values: Vec<f64> = rows
        .par_iter()
        .flat_map_iter(|&(_, phi)| {
            columns.iter().map(move |&(x, psi)| match (psi, phi) {
                (Ok(psi), Ok(phi)) => gradient_from_parts(params, variant, x, psi, phi),
                (Err(e), _) | (_, Err(e)) => Err(e),
            })
        })
        .map(|r| match r {
            Ok(v) if v.is_finite() => v,
            _ => f64::NAN,
        })
        .collect();

    let mask: Vec<bool> = values.iter().map(|v| !v.is_nan()).collect();
    let total = nx * ny;
    let masked = mask.iter().filter(|m| !**m).count();
    if masked as f64 > MAX_MASKED_FRACTION * total as f64 {
        return Err(SampleError::EmptyField { masked, total });
    }
    Ok(ScalarField { window: *window, nx, ny, values, mask })
}

/// Nested windows sampled at a fixed resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoomSeries {
    pub windows: Vec<Window>,
    pub fields: Vec<ScalarField>,
}

/// The nested windows alone: `base`, `base·shrink`, `base·shrink²`, …
pub fn zoom_windows(base: &Window, shrink: f64, levels: usize) -> Result<Vec<Window>, SampleError> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(SampleError::BadShrink(shrink));
    }
    if levels == 0 {
        return Err(SampleError::NoLevels);
    }
    // scale from the base each time so that level k is exactly base · shrink^k
    (0..levels).map(|k| base.scaled(shrink.powi(k as i32))).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn zoom_series<A: Ansatz + Sync + ?Sized>(
    params: &SolutionParams,
    family: &A,
    variant: GradientVariant,
    base: &Window,
    shrink: f64,
    levels: usize,
    nx: usize,
    ny: usize,
) -> Result<ZoomSeries, SampleError> {
    let windows = zoom_windows(base, shrink, levels)?;
    let fields = windows
        .iter()
        .enumerate()
        .map(|(level, w)| {
            sample(params, family, variant, w, nx, ny).map_err(|e| SampleError::Level { level, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ZoomSeries { windows, fields })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridFormat {
    Csv,
    Json,
}

impl GridFormat {
    pub fn from_extension(path: &str) -> Option<Self> {
        let lower = path.to_ascii_lowercase();
        if lower.ends_with(".csv") {
            Some(Self::Csv)
        } else if lower.ends_with(".json") {
            Some(Self::Json)
        } else {
            None
        }
    }
}

/// Shortest text that parses back to the same `f64`; masked cells are `nan`.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Serialize, Deserialize)]
struct GridDocument {
    window: Window,
    nx: usize,
    ny: usize,
    values: Vec<Option<f64>>,
    mask: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
}

/// Serialises a field. `manifest` is an optional run tag written as an extra
/// `# manifest` comment (CSV) or `manifest` key (JSON).
pub fn export_grid(field: &ScalarField, format: GridFormat, manifest: Option<&str>) -> Vec<u8> {
    match format {
        GridFormat::Csv => {
            let w = &field.window;
            let mut out = String::with_capacity(field.values.len() * 20);
            let _ = writeln!(
                out,
                "# window {} {} {} {}",
                format_value(w.x_min),
                format_value(w.x_max),
                format_value(w.y_min),
                format_value(w.y_max)
            );
            let _ = writeln!(out, "# {} {}", field.nx, field.ny);
            if let Some(tag) = manifest {
                let _ = writeln!(out, "# manifest {tag}");
            }
            for row in field.values.chunks(field.nx) {
                let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            out.into_bytes()
        }
        GridFormat::Json => {
            let doc = GridDocument {
                window: field.window,
                nx: field.nx,
                ny: field.ny,
                values: field
                    .values
                    .iter()
                    .zip(&field.mask)
                    .map(|(v, m)| m.then_some(*v))
                    .collect(),
                mask: field.mask.clone(),
                manifest: manifest.map(str::to_string),
            };
            let mut bytes = serde_json::to_vec(&doc).expect("grid documents always serialise");
            bytes.push(b'\n');
            bytes
        }
    }
}

/// A parsed grid plus the manifest tag it carried, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedGrid {
    pub field: ScalarField,
    pub manifest: Option<String>,
}

fn parse_number(token: &str) -> Result<f64, SampleError> {
    let t = token.trim();
    if t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|_| SampleError::Parse(format!("bad number {t:?}")))
}

pub fn import_grid(bytes: &[u8], format: GridFormat) -> Result<ImportedGrid, SampleError> {
    match format {
        GridFormat::Json => {
            let doc: GridDocument = serde_json::from_slice(bytes).map_err(|e| SampleError::Parse(e.to_string()))?;
            let values: Vec<f64> = doc.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            let field = ScalarField::from_values(doc.window, doc.nx, doc.ny, values)?;
            if field.mask != doc.mask {
                return Err(SampleError::Parse("mask disagrees with values".into()));
            }
            Ok(ImportedGrid { field, manifest: doc.manifest })
        }
        GridFormat::Csv => {
            let text = std::str::from_utf8(bytes).map_err(|e| SampleError::Parse(e.to_string()))?;
            let mut lines = text.lines();
            let window_line = lines.next().ok_or_else(|| SampleError::Parse("empty file".into()))?;
            let w: Vec<&str> = window_line
                .strip_prefix("# window ")
                .ok_or_else(|| SampleError::Parse("missing '# window' header".into()))?
                .split_whitespace()
                .collect();
            if w.len() != 4 {
                return Err(SampleError::Parse("window header needs four numbers".into()));
            }
            let window = Window::new(parse_number(w[0])?, parse_number(w[1])?, parse_number(w[2])?, parse_number(w[3])?)?;
            let size_line = lines.next().ok_or_else(|| SampleError::Parse("missing size header".into()))?;
            let dims: Vec<usize> = size_line
                .strip_prefix("# ")
                .ok_or_else(|| SampleError::Parse("missing size header".into()))?
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|_| SampleError::Parse(format!("bad size {s:?}"))))
                .collect::<Result<_, _>>()?;
            if dims.len() != 2 {
                return Err(SampleError::Parse("size header needs nx and ny".into()));
            }
            let mut manifest = None;
            let mut values = Vec::with_capacity(dims[0] * dims[1]);
            for line in lines {
                if let Some(comment) = line.strip_prefix('#') {
                    if let Some(tag) = comment.trim().strip_prefix("manifest ") {
                        manifest = Some(tag.trim().to_string());
                    }
                    continue;
                }
                if line.trim().is_empty() {
                    continue;
                }
                let row: Vec<f64> = line.split(',').map(parse_number).collect::<Result<_, _>>()?;
                if row.len() != dims[0] {
                    return Err(SampleError::Parse(format!("row has {} values, expected {}", row.len(), dims[0])));
                }
                values.extend(row);
            }
            let field = ScalarField::from_values(window, dims[0], dims[1], values)?;
            Ok(ImportedGrid { field, manifest })
        }
    }
}
