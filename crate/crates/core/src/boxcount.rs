//! Box-counting dimension of sampled surfaces, point sets and binary images.
//!
//! Everything is counted inside the unit cube (or unit square for images) on a
//! dyadic ladder `ε = 2^-k`, then `ln N` is regressed on `ln(1/ε)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::ScalarField;

pub const DEFAULT_MIN_EXP: u32 = 1;
pub const DEFAULT_MAX_EXP: u32 = 9;
pub const MIN_LADDER_LEN: usize = 4;
pub const MAX_SYNTHETIC_DEPTH: u32 = 8;

/// r² values closer than this are treated as tied by the automatic fit window.
const R2_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxCountError {
    #[error("field needs at least two unmasked values, found {0}")]
    TooFewValues(usize),
    #[error("field values have zero range; nothing to normalise")]
    DegenerateRange,
    #[error("box size {0} is not 2^-k for an integer k >= 1")]
    NotDyadic(f64),
    #[error("box size {eps} is finer than 1/(2*{resolution})")]
    ResolutionExceeded { eps: f64, resolution: usize },
    #[error("ladder has {0} sizes; at least {MIN_LADDER_LEN} are needed")]
    LadderTooShort(usize),
    #[error("mode {mode:?} cannot count a {set} set")]
    ModeMismatch { mode: VoxelizationMode, set: &'static str },
    #[error("the set is empty")]
    EmptySet,
    #[error("synthetic depth {0} exceeds {MAX_SYNTHETIC_DEPTH}")]
    DepthTooLarge(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoxelizationMode {
    /// Each grid quad fills every voxel between the min and max of its corner heights.
    SurfaceColumns,
    /// One voxel per sample point.
    GraphPoints,
    /// Binary image `|U| > median |U|`, counted in 2D.
    LevelSetImage2D,
}

impl VoxelizationMode {
    pub const ALL: [VoxelizationMode; 3] = [Self::SurfaceColumns, Self::GraphPoints, Self::LevelSetImage2D];

    pub fn label(&self) -> &'static str {
        match self {
            Self::SurfaceColumns => "columns",
            Self::GraphPoints => "points",
            Self::LevelSetImage2D => "image2d",
        }
    }

    fn ambient_dim(&self) -> u32 {
        match self {
            Self::LevelSetImage2D => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStrategy {
    AllPoints,
    AutoWindow,
}

/// `normalised = (raw - offset) * scale` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub x_offset: f64,
    pub x_scale: f64,
    pub y_offset: f64,
    pub y_scale: f64,
    pub z_offset: f64,
    pub z_scale: f64,
}

/// Heights on an `nx × ny` node lattice; node `(i, j)` sits at `(i/(nx-1), j/(ny-1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightfield {
    pub nx: usize,
    pub ny: usize,
    /// Normalised heights in `[0, 1]`, `NaN` where masked.
    pub heights: Vec<f64>,
    /// The values before normalisation, used for level-set images.
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryImage {
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `pixels[j * nx + i]`.
    pub pixels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    /// Sampling density along one axis, used for the resolution guard.
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormalizedSet {
    Surface(Heightfield),
    Image(BinaryImage),
    Points(PointCloud),
}

impl NormalizedSet {
    fn kind(&self) -> &'static str {
        match self {
            Self::Surface(_) => "surface",
            Self::Image(_) => "image",
            Self::Points(_) => "point",
        }
    }

    fn resolution(&self) -> usize {
        match self {
            Self::Surface(h) => h.nx.max(h.ny),
            Self::Image(im) => im.nx.max(im.ny),
            Self::Points(p) => p.resolution,
        }
    }
}

/// A normalised field together with the map that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub set: NormalizedSet,
    pub affine: AffineMap,
}

/// Maps the field's cell centres onto `[0, 1]²` and its values onto `[0, 1]`.
pub fn normalize(field: &ScalarField) -> Result<Normalized, BoxCountError> {
    let valid = field.values.iter().zip(&field.mask).filter(|(_, m)| **m).map(|(v, _)| *v);
    let (count, lo, hi) = valid.fold((0usize, f64::INFINITY, f64::NEG_INFINITY), |(n, lo, hi), v| {
        (n + 1, lo.min(v), hi.max(v))
    });
    if count < 2 {
        return Err(BoxCountError::TooFewValues(count));
    }
    if hi <= lo {
        return Err(BoxCountError::DegenerateRange);
    }
    let range = hi - lo;
    let heights = field
        .values
        .iter()
        .zip(&field.mask)
        .map(|(v, m)| if *m { ((v - lo) / range).clamp(0.0, 1.0) } else { f64::NAN })
        .collect();
    let (x0, x1) = (field.x(0), field.x(field.nx - 1));
    let (y0, y1) = (field.y(0), field.y(field.ny - 1));
    let affine = AffineMap {
        x_offset: x0,
        x_scale: 1.0 / (x1 - x0),
        y_offset: y0,
        y_scale: 1.0 / (y1 - y0),
        z_offset: lo,
        z_scale: 1.0 / range,
    };
    let surface = Heightfield { nx: field.nx, ny: field.ny, heights, raw: field.values.clone() };
    Ok(Normalized { set: NormalizedSet::Surface(surface), affine })
}

/// `k` such that `eps = 2^-k`, if any.
fn dyadic_exponent(eps: f64) -> Option<u32> {
    if !(eps > 0.0 && eps <= 0.5) {
        return None;
    }
    let k = -eps.log2();
    (k.fract() == 0.0 && k <= 62.0 && (2f64).powi(-(k as i32)) == eps).then_some(k as u32)
}

pub fn dyadic_ladder(min_exp: u32, max_exp: u32) -> Vec<f64> {
    (min_exp.max(1)..=max_exp).map(|k| (2f64).powi(-(k as i32))).collect()
}

/// The default ladder truncated to what a set of the given resolution supports.
pub fn natural_ladder(resolution: usize) -> Vec<f64> {
    let finest = (resolution.max(1) as f64).log2().floor() as u32;
    dyadic_ladder(DEFAULT_MIN_EXP, finest.min(DEFAULT_MAX_EXP))
}

/// Occupancy prepared once per (set, mode) and counted at many box sizes.
enum Prepared<'a> {
    Columns(&'a Heightfield),
    Points(Vec<[f64; 3]>),
    Image(std::borrow::Cow<'a, BinaryImage>),
}

fn level_set_image(h: &Heightfield) -> Result<BinaryImage, BoxCountError> {
    let mut mags: Vec<f64> = h.raw.iter().filter(|v| v.is_finite()).map(|v| v.abs()).collect();
    if mags.is_empty() {
        return Err(BoxCountError::EmptySet);
    }
    let mid = mags.len() / 2;
    let (_, median, _) = mags.select_nth_unstable_by(mid, f64::total_cmp);
    let threshold = *median;
    let pixels = h.raw.iter().map(|v| v.is_finite() && v.abs() > threshold).collect();
    Ok(BinaryImage { nx: h.nx, ny: h.ny, pixels })
}

fn prepare(set: &NormalizedSet, mode: VoxelizationMode) -> Result<Prepared<'_>, BoxCountError> {
    let mismatch = || BoxCountError::ModeMismatch { mode, set: set.kind() };
    match (set, mode) {
        (NormalizedSet::Surface(h), VoxelizationMode::SurfaceColumns) => Ok(Prepared::Columns(h)),
        (NormalizedSet::Surface(h), VoxelizationMode::GraphPoints) => {
            let sx = 1.0 / (h.nx - 1) as f64;
            let sy = 1.0 / (h.ny - 1) as f64;
            let pts = h
                .heights
                .iter()
                .enumerate()
                .filter(|(_, z)| z.is_finite())
                .map(|(k, z)| [(k % h.nx) as f64 * sx, (k / h.nx) as f64 * sy, *z])
                .collect();
            Ok(Prepared::Points(pts))
        }
        (NormalizedSet::Surface(h), VoxelizationMode::LevelSetImage2D) => {
            Ok(Prepared::Image(std::borrow::Cow::Owned(level_set_image(h)?)))
        }
        (NormalizedSet::Points(p), VoxelizationMode::GraphPoints) => Ok(Prepared::Points(p.points.clone())),
        (NormalizedSet::Image(im), VoxelizationMode::LevelSetImage2D) => {
            Ok(Prepared::Image(std::borrow::Cow::Borrowed(im)))
        }
        _ => Err(mismatch()),
    }
}

fn box_index(c: f64, boxes: u64) -> u64 {
    ((c * boxes as f64).floor().max(0.0) as u64).min(boxes - 1)
}

fn count_columns(h: &Heightfield, boxes: u64) -> u64 {
    let mx = (h.nx - 1) as u64;
    let my = (h.ny - 1) as u64;
    // entries are (column, z_lo, z_hi) packed so that sorting groups columns
    let mut entries: Vec<u64> = (0..my)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..mx).flat_map(move |i| {
                let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
                let (lo, hi) = corners
                    .iter()
                    .map(|&(a, b)| h.heights[(b * h.nx as u64 + a) as usize])
                    .filter(|z| z.is_finite())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z), hi.max(z)));
                let quad = if lo <= hi { Some((box_index(lo, boxes), box_index(hi, boxes))) } else { None };
                // half-open: boxes whose interior meets [i/m, (i+1)/m]
                let bx = (i * boxes / mx)..((i + 1) * boxes).div_ceil(mx);
                let by = (j * boxes / my)..((j + 1) * boxes).div_ceil(my);
                quad.into_iter().flat_map(move |(zl, zh)| {
                    let bx = bx.clone();
                    by.clone().flat_map(move |cy| bx.clone().map(move |cx| ((cy * boxes + cx) << 32) | (zl << 16) | zh))
                })
            })
        })
        .collect();
    entries.par_sort_unstable();

    let mut total = 0u64;
    let mut current: Option<(u64, u64, u64)> = None;
    for e in entries {
        let (col, zl, zh) = (e >> 32, (e >> 16) & 0xffff, e & 0xffff);
        match current {
            Some((c, lo, hi)) if c == col && zl <= hi + 1 => current = Some((c, lo, hi.max(zh))),
            Some((_, lo, hi)) => {
                total += hi - lo + 1;
                current = Some((col, zl, zh));
            }
            None => current = Some((col, zl, zh)),
        }
    }
    if let Some((_, lo, hi)) = current {
        total += hi - lo + 1;
    }
    total
}

fn count_points(points: &[[f64; 3]], boxes: u64) -> u64 {
    let mut keys: Vec<u64> = points
        .par_iter()
        .map(|p| (box_index(p[0], boxes) * boxes + box_index(p[1], boxes)) * boxes + box_index(p[2], boxes))
        .collect();
    keys.par_sort_unstable();
    keys.dedup();
    keys.len() as u64
}

fn count_image(im: &BinaryImage, boxes: u64) -> u64 {
    let b = boxes as usize;
    let mut occupied = vec![false; b * b];
    // pixel centres (i + 1/2)/n fall in box floor((2i + 1)·b / 2n)
    let col = |i: usize, n: usize| ((2 * i + 1) * b / (2 * n)).min(b - 1);
    for (k, _) in im.pixels.iter().enumerate().filter(|(_, p)| **p) {
        let (i, j) = (k % im.nx, k / im.nx);
        occupied[col(j, im.ny) * b + col(i, im.nx)] = true;
    }
    occupied.iter().filter(|o| **o).count() as u64
}

fn count_prepared(prepared: &Prepared<'_>, boxes: u64) -> u64 {
    match prepared {
        Prepared::Columns(h) => count_columns(h, boxes),
        Prepared::Points(p) => count_points(p, boxes),
        Prepared::Image(im) => count_image(im, boxes),
    }
}

fn checked_boxes(set: &NormalizedSet, eps: f64) -> Result<u64, BoxCountError> {
    let k = dyadic_exponent(eps).ok_or(BoxCountError::NotDyadic(eps))?;
    let resolution = set.resolution();
    if eps * 2.0 * (resolution as f64) < 1.0 || k > 16 {
        return Err(BoxCountError::ResolutionExceeded { eps, resolution });
    }
    Ok(1u64 << k)
}

/// Number of `eps`-boxes holding part of the set.
pub fn count_boxes(set: &NormalizedSet, mode: VoxelizationMode, eps: f64) -> Result<u64, BoxCountError> {
    let boxes = checked_boxes(set, eps)?;
    Ok(count_prepared(&prepare(set, mode)?, boxes))
}

/// Ordinary least squares `y = slope·x + intercept` with r².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    LineFit { slope, intercept: my - slope * mx, r_squared }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCountReport {
    pub mode: VoxelizationMode,
    pub fit: FitStrategy,
    /// Box sizes, coarse to fine.
    pub epsilons: Vec<f64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Inclusive index range into `epsilons` used by the fit.
    pub fit_range: [usize; 2],
    /// All counts equal; slope is reported as zero.
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<AffineMap>,
}

/// Picks the contiguous range of at least four points with the best r²,
/// preferring longer ranges and then finer box sizes on ties.
fn auto_window(xs: &[f64], ys: &[f64]) -> ([usize; 2], LineFit) {
    let n = xs.len();
    let mut best: Option<([usize; 2], LineFit)> = None;
    for start in 0..n {
        for end in (start + MIN_LADDER_LEN - 1)..n {
            let fit = least_squares(&xs[start..=end], &ys[start..=end]);
            let better = match &best {
                None => true,
                Some(([s, e], b)) => {
                    if fit.r_squared > b.r_squared + R2_TIE {
                        true
                    } else if fit.r_squared + R2_TIE < b.r_squared {
                        false
                    } else {
                        (end - start, start) > (e - s, *s)
                    }
                }
            };
            if better {
                best = Some(([start, end], fit));
            }
        }
    }
    best.expect("ladder length checked by caller")
}

pub fn estimate_dimension(
    set: &NormalizedSet,
    mode: VoxelizationMode,
    ladder: &[f64],
    fit: FitStrategy,
) -> Result<BoxCountReport, BoxCountError> {
    if ladder.len() < MIN_LADDER_LEN {
        return Err(BoxCountError::LadderTooShort(ladder.len()));
    }
    let mut epsilons = ladder.to_vec();
    epsilons.sort_by(|a, b| b.total_cmp(a));
    epsilons.dedup();
    if epsilons.len() < MIN_LADDER_LEN {
        return Err(BoxCountError::LadderTooShort(epsilons.len()));
    }
    let boxes: Vec<u64> = epsilons.iter().map(|&e| checked_boxes(set, e)).collect::<Result<_, _>>()?;
    let prepared = prepare(set, mode)?;
    let counts: Vec<u64> = boxes.iter().map(|&b| count_prepared(&prepared, b)).collect();
    if counts.contains(&0) {
        return Err(BoxCountError::EmptySet);
    }

    let xs: Vec<f64> = epsilons.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let last = epsilons.len() - 1;
    if counts.iter().all(|&c| c == counts[0]) {
        return Ok(BoxCountReport {
            mode,
            fit,
            epsilons,
            slope: 0.0,
            intercept: ys[0],
            r_squared: 1.0,
            counts,
            fit_range: [0, last],
            degenerate: true,
            normalization: None,
        });
    }
    let (fit_range, line) = match fit {
        FitStrategy::AllPoints => ([0, last], least_squares(&xs, &ys)),
        FitStrategy::AutoWindow => auto_window(&xs, &ys),
    };
    Ok(BoxCountReport {
        mode,
        fit,
        epsilons,
        counts,
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        fit_range,
        degenerate: false,
        normalization: None,
    })
}

/// Two-column `epsilon,count` CSV.
pub fn pairs_csv(report: &BoxCountReport, manifest: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(tag) = manifest {
        out.push_str(&format!("# manifest {tag}\n"));
    }
    out.push_str("epsilon,count\n");
    for (e, n) in report.epsilons.iter().zip(&report.counts) {
        out.push_str(&format!("{e},{n}\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Plane,
    Line,
    FilledSquare,
    SierpinskiCarpet(u32),
    SierpinskiTriangle(u32),
}

impl SyntheticKind {
    pub fn analytic_dimension(&self) -> f64 {
        match self {
            Self::Plane | Self::FilledSquare => 2.0,
            Self::Line => 1.0,
            Self::SierpinskiCarpet(_) => 8f64.ln() / 3f64.ln(),
            Self::SierpinskiTriangle(_) => 3f64.ln() / 2f64.ln(),
        }
    }

    pub fn natural_mode(&self) -> VoxelizationMode {
        match self {
            Self::Plane => VoxelizationMode::SurfaceColumns,
            Self::Line => VoxelizationMode::GraphPoints,
            _ => VoxelizationMode::LevelSetImage2D,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Plane => "plane".into(),
            Self::Line => "line".into(),
            Self::FilledSquare => "square".into(),
            Self::SierpinskiCarpet(d) => format!("carpet({d})"),
            Self::SierpinskiTriangle(d) => format!("triangle({d})"),
        }
    }
}

const PLANE_NODES: usize = 1025;
const LINE_POINTS: usize = 4097;
const SQUARE_PIXELS: usize = 1024;

pub fn synthetic_set(kind: SyntheticKind) -> Result<NormalizedSet, BoxCountError> {
    match kind {
        SyntheticKind::Plane => {
            let n = PLANE_NODES * PLANE_NODES;
            Ok(NormalizedSet::Surface(Heightfield {
                nx: PLANE_NODES,
                ny: PLANE_NODES,
                heights: vec![0.5; n],
                raw: vec![0.5; n],
            }))
        }
        SyntheticKind::Line => {
            // from (0.05, 0.1, 0.8) to (0.95, 0.8, 0.2)
            let (start, dir) = ([0.05, 0.1, 0.8], [0.9, 0.7, -0.6]);
            let points = (0..LINE_POINTS)
                .map(|i| {
                    let s = (i as f64 + 0.5) / LINE_POINTS as f64;
                    [0, 1, 2].map(|d| start[d] + dir[d] * s)
                })
                .collect();
            Ok(NormalizedSet::Points(PointCloud { points, resolution: LINE_POINTS }))
        }
        SyntheticKind::FilledSquare => Ok(NormalizedSet::Image(BinaryImage {
            nx: SQUARE_PIXELS,
            ny: SQUARE_PIXELS,
            pixels: vec![true; SQUARE_PIXELS * SQUARE_PIXELS],
        })),
        SyntheticKind::SierpinskiCarpet(depth) => {
            if depth > MAX_SYNTHETIC_DEPTH {
                return Err(BoxCountError::DepthTooLarge(depth));
            }
            let n = 3usize.pow(depth);
            let keep = |mut i: usize, mut j: usize| {
                while i > 0 || j > 0 {
                    if i % 3 == 1 && j % 3 == 1 {
                        return false;
                    }
                    i /= 3;
                    j /= 3;
                }
                true
            };
            let pixels = (0..n * n).map(|k| keep(k % n, k / n)).collect();
            Ok(NormalizedSet::Image(BinaryImage { nx: n, ny: n, pixels }))
        }
        SyntheticKind::SierpinskiTriangle(depth) => {
            if depth > MAX_SYNTHETIC_DEPTH {
                return Err(BoxCountError::DepthTooLarge(depth));
            }
            let n = 1usize << depth;
            let pixels = (0..n * n).map(|k| (k % n) & (k / n) == 0).collect();
            Ok(NormalizedSet::Image(BinaryImage { nx: n, ny: n, pixels }))
        }
    }
}

/// The ladder used when calibrating against a synthetic set.
pub fn synthetic_ladder(set: &NormalizedSet) -> Vec<f64> {
    natural_ladder(set.resolution())
}

/// Covering bound for one halving of the box size: `N(ε/2) <= 2^d N(ε)`.
pub fn covering_factor(mode: VoxelizationMode) -> u64 {
    1 << mode.ambient_dim()
}
