use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use blp_core::boxcount::{dyadic_ladder, FitStrategy, VoxelizationMode};
use blp_core::sampler::Window;
use blp_core::solutions::{AnsatzFamily, AnsatzKind, GradientVariant, SolutionParams};
use blp_core::special::EllipticModulus;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::usage;

const PRESETS: &str = include_str!("../presets.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Family {
    #[serde(rename = "1")]
    #[value(name = "1")]
    One,
    #[serde(rename = "2")]
    #[value(name = "2")]
    Two,
    #[serde(rename = "3")]
    #[value(name = "3")]
    Three,
    /// Constant `u`, `v`; only meaningful for `verify`.
    #[serde(rename = "const")]
    #[value(name = "const")]
    Const,
}

impl Family {
    pub fn kind(self) -> Option<AnsatzKind> {
        match self {
            Self::One => Some(AnsatzKind::TypeI),
            Self::Two => Some(AnsatzKind::TypeII),
            Self::Three => Some(AnsatzKind::TypeIII),
            Self::Const => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Literal,
    Consistent,
}

impl From<Variant> for GradientVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Literal => GradientVariant::LiteralX,
            Variant::Consistent => GradientVariant::ConsistentPsi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Columns,
    Points,
    Image2d,
}

impl From<Mode> for VoxelizationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Columns => VoxelizationMode::SurfaceColumns,
            Mode::Points => VoxelizationMode::GraphPoints,
            Mode::Image2d => VoxelizationMode::LevelSetImage2D,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Fit {
    All,
    Auto,
}

impl From<Fit> for FitStrategy {
    fn from(f: Fit) -> Self {
        match f {
            Fit::All => FitStrategy::AllPoints,
            Fit::Auto => FitStrategy::AutoWindow,
        }
    }
}

/// Every parameter of a run. Presets, manifests and flags all resolve to this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Family,
    pub modulus: f64,
    pub delta: f64,
    pub time: f64,
    pub variant: Variant,
    pub window: [f64; 4],
    pub shrink: f64,
    pub levels: usize,
    pub resolution: usize,
    pub mode: Mode,
    pub eps_min_exp: u32,
    pub eps_max_exp: u32,
    pub fit: Fit,
}

impl RunConfig {
    pub fn base(family: Family) -> Self {
        Self {
            family,
            modulus: blp_core::solutions::DEFAULT_ELLIPTIC_MODULUS,
            delta: 1.0,
            time: 0.0,
            variant: Variant::Literal,
            window: [-0.04, 0.04, -0.04, 0.04],
            shrink: 0.1,
            levels: 1,
            resolution: blp_core::sampler::DEFAULT_RESOLUTION,
            mode: Mode::Columns,
            eps_min_exp: blp_core::boxcount::DEFAULT_MIN_EXP,
            eps_max_exp: blp_core::boxcount::DEFAULT_MAX_EXP,
            fit: Fit::Auto,
        }
    }

    pub fn family(&self) -> Result<AnsatzFamily> {
        let kind = self
            .family
            .kind()
            .ok_or_else(|| usage("the constant family is only available to `verify`"))?;
        let modulus = EllipticModulus::new(self.modulus).map_err(|e| usage(e.to_string()))?;
        Ok(AnsatzFamily::new(kind).with_modulus(modulus))
    }

    pub fn params(&self) -> Result<SolutionParams> {
        SolutionParams::new(self.delta, self.time).map_err(|e| usage(e.to_string()))
    }

    pub fn window(&self) -> Result<Window> {
        let [a, b, c, d] = self.window;
        Window::new(a, b, c, d).map_err(|e| usage(e.to_string()))
    }

    pub fn ladder(&self) -> Result<Vec<f64>> {
        if self.eps_min_exp == 0 || self.eps_min_exp > self.eps_max_exp {
            return Err(usage(format!(
                "need 1 <= --eps-min-exp <= --eps-max-exp, got {} and {}",
                self.eps_min_exp, self.eps_max_exp
            )));
        }
        Ok(dyadic_ladder(self.eps_min_exp, self.eps_max_exp))
    }

    /// Checks the fields that every command relies on.
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(usage(format!("--res must be at least 2, got {}", self.resolution)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(usage(format!("--shrink must lie strictly between 0 and 1, got {}", self.shrink)));
        }
        if self.levels == 0 {
            return Err(usage("--levels must be at least 1"));
        }
        self.window()?;
        self.params()?;
        self.ladder()?;
        EllipticModulus::new(self.modulus).map_err(|e| usage(e.to_string()))?;
        Ok(())
    }
}

pub fn presets() -> Result<BTreeMap<String, RunConfig>> {
    toml::from_str(PRESETS).context("parsing the built-in presets")
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let mut all = presets()?;
    all.remove(name).ok_or_else(|| {
        let names: Vec<_> = presets().map(|p| p.into_keys().collect()).unwrap_or_default();
        usage(format!("unknown preset {name:?}; available: {}", names.join(", ")))
    })
}

/// Flags that describe the field being evaluated.
#[derive(Debug, Clone, Default, Args)]
pub struct FieldArgs {
    /// Named preset from presets.toml (fig1, fig2, fig3)
    #[arg(long)]
    pub preset: Option<String>,
    /// Ansatz family
    #[arg(long)]
    pub family: Option<Family>,
    /// Jacobi modulus k of the type-II family
    #[arg(long)]
    pub modulus: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub time: Option<f64>,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// x_min x_max y_min y_max
    #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["X0", "X1", "Y0", "Y1"])]
    pub window: Option<Vec<f64>>,
    /// Grid points per axis
    #[arg(long)]
    pub res: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ZoomArgs {
    /// Per-level scale factor of the zoom series
    #[arg(long)]
    pub shrink: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Coarsest box size is 2^-eps_min_exp
    #[arg(long)]
    pub eps_min_exp: Option<u32>,
    /// Finest box size is 2^-eps_max_exp
    #[arg(long)]
    pub eps_max_exp: Option<u32>,
    #[arg(long)]
    pub fit: Option<Fit>,
}

impl FieldArgs {
    /// Preset (or defaults) with every given flag applied on top.
    pub fn resolve(&self, defaults: impl FnOnce(Family) -> RunConfig) -> Result<RunConfig> {
        let mut cfg = match &self.preset {
            Some(name) => preset(name)?,
            None => {
                let family = self.family.ok_or_else(|| usage("either --preset or --family is required"))?;
                defaults(family)
            }
        };
        if let Some(f) = self.family {
            cfg.family = f;
        }
        if let Some(m) = self.modulus {
            cfg.modulus = m;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(t) = self.time {
            cfg.time = t;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(w) = &self.window {
            cfg.window = [w[0], w[1], w[2], w[3]];
        }
        if let Some(r) = self.res {
            cfg.resolution = r;
        }
        Ok(cfg)
    }
}

impl ZoomArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.shrink {
            cfg.shrink = s;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
    }
}

impl CountArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(e) = self.eps_min_exp {
            cfg.eps_min_exp = e;
        }
        if let Some(e) = self.eps_max_exp {
            cfg.eps_max_exp = e;
        }
        if let Some(f) = self.fit {
            cfg.fit = f;
        }
    }
}

/// Everything needed to reproduce an output; its SHA-256 tags every file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub preset: Option<String>,
    /// Absent when the input is not a sampled field (synthetic sets, grid files).
    pub config: Option<RunConfig>,
    /// Command-specific settings, stringified.
    pub options: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    sha256: String,
    manifest: Manifest,
}

impl Manifest {
    pub fn new(command: &str, preset: Option<String>, config: Option<RunConfig>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            preset,
            config,
            options: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.options.insert(key.to_string(), value.to_string());
        self
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifests always serialise");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        let file = ManifestFile { sha256: self.digest(), manifest: self.clone() };
        let mut out = serde_json::to_vec_pretty(&file).expect("manifests always serialise");
        out.push(b'\n');
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let file: ManifestFile =
            serde_json::from_str(&text).map_err(|e| usage(format!("malformed manifest {}: {e}", path.display())))?;
        if file.manifest.digest() != file.sha256 {
            return Err(usage(format!("manifest {} does not match its recorded sha256", path.display())));
        }
        Ok(file.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_presets_share_the_table_setup() {
        let all = presets().unwrap();
        for (name, family) in [("fig1", Family::One), ("fig2", Family::Two), ("fig3", Family::Three)] {
            let p = &all[name];
            assert_eq!(p.family, family);
            assert_eq!((p.delta, p.time), (1.0, 0.0));
            assert_eq!(p.window, [-0.04, 0.04, -0.04, 0.04]);
            assert_eq!((p.shrink, p.levels), (0.1, 3));
            p.validate().unwrap();
        }
    }

    #[test]
    fn flags_override_presets() {
        let args = FieldArgs { preset: Some("fig2".into()), res: Some(64), variant: Some(Variant::Consistent), ..Default::default() };
        let cfg = args.resolve(RunConfig::base).unwrap();
        assert_eq!(cfg.family, Family::Two);
        assert_eq!(cfg.resolution, 64);
        assert_eq!(cfg.variant, Variant::Consistent);
    }

    #[test]
    fn manifest_digest_is_stable_and_checked() {
        let m = Manifest::new("sample", Some("fig1".into()), Some(preset("fig1").unwrap())).with("format", "csv");
        assert_eq!(m.digest(), m.clone().digest());
        assert_eq!(m.digest().len(), 64);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, m.to_file_bytes()).unwrap();
        assert_eq!(Manifest::load(&path).unwrap(), m);
        let tampered = String::from_utf8(m.to_file_bytes()).unwrap().replace("\"csv\"", "\"json\"");
        std::fs::write(&path, tampered).unwrap();
        assert!(Manifest::load(&path).is_err());
    }
}
