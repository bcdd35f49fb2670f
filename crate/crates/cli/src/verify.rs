use std::path::PathBuf;

use anyhow::Result;
use blp_core::consistency::{gradient_consistency, ConsistencyReport};
use blp_core::sampler::Window;
use blp_core::verifier::{
    convergence_study, residual_eq1, ConstantPair, ConvergenceReport, CothPair, FieldPair, Perturbed, ResidualReport,
    Steps, TanhPair, VerifyError, DEFAULT_STEP,
};
use clap::Args;
use serde::Serialize;

use crate::config::{FieldArgs, Manifest, RunConfig};
use crate::exit::{self, degenerate, usage};
use crate::output;

/// Value of both fields for `--family const`.
const CONSTANT_FIELD: f64 = 1.0;

#[derive(Debug, Args)]
pub struct VerifyCmd {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Largest acceptable residual of either equation
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Finite-difference step in x, y and t
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Add this multiple of x to u before checking
    #[arg(long, allow_negative_numbers = true)]
    pub perturb: Option<f64>,
    /// Also check the complex tanh-branch pair
    #[arg(long)]
    pub complex: bool,
    /// Repeat at h/2 and h/4 and report the observed order
    #[arg(long)]
    pub convergence: bool,
    /// Also report U against numeric cross-derivatives of u₂ and v₂
    #[arg(long)]
    pub gradient_check: bool,
    #[arg(long, default_value = "verify.json")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct PairResult {
    residuals: ResidualReport,
    convergence: Option<ConvergenceReport>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct VerifyOutput {
    manifest: String,
    family: String,
    tol: f64,
    perturb: Option<f64>,
    real: PairResult,
    complex: Option<PairResult>,
    gradient: Option<ConsistencyReport>,
    passed: bool,
}

fn defaults(family: crate::config::Family) -> RunConfig {
    RunConfig { window: [0.5, 1.5, 0.5, 1.5], resolution: 201, ..RunConfig::base(family) }
}

fn map_verify(err: VerifyError) -> anyhow::Error {
    match err {
        VerifyError::TooManyMasked { .. } => degenerate(err.to_string()),
        _ => usage(err.to_string()),
    }
}

fn check<F: FieldPair>(
    fields: &F,
    window: &Window,
    n: usize,
    t: f64,
    steps: Steps,
    tol: f64,
    convergence: bool,
) -> Result<PairResult> {
    let residuals = residual_eq1(fields, window, n, n, t, steps).map_err(map_verify)?;
    let convergence =
        if convergence { Some(convergence_study(fields, window, n, n, t, steps).map_err(map_verify)?) } else { None };
    let passed = residuals.max_abs_res_eq1a <= tol && residuals.max_abs_res_eq1b <= tol;
    Ok(PairResult { residuals, convergence, passed })
}

fn maybe_perturbed<F: FieldPair>(
    fields: F,
    amplitude: Option<f64>,
    run: impl Fn(&Perturbed<F>) -> Result<PairResult>,
) -> Result<PairResult> {
    run(&Perturbed { inner: fields, amplitude: amplitude.unwrap_or(0.0) })
}

fn print(label: &str, r: &PairResult) {
    let res = &r.residuals;
    println!(
        "{label}: max |eq1a| {:.3e}  max |eq1b| {:.3e}  checked {}  masked {}  {}",
        res.max_abs_res_eq1a,
        res.max_abs_res_eq1b,
        res.points_checked,
        res.points_masked,
        if r.passed { "pass" } else { "FAIL" }
    );
    if let Some(c) = &r.convergence {
        println!(
            "{label}: residual order eq1a {:?} eq1b {:?}; self-convergence order eq1a {:?} eq1b {:?}",
            c.residual_order_eq1a, c.residual_order_eq1b, c.self_convergence_order_eq1a, c.self_convergence_order_eq1b
        );
    }
}

pub fn run(cmd: &VerifyCmd) -> Result<u8> {
    let cfg = cmd.field.resolve(defaults)?;
    cfg.validate()?;
    if cmd.tol.is_nan() || cmd.tol < 0.0 {
        return Err(usage(format!("--tol must be non-negative, got {}", cmd.tol)));
    }
    let window = cfg.window()?;
    let n = cfg.resolution;
    let t = cfg.time;
    let steps = Steps::uniform(cmd.step);
    let tol = cmd.tol;
    let conv = cmd.convergence;

    let (real, complex, gradient, family_label) = match cfg.family.kind() {
        None => {
            let pair = ConstantPair { u: CONSTANT_FIELD, v: CONSTANT_FIELD };
            let real = maybe_perturbed(pair, cmd.perturb, |f| check(f, &window, n, t, steps, tol, conv))?;
            (real, None, None, "const".to_string())
        }
        Some(_) => {
            let family = cfg.family()?;
            let params = cfg.params()?;
            let coth = CothPair { delta: cfg.delta, family: &family };
            let real = maybe_perturbed(coth, cmd.perturb, |f| check(f, &window, n, t, steps, tol, conv))?;
            let complex = if cmd.complex {
                let tanh = TanhPair { delta: cfg.delta, family: &family };
                Some(maybe_perturbed(tanh, cmd.perturb, |f| check(f, &window, n, t, steps, tol, conv))?)
            } else {
                None
            };
            let gradient = cmd.gradient_check.then(|| {
                gradient_consistency(&params, &family, &window, n, n, blp_core::consistency::DEFAULT_STEP)
            });
            (real, complex, gradient, family.kind.label().to_string())
        }
    };

    let manifest = Manifest::new("verify", cmd.field.preset.clone(), Some(cfg.clone()))
        .with("tol", tol)
        .with("step", cmd.step)
        .with("perturb", cmd.perturb.unwrap_or(0.0))
        .with("complex", cmd.complex)
        .with("convergence", conv)
        .with("gradient_check", cmd.gradient_check);
    let digest = manifest.digest();

    print("real (u2, v2)", &real);
    if let Some(c) = &complex {
        print("complex (u1, v1)", c);
    }
    if let Some(g) = &gradient {
        println!(
            "gradient: |U_literal - u2_y| max {:.3e}, |U_consistent - u2_y| max {:.3e}, |u2_y - v2_x| max {:.3e}",
            g.literal_vs_u2y.max_abs, g.consistent_vs_u2y.max_abs, g.u2y_vs_v2x.max_abs
        );
    }
    let passed = real.passed && complex.as_ref().is_none_or(|c| c.passed);
    let doc = VerifyOutput {
        manifest: format!("sha256:{digest}"),
        family: family_label,
        tol,
        perturb: cmd.perturb,
        real,
        complex,
        gradient,
        passed,
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    output::write(&cmd.out, &bytes)?;
    output::write(&output::sibling(&cmd.out, ".manifest", "json"), &manifest.to_file_bytes())?;
    Ok(if passed { exit::OK } else { exit::TOLERANCE })
}
