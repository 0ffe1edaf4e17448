//! `crg`: sectorial growth analysis and verification for linear ODEs with
//! exponential polynomial coefficients.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 input error, 3 numeric
//! breakdown.

use clap::{Parser, Subcommand, ValueEnum};
use crg_core::decomp::LinearODE;
use crg_core::num::estimate::EstimateError;
use crg_core::num::integrate::{IntegrateError, IntegratorConfig};
use crg_core::num::verify::{verify, InitKind, VerifyError, VerifyOptions};
use crg_core::parser::parse_exppoly;
use crg_core::pipeline::{analyze, perturb_candidates, Analysis};
use crg_core::report::{pipeline_report, polar_svg, traces_csv};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_VERIFY_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "crg",
    about = "Sectorial asymptotics and completely-regular-growth verification for linear ODEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Select {
    Match,
    Max,
}

#[derive(Parser)]
struct CommonFlags {
    /// Sector shrink parameter in radians (default: largest admissible).
    #[arg(long)]
    eps: Option<f64>,
    /// Puiseux refinement depth cap.
    #[arg(long, default_value_t = 12)]
    refine_depth: usize,
    /// Output directory for report artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifacts to write under --out (repeatable).
    #[arg(long, value_enum)]
    format: Vec<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Symbolic stages only: normal form, tree, leaves, branches, Stokes
    /// rays, indicator candidates.
    Analyze {
        /// Path to the JSON system description.
        spec: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Full pipeline: analyze, integrate rays, estimate growth, match
    /// against predicted branches.
    Verify {
        spec: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
        /// Outer integration radius (default: 15 when a candidate reaches
        /// order 2, 30 otherwise).
        #[arg(long)]
        rmax: Option<f64>,
        /// Working precision in bits (53 = double, above = double-double).
        #[arg(long)]
        precision: Option<u32>,
        /// Number of ray directions.
        #[arg(long, default_value_t = 72)]
        theta_grid: usize,
        /// Integrate from a seeded random initial vector instead of the
        /// known solution.
        #[arg(long)]
        random_init: Option<u64>,
        /// Branch selection: nearest-match or maximal growth.
        #[arg(long, value_enum, default_value = "match")]
        select: Select,
        /// Exclusion half-width around exceptional rays (radians).
        #[arg(long)]
        delta: Option<f64>,
        /// Integrator relative tolerance.
        #[arg(long)]
        rel_tol: Option<f64>,
        /// Acceptance threshold on |h_hat - h_predicted|.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Debug hook: shift all candidate coefficients by this amount;
        /// a verification that still passes is vacuous.
        #[arg(long)]
        perturb_candidates: Option<f64>,
    },
    /// Render the polar indicator plot from a stored report.
    Plot {
        report: PathBuf,
        /// Output SVG path.
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
}

/// On-disk system description.
#[derive(Deserialize)]
struct OdeSpecFile {
    equation: String,
    #[serde(default)]
    known_solution: Option<String>,
    #[serde(default)]
    options: SpecOptions,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SpecOptions {
    epsilon: Option<f64>,
    rmax: Option<f64>,
    precision: Option<u32>,
    theta_grid: Option<usize>,
    delta: Option<f64>,
    rel_tol: Option<f64>,
    tolerance: Option<f64>,
    samples_per_ray: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<IntegrateError>().is_some()
            || cause.downcast_ref::<EstimateError>().is_some()
        {
            return EXIT_NUMERIC;
        }
        if let Some(v) = cause.downcast_ref::<VerifyError>() {
            return match v {
                VerifyError::Integrate(_) | VerifyError::Estimate(_) => EXIT_NUMERIC,
                _ => EXIT_VERIFY_FAIL,
            };
        }
    }
    EXIT_INPUT
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Analyze { spec, common } => cmd_analyze(&spec, &common),
        Command::Verify {
            spec,
            common,
            rmax,
            precision,
            theta_grid,
            random_init,
            select,
            delta,
            rel_tol,
            tolerance,
            perturb_candidates: perturb,
        } => cmd_verify(
            &spec,
            &common,
            VerifyCliOptions {
                rmax,
                precision,
                theta_grid,
                random_init,
                select,
                delta,
                rel_tol,
                tolerance,
                perturb,
            },
        ),
        Command::Plot { report, out } => cmd_plot(&report, &out),
    }
}

fn load_spec(path: &Path) -> anyhow::Result<(OdeSpecFile, LinearODE)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let spec: OdeSpecFile = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("malformed spec file: {e}"))?;
    let eq = LinearODE::parse(&spec.equation)
        .map_err(|e| anyhow::anyhow!("equation does not parse: {e}"))?;
    Ok((spec, eq))
}

fn write_artifacts(
    common_out: &Option<PathBuf>,
    formats: &[Format],
    doc: &serde_json::Value,
    verification: Option<&crg_core::num::verify::VerificationReport>,
) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(doc)?;
    match common_out {
        None => println!("{json}"),
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("report.json"), &json)?;
            if formats.contains(&Format::Csv) {
                if let Some(v) = verification {
                    std::fs::write(dir.join("traces.csv"), traces_csv(v))?;
                }
            }
            if formats.contains(&Format::Svg) {
                let svg = polar_svg(doc)?;
                std::fs::write(dir.join("plot.svg"), svg)?;
            }
            println!("wrote {}", dir.join("report.json").display());
        }
    }
    Ok(())
}

fn cmd_analyze(spec_path: &Path, common: &CommonFlags) -> anyhow::Result<ExitCode> {
    let (spec, eq) = load_spec(spec_path)?;
    let t0 = Instant::now();
    let analysis = analyze(&eq, common.eps.or(spec.options.epsilon), common.refine_depth)?;
    let elapsed = t0.elapsed().as_secs_f64() * 1e3;
    let doc = pipeline_report(&analysis, None, &[("analyze", elapsed)]);
    write_artifacts(&common.out, &common.format, &doc, None)?;
    Ok(ExitCode::SUCCESS)
}

struct VerifyCliOptions {
    rmax: Option<f64>,
    precision: Option<u32>,
    theta_grid: usize,
    random_init: Option<u64>,
    select: Select,
    delta: Option<f64>,
    rel_tol: Option<f64>,
    tolerance: Option<f64>,
    perturb: Option<f64>,
}

fn default_rmax(analysis: &Analysis) -> f64 {
    let max_rho = analysis
        .candidates
        .iter()
        .flat_map(|(_, cs)| cs.iter())
        .map(|c| c.rho_f64())
        .fold(0.0f64, f64::max);
    if max_rho >= 2.0 {
        15.0
    } else {
        30.0
    }
}

fn cmd_verify(
    spec_path: &Path,
    common: &CommonFlags,
    vopts: VerifyCliOptions,
) -> anyhow::Result<ExitCode> {
    let (spec, eq) = load_spec(spec_path)?;
    let t0 = Instant::now();
    let analysis = analyze(&eq, common.eps.or(spec.options.epsilon), common.refine_depth)?;
    let analyze_ms = t0.elapsed().as_secs_f64() * 1e3;

    let solution = match &spec.known_solution {
        Some(src) => Some(
            parse_exppoly(src)
                .map_err(|e| anyhow::anyhow!("known_solution does not parse: {e}"))?,
        ),
        None => None,
    };
    let init = match (vopts.random_init, &solution) {
        (Some(seed), _) => InitKind::Random(seed),
        (None, Some(f)) => InitKind::ClosedForm(f),
        (None, None) => anyhow::bail!("spec has no known_solution; pass --random-init <seed>"),
    };

    let config = IntegratorConfig {
        precision: vopts.precision.or(spec.options.precision).unwrap_or(128),
        rel_tol: vopts.rel_tol.or(spec.options.rel_tol).unwrap_or(1e-20),
        rmax: vopts
            .rmax
            .or(spec.options.rmax)
            .unwrap_or_else(|| default_rmax(&analysis)),
        samples_per_ray: spec.options.samples_per_ray.unwrap_or(400),
        ..Default::default()
    };
    let opts = VerifyOptions {
        theta_count: spec.options.theta_grid.unwrap_or(vopts.theta_grid),
        delta_exclusion: vopts.delta.or(spec.options.delta).unwrap_or(0.15),
        tolerance: vopts.tolerance.or(spec.options.tolerance).unwrap_or(0.05),
        select_max: vopts.select == Select::Max,
        ..Default::default()
    };

    let mut candidates = analysis.candidates.clone();
    if let Some(delta) = vopts.perturb {
        perturb_candidates(&mut candidates, delta);
    }

    let t1 = Instant::now();
    let result = verify(&eq, &candidates, &analysis.exceptional, &init, &config, &opts);
    let verify_ms = t1.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(report) => {
            let doc = pipeline_report(
                &analysis,
                Some(&report),
                &[("analyze", analyze_ms), ("verify", verify_ms)],
            );
            write_artifacts(&common.out, &common.format, &doc, Some(&report))?;
            if report.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "verification failed: max error {:.6}, coherent: {}",
                    report.max_error, report.branch_coherent
                );
                Ok(ExitCode::from(EXIT_VERIFY_FAIL))
            }
        }
        Err(e) => {
            // Emit diagnostics as JSON before signalling the failure class.
            let doc = serde_json::json!({
                "schema": crg_core::report::SCHEMA,
                "error": e.to_string(),
            });
            eprintln!("{}", serde_json::to_string_pretty(&doc)?);
            Err(e.into())
        }
    }
}

fn cmd_plot(report_path: &Path, out: &Path) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(report_path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", report_path.display()))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("malformed report: {e}"))?;
    let svg = polar_svg(&doc)?;
    std::fs::write(out, svg)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}
