//! Batch experiment driver for dense ground-displacement estimation.
//!
//! Subcommands cover each pipeline stage (simulate, estimate, refine,
//! regularize, evaluate, profile) plus an end-to-end `pipeline` run driven by
//! a single JSON config. All outputs are files; exit code 0 on success, 2 on
//! validation errors, 3 on I/O errors, with a one-line diagnostic on stderr.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use defkit::estimate::estimate_flow;
use defkit::io;
use defkit::metrics::evaluate_run;
use defkit::refine::{intermediate_loss, iterative_refine};
use defkit::regularize::regularize_field;
use defkit::simulate::synthesize_pair;
use defkit::types::classify_range;
use defkit::{Error, Result};
use serde::Serialize;

use config::{EstimateDoc, PipelineConfig, RefineDoc, RegularizeDoc, SimulateDoc};

#[derive(Parser)]
#[command(
    name = "defkit",
    version,
    about = "Dense ground-displacement estimation: synthesis, matching, refinement, regularization"
)]
struct Cli {
    /// Cap the worker thread pool (0 = one thread per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: images, ground truth, near-fault mask.
    Simulate(SimulateArgs),
    /// One-shot dense displacement estimation between two rasters.
    Estimate(EstimateArgs),
    /// Iterative refinement with explicit warping; emits every pass.
    Refine(RefineArgs),
    /// A-posteriori denoising of a displacement field.
    Regularize(RegularizeArgs),
    /// Metrics of an estimate against ground truth.
    Evaluate(EvaluateArgs),
    /// Sample a displacement profile along a line.
    Profile(ProfileArgs),
    /// Full run: simulate, estimate with refinement, regularize, evaluate.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation spec document (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Replace the spec's master seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    i1: PathBuf,
    #[arg(long)]
    i2: PathBuf,
    /// Estimator config document (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output field path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    i1: PathBuf,
    #[arg(long)]
    i2: PathBuf,
    /// Estimator + refinement config document (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (df_1.fld ... df_n.fld).
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth field; enables the intermediate-loss table.
    #[arg(long)]
    gt: Option<PathBuf>,
}

#[derive(Args)]
struct RegularizeArgs {
    /// Input field path.
    #[arg(long)]
    input: PathBuf,
    /// Regularizer config document (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output field path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Near-fault mask path.
    #[arg(long)]
    mask: PathBuf,
    /// Report JSON output path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Report CSV output path.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "unknown")]
    estimator_label: String,
    #[arg(long, default_value = "none")]
    regularizer_label: String,
}

#[derive(Args)]
struct ProfileArgs {
    /// Input field path.
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    x0: f64,
    #[arg(long)]
    y0: f64,
    /// Line direction, radians counter-clockwise from +x.
    #[arg(long)]
    angle: f64,
    #[arg(long)]
    length: f64,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config document (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the simulation's master seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // A second invocation in-process would fail; the CLI runs once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("defkit: {err}");
            ExitCode::from(if err.is_io() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Simulate(args) => simulate(args, quiet),
        Command::Estimate(args) => estimate(args, quiet),
        Command::Refine(args) => refine(args, quiet),
        Command::Regularize(args) => regularize(args, quiet),
        Command::Evaluate(args) => evaluate(args, quiet),
        Command::Profile(args) => profile(args, quiet),
        Command::Pipeline(args) => run_pipeline_cmd(args, quiet),
    }
}

#[derive(Serialize)]
struct SimulateManifest {
    version: u32,
    tool: String,
    simulation: defkit::simulate::SimulationSpec,
    bucket: defkit::RangeBucket,
    files: Vec<String>,
}

fn simulate(args: SimulateArgs, quiet: bool) -> Result<()> {
    let mut doc: SimulateDoc = io::read_json(&args.spec)?;
    if let Some(seed) = args.seed_override {
        doc.simulation.texture.seed = seed;
    }
    doc.validate()?;
    std::fs::create_dir_all(&args.out)?;
    let pair = synthesize_pair::<f64>(&doc.simulation)?;
    let bucket = classify_range(&pair.df_gt)?;

    io::write_raster(args.out.join("i1.ras"), &pair.i1)?;
    io::write_raster(args.out.join("i2.ras"), &pair.i2)?;
    io::write_raster_pgm(args.out.join("i1.pgm"), &pair.i1, 255)?;
    io::write_raster_pgm(args.out.join("i2.pgm"), &pair.i2, 255)?;
    io::write_field(args.out.join("df_gt.fld"), &pair.df_gt)?;
    io::write_mask(args.out.join("near_fault.msk"), &pair.near_fault)?;
    let manifest = SimulateManifest {
        version: config::CONFIG_VERSION,
        tool: format!("defkit {}", env!("CARGO_PKG_VERSION")),
        simulation: doc.simulation,
        bucket,
        files: ["i1.ras", "i2.ras", "i1.pgm", "i2.pgm", "df_gt.fld", "near_fault.msk"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    io::write_json(args.out.join("simulate_manifest.json"), &manifest)?;
    if !quiet {
        println!("simulated scene into {} (bucket {bucket})", args.out.display());
    }
    Ok(())
}

fn estimate(args: EstimateArgs, quiet: bool) -> Result<()> {
    let doc: EstimateDoc = io::read_json(&args.config)?;
    doc.validate()?;
    let i1 = io::read_raster::<f64>(&args.i1)?;
    let i2 = io::read_raster::<f64>(&args.i2)?;
    let df = estimate_flow(&i1, &i2, &doc.estimator)?;
    io::write_field(&args.out, &df)?;
    if !quiet {
        println!("estimated field written to {}", args.out.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct RefineManifest {
    version: u32,
    tool: String,
    estimator: defkit::estimate::EstimatorConfig,
    refinement: defkit::refine::RefinementConfig,
    intermediate_loss: Option<pipeline::LossSummary>,
    files: Vec<String>,
}

fn refine(args: RefineArgs, quiet: bool) -> Result<()> {
    let doc: RefineDoc = io::read_json(&args.config)?;
    doc.validate()?;
    let i1 = io::read_raster::<f64>(&args.i1)?;
    let i2 = io::read_raster::<f64>(&args.i2)?;
    std::fs::create_dir_all(&args.out)?;

    let est_cfg = doc.estimator;
    let trace = iterative_refine(
        &i1,
        &i2,
        |a, b| estimate_flow(a, b, &est_cfg),
        &doc.refinement,
    )?;
    let mut files = Vec::new();
    for (i, field) in trace.fields.iter().enumerate() {
        let name = format!("df_{}.fld", i + 1);
        io::write_field(args.out.join(&name), field)?;
        files.push(name);
    }

    let loss = match &args.gt {
        Some(gt_path) => {
            let gt = io::read_field::<f64>(gt_path)?;
            let (total, per_iteration) = intermediate_loss(&trace, &gt, doc.refinement.gamma)?;
            let mut csv = String::from("iteration,mean_l1,weight,weighted\n");
            let n = per_iteration.len();
            for (i, term) in per_iteration.iter().enumerate() {
                let weight = doc.refinement.gamma.powi((n - 1 - i) as i32);
                csv.push_str(&format!(
                    "{},{:.8e},{:.8e},{:.8e}\n",
                    i + 1,
                    term,
                    weight,
                    weight * term
                ));
            }
            csv.push_str(&format!("total,,,{total:.8e}\n"));
            std::fs::write(args.out.join("intermediate_loss.csv"), csv)?;
            files.push("intermediate_loss.csv".into());
            Some(pipeline::LossSummary {
                gamma: doc.refinement.gamma,
                total,
                per_iteration,
            })
        }
        None => None,
    };

    let manifest = RefineManifest {
        version: config::CONFIG_VERSION,
        tool: format!("defkit {}", env!("CARGO_PKG_VERSION")),
        estimator: doc.estimator,
        refinement: doc.refinement,
        intermediate_loss: loss,
        files,
    };
    io::write_json(args.out.join("refine_manifest.json"), &manifest)?;
    if !quiet {
        println!(
            "refined {} pass(es) into {}",
            trace.fields.len(),
            args.out.display()
        );
    }
    Ok(())
}

fn regularize(args: RegularizeArgs, quiet: bool) -> Result<()> {
    let doc: RegularizeDoc = io::read_json(&args.config)?;
    doc.validate()?;
    let field = io::read_field::<f64>(&args.input)?;
    let outcome = regularize_field(&field, &doc.regularizer)?;
    io::write_field(&args.out, &outcome.field)?;
    if !quiet {
        println!(
            "regularized field written to {} (converged: {}, sweeps: {})",
            args.out.display(),
            outcome.converged,
            outcome.sweeps
        );
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs, quiet: bool) -> Result<()> {
    let est = io::read_field::<f64>(&args.est)?;
    let gt = io::read_field::<f64>(&args.gt)?;
    let mask = io::read_mask(&args.mask)?;
    let report = evaluate_run(
        &est,
        &gt,
        &mask,
        &args.estimator_label,
        &args.regularizer_label,
    )?;
    if args.json.is_none() && args.csv.is_none() {
        return Err(Error::ConfigInvalid(
            "evaluate needs --json and/or --csv output paths".into(),
        ));
    }
    if let Some(path) = &args.json {
        io::write_json(path, &report)?;
    }
    if let Some(path) = &args.csv {
        io::write_reports_csv(path, std::slice::from_ref(&report))?;
    }
    if !quiet {
        println!(
            "epe {:.6}, smoothness near {:.6} / non {:.6} ({})",
            report.epe, report.smoothness_near_fault, report.smoothness_non_fault, report.bucket
        );
    }
    Ok(())
}

fn profile(args: ProfileArgs, quiet: bool) -> Result<()> {
    let field = io::read_field::<f64>(&args.field)?;
    let line = io::ProfileLine {
        x0: args.x0,
        y0: args.y0,
        angle: args.angle,
        length: args.length,
    };
    let rows = io::extract_profile(&field, &line, args.samples)?;
    io::write_profile_csv(&args.out, &rows)?;
    if !quiet {
        println!("profile with {} samples written to {}", rows.len(), args.out.display());
    }
    Ok(())
}

fn run_pipeline_cmd(args: PipelineArgs, quiet: bool) -> Result<()> {
    let doc: PipelineConfig = io::read_json(&args.config)?;
    let out_dir = match (&args.out, &doc.output_dir) {
        (Some(path), _) => path.clone(),
        (None, Some(path)) => PathBuf::from(path),
        (None, None) => {
            return Err(Error::ConfigInvalid(
                "no output directory: pass --out or set output_dir".into(),
            ))
        }
    };
    let manifest = pipeline::run_pipeline(doc, &out_dir, args.seed_override, quiet)?;
    pipeline::write_manifest(&manifest, &out_dir)?;
    if !quiet {
        println!("pipeline complete: {}", out_dir.display());
    }
    Ok(())
}
