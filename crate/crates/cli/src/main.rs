//! Command-line front end: config validation, eigenvalue and
//! transmission sweeps, single-field analysis reports, and trace fits.
//!
//! Every data-producing run writes a manifest alongside its outputs with
//! the resolved configuration, grids, output paths, tool version and
//! wall-clock duration; `rerun` replays a manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod analyze;
mod error;
mod manifest;

use error::AppError;
use manifest::RunManifest;
use polchip_core::transmission::fmt_sig;
use polchip_core::*;

#[derive(Parser, Debug)]
#[command(name = "polchip", version, about = "Coupled-resonator spin-ensemble chip modeling")]
struct Cli {
    /// Chip configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for data files and manifests.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (default: POLCHIP_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Refuse maps larger than this many grid points.
    #[arg(long, global = true, default_value_t = 10_000_000)]
    max_points: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a configuration and echo its normalized form.
    Validate,
    /// Track eigenbranches over a field sweep and export them as CSV.
    Eigenmap(EigenmapArgs),
    /// Compute a 2-D transmission map over (omega, B).
    S21map(S21mapArgs),
    /// Closed-form couplings, gaps, dispersive quantities and
    /// negativities at a single field.
    Analyze(AnalyzeArgs),
    /// Fit a model to a CSV trace.
    Fit(FitArgs),
    /// Replay the command recorded in a run manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Debug)]
struct EigenmapArgs {
    #[arg(long)]
    b_min: f64,
    #[arg(long)]
    b_max: f64,
    #[arg(long)]
    b_steps: usize,
    /// Also export per-branch photon-photon negativity curves.
    #[arg(long)]
    negativity: bool,
}

#[derive(Args, Debug)]
struct S21mapArgs {
    #[arg(long)]
    omega_min: f64,
    #[arg(long)]
    omega_max: f64,
    #[arg(long)]
    omega_steps: usize,
    #[arg(long)]
    b_min: f64,
    #[arg(long)]
    b_max: f64,
    #[arg(long)]
    b_steps: usize,
    /// Normalize to the maximum |S21| over the map.
    #[arg(long)]
    normalize: bool,
    #[arg(long, value_enum, default_value_t = MapFormat::Csv)]
    format: MapFormat,
    /// Branch of the complex square root of gamma_c.
    #[arg(long, value_enum, default_value_t = GammaCBranch::Principal)]
    gamma_c_branch: GammaCBranch,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MapFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GammaCBranch {
    Principal,
    Negative,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Magnetic field, mT.
    #[arg(long)]
    b: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// One of: resonance, linewidth-vs-field, stretched-exp,
    /// thermal-polarization.
    #[arg(long)]
    model: String,
    /// CSV trace; the header's first column names the abscissa unit.
    #[arg(long)]
    trace: PathBuf,
    /// Fixed model parameters as key=value (repeatable).
    #[arg(long = "fixed", value_name = "KEY=VALUE")]
    fixed: Vec<String>,
}

#[derive(Args, Debug)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn resolve_threads(cli: &Cli) -> Option<usize> {
    cli.threads.or_else(|| {
        std::env::var("POLCHIP_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn with_pool<T, F: FnOnce() -> T + Send>(threads: Option<usize>, f: F) -> Result<T, AppError>
where
    T: Send,
{
    match threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| AppError::Usage(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

fn load_config(cli: &Cli) -> Result<ChipConfig, AppError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| AppError::Usage("--config PATH is required for this command".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Io(format!("cannot read {}: {e}", path.display())))?;
    let cfg = config_from_json(&text)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn write_output(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, AppError> {
    fs::create_dir_all(dir)
        .map_err(|e| AppError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| AppError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn run(cli: &Cli, argv: &[String]) -> Result<(), AppError> {
    match &cli.command {
        Command::Validate => cmd_validate(cli),
        Command::Eigenmap(args) => cmd_eigenmap(cli, args, argv),
        Command::S21map(args) => cmd_s21map(cli, args, argv),
        Command::Analyze(args) => cmd_analyze(cli, args, argv),
        Command::Fit(args) => cmd_fit(cli, args, argv),
        Command::Rerun(args) => cmd_rerun(args),
    }
}

fn cmd_validate(cli: &Cli) -> Result<(), AppError> {
    let cfg = load_config(cli)?;
    let text = serde_json::to_string_pretty(&cfg.to_raw())
        .map_err(|e| AppError::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_eigenmap(cli: &Cli, args: &EigenmapArgs, argv: &[String]) -> Result<(), AppError> {
    let start = Instant::now();
    let cfg = load_config(cli)?;
    let sweep = FieldSweep::linspace(args.b_min, args.b_max, args.b_steps)?;
    let basis = SingleExcitationBasis::for_config(&cfg);
    let threads = resolve_threads(cli);

    let branches = with_pool(threads, || track_branches(&cfg, &sweep))??;

    let mut csv = Vec::new();
    {
        use std::io::Write;
        write!(csv, "B_mT,branch_index,freq_MHz").map_err(AppError::io)?;
        for label in basis.labels() {
            write!(csv, ",prob_{label}").map_err(AppError::io)?;
        }
        writeln!(csv).map_err(AppError::io)?;
        for (step, &b) in sweep.values().iter().enumerate() {
            for branch in &branches {
                write!(
                    csv,
                    "{},{},{}",
                    fmt_sig(b),
                    branch.start_index,
                    fmt_sig(branch.freq_mhz[step])
                )
                .map_err(AppError::io)?;
                for w in probabilities(&branch.vectors[step], &basis) {
                    write!(csv, ",{}", fmt_sig(w.weight)).map_err(AppError::io)?;
                }
                writeln!(csv).map_err(AppError::io)?;
            }
        }
    }
    let mut outputs = vec![write_output(&cli.out, "eigenmap.csv", &csv)?];

    if args.negativity {
        let selection: Vec<usize> = (0..basis.dim()).collect();
        let neg = negativity_sweep(&cfg, &sweep, &selection)?;
        let mut buf = Vec::new();
        neg.to_csv(&mut buf).map_err(AppError::io)?;
        outputs.push(write_output(&cli.out, "negativity.csv", &buf)?);
    }

    RunManifest::new("eigenmap", argv, &cfg)
        .grids(serde_json::json!({
            "B_mT": {"min": args.b_min, "max": args.b_max, "steps": args.b_steps}
        }))
        .outputs(&outputs)
        .finish(start)
        .write(&cli.out.join("eigenmap.manifest.json"))?;
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_s21map(cli: &Cli, args: &S21mapArgs, argv: &[String]) -> Result<(), AppError> {
    let start = Instant::now();
    let cfg = load_config(cli)?;
    let omega = OmegaGrid::linspace(args.omega_min, args.omega_max, args.omega_steps)?;
    let sweep = FieldSweep::linspace(args.b_min, args.b_max, args.b_steps)?;
    let opts = MapOptions {
        normalize: args.normalize,
        max_points: cli.max_points,
        response: ResponseOptions {
            negative_gamma_c_root: matches!(args.gamma_c_branch, GammaCBranch::Negative),
        },
    };
    let threads = resolve_threads(cli);
    let map = with_pool(threads, || transmission_map(&cfg, &omega, &sweep, opts))??;

    let output = match args.format {
        MapFormat::Csv => {
            let mut buf = Vec::new();
            map.to_csv(&mut buf).map_err(AppError::io)?;
            write_output(&cli.out, "s21map.csv", &buf)?
        }
        MapFormat::Json => write_output(&cli.out, "s21map.json", map.to_json().as_bytes())?,
    };

    RunManifest::new("s21map", argv, &cfg)
        .grids(serde_json::json!({
            "omega_MHz": {"min": args.omega_min, "max": args.omega_max, "steps": args.omega_steps},
            "B_mT": {"min": args.b_min, "max": args.b_max, "steps": args.b_steps},
            "normalize": args.normalize
        }))
        .outputs(std::slice::from_ref(&output))
        .finish(start)
        .write(&cli.out.join("s21map.manifest.json"))?;
    println!("wrote {}", output.display());
    Ok(())
}

fn cmd_analyze(cli: &Cli, args: &AnalyzeArgs, argv: &[String]) -> Result<(), AppError> {
    let start = Instant::now();
    let cfg = load_config(cli)?;
    let report = analyze::report(&cfg, args.b)?;
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| AppError::Io(e.to_string()))?;
    let output = write_output(&cli.out, "analyze.json", text.as_bytes())?;
    RunManifest::new("analyze", argv, &cfg)
        .grids(serde_json::json!({"B_mT": args.b}))
        .outputs(std::slice::from_ref(&output))
        .finish(start)
        .write(&cli.out.join("analyze.manifest.json"))?;
    println!("{text}");
    Ok(())
}

fn cmd_fit(cli: &Cli, args: &FitArgs, argv: &[String]) -> Result<(), AppError> {
    let start = Instant::now();
    let text = fs::read_to_string(&args.trace)
        .map_err(|e| AppError::Io(format!("cannot read {}: {e}", args.trace.display())))?;
    let trace = trace_from_csv(&text)?;

    let fixed = parse_fixed(&args.fixed)?;
    let need = |key: &str| -> Result<f64, AppError> {
        fixed
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                AppError::Usage(format!("model {:?} requires --fixed {key}=VALUE", args.model))
            })
    };

    let result = match args.model.as_str() {
        "resonance" => fit_resonance(&trace)?,
        "linewidth-vs-field" => fit_linewidth_vs_field(
            &trace,
            LinewidthFixed {
                omega_minus_mhz: need("omega_minus_MHz")?,
                g_factor: need("g")?,
            },
        )?,
        "stretched-exp" => fit_stretched_exponential(&trace)?,
        "thermal-polarization" => fit_thermal_polarization(
            &trace,
            ThermalFixed {
                g_factor: need("g")?,
                b_mt: need("B_mT")?,
            },
        )?,
        other => {
            return Err(AppError::Usage(format!(
                "unknown model {other:?}; valid models: resonance, linewidth-vs-field, \
                 stretched-exp, thermal-polarization"
            )))
        }
    };

    let json = result.to_json();
    let text = serde_json::to_string_pretty(&json).map_err(|e| AppError::Io(e.to_string()))?;
    let output = write_output(&cli.out, "fit.json", text.as_bytes())?;
    RunManifest::bare("fit", argv)
        .grids(serde_json::json!({
            "model": args.model,
            "trace": args.trace.display().to_string(),
            "fixed": fixed.iter().cloned().collect::<std::collections::BTreeMap<_, _>>()
        }))
        .outputs(std::slice::from_ref(&output))
        .finish(start)
        .write(&cli.out.join("fit.manifest.json"))?;
    println!("{text}");
    Ok(())
}

fn parse_fixed(items: &[String]) -> Result<Vec<(String, f64)>, AppError> {
    items
        .iter()
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| AppError::Usage(format!("--fixed {item:?} is not KEY=VALUE")))?;
            let value: f64 = v
                .parse()
                .map_err(|_| AppError::Usage(format!("--fixed {item:?}: {v:?} is not a number")))?;
            Ok((k.to_string(), value))
        })
        .collect()
}

fn cmd_rerun(args: &RerunArgs) -> Result<(), AppError> {
    let text = fs::read_to_string(&args.manifest)
        .map_err(|e| AppError::Io(format!("cannot read {}: {e}", args.manifest.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| AppError::Config(e.to_string()))?;
    let argv: Vec<String> = value
        .get("argv")
        .and_then(|v| v.as_array())
        .ok_or_else(|| AppError::Config("manifest has no argv record".into()))?
        .iter()
        .filter_map(|v| v.as_str().map(String::from))
        .collect();
    if argv.first().map(String::as_str) == Some("rerun") {
        return Err(AppError::Usage("refusing to replay a rerun manifest".into()));
    }
    let cli = Cli::parse_from(std::iter::once("polchip".to_string()).chain(argv.iter().cloned()));
    run(&cli, &argv)
}
