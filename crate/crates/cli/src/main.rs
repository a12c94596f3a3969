use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use avar::{analytic, coeffs, estimate, io as avar_io, simulate, verify, ClockModel, SimulationConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Higher-order Allan variance of integrator-chain clock models.
#[derive(Debug, Parser)]
#[command(name = "avar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate clock reading deviations and write one CSV per realization.
    Simulate(SimulateArgs),
    /// Closed-form variance at each tau.
    Analytic(AnalyticArgs),
    /// Block estimator over a series file, with optional stationarity diagnostics.
    Estimate(EstimateArgs),
    /// Normalized coefficient table r_m / r_0.
    Coeffs(CoeffsArgs),
    /// Run the verification suite and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model JSON file: {"order": n, "q2": [...], "c": [...]}.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Model JSON given inline.
    #[arg(long)]
    model_json: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Samples per realization.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    tau0: f64,
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    /// Output CSV; with several realizations `<stem>_<r>.csv` is written for each.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "n-diff")]
    n_diff: usize,
    /// Comma-separated averaging times.
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Series CSV with header `k,y`; a `<stem>.meta.json` sidecar is read if present.
    #[arg(long)]
    input: PathBuf,
    /// Sample spacing when the series has no sidecar.
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long = "n-diff")]
    n_diff: usize,
    /// Comma-separated, strictly increasing strides (tau = stride * tau0).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    strides: Vec<usize>,
    /// Number of time windows for the stationarity report at stride 1.
    #[arg(long)]
    windows: Option<usize>,
    /// Stationarity report path; defaults to `<out stem>.stationarity.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoeffsArgs {
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Samples per Monte-Carlo path.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Paths in the growth-exponent ensemble.
    #[arg(long)]
    realizations: Option<usize>,
    /// Samples per ensemble path.
    #[arg(long)]
    trend_k: Option<usize>,
    #[arg(long)]
    windows: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Checks,
}

impl From<avar::Error> for Failure {
    fn from(err: avar::Error) -> Self {
        if err.is_validation() {
            Failure::Usage(err.to_string())
        } else {
            Failure::Io(err.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(err: io::Error) -> Self {
        Failure::Io(err.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn io_context(path: &Path) -> impl Fn(avar::Error) -> Failure + '_ {
    move |err| match Failure::from(err) {
        Failure::Io(msg) => Failure::Io(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn load_model(args: &ModelArgs) -> Result<ClockModel, Failure> {
    match (&args.model, &args.model_json) {
        (Some(_), Some(_)) => Err(Failure::Usage("give either --model or --model-json, not both".into())),
        (None, None) => Err(Failure::Usage("a model is required (--model or --model-json)".into())),
        (Some(path), None) => avar_io::load_model(path).map_err(io_context(path)),
        (None, Some(text)) => Ok(avar_io::parse_model(text)?),
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn realization_path(out: &Path, r: usize, total: usize) -> PathBuf {
    if total == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}_{r}.{ext}"))
}

fn cmd_simulate(args: SimulateArgs) -> Outcome {
    let model = load_model(&args.model)?;
    let cfg = SimulationConfig::new(model, args.tau0, args.k, args.seed).realizations(args.realizations);
    let paths = simulate::simulate(&cfg)?;
    for (r, series) in paths.iter().enumerate() {
        let path = realization_path(&args.out, r, paths.len());
        avar_io::save_series(&path, series).map_err(io_context(&path))?;
    }
    Ok(())
}

fn cmd_analytic(args: AnalyticArgs) -> Outcome {
    let model = load_model(&args.model)?;
    let curve = analytic::variance_curve(&model, args.n_diff, &args.tau, args.t)?;
    let out = sink(args.out.as_deref())?;
    match args.format {
        Format::Csv => avar_io::write_curve_csv(out, &curve)?,
        Format::Json => avar_io::write_json(out, &curve)?,
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Outcome {
    let series = avar_io::load_series(&args.input, args.tau0).map_err(io_context(&args.input))?;
    let curve = estimate::allan_sweep(&series, args.n_diff, &args.strides)?;
    let report = match args.windows {
        Some(w) => {
            let path = match (&args.report, &args.out) {
                (Some(p), _) => p.clone(),
                (None, Some(out)) => {
                    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    out.with_file_name(format!("{stem}.stationarity.json"))
                }
                (None, None) => return Err(Failure::Usage("--windows needs --report or --out".into())),
            };
            Some((path, estimate::stationarity_report(&series, args.n_diff, w)?))
        }
        None => None,
    };
    let out = sink(args.out.as_deref())?;
    match args.format {
        Format::Csv => avar_io::write_curve_csv(out, &curve)?,
        Format::Json => avar_io::write_json(out, &curve)?,
    }
    if let Some((path, report)) = report {
        let file = File::create(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        avar_io::write_json(file, &report)?;
    }
    Ok(())
}

fn cmd_coeffs(args: CoeffsArgs) -> Outcome {
    if args.n_min < 1 || args.n_min > args.n_max {
        return Err(Failure::Usage(format!(
            "difference order range {}..={} must satisfy 1 <= n-min <= n-max",
            args.n_min, args.n_max
        )));
    }
    let table = coeffs::coefficient_table(args.n_min..=args.n_max)?;
    let out = sink(args.out.as_deref())?;
    match args.format {
        Format::Csv => avar_io::write_table_csv(out, &table)?,
        Format::Json => avar_io::write_json(out, &avar_io::table_records(&table))?,
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Outcome {
    let mut cfg = verify::VerifyConfig::default();
    if let Some(k) = args.k {
        cfg.samples = k;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.realizations {
        cfg.trend_paths = r;
    }
    if let Some(k) = args.trend_k {
        cfg.trend_samples = k;
    }
    if let Some(w) = args.windows {
        cfg.windows = w;
    }
    let checks = verify::run(&cfg)?;
    avar_io::write_json(sink(args.out.as_deref())?, &checks)?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    for c in checks.iter().filter(|c| !c.passed()) {
        eprintln!("FAIL {}: measured {} expected {} tolerance {}", c.check_name, c.measured, c.expected, c.tolerance);
    }
    eprintln!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        Err(Failure::Checks)
    } else {
        Ok(())
    }
}

fn configure_threads() -> Outcome {
    let Ok(raw) = std::env::var("AVAR_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("AVAR_THREADS must be a nonnegative integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Analytic(a) => cmd_analytic(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Coeffs(a) => cmd_coeffs(a),
        Command::Verify(a) => cmd_verify(a),
    });
    let one_line = |msg: String| msg.replace('\n', " ");
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("avar: {}", one_line(msg));
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("avar: {}", one_line(msg));
            ExitCode::from(3)
        }
    }
}
