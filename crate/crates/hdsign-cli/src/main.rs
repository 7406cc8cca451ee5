//! Command-line driver for the sign-test library: single-test evaluation,
//! Monte-Carlo simulation grids, sampling, and the moment oracle.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdsign::{
    derive_stream, emit_histogram_data, evaluate, independence, location, portmanteau,
    portmanteau_lowrank, rayleigh, rho_even_moment, run_grid_observed,
    sample_rotsym, sample_uniform, sphericity, to_csv, to_json, write_report, AngularKind,
    Error, Family, NullModel, Probability, ReportFormat, SimulationConfig, StatisticPair,
    TestMeta, UnitVectorSample,
};
use ndarray::{s, Array1, Array2};

/// Highest grid dimension and replicate count allowed without `--full`.
const DESK_GRID_LIMIT: usize = 200;
const DESK_REPLICATE_LIMIT: u64 = 2000;

#[derive(Parser)]
#[command(
    name = "hdsign",
    version,
    about = "High-dimensional sign tests: evaluation, simulation, sampling",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one test on a CSV data file and print the outcome as JSON.
    Test(TestArgs),
    /// Run a Monte-Carlo grid and write the report.
    Simulate(SimulateArgs),
    /// Draw a sample of unit vectors and print it as CSV.
    Sample(SampleArgs),
    /// Print an exact even moment of a sign coordinate.
    Moments(MomentsArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Test family to evaluate.
    #[arg(long, value_parser = parse_family)]
    family: Family,
    /// CSV data file, one observation per row.
    data: PathBuf,
    /// Second data file (independence only).
    data2: Option<PathBuf>,
    /// Split the single data file into two blocks at this column
    /// (independence only).
    #[arg(long, conflicts_with = "data2")]
    split: Option<usize>,
    /// Hypothesized location, comma-separated (location only).
    #[arg(long, value_parser = parse_reals)]
    theta0: Option<std::vec::Vec<f64>>,
    /// Maximum lag for the serial families.
    #[arg(long = "H", default_value_t = 3)]
    h_max: usize,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Normalize rows to unit length before testing.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Read the simulation configuration from a JSON file instead of flags.
    #[arg(long, conflicts_with_all = ["family", "grid_n", "grid_p", "seed"])]
    config: Option<PathBuf>,
    /// Test family to simulate.
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    /// Sample sizes, comma-separated.
    #[arg(long = "grid-n", value_parser = parse_sizes)]
    grid_n: Option<std::vec::Vec<usize>>,
    /// Dimensions, comma-separated.
    #[arg(long = "grid-p", value_parser = parse_sizes)]
    grid_p: Option<std::vec::Vec<usize>>,
    /// Replicates per cell.
    #[arg(long = "M", default_value_t = DESK_REPLICATE_LIMIT)]
    replicates: u64,
    /// Master seed for all derived streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significance level for the rejection rates.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Maximum lag for the serial families.
    #[arg(long = "H", default_value_t = 3)]
    h_max: usize,
    #[command(flatten)]
    null: NullArgs,
    /// Worker threads; the output does not depend on this.
    #[arg(long, env = "HDSIGN_WORKERS")]
    workers: Option<usize>,
    /// Output format.
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: ReportFormat,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow full-scale runs past the desk limits (dimensions above 200,
    /// more than 2000 replicates).
    #[arg(long)]
    full: bool,
    /// Write one histogram plot table per cell into this directory.
    #[arg(long = "hist-dir")]
    hist_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Number of observations.
    #[arg(long)]
    n: usize,
    /// Dimension of each observation.
    #[arg(long)]
    p: usize,
    /// Seed of the generating stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    null: NullArgs,
    /// Symmetry axis for rotationally symmetric laws, comma-separated;
    /// defaults to the first canonical basis vector.
    #[arg(long, value_parser = parse_reals)]
    theta0: Option<std::vec::Vec<f64>>,
    /// Write the sample here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    /// Ambient dimension.
    #[arg(long)]
    p: u32,
    /// Moment order; must be even, odd moments vanish by symmetry.
    #[arg(long)]
    m: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum NullChoice {
    /// Signs uniform on the unit sphere.
    UniformSphere,
    /// Directions of standard Gaussian vectors (same law as uniform).
    GaussianDirections,
    /// Rotationally symmetric von Mises-Fisher law; needs --kappa.
    Vmf,
    /// Rotationally symmetric linear angular density; needs --slope.
    Linear,
}

#[derive(Args)]
struct NullArgs {
    /// Sampling law.
    #[arg(long, value_enum, default_value_t = NullChoice::UniformSphere)]
    null: NullChoice,
    /// Concentration for --null vmf.
    #[arg(long)]
    kappa: Option<f64>,
    /// Slope for --null linear.
    #[arg(long)]
    slope: Option<f64>,
}

/// A failure ready for the shell: 2 usage, 3 data, 4 capacity.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn data(message: impl Into<String>) -> Failure {
    Failure { code: 3, message: message.into() }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::Config(_) => 2,
        Error::Capacity { .. } => 4,
        Error::GridAborted { source, .. } => exit_code_for(source),
        _ => 3,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure { code: exit_code_for(&err), message: err.to_string() }
    }
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse::<ReportFormat>().map_err(|e| e.to_string())
}

fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|tok| tok.trim().parse::<usize>().map_err(|_| format!("not a size: {tok:?}")))
        .collect()
}

fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|tok| {
            let v = tok.trim().parse::<f64>().map_err(|_| format!("not a number: {tok:?}"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("not finite: {tok:?}"))
            }
        })
        .collect()
}

impl NullArgs {
    fn build(&self) -> Result<NullModel, Failure> {
        let stray = |flag: &str, wanted: &str| {
            usage(format!("--{flag} is only meaningful with --null {wanted}"))
        };
        match self.null {
            NullChoice::UniformSphere | NullChoice::GaussianDirections => {
                if self.kappa.is_some() {
                    return Err(stray("kappa", "vmf"));
                }
                if self.slope.is_some() {
                    return Err(stray("slope", "linear"));
                }
                Ok(match self.null {
                    NullChoice::UniformSphere => NullModel::UniformSphere,
                    _ => NullModel::GaussianDirections,
                })
            }
            NullChoice::Vmf => {
                if self.slope.is_some() {
                    return Err(stray("slope", "linear"));
                }
                let kappa = self.kappa.ok_or_else(|| usage("--null vmf needs --kappa"))?;
                Ok(NullModel::Rotsym { angular: AngularKind::VonMisesFisher { kappa } })
            }
            NullChoice::Linear => {
                if self.kappa.is_some() {
                    return Err(stray("kappa", "vmf"));
                }
                let slope = self.slope.ok_or_else(|| usage("--null linear needs --slope"))?;
                Ok(NullModel::Rotsym { angular: AngularKind::Linear { slope } })
            }
        }
    }
}

/// Parses a CSV file of reals into a dense matrix.
///
/// Rows are observations; every row must have the same number of fields
/// and every field must be a finite number.
fn load_matrix(path: &Path) -> Result<Array2<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| {
                data(format!("{}:{}: not a number: {tok:?}", path.display(), lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(data(format!(
                    "{}:{}: non-finite value {tok:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(data(format!(
                    "{}:{}: row has {} fields but the first row has {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(data(format!("{}: no observations", path.display())));
    }
    let (n, p) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, p), flat)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn into_sample(x: Array2<f64>, normalize: bool) -> Result<UnitVectorSample, Failure> {
    let made = if normalize {
        UnitVectorSample::from_observations(&x)
    } else {
        UnitVectorSample::new(x)
    };
    made.map_err(|e| match e {
        Error::NotUnit { .. } => Failure {
            code: 3,
            message: format!("{e}; pass --normalize to project observations onto the sphere"),
        },
        other => other.into(),
    })
}

fn cmd_test(args: TestArgs) -> Result<(), Failure> {
    let alpha = Probability::new(args.alpha)
        .map_err(|_| usage(format!("--alpha must be a probability, got {}", args.alpha)))?;
    let x = load_matrix(&args.data)?;

    let (pair, meta): (StatisticPair, TestMeta) = match args.family {
        Family::Independence => {
            let (xu, xv) = match (&args.data2, args.split) {
                (Some(path2), None) => (x, load_matrix(path2)?),
                (None, Some(k)) => {
                    let p = x.ncols();
                    if k == 0 || k >= p {
                        return Err(usage(format!(
                            "--split must lie strictly inside the {p} columns, got {k}"
                        )));
                    }
                    (x.slice(s![.., ..k]).to_owned(), x.slice(s![.., k..]).to_owned())
                }
                (None, None) => {
                    return Err(usage(
                        "the independence test needs a second data file or --split",
                    ))
                }
                (Some(_), Some(_)) => unreachable!("clap rejects data2 together with --split"),
            };
            let u = into_sample(xu, args.normalize)?;
            let v = into_sample(xv, args.normalize)?;
            let meta = TestMeta::sample(u.n(), u.p()).with_q(v.p());
            (independence(&u, &v)?, meta)
        }
        family => {
            let u = into_sample(x, args.normalize)?;
            let (n, p) = (u.n(), u.p());
            if matches!(family, Family::Location | Family::Sphericity) && p < 2 {
                return Err(data(format!(
                    "the {family} test requires p >= 2, but the data has p = {p}"
                )));
            }
            match family {
                Family::Uniformity => (rayleigh(&u), TestMeta::sample(n, p)),
                Family::Location => {
                    let theta0 = args
                        .theta0
                        .clone()
                        .ok_or_else(|| usage("the location test needs --theta0"))?;
                    let axis = Array1::from_vec(theta0.clone());
                    (location(&u, axis.view())?, TestMeta::sample(n, p).with_theta0(theta0))
                }
                Family::Serial => {
                    (portmanteau(&u, args.h_max)?, TestMeta::sample(n, p).with_lag(args.h_max))
                }
                Family::SerialLowrank => (
                    portmanteau_lowrank(&u, args.h_max)?,
                    TestMeta::sample(n, p).with_lag(args.h_max),
                ),
                Family::Sphericity => (sphericity(&u)?, TestMeta::sample(n, p)),
                Family::Independence => unreachable!("handled above"),
            }
        }
    };

    let outcome = evaluate(args.family, pair, alpha, meta)?;
    let text = serde_json::to_string_pretty(&outcome)
        .map_err(|e| data(format!("cannot serialize outcome: {e}")))?;
    println!("{text}");
    Ok(())
}

fn desk_scale_gate(config: &SimulationConfig, full: bool) -> Result<(), Failure> {
    if full {
        return Ok(());
    }
    let widest = config.grid_n.iter().chain(&config.grid_p).copied().max().unwrap_or(0);
    if widest > DESK_GRID_LIMIT {
        return Err(usage(format!(
            "grid dimension {widest} exceeds the desk limit {DESK_GRID_LIMIT}; pass --full to lift it"
        )));
    }
    if config.replicates > DESK_REPLICATE_LIMIT {
        return Err(usage(format!(
            "M = {} exceeds the desk limit {DESK_REPLICATE_LIMIT}; pass --full to lift it",
            config.replicates
        )));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<SimulationConfig>(&text)
                .map_err(|e| data(format!("{}: {e}", path.display())))?
        }
        None => {
            let family = args.family.ok_or_else(|| usage("simulate needs --family"))?;
            let grid_n = args.grid_n.clone().ok_or_else(|| usage("simulate needs --grid-n"))?;
            let grid_p = args.grid_p.clone().ok_or_else(|| usage("simulate needs --grid-p"))?;
            SimulationConfig {
                family,
                grid_n,
                grid_p,
                replicates: args.replicates,
                master_seed: args.seed,
                alpha: Probability::new(args.alpha).map_err(|_| {
                    usage(format!("--alpha must be a probability, got {}", args.alpha))
                })?,
                h_max: args.h_max,
                null_model: args.null.build()?,
                workers: 1,
            }
        }
    };
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    desk_scale_gate(&config, args.full)?;

    let report = run_grid_observed(&config, |cell| {
        let ks = cell.ks_normal.map(|k| format!("{:.4}", k.d)).unwrap_or_else(|| "-".into());
        eprintln!(
            "cell {} n={} p={}: mean={:.4} var={:.4} ks={} reject_u={:.4} reject_f={:.4}",
            cell.family,
            cell.n,
            cell.p,
            cell.mean,
            cell.variance,
            ks,
            cell.rejection_rate_universal,
            cell.rejection_rate_fixed
        );
    })?;

    if let Some(dir) = &args.hist_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| data(format!("cannot create {}: {e}", dir.display())))?;
        for cell in &report.cells {
            let grid_p = cell.stream_path[2];
            let path = dir.join(format!("{}_n{}_p{}.dat", cell.family, cell.n, grid_p));
            emit_histogram_data(cell, &path)?;
            eprintln!("wrote {}", path.display());
        }
    }

    match &args.out {
        Some(path) => {
            write_report(&report, args.format, path)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let text = match args.format {
                ReportFormat::Json => to_json(&report)?,
                ReportFormat::Csv => to_csv(&report),
            };
            print!("{text}");
            if args.format == ReportFormat::Json {
                println!();
            }
        }
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<(), Failure> {
    let stream = derive_stream(args.seed, &[]);
    let sample = match args.null.build()? {
        NullModel::UniformSphere | NullModel::GaussianDirections => {
            if args.theta0.is_some() {
                return Err(usage("--theta0 is only meaningful for rotationally symmetric laws"));
            }
            sample_uniform(&stream, args.n, args.p)?
        }
        NullModel::Rotsym { angular } => {
            let axis = match &args.theta0 {
                Some(values) => Array1::from_vec(values.clone()),
                None => {
                    let mut e1 = Array1::zeros(args.p);
                    if args.p > 0 {
                        e1[0] = 1.0;
                    }
                    e1
                }
            };
            sample_rotsym(&stream, args.n, args.p, angular, axis.view())?
        }
    };
    let mut out = String::new();
    for row in sample.rows().rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, out)
            .map_err(|e| data(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{out}"),
    }
    Ok(())
}

fn cmd_moments(args: MomentsArgs) -> Result<(), Failure> {
    let moment = rho_even_moment(args.p, args.m)?;
    println!("E[rho^{}] at p = {}", args.m, args.p);
    println!("  product form: {}", moment.product_form());
    println!("  value:        {:.17e}", moment.value);
    println!(
        "  context: rho^2 follows Beta(a, b) with a = 0.5, b = {}",
        (f64::from(args.p) - 1.0) / 2.0
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Moments(args) => cmd_moments(args),
    }
}

fn main() -> ExitCode {
    // Die quietly when the reader of a pipe goes away, as Unix filters do,
    // instead of panicking mid-write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
