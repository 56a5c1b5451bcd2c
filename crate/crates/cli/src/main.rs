use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sketchlab::experiment::parse_k_grid;
use sketchlab::io::{format_csv, write_csv};
use sketchlab::parallel::configure_threads_from_env;
use sketchlab::{
    run_experiment, DecayProfile, Error, ExperimentConfig, InputFormat, InputSource, Mode, SketchFamily,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_RANK_ONLY: u8 = 3;

#[derive(Parser)]
#[command(name = "sketchlab", version, about = "Surrogate predictions and Monte Carlo checks for matrix sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted low-rank approximation error k/γ (no sampling)
    Predict(Common),
    /// Predicted and Monte Carlo low-rank approximation error
    Mc(McArgs),
    /// Sketched Kaczmarz: predicted vs averaged error vector after some steps
    Kaczmarz(KaczmarzArgs),
    /// Nyström trace-norm error of an RBF kernel
    Nystrom(NystromArgs),
    /// γ(k) from the spectrum, with closed forms for decay profiles
    Gamma(Common),
}

#[derive(Args)]
struct Common {
    /// Data matrix file (libsvm or dense CSV)
    #[arg(long, conflicts_with = "profile")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, requires = "input")]
    format: Option<FormatArg>,
    /// Synthetic spectrum: exp:ALPHA:N, poly:BETA:N or flat:N
    #[arg(long)]
    profile: Option<String>,
    /// Realize a synthetic profile as a dense matrix with random singular vectors
    #[arg(long)]
    dense: bool,
    /// Scale the data to unit Frobenius norm
    #[arg(long)]
    normalize: bool,
    /// A single sketch size
    #[arg(long, conflicts_with = "k_grid")]
    k: Option<usize>,
    /// Sketch sizes as a:b:step
    #[arg(long)]
    k_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Sampling {
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    family: FamilyArg,
    #[arg(long, default_value_t = 10)]
    trials: usize,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    /// Also report the surrogate discrepancy ε̂
    #[arg(long)]
    epsilon: bool,
}

#[derive(Args)]
struct KaczmarzArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long, default_value_t = 5)]
    steps: usize,
}

#[derive(Args)]
struct NystromArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long)]
    sigma: f64,
    /// Standard normal point cloud POINTS:DIM instead of --input
    #[arg(long, conflicts_with_all = ["input", "profile"])]
    points: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Libsvm,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Rademacher,
}

impl From<FamilyArg> for SketchFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => SketchFamily::Gaussian,
            FamilyArg::Rademacher => SketchFamily::Rademacher,
        }
    }
}

fn parse_profile(text: &str) -> Result<DecayProfile, Error> {
    let bad = || Error::InvalidConfig(format!("invalid profile '{text}', expected exp:ALPHA:N, poly:BETA:N or flat:N"));
    let parts: Vec<&str> = text.split(':').collect();
    let len = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        ["exp", alpha, n] => Ok(DecayProfile::exponential(real(alpha)?, len(n)?)),
        ["poly", beta, n] => Ok(DecayProfile::polynomial(real(beta)?, len(n)?)),
        ["flat", n] => Ok(DecayProfile::explicit(vec![1.0; len(n)?])),
        _ => Err(bad()),
    }
}

fn parse_points(text: &str) -> Result<(usize, usize), Error> {
    let bad = || Error::InvalidConfig(format!("invalid point cloud '{text}', expected POINTS:DIM"));
    let (m, d) = text.split_once(':').ok_or_else(bad)?;
    Ok((m.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?))
}

fn base_config(common: &Common, mode: Mode) -> Result<ExperimentConfig, Error> {
    let input = match (&common.input, &common.profile) {
        (Some(path), _) => InputSource::File {
            format: match common.format {
                Some(FormatArg::Libsvm) => InputFormat::Libsvm,
                Some(FormatArg::Csv) => InputFormat::Csv,
                None => InputFormat::from_path(path),
            },
            path: path.clone(),
        },
        (None, Some(p)) => InputSource::Profile {
            profile: parse_profile(p)?,
            dense: common.dense,
        },
        // Placeholder, replaced by --points for nystrom.
        (None, None) => InputSource::GaussianCloud { points: 0, dim: 0 },
    };
    let k_grid = match (common.k, &common.k_grid) {
        (Some(k), _) => vec![k],
        (None, Some(g)) => parse_k_grid(g)?,
        (None, None) => return Err(Error::InvalidConfig("one of --k or --k-grid is required".into())),
    };
    Ok(ExperimentConfig {
        input,
        family: SketchFamily::Gaussian,
        seed: common.seed,
        k_grid,
        trials: 1,
        mode,
        output_path: common.out.clone(),
        normalize: common.normalize,
        epsilon: false,
    })
}

fn with_sampling(mut cfg: ExperimentConfig, s: &Sampling) -> ExperimentConfig {
    cfg.family = s.family.into();
    cfg.trials = s.trials;
    cfg
}

fn build_config(command: &Command) -> Result<ExperimentConfig, Error> {
    let cfg = match command {
        Command::Predict(c) => base_config(c, Mode::Predict)?,
        Command::Gamma(c) => base_config(c, Mode::GammaTable)?,
        Command::Mc(a) => {
            let mut cfg = with_sampling(base_config(&a.common, Mode::LowRank)?, &a.sampling);
            cfg.epsilon = a.epsilon;
            cfg
        }
        Command::Kaczmarz(a) => with_sampling(base_config(&a.common, Mode::Kaczmarz { steps: a.steps })?, &a.sampling),
        Command::Nystrom(a) => {
            let mut cfg = with_sampling(base_config(&a.common, Mode::Nystrom { sigma: a.sigma })?, &a.sampling);
            if let Some(p) = &a.points {
                let (points, dim) = parse_points(p)?;
                cfg.input = InputSource::GaussianCloud { points, dim };
            }
            cfg
        }
    };
    if matches!(cfg.input, InputSource::GaussianCloud { points: 0, .. }) {
        return Err(Error::InvalidConfig("an input is required (--input, --profile or --points)".into()));
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let cfg = build_config(&cli.command)?;
    let outcome = run_experiment(&cfg)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.output_path {
        Some(path) => write_csv(&outcome.rows, path)?,
        None => std::io::stdout().lock().write_all(format_csv(&outcome.rows).as_bytes())?,
    }
    Ok(if outcome.only_rank_exceeded() { EXIT_RANK_ONLY } else { 0 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { 0 });
        }
    };
    configure_threads_from_env();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Parse(_)) { EXIT_PARSE } else { EXIT_FAILURE })
        }
    }
}
