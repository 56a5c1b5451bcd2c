//! Experiment orchestration: loads data, sweeps a grid of sketch sizes and
//! produces one [`ResultRow`] per size, comparing surrogate predictions
//! against Monte Carlo measurements.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::{parse_dense_csv, parse_libsvm, ResultRow};
use crate::kernel::{nystrom_trace_error, rbf_kernel, KernelConfig};
use crate::linalg::{svd, DataMatrix, DenseMatrix, DiagonalMatrix, Vector};
use crate::parallel::{mean_and_std, ordered_map_reduce};
use crate::rng::{reserved, stream_rng};
use crate::sketch::{draw_sketch, monte_carlo, monte_carlo_errors, SketchFamily, SketchSpec};
use crate::solvers::{kaczmarz_run, LinearSystem};
use crate::spectrum::{profile_spectrum, spectrum_of_psd, synthesize_matrix, DecayKind, DecayProfile, Spectrum};
use crate::surrogate::{
    explicit_error_exponential, explicit_error_polynomial, explicit_gamma_exponential, explicit_gamma_polynomial,
    in_proven_regime, predict_frobenius_error, predict_nystrom_error, predicted_trajectory, solve_gamma,
    surrogate_projection,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Libsvm,
    Csv,
}

impl InputFormat {
    /// `.csv` files are dense CSV; anything else is read as libsvm.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Libsvm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    File { path: PathBuf, format: InputFormat },
    /// Synthetic data with a prescribed spectrum. Without `dense` the data is
    /// `diag(σ)`; with it, seeded orthonormal factors are applied on both sides.
    Profile { profile: DecayProfile, dense: bool },
    /// `points` standard-normal points in dimension `dim` (Nyström mode).
    GaussianCloud { points: usize, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Predicted and Monte Carlo low-rank approximation error.
    LowRank,
    /// Predicted low-rank error only.
    Predict,
    Nystrom { sigma: f64 },
    Kaczmarz { steps: usize },
    GammaTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub input: InputSource,
    pub family: SketchFamily,
    pub seed: u64,
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub mode: Mode,
    pub output_path: Option<PathBuf>,
    /// Scale the data to unit Frobenius norm (unit trace for kernels).
    pub normalize: bool,
    /// Also estimate `ε̂` (low-rank mode); costs an `n×n` accumulation per trial.
    pub epsilon: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_grid.is_empty() {
            return Err(Error::InvalidConfig("k grid is empty".into()));
        }
        if self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("k grid must be strictly increasing".into()));
        }
        let needs_trials = matches!(self.mode, Mode::LowRank | Mode::Nystrom { .. } | Mode::Kaczmarz { .. });
        if needs_trials && self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if needs_trials && self.k_grid[0] == 0 {
            return Err(Error::InvalidConfig("sketch sizes must be at least 1".into()));
        }
        if let Mode::Nystrom { sigma } = self.mode {
            KernelConfig::new(sigma)?;
        }
        Ok(())
    }
}

/// Parses `a:b:step` (inclusive of `b` when on the grid) or a single integer.
pub fn parse_k_grid(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidConfig(format!("invalid k grid '{text}', expected a:b:step"));
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match nums.as_slice() {
        [k] => Ok(vec![*k]),
        [a, b] if a <= b => Ok((*a..=*b).collect()),
        [a, b, step] if a <= b && *step > 0 => Ok((*a..=*b).step_by(*step).collect()),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
    /// Rows whose prediction was dropped because `k` reached the rank.
    pub rank_exceeded: usize,
}

impl ExperimentOutcome {
    /// Every row hit `KExceedsRank`.
    pub fn only_rank_exceeded(&self) -> bool {
        !self.rows.is_empty() && self.rank_exceeded == self.rows.len()
    }

    fn push_prediction(&mut self, value: Result<f64>) -> Result<Option<f64>> {
        match value {
            Ok(v) => Ok(Some(v)),
            Err(Error::KExceedsRank { k, rank }) => {
                self.rank_exceeded += 1;
                self.warnings
                    .push(format!("k = {k} is not below the rank {rank}; prediction omitted"));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

enum Data {
    Dense(DenseMatrix),
    Diagonal(DiagonalMatrix),
}

impl Data {
    fn as_data_matrix(&self) -> &dyn DataMatrix {
        match self {
            Data::Dense(a) => a,
            Data::Diagonal(d) => d,
        }
    }
}

/// Data matrix together with its spectrum and right singular vectors.
struct Prepared {
    data: Data,
    spectrum: Spectrum,
    vt: DenseMatrix,
    profile: Option<DecayKind>,
}

fn read_matrix(path: &Path, format: InputFormat) -> Result<DenseMatrix> {
    let reader = BufReader::new(File::open(path)?);
    match format {
        InputFormat::Libsvm => parse_libsvm(reader),
        InputFormat::Csv => parse_dense_csv(reader),
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    match &cfg.input {
        InputSource::File { path, format } => {
            let mut a = read_matrix(path, *format)?;
            if cfg.normalize {
                let norm = a.norm();
                if norm == 0.0 {
                    return Err(Error::ZeroMatrix);
                }
                a /= norm;
            }
            let f = svd(&a)?;
            let spectrum = Spectrum::new(f.singular_values.iter().map(|s| s * s).collect())?;
            Ok(Prepared {
                spectrum,
                vt: f.vt,
                data: Data::Dense(a),
                profile: None,
            })
        }
        InputSource::Profile { profile, dense } => {
            let mut profile = profile.clone();
            profile.normalize_frobenius |= cfg.normalize;
            let spectrum = profile_spectrum(&profile)?;
            let n = spectrum.len();
            let (data, vt) = if *dense {
                let a = synthesize_matrix(&spectrum, n, n, cfg.seed)?;
                let vt = svd(&a)?.vt;
                (Data::Dense(a), vt)
            } else {
                (Data::Diagonal(spectrum.diagonal_matrix(n)?), DenseMatrix::identity(n, n))
            };
            Ok(Prepared {
                data,
                spectrum,
                vt,
                profile: Some(profile.kind),
            })
        }
        InputSource::GaussianCloud { .. } => Err(Error::InvalidConfig(
            "a point cloud is only meaningful for the nystrom mode".into(),
        )),
    }
}

fn closed_form_error(kind: &Option<DecayKind>, c: f64, k: usize) -> Option<f64> {
    match kind {
        Some(DecayKind::Exponential { alpha }) => explicit_error_exponential(*alpha, c, k).ok(),
        Some(DecayKind::Polynomial { beta }) => explicit_error_polynomial(*beta, c, k).ok(),
        _ => None,
    }
}

fn closed_form_gamma(kind: &Option<DecayKind>, c: f64, k: usize) -> Option<f64> {
    match kind {
        Some(DecayKind::Exponential { alpha }) => explicit_gamma_exponential(*alpha, c, k).ok(),
        Some(DecayKind::Polynomial { beta }) => explicit_gamma_polynomial(*beta, c, k).ok(),
        _ => None,
    }
}

/// Runs the configured sweep. Output depends only on the configuration:
/// identical configs give identical rows for any thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Nystrom { sigma } => run_nystrom(cfg, sigma),
        Mode::Kaczmarz { steps } => run_kaczmarz(cfg, steps),
        Mode::LowRank | Mode::Predict | Mode::GammaTable => run_low_rank(cfg),
    }
}

fn run_low_rank(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let prepared = prepare(cfg)?;
    let spectrum = &prepared.spectrum;
    let c = spectrum.scale_c();
    let mut out = ExperimentOutcome::default();
    let mut unproven = Vec::new();
    for &k in &cfg.k_grid {
        let mut row = ResultRow {
            k,
            predicted: None,
            empirical_mean: None,
            empirical_std: None,
            epsilon_hat: None,
            closed_form: None,
        };
        if cfg.mode == Mode::GammaTable {
            row.predicted = out.push_prediction(solve_gamma(spectrum, k).map(|g| g.gamma))?;
            row.closed_form = closed_form_gamma(&prepared.profile, c, k);
            out.rows.push(row);
            continue;
        }
        row.predicted = out.push_prediction(predict_frobenius_error(spectrum, k))?;
        row.closed_form = closed_form_error(&prepared.profile, c, k);
        if row.predicted.is_some() && !in_proven_regime(spectrum, k) {
            unproven.push(k);
        }
        if cfg.mode == Mode::LowRank {
            let spec = SketchSpec::new(cfg.family, k, cfg.seed)?;
            let a = prepared.data.as_data_matrix();
            if cfg.epsilon && row.predicted.is_some() {
                let surrogate = surrogate_projection(spectrum, &prepared.vt, k)?;
                let report = monte_carlo(a, &spec, cfg.trials, &surrogate)?;
                row.empirical_mean = Some(report.mean_error);
                row.empirical_std = Some(report.std_error);
                row.epsilon_hat = Some(report.epsilon_hat);
            } else {
                let sample = monte_carlo_errors(a, &spec, cfg.trials)?;
                row.empirical_mean = Some(sample.mean_error);
                row.empirical_std = Some(sample.std_error);
            }
        }
        out.rows.push(row);
    }
    if !unproven.is_empty() {
        out.warnings.push(format!(
            "k in {unproven:?} is at or above the stable rank {:.3}; predictions there are outside the proven regime",
            spectrum.stable_rank()
        ));
    }
    Ok(out)
}

fn load_points(cfg: &ExperimentConfig) -> Result<DenseMatrix> {
    match &cfg.input {
        InputSource::File { path, format } => read_matrix(path, *format),
        InputSource::GaussianCloud { points, dim } => {
            if *points == 0 || *dim == 0 {
                return Err(Error::InvalidConfig("point cloud must be non-empty".into()));
            }
            let mut rng = stream_rng(cfg.seed, reserved::POINTS);
            Ok(DenseMatrix::from_fn(*points, *dim, |_, _| StandardNormal.sample(&mut rng)))
        }
        InputSource::Profile { .. } => Err(Error::InvalidConfig(
            "the nystrom mode needs points (--input or --points), not a spectral profile".into(),
        )),
    }
}

fn run_nystrom(cfg: &ExperimentConfig, sigma: f64) -> Result<ExperimentOutcome> {
    let points = load_points(cfg)?;
    let mut kernel = rbf_kernel(&points, &KernelConfig::new(sigma)?)?;
    if cfg.normalize {
        let tr = kernel.trace();
        kernel /= tr;
    }
    let eigs = spectrum_of_psd(&kernel)?;
    let m = kernel.nrows();
    let mut out = ExperimentOutcome::default();
    for &k in &cfg.k_grid {
        let predicted = out.push_prediction(predict_nystrom_error(&eigs, k))?;
        let spec = SketchSpec::new(cfg.family, k, cfg.seed)?;
        let errors = ordered_map_reduce(
            cfg.trials,
            |t| -> Result<Vec<f64>> {
                let s = draw_sketch(&spec, m, t as u64);
                Ok(vec![nystrom_trace_error(&kernel, &s)?])
            },
            |a, b| {
                let mut a = a?;
                a.extend(b?);
                Ok(a)
            },
        )
        .expect("trials >= 1")?;
        let (mean, std) = mean_and_std(&errors);
        out.rows.push(ResultRow {
            k,
            predicted,
            empirical_mean: Some(mean),
            empirical_std: Some(std),
            epsilon_hat: None,
            closed_form: None,
        });
    }
    Ok(out)
}

/// Each row reports, after `steps` steps from `x⁰ = 0` towards a seeded `x*`:
/// `predicted = ‖P̄⊥ᵗΔ₀‖`, `empirical_mean = ‖Ê[Δₜ]‖`, `empirical_std` its
/// standard error, and `epsilon_hat = ‖Ê[Δₜ] − P̄⊥ᵗΔ₀‖ / ‖P̄⊥ᵗΔ₀‖`.
fn run_kaczmarz(cfg: &ExperimentConfig, steps: usize) -> Result<ExperimentOutcome> {
    let prepared = prepare(cfg)?;
    let a = match prepared.data {
        Data::Dense(a) => a,
        Data::Diagonal(d) => d.to_dense(),
    };
    let n = a.ncols();
    let mut rng = stream_rng(cfg.seed, reserved::SOLUTION);
    let x_star = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let sys = LinearSystem::from_solution(a, x_star.clone())?;
    let delta0 = -&x_star;
    let x0 = Vector::zeros(n);
    let mut out = ExperimentOutcome::default();
    for &k in &cfg.k_grid {
        let predicted_delta = match predicted_trajectory(&prepared.spectrum, &prepared.vt, k, &delta0, steps) {
            Ok(d) => Some(d),
            Err(Error::KExceedsRank { k, rank }) => {
                out.push_prediction(Err(Error::KExceedsRank { k, rank }))?;
                None
            }
            Err(e) => return Err(e),
        };
        let spec = SketchSpec::new(cfg.family, k, cfg.seed)?;
        let run = kaczmarz_run(&sys, &spec, &x0, steps, cfg.trials)?;
        let mean_delta = &run.mean_deltas[steps];
        let epsilon_hat = predicted_delta.as_ref().and_then(|p| {
            let norm = p.norm();
            (norm > 0.0).then(|| (mean_delta - p).norm() / norm)
        });
        out.rows.push(ResultRow {
            k,
            predicted: predicted_delta.map(|p| p.norm()),
            empirical_mean: Some(mean_delta.norm()),
            empirical_std: Some(run.mean_delta_sem[steps]),
            epsilon_hat,
            closed_form: None,
        });
    }
    Ok(out)
}
