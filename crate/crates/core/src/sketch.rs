//! Sub-gaussian sketches and Monte Carlo estimation of the expected
//! residual projection.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    complement_of_basis, residual_projection, row_space_basis, DataMatrix, DenseMatrix, PsdInterval,
};
use crate::parallel::{mean_and_std, ordered_map_reduce};
use crate::rng::stream_rng;
use crate::surrogate::SurrogateProjection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SketchFamily {
    /// i.i.d. standard normal entries.
    Gaussian,
    /// i.i.d. ±1 entries with equal probability.
    Rademacher,
}

impl std::str::FromStr for SketchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SketchFamily::Gaussian),
            "rademacher" => Ok(SketchFamily::Rademacher),
            other => Err(Error::InvalidConfig(format!("unknown sketch family '{other}'"))),
        }
    }
}

impl std::fmt::Display for SketchFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SketchFamily::Gaussian => "gaussian",
            SketchFamily::Rademacher => "rademacher",
        })
    }
}

/// One sketch distribution plus the seed its draws derive from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchSpec {
    pub family: SketchFamily,
    pub k: usize,
    pub seed: u64,
}

impl SketchSpec {
    pub fn new(family: SketchFamily, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("sketch size must be at least 1".into()));
        }
        Ok(SketchSpec { family, k, seed })
    }

    pub fn gaussian(k: usize, seed: u64) -> Self {
        SketchSpec {
            family: SketchFamily::Gaussian,
            k,
            seed,
        }
    }

    pub fn rademacher(k: usize, seed: u64) -> Self {
        SketchSpec {
            family: SketchFamily::Rademacher,
            k,
            seed,
        }
    }
}

/// `k×m` sketch for stream `stream` of `spec.seed`. Unscaled: the residual
/// projection does not depend on the row scaling of `S·A`.
pub fn draw_sketch(spec: &SketchSpec, m: usize, stream: u64) -> DenseMatrix {
    let mut rng = stream_rng(spec.seed, stream);
    match spec.family {
        SketchFamily::Gaussian => DenseMatrix::from_fn(spec.k, m, |_, _| StandardNormal.sample(&mut rng)),
        SketchFamily::Rademacher => {
            DenseMatrix::from_fn(spec.k, m, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
        }
    }
}

fn check_shapes<A: DataMatrix + ?Sized>(a: &A, s: &DenseMatrix) -> Result<()> {
    if s.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "sketch has {} columns but the data has {} rows",
            s.ncols(),
            a.nrows()
        )));
    }
    Ok(())
}

/// `P⊥ = I − (SA)†SA`.
pub fn sketched_residual<A: DataMatrix + ?Sized>(a: &A, s: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes(a, s)?;
    residual_projection(&a.left_mul(s))
}

fn error_from_basis<A: DataMatrix + ?Sized>(a: &A, basis: &DenseMatrix) -> f64 {
    (a.frobenius_sq() - a.captured_energy(basis)).max(0.0)
}

/// `‖A − A(SA)†SA‖²_F = tr(AᵀA·P⊥)`.
pub fn low_rank_error<A: DataMatrix + ?Sized>(a: &A, s: &DenseMatrix) -> Result<f64> {
    check_shapes(a, s)?;
    let basis = row_space_basis(&a.left_mul(s))?;
    Ok(error_from_basis(a, &basis))
}

/// Per-trial errors of the sketched low-rank approximation.
#[derive(Debug, Clone)]
pub struct ErrorSample {
    pub per_trial_error: Vec<f64>,
    pub mean_error: f64,
    pub std_error: f64,
}

impl ErrorSample {
    pub fn from_trials(per_trial_error: Vec<f64>) -> Self {
        let (mean_error, std_error) = mean_and_std(&per_trial_error);
        ErrorSample {
            per_trial_error,
            mean_error,
            std_error,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub trials: usize,
    /// `(1/T)·Σ P⊥⁽ᵗ⁾`.
    pub mean_residual: DenseMatrix,
    pub per_trial_error: Vec<f64>,
    pub mean_error: f64,
    /// Sample standard deviation of the per-trial errors.
    pub std_error: f64,
    pub interval: PsdInterval,
    /// `max(1 − λ_min, λ_max − 1)` of `P̄⊥^{-1/2}·Ê[P⊥]·P̄⊥^{-1/2}`.
    pub epsilon_hat: f64,
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    Ok(())
}

/// Low-rank errors of `trials` independent sketches; trial `t` uses stream `t`.
pub fn monte_carlo_errors<A: DataMatrix + ?Sized>(a: &A, spec: &SketchSpec, trials: usize) -> Result<ErrorSample> {
    check_trials(trials)?;
    let errors = ordered_map_reduce(
        trials,
        |t| -> Result<Vec<f64>> {
            let s = draw_sketch(spec, a.nrows(), t as u64);
            Ok(vec![low_rank_error(a, &s)?])
        },
        |x, y| {
            let mut x = x?;
            x.extend(y?);
            Ok(x)
        },
    )
    .expect("trials >= 1")?;
    Ok(ErrorSample::from_trials(errors))
}

/// Averages `P⊥` over `trials` sketches and measures its discrepancy from
/// the surrogate. Trial `t` uses stream `t` of `spec.seed`.
pub fn monte_carlo<A: DataMatrix + ?Sized>(
    a: &A,
    spec: &SketchSpec,
    trials: usize,
    surrogate: &SurrogateProjection,
) -> Result<MonteCarloReport> {
    check_trials(trials)?;
    let n = a.ncols();
    if surrogate.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "surrogate acts on dimension {}, data has {} columns",
            surrogate.dim(),
            n
        )));
    }
    // Accumulates Σ BᵀB (projections onto the sketched row spaces).
    let (errors, captured) = ordered_map_reduce(
        trials,
        |t| -> Result<(Vec<f64>, DenseMatrix)> {
            let s = draw_sketch(spec, a.nrows(), t as u64);
            let basis = row_space_basis(&a.left_mul(&s))?;
            let mut gram = DenseMatrix::zeros(n, n);
            gram.gemm_tr(1.0, &basis, &basis, 0.0);
            Ok((vec![error_from_basis(a, &basis)], gram))
        },
        |x, y| {
            let (mut ex, mut gx) = x?;
            let (ey, gy) = y?;
            ex.extend(ey);
            gx += gy;
            Ok((ex, gx))
        },
    )
    .expect("trials >= 1")?;

    let mut mean_residual = captured / (-(trials as f64));
    for i in 0..n {
        mean_residual[(i, i)] += 1.0;
    }
    let mean_residual = (&mean_residual + mean_residual.transpose()) * 0.5;
    let interval = PsdInterval::from_whitened(&mean_residual, &surrogate.inverse_sqrt())?;
    let epsilon_hat = interval.epsilon_hat();
    let sample = ErrorSample::from_trials(errors);
    Ok(MonteCarloReport {
        trials,
        mean_residual,
        per_trial_error: sample.per_trial_error,
        mean_error: sample.mean_error,
        std_error: sample.std_error,
        interval,
        epsilon_hat,
    })
}

/// `P⊥` of a single stream, matching what `monte_carlo` averages.
pub fn trial_residual<A: DataMatrix + ?Sized>(a: &A, spec: &SketchSpec, stream: u64) -> Result<DenseMatrix> {
    let s = draw_sketch(spec, a.nrows(), stream);
    Ok(complement_of_basis(&row_space_basis(&a.left_mul(&s))?))
}
