//! Surrogate expressions for the expected residual projection of a
//! sub-gaussian sketch.
//!
//! For a sketch of size `k` the expected residual projection behaves like
//! `(γAᵀA + I)⁻¹`, where `γ > 0` solves `Σ γσᵢ²/(γσᵢ² + 1) = k`. Every
//! prediction in this module (low-rank and Nyström errors, condition
//! numbers, Kaczmarz trajectories) is a function of that `γ`.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};
use crate::spectrum::{validate_alpha, validate_beta, Spectrum};

/// Absolute tolerance on `|Σ γσᵢ²/(γσᵢ²+1) − k|`.
pub const GAMMA_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSolution {
    pub gamma: f64,
    pub k: usize,
    /// `|Σ γσᵢ²/(γσᵢ²+1) − k|` at the returned `gamma`.
    pub residual: f64,
    pub iterations: usize,
}

/// `γ ↦ Σ γσᵢ²/(γσᵢ²+1)`: strictly increasing from 0 towards `rank`.
pub fn effective_dimension(s: &Spectrum, gamma: f64) -> f64 {
    let term = |v: f64| {
        let x = gamma * v;
        x / (x + 1.0)
    };
    // Independent accumulators so the divisions pipeline.
    let mut lanes = [0.0f64; 8];
    let chunks = s.values().chunks_exact(8);
    let tail: f64 = chunks.remainder().iter().map(|&v| term(v)).sum();
    for chunk in chunks {
        for (acc, &v) in lanes.iter_mut().zip(chunk) {
            *acc += term(v);
        }
    }
    lanes.iter().sum::<f64>() + tail
}

/// Solves `Σ γσᵢ²/(γσᵢ²+1) = k` by bracketed bisection.
///
/// `k = 0` gives `γ = 0`. Requires `k` below the number of positive
/// entries of `s`; no finite root exists otherwise.
pub fn solve_gamma(s: &Spectrum, k: usize) -> Result<GammaSolution> {
    if k == 0 {
        return Ok(GammaSolution {
            gamma: 0.0,
            k,
            residual: 0.0,
            iterations: 0,
        });
    }
    let rank = s.rank();
    if k >= rank {
        return Err(Error::KExceedsRank { k, rank });
    }
    let target = k as f64;
    let f = |g: f64| effective_dimension(s, g);

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while f(hi) <= target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NumericalFailure(format!("could not bracket gamma for k = {k}")));
        }
    }

    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let (r_lo, r_hi) = ((f(lo) - target).abs(), (f(hi) - target).abs());
    let (gamma, residual) = if r_lo < r_hi && lo > 0.0 { (lo, r_lo) } else { (hi, r_hi) };
    if residual > GAMMA_TOL {
        return Err(Error::NumericalFailure(format!(
            "gamma residual {residual:e} exceeds tolerance for k = {k}"
        )));
    }
    Ok(GammaSolution {
        gamma,
        k,
        residual,
        iterations: iterations + doublings,
    })
}

/// `(γAᵀA + I)⁻¹ = I − Vᵀ·diag(1 − dᵢ)·V` with `dᵢ = 1/(γσᵢ² + 1)`.
///
/// Directions outside the span of `basis_vt` carry eigenvalue 1.
#[derive(Debug, Clone)]
pub struct SurrogateProjection {
    pub gamma: GammaSolution,
    /// `p×n` right singular vectors (rows) matching the spectrum.
    pub basis_vt: DenseMatrix,
    pub diag: Vec<f64>,
}

impl SurrogateProjection {
    pub fn dim(&self) -> usize {
        self.basis_vt.ncols()
    }

    pub fn trace(&self) -> f64 {
        self.dim() as f64 - self.diag.iter().map(|d| 1.0 - d).sum::<f64>()
    }

    fn low_rank_form(&self, weight: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.dim();
        let mut weighted = self.basis_vt.clone();
        for (i, d) in self.diag.iter().enumerate() {
            weighted.row_mut(i).scale_mut(weight(*d));
        }
        let mut out = DenseMatrix::identity(n, n);
        out.gemm_tr(1.0, &self.basis_vt, &weighted, 1.0);
        (&out + out.transpose()) * 0.5
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.low_rank_form(|d| d - 1.0)
    }

    /// `P̄⊥^{-1/2}`.
    pub fn inverse_sqrt(&self) -> DenseMatrix {
        self.low_rank_form(|d| 1.0 / d.sqrt() - 1.0)
    }

    /// `P̄⊥ᵗ·x`, computed in the singular basis.
    pub fn apply_power(&self, x: &Vector, t: usize) -> Vector {
        let coords = &self.basis_vt * x;
        let shrink = Vector::from_iterator(
            self.diag.len(),
            self.diag
                .iter()
                .zip(coords.iter())
                .map(|(d, c)| (d.powi(t as i32) - 1.0) * c),
        );
        x + self.basis_vt.tr_mul(&shrink)
    }
}

pub fn surrogate_projection(s: &Spectrum, vt: &DenseMatrix, k: usize) -> Result<SurrogateProjection> {
    if vt.nrows() != s.len() || vt.ncols() < vt.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "basis is {}x{} for a spectrum of length {}",
            vt.nrows(),
            vt.ncols(),
            s.len()
        )));
    }
    let gamma = solve_gamma(s, k)?;
    let diag = s.values().iter().map(|v| 1.0 / (gamma.gamma * v + 1.0)).collect();
    Ok(SurrogateProjection {
        gamma,
        basis_vt: vt.clone(),
        diag,
    })
}

/// Predicted `E‖A − AP‖²_F = k/γ`; `‖A‖²_F` when `k = 0`.
pub fn predict_frobenius_error(s: &Spectrum, k: usize) -> Result<f64> {
    if k == 0 {
        return Ok(s.frobenius_sq());
    }
    Ok(k as f64 / solve_gamma(s, k)?.gamma)
}

/// Predicted Nyström trace-norm error `E‖K − K̃‖*` from the eigenvalues of `K`.
pub fn predict_nystrom_error(kernel_eigs: &Spectrum, k: usize) -> Result<f64> {
    predict_frobenius_error(kernel_eigs, k)
}

/// Whether `k` lies below the stable rank, where the surrogate is proven to hold.
pub fn in_proven_regime(s: &Spectrum, k: usize) -> bool {
    (k as f64) < s.stable_rank()
}

fn validate_closed_form(c: f64, k: usize) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidProfile(format!("C = {c} must be positive")));
    }
    if k == 0 {
        return Err(Error::InvalidProfile("closed forms need k >= 1".into()));
    }
    Ok(())
}

/// `γ ≈ (α⁻ᵏ − 1)·√α / C` for `σᵢ² = C·αⁱ⁻¹`.
pub fn explicit_gamma_exponential(alpha: f64, c: f64, k: usize) -> Result<f64> {
    validate_alpha(alpha)?;
    validate_closed_form(c, k)?;
    Ok((alpha.powi(-(k as i32)) - 1.0) * alpha.sqrt() / c)
}

/// `C/√α · k/(α⁻ᵏ − 1)`.
pub fn explicit_error_exponential(alpha: f64, c: f64, k: usize) -> Result<f64> {
    validate_alpha(alpha)?;
    validate_closed_form(c, k)?;
    Ok(c / alpha.sqrt() * k as f64 / (alpha.powi(-(k as i32)) - 1.0))
}

/// `γ ≈ ((k + ½)·(β/π)·sin(π/β))^β / C` for `σᵢ² = C·i^(−β)`.
pub fn explicit_gamma_polynomial(beta: f64, c: f64, k: usize) -> Result<f64> {
    validate_beta(beta)?;
    validate_closed_form(c, k)?;
    let pi = std::f64::consts::PI;
    Ok(((k as f64 + 0.5) * (beta / pi) * (pi / beta).sin()).powf(beta) / c)
}

/// `C·k/(k + ½)^β · ((π/β)/sin(π/β))^β`.
pub fn explicit_error_polynomial(beta: f64, c: f64, k: usize) -> Result<f64> {
    validate_beta(beta)?;
    validate_closed_form(c, k)?;
    let pi = std::f64::consts::PI;
    let kf = k as f64;
    Ok(c * kf / (kf + 0.5).powf(beta) * ((pi / beta) / (pi / beta).sin()).powf(beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionMethod {
    /// Smallest squared singular value of `A`.
    Kaczmarz,
    /// Smallest positive eigenvalue of the Hessian.
    Rsn,
    /// Smallest eigenvalue of the weight matrix `W`.
    JacSketch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumberSurrogate {
    pub kappa_bar: f64,
    pub method: ConditionMethod,
    pub gamma: f64,
}

/// `κ̄ = λ/(λ + 1/γ)` with `λ` the method's smallest (positive) eigenvalue.
///
/// `s` holds `σᵢ²` of `A` for Kaczmarz, the eigenvalues of `H` for RSN and
/// those of `W` for JacSketch.
pub fn kappa_surrogate(s: &Spectrum, k: usize, method: ConditionMethod) -> Result<ConditionNumberSurrogate> {
    let gamma = solve_gamma(s, k)?.gamma;
    let lambda = match method {
        ConditionMethod::Kaczmarz | ConditionMethod::JacSketch => s.min_value(),
        ConditionMethod::Rsn => s.min_positive(),
    };
    let x = gamma * lambda;
    Ok(ConditionNumberSurrogate {
        kappa_bar: x / (x + 1.0),
        method,
        gamma,
    })
}

/// `P̄⊥ᵗ·Δ₀`: the predicted mean error of sketch-and-project after `t` steps.
pub fn predicted_trajectory(
    s: &Spectrum,
    vt: &DenseMatrix,
    k: usize,
    delta0: &Vector,
    t: usize,
) -> Result<Vector> {
    if delta0.len() != vt.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "delta0 has length {}, basis has {} columns",
            delta0.len(),
            vt.ncols()
        )));
    }
    Ok(surrogate_projection(s, vt, k)?.apply_power(delta0, t))
}
