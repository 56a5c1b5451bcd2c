//! Squared-singular-value spectra, parametric decay profiles, and matrices
//! realizing a prescribed spectrum.

use nalgebra::QR;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{svd, symmetric_eigen_sorted, DenseMatrix, DiagonalMatrix};
use crate::rng::{reserved, stream_rng};

/// Non-increasing sequence of squared singular values `σ₁² ≥ σ₂² ≥ … ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    scale_c: f64,
}

impl Spectrum {
    /// Validates ordering, sign, finiteness and that some value is positive.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidSpectrum("values must be finite and non-negative".into()));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpectrum("values must be non-increasing".into()));
        }
        if !values.first().is_some_and(|v| *v > 0.0) {
            return Err(Error::ZeroMatrix);
        }
        let scale_c = values[0];
        Ok(Spectrum { values, scale_c })
    }

    /// Sorts into non-increasing order first.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    fn with_scale(values: Vec<f64>, scale_c: f64) -> Result<Self> {
        let mut s = Self::new(values)?;
        s.scale_c = scale_c;
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The constant `C` of a decay profile; `σ₁²` for explicit spectra.
    pub fn scale_c(&self) -> f64 {
        self.scale_c
    }

    /// Number of strictly positive entries.
    pub fn rank(&self) -> usize {
        self.values.iter().take_while(|v| **v > 0.0).count()
    }

    /// `Σσᵢ² = ‖A‖²_F`.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `Σσᵢ² / σ₁²`.
    pub fn stable_rank(&self) -> f64 {
        self.frobenius_sq() / self.values[0]
    }

    /// Smallest entry, zero included.
    pub fn min_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Smallest strictly positive entry.
    pub fn min_positive(&self) -> f64 {
        self.values[self.rank() - 1]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("scale factor {c} must be positive")));
        }
        Self::with_scale(self.values.iter().map(|v| v * c).collect(), self.scale_c * c)
    }

    /// Rescaled so that `Σσᵢ² = 1`.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.frobenius_sq()).expect("positive total")
    }

    /// Singular values `σᵢ`.
    pub fn singular_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.sqrt()).collect()
    }

    /// The square diagonal matrix `diag(σ)`, padded with zeros to `n` columns.
    pub fn diagonal_matrix(&self, n: usize) -> Result<DiagonalMatrix> {
        if n < self.len() {
            return Err(Error::DimensionMismatch(format!(
                "n = {n} is shorter than the spectrum ({})",
                self.len()
            )));
        }
        let mut diag = self.singular_values();
        diag.resize(n, 0.0);
        DiagonalMatrix::square(diag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecayKind {
    /// `σᵢ² = C·αⁱ⁻¹`, `α ∈ (0, 1)`.
    Exponential { alpha: f64 },
    /// `σᵢ² = C·i^(−β)`, `β ≥ 2`.
    Polynomial { beta: f64 },
    /// Given values, used as-is.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub kind: DecayKind,
    pub length: usize,
    pub scale_c: f64,
    /// Rescale `C` so that `Σσᵢ² = 1`.
    pub normalize_frobenius: bool,
}

impl DecayProfile {
    pub fn exponential(alpha: f64, length: usize) -> Self {
        DecayProfile {
            kind: DecayKind::Exponential { alpha },
            length,
            scale_c: 1.0,
            normalize_frobenius: false,
        }
    }

    pub fn polynomial(beta: f64, length: usize) -> Self {
        DecayProfile {
            kind: DecayKind::Polynomial { beta },
            length,
            scale_c: 1.0,
            normalize_frobenius: false,
        }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        let length = values.len();
        DecayProfile {
            kind: DecayKind::Explicit(values),
            length,
            scale_c: 1.0,
            normalize_frobenius: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize_frobenius = true;
        self
    }

    pub fn with_scale(mut self, c: f64) -> Self {
        self.scale_c = c;
        self
    }
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProfile(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

pub fn validate_beta(beta: f64) -> Result<()> {
    if beta >= 2.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProfile(format!("beta = {beta} must be at least 2")))
    }
}

pub fn profile_spectrum(p: &DecayProfile) -> Result<Spectrum> {
    if p.length == 0 {
        return Err(Error::InvalidProfile("length must be at least 1".into()));
    }
    if !(p.scale_c > 0.0 && p.scale_c.is_finite()) {
        return Err(Error::InvalidProfile(format!("C = {} must be positive", p.scale_c)));
    }
    let c = p.scale_c;
    let values: Vec<f64> = match &p.kind {
        DecayKind::Exponential { alpha } => {
            validate_alpha(*alpha)?;
            let mut v = Vec::with_capacity(p.length);
            let mut current = c;
            for _ in 0..p.length {
                v.push(current);
                current *= alpha;
            }
            v
        }
        DecayKind::Polynomial { beta } => {
            validate_beta(*beta)?;
            (1..=p.length).map(|i| c * (i as f64).powf(-beta)).collect()
        }
        DecayKind::Explicit(values) => {
            if values.len() != p.length {
                return Err(Error::InvalidProfile(format!(
                    "explicit spectrum has {} values, profile length is {}",
                    values.len(),
                    p.length
                )));
            }
            values.iter().map(|v| v * c).collect()
        }
    };
    let spectrum = Spectrum::with_scale(values, c)?;
    Ok(if p.normalize_frobenius {
        spectrum.normalized()
    } else {
        spectrum
    })
}

/// `rows×cols` matrix with orthonormal columns: QR of a seeded Gaussian
/// matrix with the signs of `R`'s diagonal fixed positive.
pub fn haar_orthonormal(rows: usize, cols: usize, seed: u64, stream: u64) -> Result<DenseMatrix> {
    if cols > rows {
        return Err(Error::DimensionMismatch(format!(
            "cannot fit {cols} orthonormal columns in dimension {rows}"
        )));
    }
    let mut rng = stream_rng(seed, stream);
    let g = DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let qr = QR::new(g);
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// `m×n` matrix `U·diag(σ)·Vᵀ` with seeded orthonormal factors and
/// squared singular values `s` (zero-padded to length `n`).
pub fn synthesize_matrix(s: &Spectrum, m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    if n < s.len() || m < n {
        return Err(Error::DimensionMismatch(format!(
            "need m >= n >= spectrum length, got m = {m}, n = {n}, length = {}",
            s.len()
        )));
    }
    let mut u = haar_orthonormal(m, n, seed, reserved::LEFT_FACTOR)?;
    let v = haar_orthonormal(n, n, seed, reserved::RIGHT_FACTOR)?;
    for (j, sigma) in s.singular_values().iter().enumerate() {
        u.column_mut(j).scale_mut(*sigma);
    }
    for j in s.len()..n {
        u.column_mut(j).fill(0.0);
    }
    Ok(u * v.transpose())
}

/// Squared singular values of `a`.
pub fn spectrum_of(a: &DenseMatrix) -> Result<Spectrum> {
    let f = svd(a)?;
    Spectrum::new(f.singular_values.iter().map(|s| s * s).collect())
}

/// Eigenvalues of a PSD matrix `K`, i.e. the spectrum of `K^{1/2}`.
/// Round-off negatives are clamped to zero.
pub fn spectrum_of_psd(k: &DenseMatrix) -> Result<Spectrum> {
    let (values, _) = symmetric_eigen_sorted(k)?;
    Spectrum::new(values.iter().rev().map(|v| v.max(0.0)).collect())
}
