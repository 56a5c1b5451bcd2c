//! Dense linear-algebra substrate.
//!
//! Everything here is a pure function of its inputs. Matrices are
//! `nalgebra::DMatrix<f64>`, which stores entries in column-major order.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SVD_MAX_ITERATIONS: usize = 1_000_000;

/// Relative cutoff used when none is given: `max(m, n)·ε`.
pub fn default_rank_tolerance(rows: usize, cols: usize) -> f64 {
    rows.max(cols).max(1) as f64 * f64::EPSILON
}

/// Thin SVD `a = U·diag(σ)·Vᵀ` with singular values sorted non-increasing.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    pub u: DenseMatrix,
    pub singular_values: Vector,
    pub vt: DenseMatrix,
    /// Relative cutoff: values `<= rank_tolerance·σ₁` count as zero.
    pub rank_tolerance: f64,
}

impl SvdFactorization {
    pub fn rank(&self) -> usize {
        let cutoff = self.cutoff();
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    fn cutoff(&self) -> f64 {
        let top = self.singular_values.get(0).copied().unwrap_or(0.0);
        self.rank_tolerance * top
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.get(0).copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.vt
    }

    /// Rows of `Vᵀ` belonging to singular values above the cutoff.
    pub fn row_space(&self) -> DenseMatrix {
        self.vt.rows(0, self.rank()).into_owned()
    }
}

fn ensure_finite(a: &DenseMatrix) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalFailure("matrix has non-finite entries".into()))
    }
}

pub fn svd(a: &DenseMatrix) -> Result<SvdFactorization> {
    svd_with_tolerance(a, default_rank_tolerance(a.nrows(), a.ncols()))
}

pub fn svd_with_tolerance(a: &DenseMatrix, rank_tolerance: f64) -> Result<SvdFactorization> {
    ensure_finite(a)?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(SvdFactorization {
            u: DenseMatrix::zeros(m, 0),
            singular_values: Vector::zeros(0),
            vt: DenseMatrix::zeros(0, n),
            rank_tolerance,
        });
    }
    let decomposition = SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let u = decomposition.u.expect("u requested");
    let vt = decomposition.v_t.expect("v_t requested");
    Ok(SvdFactorization {
        u,
        singular_values: decomposition.singular_values,
        vt,
        rank_tolerance,
    })
}

/// Moore–Penrose pseudoinverse; singular values `<= rel_tol·σ₁` are dropped.
pub fn pseudoinverse(a: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix> {
    let f = svd_with_tolerance(a, rel_tol)?;
    let r = f.rank();
    let mut v = f.vt.rows(0, r).transpose();
    for j in 0..r {
        v.column_mut(j).scale_mut(1.0 / f.singular_values[j]);
    }
    Ok(v * f.u.columns(0, r).transpose())
}

pub fn pseudoinverse_default(a: &DenseMatrix) -> Result<DenseMatrix> {
    pseudoinverse(a, default_rank_tolerance(a.nrows(), a.ncols()))
}

/// Orthonormal basis (as rows) of the row space of `x`.
pub fn row_space_basis(x: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(svd(x)?.row_space())
}

/// `I − BᵀB` for a basis `B` with orthonormal rows.
pub fn complement_of_basis(basis: &DenseMatrix) -> DenseMatrix {
    let n = basis.ncols();
    let mut p = DenseMatrix::identity(n, n);
    p.gemm_tr(-1.0, basis, basis, 1.0);
    p
}

/// `P⊥ = I − X†X`: orthogonal projection onto the complement of the row space of `x`.
pub fn residual_projection(x: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(complement_of_basis(&row_space_basis(x)?))
}

/// Result of appending one row to a sketched matrix.
#[derive(Debug, Clone)]
pub struct RankOneUpdate {
    /// `(I−P₋)xxᵀ(I−P₋) / xᵀ(I−P₋)x`, to be added to the old projection.
    pub proj_update: DenseMatrix,
    /// `(I−P₋)x / xᵀ(I−P₋)x`, the new column of the stacked pseudoinverse.
    pub pinv_row: Vector,
}

/// Update of `P = X†X` when `new_row` is appended to `x_minus`.
///
/// `p_minus` must be `X₋†X₋`. The denominator `xᵀ(I−P₋)x` has to exceed
/// `1e-10·‖x‖²`; otherwise the row already lies in the row space.
pub fn pinv_rank_one_update(
    x_minus: &DenseMatrix,
    p_minus: &DenseMatrix,
    new_row: &Vector,
) -> Result<RankOneUpdate> {
    let n = new_row.len();
    if x_minus.ncols() != n || p_minus.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "x_minus is {}x{}, p_minus is {}x{}, new row has length {}",
            x_minus.nrows(),
            x_minus.ncols(),
            p_minus.nrows(),
            p_minus.ncols(),
            n
        )));
    }
    let residual = new_row - p_minus * new_row;
    let denominator = new_row.dot(&residual);
    let floor = 1e-10 * new_row.norm_squared();
    if denominator.is_nan() || denominator <= floor {
        return Err(Error::DegenerateUpdate { denominator, floor });
    }
    Ok(RankOneUpdate {
        proj_update: &residual * residual.transpose() / denominator,
        pinv_row: residual / denominator,
    })
}

/// Builds `X†X` row by row through rank-one updates, skipping rows that
/// fall into the span of the rows already absorbed.
#[derive(Debug, Clone)]
pub struct IncrementalProjection {
    rows: Vec<Vector>,
    projection: DenseMatrix,
    skipped: usize,
}

impl IncrementalProjection {
    pub fn new(n: usize) -> Self {
        IncrementalProjection {
            rows: Vec::new(),
            projection: DenseMatrix::zeros(n, n),
            skipped: 0,
        }
    }

    /// Returns `false` when the row was degenerate and skipped.
    pub fn push(&mut self, row: &Vector) -> Result<bool> {
        let n = self.projection.nrows();
        let x_minus = if self.rows.is_empty() {
            DenseMatrix::zeros(0, n)
        } else {
            DenseMatrix::from_rows(&self.rows.iter().map(|r| r.transpose()).collect::<Vec<_>>())
        };
        match pinv_rank_one_update(&x_minus, &self.projection, row) {
            Ok(update) => {
                self.projection += update.proj_update;
                self.rows.push(row.clone());
                Ok(true)
            }
            Err(Error::DegenerateUpdate { .. }) => {
                self.skipped += 1;
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    pub fn projection(&self) -> &DenseMatrix {
        &self.projection
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

/// `‖A‖²_F / ‖A‖²`.
pub fn stable_rank(a: &DenseMatrix) -> Result<f64> {
    let f = svd(a)?;
    let top = f.largest();
    if top == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(a.norm_squared() / (top * top))
}

pub fn trace_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(svd(a)?.singular_values.sum())
}

/// Eigen-decomposition of the symmetric part of `a`, eigenvalues ascending.
pub fn symmetric_eigen_sorted(a: &DenseMatrix) -> Result<(Vector, DenseMatrix)> {
    ensure_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok((Vector::zeros(0), DenseMatrix::zeros(0, 0)));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DenseMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok((values, vectors))
}

/// Square root of a symmetric PSD matrix; round-off negative eigenvalues clamp to 0.
pub fn psd_sqrt(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (values, vectors) = symmetric_eigen_sorted(a)?;
    Ok(spectral_function(&values, &vectors, |l| l.max(0.0).sqrt()))
}

fn spectral_function(values: &Vector, vectors: &DenseMatrix, f: impl Fn(f64) -> f64) -> DenseMatrix {
    let mut scaled = vectors.clone();
    for (j, &l) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(f(l));
    }
    let out = scaled * vectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Spread of the eigenvalues of `W·M·W` around 1, with `W` a whitening matrix.
#[derive(Debug, Clone)]
pub struct PsdInterval {
    pub lo: f64,
    pub hi: f64,
    pub eigenvalues: Vec<f64>,
}

impl PsdInterval {
    /// `max(1 − lo, hi − 1)`.
    pub fn epsilon_hat(&self) -> f64 {
        (1.0 - self.lo).max(self.hi - 1.0)
    }

    /// Interval for `whitening·mean_proj·whitening`, where `whitening` is an
    /// inverse square root of the reference matrix.
    pub fn from_whitened(mean_proj: &DenseMatrix, whitening: &DenseMatrix) -> Result<Self> {
        if mean_proj.shape() != whitening.shape() || !mean_proj.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "mean projection is {:?}, whitening is {:?}",
                mean_proj.shape(),
                whitening.shape()
            )));
        }
        let m = whitening * mean_proj * whitening;
        let (values, _) = symmetric_eigen_sorted(&m)?;
        let eigenvalues: Vec<f64> = values.iter().copied().collect();
        let lo = eigenvalues.first().copied().unwrap_or(1.0);
        let hi = eigenvalues.last().copied().unwrap_or(1.0);
        Ok(PsdInterval { lo, hi, eigenvalues })
    }
}

/// Eigenvalues of `S^{-1/2}·M·S^{-1/2}` for mean projection `M` and surrogate `S`.
pub fn psd_interval(mean_proj: &DenseMatrix, surrogate: &DenseMatrix) -> Result<PsdInterval> {
    let (values, vectors) = symmetric_eigen_sorted(surrogate)?;
    let n = values.len();
    let top = values.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if n > 0 && (values[0].is_nan() || values[0] <= n as f64 * f64::EPSILON * top) {
        return Err(Error::SingularSurrogate);
    }
    let whitening = spectral_function(&values, &vectors, |l| 1.0 / l.sqrt());
    PsdInterval::from_whitened(mean_proj, &whitening)
}

/// A data matrix that can be sketched from the left.
///
/// Lets Monte Carlo code run on structured matrices without densifying them.
pub trait DataMatrix: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `S·A` for a `k×m` sketch `S`.
    fn left_mul(&self, sketch: &DenseMatrix) -> DenseMatrix;
    fn frobenius_sq(&self) -> f64;
    /// `‖A·Bᵀ‖²_F` for a basis `B` (`r×n`) with orthonormal rows.
    fn captured_energy(&self, basis: &DenseMatrix) -> f64;
    fn to_dense(&self) -> DenseMatrix;
}

impl DataMatrix for DenseMatrix {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn left_mul(&self, sketch: &DenseMatrix) -> DenseMatrix {
        sketch * self
    }

    fn frobenius_sq(&self) -> f64 {
        self.norm_squared()
    }

    fn captured_energy(&self, basis: &DenseMatrix) -> f64 {
        (self * basis.transpose()).norm_squared()
    }

    fn to_dense(&self) -> DenseMatrix {
        self.clone()
    }
}

/// `m×n` matrix (`m ≥ n`) whose only nonzeros are `diag` on the leading diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMatrix {
    diag: Vec<f64>,
    rows: usize,
}

impl DiagonalMatrix {
    pub fn new(diag: Vec<f64>, rows: usize) -> Result<Self> {
        if rows < diag.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows cannot hold a diagonal of length {}",
                rows,
                diag.len()
            )));
        }
        if !diag.iter().all(|d| d.is_finite()) {
            return Err(Error::NumericalFailure("non-finite diagonal entry".into()));
        }
        Ok(DiagonalMatrix { diag, rows })
    }

    pub fn square(diag: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        Self::new(diag, n)
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl DataMatrix for DiagonalMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.diag.len()
    }

    fn left_mul(&self, sketch: &DenseMatrix) -> DenseMatrix {
        let n = self.diag.len();
        let mut out = sketch.columns(0, n).into_owned();
        for (j, d) in self.diag.iter().enumerate() {
            out.column_mut(j).scale_mut(*d);
        }
        out
    }

    fn frobenius_sq(&self) -> f64 {
        self.diag.iter().map(|d| d * d).sum()
    }

    fn captured_energy(&self, basis: &DenseMatrix) -> f64 {
        self.diag
            .iter()
            .enumerate()
            .map(|(j, d)| d * d * basis.column(j).norm_squared())
            .sum()
    }

    fn to_dense(&self) -> DenseMatrix {
        let n = self.diag.len();
        let mut a = DenseMatrix::zeros(self.rows, n);
        for (j, d) in self.diag.iter().enumerate() {
            a[(j, j)] = *d;
        }
        a
    }
}
