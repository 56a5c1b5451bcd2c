//! RBF kernels and the sketched Nyström approximation.

use crate::error::{Error, Result};
use crate::linalg::{pseudoinverse_default, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub sigma: f64,
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("RBF scale sigma = {sigma} must be positive")));
        }
        Ok(KernelConfig { sigma })
    }
}

/// `K_ij = exp(−‖aᵢ − aⱼ‖² / (2σ²))` for the rows `aᵢ` of `points`.
pub fn rbf_kernel(points: &DenseMatrix, cfg: &KernelConfig) -> Result<DenseMatrix> {
    let m = points.nrows();
    if m == 0 {
        return Err(Error::InvalidConfig("kernel needs at least one point".into()));
    }
    KernelConfig::new(cfg.sigma)?;
    let scale = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let mut k = DenseMatrix::identity(m, m);
    // Differences rather than the Gram expansion, so translations leave K untouched.
    for j in 0..m {
        for i in 0..j {
            let d2: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = (-d2 * scale).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

fn check_sketch(k_mat: &DenseMatrix, s: &DenseMatrix) -> Result<()> {
    if !k_mat.is_square() || s.ncols() != k_mat.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "kernel is {:?}, sketch is {:?}",
            k_mat.shape(),
            s.shape()
        )));
    }
    Ok(())
}

/// `K̃ = Cᵀ·W†·C` with `C = S·K` and `W = S·K·Sᵀ`.
pub fn nystrom_approx(k_mat: &DenseMatrix, s: &DenseMatrix) -> Result<DenseMatrix> {
    check_sketch(k_mat, s)?;
    let m = k_mat.nrows();
    if s.nrows() == 0 {
        return Ok(DenseMatrix::zeros(m, m));
    }
    let c = s * k_mat;
    let w = &c * s.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let approx = c.tr_mul(&(pseudoinverse_default(&w)? * &c));
    Ok((&approx + approx.transpose()) * 0.5)
}

/// `‖K − K̃‖* = tr(K − K̃)`, clamped into `[0, tr K]`.
pub fn nystrom_trace_error(k_mat: &DenseMatrix, s: &DenseMatrix) -> Result<f64> {
    let approx = nystrom_approx(k_mat, s)?;
    let total = k_mat.trace();
    Ok((total - approx.trace()).clamp(0.0, total.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{psd_sqrt, symmetric_eigen_sorted};
    use crate::rng::stream_rng;
    use crate::sketch::{draw_sketch, low_rank_error, SketchSpec};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = stream_rng(seed, 0);
        DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn rbf_basics() {
        let pts = gaussian(6, 3, 1);
        let k = rbf_kernel(&pts, &KernelConfig::new(1.3).unwrap()).unwrap();
        assert!((0..6).all(|i| k[(i, i)] == 1.0));
        assert_eq!(k, k.transpose());
        let eig = symmetric_eigen_sorted(&k).unwrap().0;
        assert!(eig[0] > -1e-8);

        let wide = rbf_kernel(&pts, &KernelConfig::new(1e12).unwrap()).unwrap();
        assert!(wide.iter().all(|v| (v - 1.0).abs() < 1e-6));

        let two = DenseMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        let k = rbf_kernel(&two, &KernelConfig::new(2.0).unwrap()).unwrap();
        assert!((k[(0, 1)] - (-25.0f64 / 8.0).exp()).abs() < 1e-15);
        assert!(KernelConfig::new(0.0).is_err());
    }

    #[test]
    fn rbf_translation_invariance() {
        let pts = gaussian(10, 4, 2);
        let shifted = DenseMatrix::from_fn(10, 4, |i, j| pts[(i, j)] + [3.0, -1.5, 0.25, 7.0][j]);
        let cfg = KernelConfig::new(0.8).unwrap();
        let a = rbf_kernel(&pts, &cfg).unwrap();
        let b = rbf_kernel(&shifted, &cfg).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn nystrom_identity_and_empty_sketch() {
        let g = gaussian(5, 5, 3);
        let k = &g * g.transpose();
        let full = nystrom_approx(&k, &DenseMatrix::identity(5, 5)).unwrap();
        assert!((full - &k).norm() < 1e-9 * k.norm());
        assert!(nystrom_trace_error(&k, &DenseMatrix::identity(5, 5)).unwrap() < 1e-9 * k.trace());
        let empty = DenseMatrix::zeros(0, 5);
        assert_eq!(nystrom_approx(&k, &empty).unwrap(), DenseMatrix::zeros(5, 5));
        assert!((nystrom_trace_error(&k, &empty).unwrap() - k.trace()).abs() < 1e-12);
    }

    #[test]
    fn nystrom_is_a_loewner_lower_bound() {
        let g = gaussian(6, 6, 4);
        let k = &g * g.transpose();
        let s = draw_sketch(&SketchSpec::gaussian(2, 5), 6, 0);
        let diff = &k - nystrom_approx(&k, &s).unwrap();
        let eig = symmetric_eigen_sorted(&diff).unwrap().0;
        assert!(eig[0] >= -1e-8);
    }

    #[test]
    fn trace_error_matches_square_root_form() {
        let g = gaussian(7, 7, 6);
        let k = &g * g.transpose();
        let root = psd_sqrt(&k).unwrap();
        let s = draw_sketch(&SketchSpec::gaussian(2, 7), 7, 0);
        let via_nystrom = nystrom_trace_error(&k, &s).unwrap();
        let via_root = low_rank_error(&root, &s).unwrap();
        assert!((via_nystrom - via_root).abs() <= 1e-7 * via_root);
    }
}
