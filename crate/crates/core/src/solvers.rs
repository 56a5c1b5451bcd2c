//! Randomized iterative methods driven by fresh sketches: generalized
//! Kaczmarz (sketch-and-project), randomized subspace Newton on quadratics,
//! and the sketched minimum-norm solution versus ridge regression.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{pseudoinverse_default, svd, DenseMatrix, Vector};
use crate::parallel::ordered_map_reduce;
use crate::rng::trial_step_stream;
use crate::sketch::{draw_sketch, SketchSpec};
use crate::spectrum::{spectrum_of, Spectrum};
use crate::surrogate::{kappa_surrogate, solve_gamma, ConditionMethod};

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DenseMatrix,
    pub b: Vector,
    /// Known solution, when the system was generated from one.
    pub x_star: Option<Vector>,
}

impl LinearSystem {
    pub fn new(a: DenseMatrix, b: Vector, x_star: Option<Vector>) -> Result<Self> {
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "b has length {} but A has {} rows",
                b.len(),
                a.nrows()
            )));
        }
        if let Some(x) = &x_star {
            if x.len() != a.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "x* has length {} but A has {} columns",
                    x.len(),
                    a.ncols()
                )));
            }
            if (&a * x - &b).norm() > 1e-8 * b.norm() {
                return Err(Error::InvalidConfig("x* does not solve A·x = b".into()));
            }
        }
        Ok(LinearSystem { a, b, x_star })
    }

    /// Consistent system `b = A·x*`.
    pub fn from_solution(a: DenseMatrix, x_star: Vector) -> Result<Self> {
        let b = &a * &x_star;
        Self::new(a, b, Some(x_star))
    }

    fn solution(&self) -> Result<&Vector> {
        self.x_star
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("the system has no known solution x*".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KaczmarzState {
    pub iterate: Vector,
    pub step: usize,
    /// Past iterates, oldest first; only kept when enabled.
    pub history: Option<Vec<Vector>>,
}

impl KaczmarzState {
    pub fn new(x0: Vector) -> Self {
        KaczmarzState {
            iterate: x0,
            step: 0,
            history: None,
        }
    }

    pub fn with_history(x0: Vector) -> Self {
        KaczmarzState {
            iterate: x0,
            step: 0,
            history: Some(Vec::new()),
        }
    }
}

/// Minimum-norm solution of `X·x = r`, i.e. `X†r`.
fn min_norm_solve(x: &DenseMatrix, r: &Vector) -> Result<Vector> {
    let f = svd(x)?;
    let rank = f.rank();
    let mut coords = f.u.columns(0, rank).tr_mul(r);
    for i in 0..rank {
        coords[i] /= f.singular_values[i];
    }
    Ok(f.vt.rows(0, rank).tr_mul(&coords))
}

/// `x ← x + (SA)†S(b − Ax)`: projects onto `{x : SAx = Sb}`.
pub fn kaczmarz_step(sys: &LinearSystem, mut state: KaczmarzState, s: &DenseMatrix) -> Result<KaczmarzState> {
    if s.ncols() != sys.a.nrows() || state.iterate.len() != sys.a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "sketch is {}x{}, A is {}x{}, iterate has length {}",
            s.nrows(),
            s.ncols(),
            sys.a.nrows(),
            sys.a.ncols(),
            state.iterate.len()
        )));
    }
    let sa = s * &sys.a;
    let residual = s * (&sys.b - &sys.a * &state.iterate);
    let update = min_norm_solve(&sa, &residual)?;
    if let Some(history) = state.history.as_mut() {
        history.push(state.iterate.clone());
    }
    state.iterate += update;
    state.step += 1;
    Ok(state)
}

/// Per-step Monte Carlo summary of sketch-and-project runs.
#[derive(Debug, Clone)]
pub struct KaczmarzRun {
    /// `Ê[xᵗ]` for `t = 0..=steps`.
    pub mean_iterates: Vec<Vector>,
    /// `Ê[‖xᵗ − x*‖²]`.
    pub mean_sq_errors: Vec<f64>,
    /// Standard error of `mean_sq_errors`.
    pub sq_error_sem: Vec<f64>,
    /// `Ê[xᵗ] − x*`.
    pub mean_deltas: Vec<Vector>,
    /// Standard error of `mean_deltas` in Euclidean norm.
    pub mean_delta_sem: Vec<f64>,
}

struct RunMoments {
    iterate_sum: Vec<Vector>,
    delta_sq: Vec<f64>,
    delta_sq_sq: Vec<f64>,
}

impl RunMoments {
    fn merge(mut self, other: RunMoments) -> RunMoments {
        for (a, b) in self.iterate_sum.iter_mut().zip(other.iterate_sum) {
            *a += b;
        }
        for (a, b) in self.delta_sq.iter_mut().zip(other.delta_sq) {
            *a += b;
        }
        for (a, b) in self.delta_sq_sq.iter_mut().zip(other.delta_sq_sq) {
            *a += b;
        }
        self
    }
}

fn sem_from_moments(sum: f64, sum_sq: f64, trials: usize) -> f64 {
    if trials < 2 {
        return 0.0;
    }
    let t = trials as f64;
    let mean = sum / t;
    let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
    (var / t).sqrt()
}

/// Runs `trials` independent sketch-and-project trajectories of `steps`
/// steps each. Step `t` of trial `i` draws stream `(i, t)` of `spec.seed`.
pub fn kaczmarz_run(
    sys: &LinearSystem,
    spec: &SketchSpec,
    x0: &Vector,
    steps: usize,
    trials: usize,
) -> Result<KaczmarzRun> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let x_star = sys.solution()?;
    let m = sys.a.nrows();
    let moments = ordered_map_reduce(
        trials,
        |trial| -> Result<RunMoments> {
            let mut state = KaczmarzState::new(x0.clone());
            let mut iterate_sum = Vec::with_capacity(steps + 1);
            let mut delta_sq = Vec::with_capacity(steps + 1);
            let record = |x: &Vector, iterate_sum: &mut Vec<Vector>, delta_sq: &mut Vec<f64>| {
                iterate_sum.push(x.clone());
                delta_sq.push((x - x_star).norm_squared());
            };
            record(&state.iterate, &mut iterate_sum, &mut delta_sq);
            for step in 0..steps {
                let s = draw_sketch(spec, m, trial_step_stream(trial as u64, step as u64));
                state = kaczmarz_step(sys, state, &s)?;
                record(&state.iterate, &mut iterate_sum, &mut delta_sq);
            }
            let delta_sq_sq = delta_sq.iter().map(|d| d * d).collect();
            Ok(RunMoments {
                iterate_sum,
                delta_sq,
                delta_sq_sq,
            })
        },
        |a, b| Ok(a?.merge(b?)),
    )
    .expect("trials >= 1")?;

    let t = trials as f64;
    let mean_iterates: Vec<Vector> = moments.iterate_sum.iter().map(|s| s / t).collect();
    let mean_sq_errors: Vec<f64> = moments.delta_sq.iter().map(|s| s / t).collect();
    let sq_error_sem = moments
        .delta_sq
        .iter()
        .zip(&moments.delta_sq_sq)
        .map(|(s, s2)| sem_from_moments(*s, *s2, trials))
        .collect();
    let mean_deltas: Vec<Vector> = mean_iterates.iter().map(|x| x - x_star).collect();
    // E‖Δ − EΔ‖² = E‖Δ‖² − ‖EΔ‖².
    let mean_delta_sem = mean_deltas
        .iter()
        .zip(&moments.delta_sq)
        .map(|(d, s)| sem_from_moments(0.0, s - t * d.norm_squared(), trials))
        .collect();
    Ok(KaczmarzRun {
        mean_iterates,
        mean_sq_errors,
        sq_error_sem,
        mean_deltas,
        mean_delta_sem,
    })
}

/// `1 − κ̄` with `κ̄ = σ²_min/(σ²_min + 1/γ)`.
pub fn worst_case_rate(s: &Spectrum, k: usize) -> Result<f64> {
    if s.min_value() <= 0.0 {
        return Err(Error::SingularSystem);
    }
    Ok(1.0 - kappa_surrogate(s, k, ConditionMethod::Kaczmarz)?.kappa_bar)
}

/// One randomized subspace Newton step `x − (1/L)·Sᵀ(S·H·Sᵀ)†S·g`.
pub fn rsn_quadratic_step(
    h: &DenseMatrix,
    g: &Vector,
    x: &Vector,
    s: &DenseMatrix,
    smoothness_l: f64,
) -> Result<Vector> {
    let d = x.len();
    if h.shape() != (d, d) || g.len() != d || s.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "H is {:?}, g has length {}, x has length {}, sketch is {:?}",
            h.shape(),
            g.len(),
            d,
            s.shape()
        )));
    }
    if smoothness_l.is_nan() || smoothness_l <= 0.0 {
        return Err(Error::InvalidConfig(format!("smoothness constant {smoothness_l} must be positive")));
    }
    let shs = s * h * s.transpose();
    let shs = (&shs + shs.transpose()) * 0.5;
    let direction = s.tr_mul(&(pseudoinverse_default(&shs)? * (s * g)));
    Ok(x - direction / smoothness_l)
}

#[derive(Debug, Clone)]
pub struct ImplicitRegularization {
    /// `Ê[argmin ‖x‖ s.t. SAx = Sb] − x*`.
    pub mean_min_norm_bias: Vector,
    /// Standard error of `mean_min_norm_bias` in Euclidean norm.
    pub bias_std_error: f64,
    /// `(AᵀA + I/γ)⁻¹Aᵀb − x*`; absent when `k` reaches the rank of `A`.
    pub ridge_bias: Option<Vector>,
    pub gamma: Option<f64>,
}

/// Compares the bias of the sketched minimum-norm interpolator with the
/// bias of ridge regression with penalty `1/γ`.
pub fn min_norm_vs_ridge(sys: &LinearSystem, spec: &SketchSpec, trials: usize) -> Result<ImplicitRegularization> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let x_star = sys.solution()?;
    let n = sys.a.ncols();
    let (sum, sum_sq) = ordered_map_reduce(
        trials,
        |t| -> Result<(Vector, f64)> {
            let s = draw_sketch(spec, sys.a.nrows(), t as u64);
            let x = min_norm_solve(&(&s * &sys.a), &(&s * &sys.b))?;
            let bias = x - x_star;
            let sq = bias.norm_squared();
            Ok((bias, sq))
        },
        |a, b| {
            let (va, sa) = a?;
            let (vb, sb) = b?;
            Ok((va + vb, sa + sb))
        },
    )
    .expect("trials >= 1")?;
    let t = trials as f64;
    let mean_min_norm_bias = sum / t;
    let bias_std_error = sem_from_moments(0.0, sum_sq - t * mean_min_norm_bias.norm_squared(), trials);

    let (ridge_bias, gamma) = match spectrum_of(&sys.a).and_then(|s| solve_gamma(&s, spec.k)) {
        Ok(solution) => {
            let gamma = solution.gamma;
            let mut gram = sys.a.tr_mul(&sys.a);
            for i in 0..n {
                gram[(i, i)] += 1.0 / gamma;
            }
            let rhs = sys.a.tr_mul(&sys.b);
            let ridge = Cholesky::new(gram)
                .ok_or_else(|| Error::NumericalFailure("ridge system is not positive definite".into()))?
                .solve(&rhs);
            (Some(ridge - x_star), Some(gamma))
        }
        Err(Error::KExceedsRank { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(ImplicitRegularization {
        mean_min_norm_bias,
        bias_std_error,
        ridge_bias,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::spectrum::synthesize_matrix;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = stream_rng(seed, 0);
        DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn random_system(m: usize, n: usize, seed: u64) -> LinearSystem {
        let a = gaussian(m, n, seed);
        let x = gaussian(n, 1, seed + 1000).column(0).into_owned();
        LinearSystem::from_solution(a, x).unwrap()
    }

    #[test]
    fn fixed_point_and_one_dimensional_solve() {
        let sys = random_system(6, 4, 1);
        let x_star = sys.x_star.clone().unwrap();
        let s = gaussian(2, 6, 2);
        let next = kaczmarz_step(&sys, KaczmarzState::new(x_star.clone()), &s).unwrap();
        assert!((next.iterate - &x_star).norm() < 1e-12);

        let sys = LinearSystem::new(DenseMatrix::from_element(1, 1, 4.0), Vector::from_element(1, 3.0), None).unwrap();
        let s = DenseMatrix::from_element(1, 1, -0.7);
        let next = kaczmarz_step(&sys, KaczmarzState::new(Vector::zeros(1)), &s).unwrap();
        assert!((next.iterate[0] - 0.75).abs() < 1e-15);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn full_sketch_solves_in_one_step() {
        let sys = random_system(5, 5, 3);
        let s = gaussian(5, 5, 4);
        let next = kaczmarz_step(&sys, KaczmarzState::new(Vector::zeros(5)), &s).unwrap();
        let direct = sys.a.clone().lu().solve(&sys.b).unwrap();
        assert!((next.iterate - direct).norm() < 1e-9);
    }

    #[test]
    fn step_satisfies_sketched_constraint_and_is_idempotent() {
        let sys = random_system(10, 8, 5);
        let s = gaussian(3, 10, 6);
        let x0 = gaussian(8, 1, 7).column(0).into_owned();
        let one = kaczmarz_step(&sys, KaczmarzState::with_history(x0.clone()), &s).unwrap();
        let sa = &s * &sys.a;
        let sb = &s * &sys.b;
        assert!((&sa * &one.iterate - &sb).norm() < 1e-8 * sb.norm());
        // Update lies in the row space of SA.
        let p = crate::linalg::residual_projection(&sa).unwrap();
        assert!((p * (&one.iterate - &x0)).norm() < 1e-10);
        let two = kaczmarz_step(&sys, one.clone(), &s).unwrap();
        assert!((&two.iterate - &one.iterate).norm() < 1e-10);
        assert_eq!(two.history.as_ref().unwrap().len(), 2);
        let x_star = sys.x_star.as_ref().unwrap();
        assert!((&one.iterate - x_star).norm() <= (&x0 - x_star).norm() + 1e-12);
    }

    #[test]
    fn first_step_from_zero_is_min_norm_interpolator() {
        let sys = random_system(12, 9, 8);
        let s = gaussian(4, 12, 9);
        let x1 = kaczmarz_step(&sys, KaczmarzState::new(Vector::zeros(9)), &s).unwrap().iterate;
        let min_norm = pseudoinverse_default(&(&s * &sys.a)).unwrap() * (&s * &sys.b);
        assert!((x1 - min_norm).norm() < 1e-10);
    }

    #[test]
    fn run_edge_cases() {
        let sys = random_system(8, 6, 10);
        let spec = SketchSpec::gaussian(2, 1);
        let x_star = sys.x_star.clone().unwrap();
        let at_solution = kaczmarz_run(&sys, &spec, &x_star, 4, 5).unwrap();
        assert!(at_solution.mean_sq_errors.iter().all(|e| *e < 1e-20));
        let zero_steps = kaczmarz_run(&sys, &spec, &Vector::zeros(6), 0, 3).unwrap();
        assert_eq!(zero_steps.mean_iterates, vec![Vector::zeros(6)]);
        let no_solution = LinearSystem::new(sys.a.clone(), sys.b.clone(), None).unwrap();
        assert!(kaczmarz_run(&no_solution, &spec, &Vector::zeros(6), 1, 1).is_err());
    }

    #[test]
    fn run_errors_never_increase_per_trial() {
        let sys = random_system(15, 10, 11);
        let spec = SketchSpec::rademacher(3, 2);
        let run = kaczmarz_run(&sys, &spec, &Vector::zeros(10), 6, 1).unwrap();
        for w in run.mean_sq_errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn worst_case_rate_cases() {
        let flat = Spectrum::new(vec![1.0; 10]).unwrap();
        assert!((worst_case_rate(&flat, 4).unwrap() - 0.6).abs() < 1e-12);
        assert!((worst_case_rate(&flat, 9).unwrap() - 0.1).abs() < 1e-12);
        let singular = Spectrum::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(worst_case_rate(&singular, 1), Err(Error::SingularSystem)));
    }

    #[test]
    fn rsn_cases() {
        let g0 = gaussian(5, 5, 12);
        let h = &g0 * g0.transpose() + DenseMatrix::identity(5, 5);
        let x = gaussian(5, 1, 13).column(0).into_owned();
        let s = gaussian(2, 5, 14);
        assert_eq!(rsn_quadratic_step(&h, &Vector::zeros(5), &x, &s, 1.0).unwrap(), x);

        // Full sketch: exact Newton step x − H⁻¹g.
        let b = gaussian(5, 1, 15).column(0).into_owned();
        let grad = &h * &x - &b;
        let full = gaussian(5, 5, 16);
        let step = rsn_quadratic_step(&h, &grad, &x, &full, 1.0).unwrap();
        let newton = &x - h.clone().lu().solve(&grad).unwrap();
        assert!((step - newton).norm() < 1e-9);

        // Update lies in span(Sᵀ).
        let partial = rsn_quadratic_step(&h, &grad, &x, &s, 2.0).unwrap();
        let p = crate::linalg::residual_projection(&s).unwrap();
        assert!((p * (partial - &x)).norm() < 1e-10);
    }

    #[test]
    fn rsn_with_identity_hessian_is_kaczmarz() {
        // f(x) = ½‖x‖² − bᵀx solves I·x = b.
        let b = gaussian(6, 1, 17).column(0).into_owned();
        let x = gaussian(6, 1, 18).column(0).into_owned();
        let s = gaussian(3, 6, 19);
        let h = DenseMatrix::identity(6, 6);
        let rsn = rsn_quadratic_step(&h, &(&x - &b), &x, &s, 1.0).unwrap();
        let sys = LinearSystem::from_solution(h, b).unwrap();
        let kacz = kaczmarz_step(&sys, KaczmarzState::new(x), &s).unwrap().iterate;
        assert!((rsn - kacz).norm() < 1e-10);
    }

    #[test]
    fn min_norm_vs_ridge_edge_cases() {
        let sys = LinearSystem::from_solution(gaussian(6, 4, 20), Vector::zeros(4)).unwrap();
        let out = min_norm_vs_ridge(&sys, &SketchSpec::gaussian(2, 3), 5).unwrap();
        assert!(out.mean_min_norm_bias.norm() < 1e-14);
        assert!(out.ridge_bias.unwrap().norm() < 1e-14);

        let a = synthesize_matrix(&Spectrum::new(vec![3.0, 2.0, 1.0]).unwrap(), 3, 3, 4).unwrap();
        let sys = LinearSystem::from_solution(a, Vector::from_vec(vec![1.0, -1.0, 2.0])).unwrap();
        let out = min_norm_vs_ridge(&sys, &SketchSpec::gaussian(3, 3), 4).unwrap();
        assert!(out.mean_min_norm_bias.norm() < 1e-9);
        assert!(out.ridge_bias.is_none());
    }
}
