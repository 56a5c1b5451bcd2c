use proptest::prelude::*;
use rand::Rng;

use sketchlab::experiment::{run_experiment, ExperimentConfig, InputSource, Mode};
use sketchlab::io::{format_csv, format_libsvm, parse_libsvm_str};
use sketchlab::linalg::{
    pseudoinverse_default, residual_projection, stable_rank, symmetric_eigen_sorted, trace_norm, IncrementalProjection,
};
use sketchlab::rng::stream_rng;
use sketchlab::sketch::{draw_sketch, ErrorSample};
use sketchlab::surrogate::{predict_frobenius_error, predicted_trajectory, solve_gamma, surrogate_projection};
use sketchlab::{DecayProfile, DenseMatrix, SketchFamily, SketchSpec, Spectrum, Vector};

fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..10.0, 3..40)
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, 0);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_scale_covariance(values in spectrum_strategy(), c in 0.01f64..100.0, frac in 0.05f64..0.95) {
        let s = Spectrum::from_unsorted(values).unwrap();
        let k = ((s.rank() as f64 * frac) as usize).clamp(1, s.rank() - 1);
        let scaled = s.scaled(c).unwrap();
        let g = solve_gamma(&s, k).unwrap().gamma;
        let gc = solve_gamma(&scaled, k).unwrap().gamma;
        prop_assert!((gc * c - g).abs() <= 1e-8 * g);
        let e = predict_frobenius_error(&s, k).unwrap();
        let ec = predict_frobenius_error(&scaled, k).unwrap();
        prop_assert!((ec - c * e).abs() <= 1e-9 * c * e);
    }

    #[test]
    fn gamma_bound_and_trace(values in spectrum_strategy(), frac in 0.05f64..0.95) {
        let s = Spectrum::from_unsorted(values).unwrap();
        let n = s.len();
        let k = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let sol = solve_gamma(&s, k).unwrap();
        prop_assert!(sol.residual <= 1e-10);
        let r = s.stable_rank();
        if r > k as f64 {
            let bound = k as f64 / (r - k as f64);
            prop_assert!(sol.gamma * s.values()[0] <= bound * (1.0 + 1e-9));
        }
        let p = surrogate_projection(&s, &DenseMatrix::identity(n, n), k).unwrap();
        prop_assert!((p.trace() - (n - k) as f64).abs() <= 1e-8 * n as f64);
    }

    #[test]
    fn trajectory_norms_do_not_increase(values in spectrum_strategy(), seed in 0u64..1000) {
        let s = Spectrum::from_unsorted(values).unwrap();
        let n = s.len();
        let k = (n / 3).max(1);
        let mut rng = stream_rng(seed, 1);
        let delta0 = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let vt = DenseMatrix::identity(n, n);
        let norms: Vec<f64> = (0..6)
            .map(|t| predicted_trajectory(&s, &vt, k, &delta0, t).unwrap().norm())
            .collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn stable_rank_scale_invariance(seed in 0u64..10_000, c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let a = random_matrix(6, 9, seed);
        let r = stable_rank(&a).unwrap();
        let rc = stable_rank(&(&a * c)).unwrap();
        prop_assert!((r - rc).abs() <= 1e-12 * r);
    }

    #[test]
    fn residual_projections_are_orthogonal_projectors(seed in 0u64..10_000, k in 1usize..12) {
        let n = 15;
        let x = random_matrix(k, n, seed);
        let r = residual_projection(&x).unwrap();
        prop_assert!((&r * &r - &r).norm() <= 1e-8 * n as f64);
        prop_assert!((&r - r.transpose()).norm() <= 1e-10 * n as f64);
        prop_assert!((r.trace() - (n - k) as f64).abs() <= 1e-8);
    }

    #[test]
    fn incremental_projection_matches_pseudoinverse(seed in 0u64..10_000) {
        let x = random_matrix(10, 30, seed);
        let mut inc = IncrementalProjection::new(30);
        for i in 0..10 {
            inc.push(&x.row(i).transpose()).unwrap();
        }
        let direct = pseudoinverse_default(&x).unwrap() * &x;
        prop_assert!((inc.projection() - direct).amax() <= 1e-7);
    }

    #[test]
    fn trace_norm_of_psd_is_trace(seed in 0u64..10_000) {
        let g = random_matrix(5, 5, seed);
        let k = &g * g.transpose();
        prop_assert!((trace_norm(&k).unwrap() - k.trace()).abs() <= 1e-9);
    }

    #[test]
    fn libsvm_round_trip(rows in 1usize..8, cols in 1usize..10, density in 0.1f64..1.0, seed in 0u64..10_000) {
        let mut rng = stream_rng(seed, 2);
        let mut a = DenseMatrix::from_fn(rows, cols, |_, _| {
            if rng.random::<f64>() < density { rng.random_range(-1e3..1e3) } else { 0.0 }
        });
        // The parsed width is the largest index present, so pin the last column.
        a[(0, cols - 1)] = 1.5;
        let parsed = parse_libsvm_str(&format_libsvm(&a)).unwrap();
        prop_assert_eq!(parsed.shape(), a.shape());
        prop_assert!((parsed - a).amax() <= 1e-12);
    }

    #[test]
    fn mean_error_is_permutation_invariant(values in prop::collection::vec(0.0f64..5.0, 1..200), seed in 0u64..1000) {
        let mut shuffled = values.clone();
        let mut rng = stream_rng(seed, 3);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let a = ErrorSample::from_trials(values).mean_error;
        let b = ErrorSample::from_trials(shuffled).mean_error;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn sketch_row_scaling_leaves_projection_unchanged(seed in 0u64..10_000, scale in 1e-3f64..1e3) {
        let a = random_matrix(12, 8, seed);
        let s = draw_sketch(&SketchSpec::gaussian(3, seed), 12, 0);
        let p = residual_projection(&(&s * &a)).unwrap();
        let ps = residual_projection(&(&s * scale * &a)).unwrap();
        prop_assert!((p - ps).amax() <= 1e-9);
    }
}

#[test]
fn nystrom_difference_is_psd_for_random_kernels() {
    for seed in 0..20 {
        let g = random_matrix(12, 12, seed);
        let k = &g * g.transpose();
        let s = draw_sketch(&SketchSpec::rademacher(4, seed), 12, 0);
        let diff = &k - sketchlab::kernel::nystrom_approx(&k, &s).unwrap();
        assert!(symmetric_eigen_sorted(&diff).unwrap().0[0] >= -1e-8);
    }
}

#[test]
fn experiment_csv_is_identical_across_thread_counts() {
    let cfg = ExperimentConfig {
        input: InputSource::Profile {
            profile: DecayProfile::exponential(0.97, 120).normalized(),
            dense: true,
        },
        family: SketchFamily::Rademacher,
        seed: 21,
        k_grid: vec![5, 10, 20],
        trials: 37,
        mode: Mode::LowRank,
        output_path: None,
        normalize: false,
        epsilon: true,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| format_csv(&run_experiment(&cfg).unwrap().rows))
    };
    let reference = run(1);
    for threads in [2, 3, 8] {
        assert_eq!(run(threads), reference, "threads = {threads}");
    }
}
