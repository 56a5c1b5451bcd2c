//! Fixtures shared by the benchmarks.

use sketchlab::spectrum::{profile_spectrum, synthesize_matrix};
use sketchlab::{DecayProfile, DenseMatrix, Spectrum};

pub fn exponential_spectrum(alpha: f64, n: usize) -> Spectrum {
    profile_spectrum(&DecayProfile::exponential(alpha, n).normalized()).expect("valid profile")
}

pub fn dense_matrix(alpha: f64, n: usize, seed: u64) -> DenseMatrix {
    synthesize_matrix(&exponential_spectrum(alpha, n), n, n, seed).expect("valid shape")
}
