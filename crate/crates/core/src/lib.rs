//! Data-oblivious matrix sketching together with surrogate expressions that
//! predict, from the spectrum alone, the expected residual projection of a
//! sub-gaussian sketch, and with it low-rank and Nyström approximation
//! errors and the convergence of sketch-and-project solvers.

pub mod error;
pub mod experiment;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod parallel;
pub mod rng;
pub mod sketch;
pub mod solvers;
pub mod spectrum;
pub mod surrogate;

pub use error::{Error, ParseError, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutcome, InputFormat, InputSource, Mode};
pub use io::ResultRow;
pub use linalg::{DataMatrix, DenseMatrix, DiagonalMatrix, Vector};
pub use sketch::{SketchFamily, SketchSpec};
pub use spectrum::{DecayKind, DecayProfile, Spectrum};
