//! Compressive phase retrieval with four coded masks.
//!
//! A k-sparse signal `x ∈ C^N` is observed through four transmittance masks
//! and a Fourier-transforming lens; only intensities at a random set of `L`
//! frequencies are kept. Recovery runs in two stages:
//!
//! 1. [`phase_retrieval::recover_phases`] inverts the mask structure in
//!    closed form, returning `(x[1]/√N, F_𝓛 x)` up to a global phase.
//! 2. [`solver::solve_bp`] recovers `x` from the partial spectrum by ℓ₁
//!    minimisation.
//!
//! The same two stages apply to dense Gaussian/Bernoulli sensing, where
//! stage 1 returns `A x`. [`pipeline::recover`] chains them.
//!
//! ```
//! use cpr_core::{align_phase, measure, random_sparse_signal, recover, FirstEntry};
//! use cpr_core::{PipelineOptions, SamplingSet, SensingOperator};
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let x = random_sparse_signal(256, 6, &mut rng, FirstEntry::Gaussian)?.into_signal();
//! let op = SensingOperator::fourier(256, SamplingSet::random(256, 40, &mut rng)?)?;
//! let b = measure(&x, &op, &mut rng, 0.0)?;
//! let r = recover(&b, &op, &PipelineOptions::default())?;
//! let (_, mse) = align_phase(&x, &r.estimate)?;
//! assert!(mse < 1e-8);
//! # Ok::<(), cpr_core::CprError>(())
//! ```

pub mod dft;
pub mod error;
pub mod format;
pub mod measurement;
pub mod operator;
pub mod phase_retrieval;
pub mod pipeline;
pub mod signal;
pub mod solver;

pub use dft::{dft_adjoint, dft_forward, DftOperator, SamplingSet};
pub use error::{CprError, Result};
pub use measurement::{
    build_masks, measure, measure_fourier, measure_vectors, snr_db, IntensityMeasurements, MaskConstants,
    MaskSet,
};
pub use operator::{LinearOperator, SensingMode, SensingOperator};
pub use phase_retrieval::{recover_phases, split_result, stage1_noise, PhaseRetrievalResult, RetrievalOptions, Stage1Noise};
pub use pipeline::{align_phase, recover, EpsilonMode, PipelineOptions, Recovery, RecoveryOutcome};
pub use signal::{random_sparse_signal, ComplexSignal, FirstEntry, SparseSignal};
pub use solver::{epsilon_from_moments, estimate_epsilon, solve_bp, L1Problem, SolverOptions, SolverReport};

pub use num_complex::Complex64;
