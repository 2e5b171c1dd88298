//! End-to-end recovery: intensities → lifted vector (stage 1) → sparse
//! signal (stage 2) → phase-aligned error metrics.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::operator::{LinearOperator, SensingMode, SensingOperator, WithFirstEntryRow};
use crate::measurement::IntensityMeasurements;
use crate::phase_retrieval::{
    recover_phases, split_result, stage1_noise, PhaseRetrievalResult, RetrievalOptions,
};
use crate::signal::{inner, norm_sqr, ComplexSignal};
use crate::solver::{epsilon_from_moments, solve_bp, L1Problem, SolverOptions, SolverReport};

/// Default success criterion on the aligned relative MSE.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-5;

/// How the stage-2 residual budget is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonMode {
    Fixed(f64),
    /// Propagate the recorded noise variance through stage 1 and take the
    /// chi-square quantile at this confidence.
    Estimated { confidence: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub retrieval: RetrievalOptions,
    pub solver: SolverOptions,
    pub epsilon: EpsilonMode,
    /// Fourier mode only: add the row `e_1` with value `√N·ỹ[1]` to the
    /// stage-2 system.
    pub known_first_entry: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            retrieval: RetrievalOptions::default(),
            solver: SolverOptions::default(),
            epsilon: EpsilonMode::Estimated { confidence: 0.95 },
            known_first_entry: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Estimate with its first nonzero-phase convention: `x[1]` real and
    /// nonnegative.
    pub estimate: ComplexSignal,
    /// Stage-1 output, expressed as `(x[1]/√N, F_𝓛 x)` in Fourier mode and
    /// `A x` in the dense modes.
    pub stage1: PhaseRetrievalResult,
    pub solver: SolverReport,
    pub epsilon: f64,
}

fn check_compatible(b: &IntensityMeasurements, op: &SensingOperator) -> Result<()> {
    if b.mode != op.mode() {
        return invalid(format!("measurements were taken in {} mode, operator is {}", b.mode, op.mode()));
    }
    if b.n != op.cols() {
        return invalid(format!("measurements are for N = {}, operator has N = {}", b.n, op.cols()));
    }
    match op.mode() {
        SensingMode::Fourier => {
            if b.sampling.as_ref() != op.sampling_set() {
                return invalid("measurement sampling set differs from the operator's");
            }
        }
        _ => {
            if op.rows() != b.l() + 1 {
                return invalid(format!(
                    "dense operator has {} rows but the measurements lift to length {}",
                    op.rows(),
                    b.l() + 1
                ));
            }
        }
    }
    Ok(())
}

/// Runs both stages on `b`, taken through `op`.
pub fn recover(b: &IntensityMeasurements, op: &SensingOperator, opts: &PipelineOptions) -> Result<Recovery> {
    check_compatible(b, op)?;
    let mut stage1 = recover_phases(b, &opts.retrieval)?;
    let n = op.cols();

    // The masks measure the conjugate of the lifted vector.
    if op.mode() == SensingMode::Fourier {
        stage1.y_tilde = stage1.y_tilde.conj();
    }

    let noise = stage1_noise(&stage1, b.noise_variance);
    let (mut mean_sq, mut var_sq) = (noise.mean_sq, noise.var_sq);
    let augmented;
    let (operator, rhs): (&dyn LinearOperator, ComplexSignal) = match op.mode() {
        SensingMode::Fourier => {
            let (x1, spectrum) = split_result(&stage1, n);
            if opts.known_first_entry {
                augmented = WithFirstEntryRow::new(op);
                let first = n as f64 * noise.first_entry_var;
                mean_sq += first;
                var_sq += 2.0 * first * first;
                let mut v = vec![x1];
                v.extend_from_slice(spectrum.as_slice());
                (&augmented, ComplexSignal::new(v)?)
            } else {
                (op, spectrum)
            }
        }
        _ => (op, stage1.y_tilde.clone()),
    };

    let epsilon = match opts.epsilon {
        EpsilonMode::Fixed(e) => e,
        EpsilonMode::Estimated { confidence } => epsilon_from_moments(mean_sq, var_sq, confidence)?,
    };
    let solver = solve_bp(&L1Problem::new(operator, &rhs, epsilon)?, &opts.solver)?;

    let first = solver.solution[0];
    let estimate = if first.norm() > 0.0 {
        solver.solution.scaled(first.conj() / first.norm())
    } else {
        solver.solution.clone()
    };
    Ok(Recovery {
        estimate,
        stage1,
        solver,
        epsilon,
    })
}

/// Best unimodular `c` for `estimate ≈ truth / c`, and the resulting
/// `‖truth − c·estimate‖² / ‖truth‖²`.
pub fn align_phase(truth: &ComplexSignal, estimate: &ComplexSignal) -> Result<(Complex64, f64)> {
    if truth.len() != estimate.len() {
        return invalid(format!(
            "truth has length {}, estimate has length {}",
            truth.len(),
            estimate.len()
        ));
    }
    let t = truth.as_slice();
    let e = estimate.as_slice();
    let tn = norm_sqr(t);
    if tn == 0.0 {
        return invalid("reference signal is zero");
    }
    let ip = inner(t, e);
    let c = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
    let err: f64 = t.iter().zip(e).map(|(a, b)| (a - c * b).norm_sqr()).sum();
    Ok((c, err / tn))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub x_estimate: ComplexSignal,
    pub aligned_mse: f64,
    pub stage1_residual: f64,
    pub solver_report: SolverReport,
    pub success: bool,
}

/// Scores a recovery against the known truth.
pub fn evaluate(truth: &ComplexSignal, recovery: Recovery, threshold: f64) -> Result<RecoveryOutcome> {
    let (_, mse) = align_phase(truth, &recovery.estimate)?;
    Ok(RecoveryOutcome {
        x_estimate: recovery.estimate,
        aligned_mse: mse,
        stage1_residual: recovery.stage1.residual,
        solver_report: recovery.solver,
        success: mse < threshold,
    })
}
