//! A single Monte Carlo trial: draw a signal and an operator from the trial
//! seed, measure, recover, score.

use std::time::{Duration, Instant};

use cpr_core::measurement::sigma_for_snr;
use cpr_core::pipeline::evaluate;
use cpr_core::{
    measure, random_sparse_signal, recover, CprError, IntensityMeasurements, PipelineOptions, SamplingSet,
    SensingMode, SensingOperator,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Variant;
use crate::seed::{derive_seed, snr_coord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: usize,
    pub l: usize,
    pub snr_db: Option<f64>,
    pub variant: Variant,
}

impl GridPoint {
    pub fn m(&self) -> usize {
        4 * self.l
    }

    pub fn coords(&self) -> [u64; 4] {
        [self.k as u64, self.l as u64, snr_coord(self.snr_db), self.variant.code()]
    }

    /// Total order used to sort results: `k`, `L`, SNR (noiseless last),
    /// variant.
    pub fn sort_key(&self) -> (usize, usize, u8, u64, Variant) {
        let (flag, snr) = match self.snr_db {
            // Map finite floats to an order-preserving integer.
            Some(s) => {
                let b = s.to_bits();
                (0, if s >= 0.0 { b ^ (1 << 63) } else { !b })
            }
            None => (1, 0),
        };
        (self.k, self.l, flag, snr, self.variant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Converged,
    NotConverged,
    /// Stage 1 found `|x[1]|` indistinguishable from zero; scored as the zero
    /// estimate (MSE 1).
    FirstEntryVanishes,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Converged => "converged",
            TrialStatus::NotConverged => "not-converged",
            TrialStatus::FirstEntryVanishes => "first-entry-vanishes",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: GridPoint,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub aligned_mse: f64,
    pub stage1_residual: f64,
    pub iterations: usize,
    pub status: TrialStatus,
    pub wall_time: Duration,
}

/// Fixed trial settings shared by every grid point.
#[derive(Debug, Clone, Copy)]
pub struct TrialContext {
    pub n: usize,
    pub mode: SensingMode,
    pub threshold: f64,
    pub master_seed: u64,
    pub options: PipelineOptions,
}

impl TrialContext {
    pub fn trial_seed(&self, point: &GridPoint, trial: usize) -> u64 {
        let c = point.coords();
        derive_seed(self.master_seed, &[c[0], c[1], c[2], c[3], trial as u64])
    }
}

/// Operator for `l` sampled frequencies (Fourier) or `l + 1` rows (dense),
/// drawn from `seed`. Measurement records store this seed so the operator
/// can be rebuilt from the record alone.
pub fn make_operator(mode: SensingMode, n: usize, l: usize, seed: u64) -> cpr_core::Result<SensingOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        SensingMode::Fourier => SensingOperator::fourier(n, SamplingSet::random(n, l, &mut rng)?),
        SensingMode::Gaussian => SensingOperator::gaussian(l + 1, n, &mut rng),
        SensingMode::Bernoulli => SensingOperator::bernoulli(l + 1, n, &mut rng),
    }
}

/// Rebuilds the operator a measurement record was taken with.
pub fn operator_for(b: &IntensityMeasurements) -> cpr_core::Result<SensingOperator> {
    match (&b.sampling, b.mode) {
        (Some(set), SensingMode::Fourier) => SensingOperator::fourier(b.n, set.clone()),
        (None, SensingMode::Fourier) => Err(CprError::Format("Fourier record without a sampling set".into())),
        (_, mode) => make_operator(mode, b.n, b.l(), b.seed),
    }
}

pub struct Instance {
    pub signal: cpr_core::ComplexSignal,
    pub operator: SensingOperator,
    pub measurements: IntensityMeasurements,
}

/// Draws signal, operator and noisy measurements from a trial seed.
pub fn draw_instance(
    n: usize,
    mode: SensingMode,
    point: &GridPoint,
    seed: u64,
) -> cpr_core::Result<Instance> {
    let mut signal_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let op_seed = derive_seed(seed, &[1]);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2]));

    let signal = random_sparse_signal(n, point.k, &mut signal_rng, point.variant.first_entry())?.into_signal();
    let operator = make_operator(mode, n, point.l, op_seed)?;
    let sigma = match point.snr_db {
        Some(snr) => sigma_for_snr(&signal, &operator, snr)?,
        None => 0.0,
    };
    let mut measurements = measure(&signal, &operator, &mut noise_rng, sigma)?;
    measurements.seed = op_seed;
    Ok(Instance {
        signal,
        operator,
        measurements,
    })
}

pub fn run_trial(ctx: &TrialContext, point: &GridPoint, trial: usize) -> cpr_core::Result<TrialRecord> {
    let seed = ctx.trial_seed(point, trial);
    let start = Instant::now();
    let inst = draw_instance(ctx.n, ctx.mode, point, seed)?;
    let record = |success, aligned_mse, stage1_residual, iterations, status| TrialRecord {
        point: *point,
        trial,
        seed,
        success,
        aligned_mse,
        stage1_residual,
        iterations,
        status,
        wall_time: start.elapsed(),
    };
    match recover(&inst.measurements, &inst.operator, &ctx.options) {
        Ok(r) => {
            let out = evaluate(&inst.signal, r, ctx.threshold)?;
            let status = if out.solver_report.converged {
                TrialStatus::Converged
            } else {
                TrialStatus::NotConverged
            };
            Ok(record(
                out.success,
                out.aligned_mse,
                out.stage1_residual,
                out.solver_report.iterations,
                status,
            ))
        }
        Err(CprError::FirstEntryVanishes { .. }) => Ok(record(false, 1.0, f64::NAN, 0, TrialStatus::FirstEntryVanishes)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> TrialContext {
        TrialContext {
            n: 64,
            mode: SensingMode::Fourier,
            threshold: 1e-5,
            master_seed: 3,
            options: PipelineOptions::default(),
        }
    }

    #[test]
    fn replay_is_exact() {
        let p = GridPoint {
            k: 3,
            l: 16,
            snr_db: Some(30.0),
            variant: Variant::Random,
        };
        let a = run_trial(&ctx(), &p, 4).unwrap();
        let b = run_trial(&ctx(), &p, 4).unwrap();
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.aligned_mse.to_bits(), b.aligned_mse.to_bits());
        assert_eq!(a.success, b.success);
    }

    #[test]
    fn operator_rebuilds_from_record() {
        for mode in [SensingMode::Fourier, SensingMode::Gaussian, SensingMode::Bernoulli] {
            let p = GridPoint {
                k: 2,
                l: 10,
                snr_db: None,
                variant: Variant::Fixed,
            };
            let inst = draw_instance(32, mode, &p, 99).unwrap();
            let rebuilt = operator_for(&inst.measurements).unwrap();
            let x = inst.signal.as_slice();
            use cpr_core::LinearOperator;
            assert_eq!(rebuilt.forward(x), inst.operator.forward(x));
        }
    }

    #[test]
    fn sort_key_orders_snr() {
        let at = |snr| GridPoint {
            k: 1,
            l: 1,
            snr_db: snr,
            variant: Variant::Random,
        };
        assert!(at(Some(-5.0)).sort_key() < at(Some(3.0)).sort_key());
        assert!(at(Some(20.0)).sort_key() < at(Some(100.0)).sort_key());
        assert!(at(Some(100.0)).sort_key() < at(None).sort_key());
    }
}
