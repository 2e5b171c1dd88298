//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::Instant;

use cpr_core::measurement::{mask_fields, mask_lift, measurement_vector};
use cpr_core::signal::complex_gaussian;
use cpr_core::{
    align_phase, build_masks, measure, measure_vectors, random_sparse_signal, recover, recover_phases, solve_bp,
    Complex64, ComplexSignal, FirstEntry, L1Problem, LinearOperator, MaskConstants, PipelineOptions,
    RetrievalOptions, SamplingSet, SensingOperator, SolverOptions,
};
use cpr_experiment::config::{Experiment, ExperimentConfig, Variant};
use cpr_experiment::experiments::{mse_slope, predicted_measurements, run_noise_sweep, run_phase_transition, run_success_rate};
use cpr_experiment::output::{summary_table, trials_table};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
}

fn nrm(a: &[Complex64]) -> f64 {
    a.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative error after the best unimodular rotation, `min_c ‖a − c b‖/‖a‖`,
/// computed independently of the library's alignment.
fn phase_free_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(p, q)| p * q.conj()).sum();
    let rot = if ip.norm() > 0.0 { ip / ip.norm() } else { c(1.0, 0.0) };
    dist(a, &b.iter().map(|q| q * rot).collect::<Vec<_>>()) / nrm(a)
}

fn stage1_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (i, l) in [1usize, 8, 64, 511].into_iter().cycle().take(500).enumerate() {
        let mut y: Vec<Complex64> = (0..=l).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        if y[0].norm() < 0.1 {
            y[0] = Complex64::from_polar(0.1 + rng.random::<f64>(), y[0].arg());
        }
        let y = ComplexSignal::new(y).unwrap();
        let r = recover_phases(&measure_vectors(&y).unwrap(), &RetrievalOptions::default()).unwrap();
        worst = worst.max(phase_free_error(y.as_slice(), r.y_tilde.as_slice()));
        count = i + 1;
    }
    Verdict {
        pass: worst < 1e-10,
        detail: format!("{count} vectors, L in {{1, 8, 64, 511}}, worst relative error {worst:.2e} (< 1e-10)"),
    }
}

fn dense_columns(op: &dyn LinearOperator) -> DMatrix<Complex64> {
    let (m, n) = (op.rows(), op.cols());
    let mut a = DMatrix::zeros(m, n);
    let mut e = vec![c(0.0, 0.0); n];
    for j in 0..n {
        e[j] = c(1.0, 0.0);
        for (i, v) in op.forward(&e).into_iter().enumerate() {
            a[(i, j)] = v;
        }
        e[j] = c(0.0, 0.0);
    }
    a
}

/// Exhaustive minimum-ℓ₀ search with a least-squares fit per support.
/// Returns the solution when exactly one minimal support fits.
fn l0_oracle(a: &DMatrix<Complex64>, y: &[Complex64], max_k: usize) -> Option<Vec<Complex64>> {
    let n = a.ncols();
    let yv = DVector::from_column_slice(y);
    let tol = 1e-10 * yv.norm();
    let mut supports: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_k {
        supports = supports
            .iter()
            .flat_map(|s| {
                let start = s.last().map_or(0, |&v| v + 1);
                (start..n).map(move |j| {
                    let mut t = s.clone();
                    t.push(j);
                    t
                })
            })
            .collect();
        let mut fits = Vec::new();
        for s in &supports {
            let sub = a.select_columns(s);
            let svd = sub.clone().svd(true, true);
            if svd.rank(1e-10 * svd.singular_values[0]) < s.len() {
                continue;
            }
            let coef = svd.solve(&yv, 1e-12).unwrap();
            if (&sub * &coef - &yv).norm() <= tol {
                fits.push((s.clone(), coef));
            }
        }
        match fits.len() {
            0 => continue,
            1 => {
                let (s, coef) = &fits[0];
                let mut x = vec![c(0.0, 0.0); n];
                for (&i, v) in s.iter().zip(coef.iter()) {
                    x[i] = *v;
                }
                return Some(x);
            }
            _ => return None,
        }
    }
    None
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut compared, mut matched, mut skipped) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for t in 0..150 {
        let n = [8, 12, 16][t % 3];
        let k = 1 + t % 2;
        let rows = rng.random_range(4 * k..=n.min(4 * k + 4));
        let op = SensingOperator::fourier(n, SamplingSet::random(n, rows, &mut rng).unwrap()).unwrap();
        let mut x = vec![c(0.0, 0.0); n];
        for i in rand::seq::index::sample(&mut rng, n, k) {
            x[i] = complex_gaussian(&mut rng, 1.0);
        }
        let y = op.forward(&x);
        let Some(oracle) = l0_oracle(&dense_columns(&op), &y, k) else {
            skipped += 1;
            continue;
        };
        let rhs = ComplexSignal::new(y).unwrap();
        let r = solve_bp(&L1Problem::new(&op, &rhs, 0.0).unwrap(), &SolverOptions::default()).unwrap();
        if !r.converged {
            skipped += 1;
            continue;
        }
        compared += 1;
        let d = dist(r.solution.as_slice(), &oracle);
        worst = worst.max(d);
        if d <= 1e-6 {
            matched += 1;
        }
    }
    Verdict {
        pass: compared >= 100 && matched == compared,
        detail: format!(
            "{matched}/{compared} unique-oracle instances match (N <= 16, k <= 2; {skipped} skipped), worst distance {worst:.2e} (<= 1e-6)"
        ),
    }
}

fn desk(experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig {
        n: 512,
        trials: 200,
        seed: 2015,
        ..ExperimentConfig::defaults(experiment)
    }
}

fn operating_point() -> Verdict {
    let cfg = ExperimentConfig {
        k: vec![12],
        l: vec![64],
        ..desk(Experiment::SuccessRate)
    };
    let r = run_success_rate(&cfg).unwrap();
    let s = &r.table[0];
    Verdict {
        pass: s.success_rate >= 0.95,
        detail: format!(
            "N=512, k=12, M=256: {}/{} successes, rate {:.3} (>= 0.95)",
            s.successes, s.trials, s.success_rate
        ),
    }
}

fn phase_transition_shape() -> Verdict {
    let cfg = ExperimentConfig {
        k: vec![5, 10, 20],
        targets: vec![0.95],
        ..desk(Experiment::PhaseTransition)
    };
    let r = run_phase_transition(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for row in &r.table {
        let dev = row.relative_deviation();
        pass &= dev.is_some_and(|d| d.abs() <= 0.25);
        parts.push(format!(
            "k={}: M={} vs {:.1} ({})",
            row.k,
            row.min_m().map_or("not reached".into(), |m| m.to_string()),
            predicted_measurements(cfg.n, row.k),
            dev.map_or("n/a".into(), |d| format!("{:+.1}%", 100.0 * d))
        ));
    }
    Verdict {
        pass,
        detail: format!("95% success, 200 trials/point: {} (within +-25%)", parts.join(", ")),
    }
}

fn noise_stability() -> Verdict {
    let cfg = ExperimentConfig {
        k: vec![12],
        l: vec![64],
        snr_db: (2..=6).map(|d| Some(10.0 * d as f64)).collect(),
        variants: vec![Variant::Fixed, Variant::Random],
        ..desk(Experiment::NoiseSweep)
    };
    let r = run_noise_sweep(&cfg).unwrap();
    let fixed = mse_slope(&r.table, Variant::Fixed, 20.0, 60.0).unwrap();
    let random = mse_slope(&r.table, Variant::Random, 20.0, 60.0).unwrap();
    let mut ordered = true;
    for f in r.table.iter().filter(|s| s.point.variant == Variant::Fixed) {
        let g = r
            .table
            .iter()
            .find(|s| s.point.variant == Variant::Random && s.point.snr_db == f.point.snr_db)
            .unwrap();
        let se = (f.se_mse.powi(2) + g.se_mse.powi(2)).sqrt();
        ordered &= f.mean_mse <= g.mean_mse + se;
    }
    Verdict {
        pass: (-1.2..=-0.8).contains(&fixed) && ordered,
        detail: format!(
            "slope of mean MSE(dB) vs SNR over 20-60 dB, fixed |x[1]|: {fixed:.3} (in [-1.2, -0.8]); fixed <= random + 1 SE at every point: {ordered}; random-first-entry slope {random:.3} reported only (heavy-tailed mean)"
        ),
    }
}

fn structural_identities() -> Verdict {
    let k = MaskConstants::new();
    let unit = (k.alpha * k.alpha + k.beta.norm_sqr() - 1.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut energy, mut paths): (f64, f64) = (0.0, 0.0);
    for t in 0..100 {
        let n = 8 + t % 57;
        let l = rng.random_range(1..n);
        let x = ComplexSignal::new((0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).unwrap();
        let set = SamplingSet::random(n, l, &mut rng).unwrap();
        let y = mask_lift(&x, &set).unwrap();
        let b = measure_vectors(&y).unwrap();
        for j in 1..=l {
            let total: f64 = (1..=4).map(|s| b.get(s, j)).sum();
            let expect = 2.0 * (y[0].norm_sqr() + y[j].norm_sqr());
            energy = energy.max((total - expect).abs() / expect.max(1.0));
        }
        let fields = mask_fields(&x, &build_masks(n).unwrap(), &set).unwrap();
        for s in 1..=4 {
            for j in 1..=l {
                let psi = measurement_vector(s, j, l + 1).unwrap();
                let ip: Complex64 = y.as_slice().iter().zip(psi.as_slice()).map(|(p, q)| p * q.conj()).sum();
                paths = paths.max((fields[(s - 1) * l + j - 1].norm_sqr() - ip.norm_sqr()).abs());
            }
        }
    }
    Verdict {
        pass: unit <= 1e-15 && energy <= 1e-12 && paths <= 1e-10,
        detail: format!(
            "| |a|^2+|b|^2-1 | = {unit:.1e} (<= 1e-15); energy identity {energy:.1e} (<= 1e-12); mask vs vector path {paths:.1e} (<= 1e-10) over 100 instances"
        ),
    }
}

fn global_phase_quotient() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 128;
    let (mut meas, mut mse_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let x = random_sparse_signal(n, 5, &mut rng, FirstEntry::Gaussian).unwrap().into_signal();
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let turned = x.scaled(Complex64::from_polar(1.0, theta));
        let op = SensingOperator::fourier(n, SamplingSet::random(n, 32, &mut rng).unwrap()).unwrap();
        let b1 = measure(&x, &op, &mut ChaCha8Rng::seed_from_u64(0), 0.0).unwrap();
        let b2 = measure(&turned, &op, &mut ChaCha8Rng::seed_from_u64(0), 0.0).unwrap();
        for (p, q) in b1.values().iter().zip(b2.values()) {
            meas = meas.max((p - q).abs() / p.abs().max(1.0));
        }
        let opts = PipelineOptions::default();
        let m1 = align_phase(&x, &recover(&b1, &op, &opts).unwrap().estimate).unwrap().1;
        let m2 = align_phase(&turned, &recover(&b2, &op, &opts).unwrap().estimate).unwrap().1;
        mse_gap = mse_gap.max((m1 - m2).abs());
    }
    Verdict {
        pass: meas <= 1e-12 && mse_gap <= 1e-10,
        detail: format!(
            "100 (x, theta): measurement difference {meas:.1e} (rounding only), aligned-MSE difference {mse_gap:.1e} (<= 1e-10)"
        ),
    }
}

fn determinism() -> Verdict {
    let small = |experiment: Experiment, threads: usize| ExperimentConfig {
        n: 64,
        k: vec![2, 4],
        l: vec![8, 12, 16, 24],
        snr_db: vec![None, Some(30.0)],
        variants: vec![Variant::Fixed, Variant::Random],
        trials: 12,
        threads: Some(threads),
        seed: 11,
        ..ExperimentConfig::defaults(experiment)
    };
    let csv = |cfg: &ExperimentConfig| {
        let outcome = cpr_experiment::run(cfg).unwrap();
        let mut bytes = trials_table(outcome.records()).to_csv().unwrap();
        bytes.extend(summary_table(&outcome).to_csv().unwrap());
        bytes
    };
    let mut identical = 0;
    let kinds = [Experiment::SuccessRate, Experiment::PhaseTransition, Experiment::NoiseSweep];
    for e in kinds {
        if csv(&small(e, 1)) == csv(&small(e, 3)) && csv(&small(e, 1)) == csv(&small(e, 1)) {
            identical += 1;
        }
    }
    Verdict {
        pass: identical == kinds.len(),
        detail: format!(
            "{identical}/{} experiments produce byte-identical trial and summary CSV across reruns and thread counts",
            kinds.len()
        ),
    }
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    // `cargo test` passes harness flags; a name filter other than ours skips
    // the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let criteria: [Criterion; 8] = [
        ("stage-1 exactness", stage1_exactness),
        ("BP oracle equivalence", oracle_equivalence),
        ("noiseless operating point", operating_point),
        ("phase-transition shape", phase_transition_shape),
        ("noise stability", noise_stability),
        ("structural identities", structural_identities),
        ("global-phase quotient", global_phase_quotient),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
