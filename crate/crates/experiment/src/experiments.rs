//! The three Monte Carlo experiments and their aggregate tables.
//!
//! Trials run on a rayon pool; every result set is sorted by
//! `(grid point, trial)` before aggregation, so tables do not depend on
//! scheduling.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Variant};
use crate::trial::{run_trial, GridPoint, TrialContext, TrialRecord, TrialStatus};
use crate::RunError;

pub fn context(cfg: &ExperimentConfig) -> TrialContext {
    TrialContext {
        n: cfg.n,
        mode: cfg.mode,
        threshold: cfg.threshold,
        master_seed: cfg.seed,
        options: cfg.solver_options(),
    }
}

/// Runs `trials` trials at each point, in parallel, sorted on return.
pub fn run_points(ctx: &TrialContext, points: &[GridPoint], trials: usize) -> Result<Vec<TrialRecord>, RunError> {
    let work: Vec<(GridPoint, usize)> = points
        .iter()
        .flat_map(|p| (0..trials).map(move |t| (*p, t)))
        .collect();
    let mut records = work
        .par_iter()
        .map(|(p, t)| run_trial(ctx, p, *t))
        .collect::<Result<Vec<_>, _>>()?;
    sort_records(&mut records);
    Ok(records)
}

pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        a.point
            .sort_key()
            .cmp(&b.point.sort_key())
            .then(a.trial.cmp(&b.trial))
    });
}

/// Cartesian product of the configured grids, in sort order.
pub fn grid(cfg: &ExperimentConfig, ls: &[usize]) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &k in &cfg.k {
        for &l in ls {
            for &snr_db in &cfg.snr_db {
                for &variant in &cfg.variants {
                    out.push(GridPoint { k, l, snr_db, variant });
                }
            }
        }
    }
    out.sort_by_key(GridPoint::sort_key);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: GridPoint,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_mse: f64,
    /// Standard error of the mean MSE.
    pub se_mse: f64,
    pub median_mse: f64,
    pub not_converged: usize,
    pub first_entry_vanished: usize,
}

impl PointSummary {
    pub fn mean_mse_db(&self) -> f64 {
        10.0 * self.mean_mse.log10()
    }

    pub fn median_mse_db(&self) -> f64 {
        10.0 * self.median_mse.log10()
    }
}

/// Aggregates sorted records, one summary per grid point.
pub fn summarize(records: &[TrialRecord]) -> Vec<PointSummary> {
    let mut groups: Vec<(GridPoint, Vec<&TrialRecord>)> = Vec::new();
    for r in records {
        match groups.last_mut() {
            Some((p, g)) if *p == r.point => g.push(r),
            _ => groups.push((r.point, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(point, g)| {
            let n = g.len();
            let successes = g.iter().filter(|r| r.success).count();
            let mean = g.iter().map(|r| r.aligned_mse).sum::<f64>() / n as f64;
            let var = if n > 1 {
                g.iter().map(|r| (r.aligned_mse - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let mut sorted: Vec<f64> = g.iter().map(|r| r.aligned_mse).collect();
            sorted.sort_by(f64::total_cmp);
            let median = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            };
            PointSummary {
                point,
                trials: n,
                successes,
                success_rate: successes as f64 / n as f64,
                mean_mse: mean,
                se_mse: (var / n as f64).sqrt(),
                median_mse: median,
                not_converged: g.iter().filter(|r| r.status == TrialStatus::NotConverged).count(),
                first_entry_vanished: g
                    .iter()
                    .filter(|r| r.status == TrialStatus::FirstEntryVanishes)
                    .count(),
            }
        })
        .collect()
}

pub struct SuccessRateResult {
    pub records: Vec<TrialRecord>,
    pub table: Vec<PointSummary>,
}

pub fn run_success_rate(cfg: &ExperimentConfig) -> Result<SuccessRateResult, RunError> {
    cfg.validate()?;
    let records = run_points(&context(cfg), &grid(cfg, &cfg.l), cfg.trials)?;
    let table = summarize(&records);
    Ok(SuccessRateResult { records, table })
}

/// `4k·log₂(N/k)`, the empirical measurement-count relation.
pub fn predicted_measurements(n: usize, k: usize) -> f64 {
    4.0 * k as f64 * (n as f64 / k as f64).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub k: usize,
    pub snr_db: Option<f64>,
    pub variant: Variant,
    pub target: f64,
    /// Smallest grid `L` reaching the target, `None` when unreachable.
    pub min_l: Option<usize>,
    /// Success rate measured at `min_l`.
    pub rate: Option<f64>,
    pub predicted_m: f64,
}

impl TransitionRow {
    pub fn min_m(&self) -> Option<usize> {
        self.min_l.map(|l| 4 * l)
    }

    /// `(M − predicted) / predicted`.
    pub fn relative_deviation(&self) -> Option<f64> {
        self.min_m().map(|m| (m as f64 - self.predicted_m) / self.predicted_m)
    }
}

pub struct PhaseTransitionResult {
    pub records: Vec<TrialRecord>,
    /// Every evaluated grid point.
    pub rates: Vec<PointSummary>,
    pub table: Vec<TransitionRow>,
}

impl PhaseTransitionResult {
    pub fn all_reached(&self) -> bool {
        self.table.iter().all(|r| r.min_l.is_some())
    }
}

/// Bisection over the sorted `L` grid for the smallest `L` whose rate meets
/// `target`, assuming the rate is nondecreasing in `L`. Rates are cached in
/// `cache` and reused across targets.
fn search(
    ctx: &TrialContext,
    base: GridPoint,
    ls: &[usize],
    trials: usize,
    target: f64,
    cache: &mut BTreeMap<usize, Vec<TrialRecord>>,
) -> Result<Option<usize>, RunError> {
    let mut rate_at = |i: usize| -> Result<f64, RunError> {
        let l = ls[i];
        if let Entry::Vacant(e) = cache.entry(l) {
            e.insert(run_points(ctx, &[GridPoint { l, ..base }], trials)?);
        }
        let recs = &cache[&l];
        Ok(recs.iter().filter(|r| r.success).count() as f64 / recs.len() as f64)
    };
    let last = ls.len() - 1;
    if rate_at(last)? < target {
        return Ok(None);
    }
    // Invariant: rate(ls[hi]) >= target, and every index <= lo fails (lo = -1
    // is the virtual failing point below the grid).
    let (mut lo, mut hi) = (-1i64, last as i64);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if rate_at(mid as usize)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(ls[hi as usize]))
}

pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<PhaseTransitionResult, RunError> {
    cfg.validate()?;
    let ctx = context(cfg);
    let mut bases = grid(cfg, &cfg.l[..1]);
    bases.dedup_by_key(|p| (p.k, p.snr_db.map(f64::to_bits), p.variant));
    let mut targets = cfg.targets.clone();
    targets.sort_by(f64::total_cmp);

    let per_base = bases
        .par_iter()
        .map(|base| {
            let mut cache = BTreeMap::new();
            let mut rows = Vec::new();
            for &target in &targets {
                let min_l = search(&ctx, *base, &cfg.l, cfg.trials, target, &mut cache)?;
                let rate = min_l.map(|l| {
                    let recs = &cache[&l];
                    recs.iter().filter(|r| r.success).count() as f64 / recs.len() as f64
                });
                rows.push(TransitionRow {
                    k: base.k,
                    snr_db: base.snr_db,
                    variant: base.variant,
                    target,
                    min_l,
                    rate,
                    predicted_m: predicted_measurements(cfg.n, base.k),
                });
            }
            Ok((rows, cache.into_values().flatten().collect::<Vec<_>>()))
        })
        .collect::<Result<Vec<_>, RunError>>()?;

    let mut table = Vec::new();
    let mut records = Vec::new();
    for (rows, recs) in per_base {
        table.extend(rows);
        records.extend(recs);
    }
    sort_records(&mut records);
    let rates = summarize(&records);
    Ok(PhaseTransitionResult { records, rates, table })
}

pub struct NoiseSweepResult {
    pub records: Vec<TrialRecord>,
    pub table: Vec<PointSummary>,
}

/// Least-squares slope of mean MSE (dB) against SNR (dB) for one variant,
/// restricted to SNR values in `[lo, hi]`. `None` with fewer than two points.
pub fn mse_slope(table: &[PointSummary], variant: Variant, lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = table
        .iter()
        .filter(|s| s.point.variant == variant)
        .filter_map(|s| s.point.snr_db.map(|snr| (snr, s.mean_mse_db())))
        .filter(|(snr, _)| (lo..=hi).contains(snr))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<NoiseSweepResult, RunError> {
    cfg.validate()?;
    let records = run_points(&context(cfg), &grid(cfg, &cfg.l), cfg.trials)?;
    let table = summarize(&records);
    Ok(NoiseSweepResult { records, table })
}

/// Any of the three experiments, dispatched on `cfg.experiment`.
pub enum Outcome {
    SuccessRate(SuccessRateResult),
    PhaseTransition(PhaseTransitionResult),
    NoiseSweep(NoiseSweepResult),
}

impl Outcome {
    pub fn records(&self) -> &[TrialRecord] {
        match self {
            Outcome::SuccessRate(r) => &r.records,
            Outcome::PhaseTransition(r) => &r.records,
            Outcome::NoiseSweep(r) => &r.records,
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let go = || match cfg.experiment {
        Experiment::SuccessRate => run_success_rate(cfg).map(Outcome::SuccessRate),
        Experiment::PhaseTransition => run_phase_transition(cfg).map(Outcome::PhaseTransition),
        Experiment::NoiseSweep => run_noise_sweep(cfg).map(Outcome::NoiseSweep),
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RunError::Io(std::io::Error::other(e)))?
            .install(go),
        None => go(),
    }
}
