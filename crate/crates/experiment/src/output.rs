//! Output tables.
//!
//! An output directory holds:
//!
//! - `trials.csv`: one row per trial,
//!   `k,m,l,snr_db,first_entry,trial,seed,success,aligned_mse,stage1_residual,solver_iterations,status`;
//! - `summary.csv` (or `summary.json` with `--format json`): the
//!   experiment's aggregate table, schema below;
//! - `rates.csv` (phase transition only): per evaluated point, success-rate
//!   schema;
//! - `summary.dat`: gnuplot data, one index block per series;
//! - `manifest.json`: full configuration, software version, row counts;
//! - `timings.csv`: per-trial wall time in seconds. It is the only file that
//!   differs between identical runs.
//!
//! Summary schemas:
//!
//! - success rate: `k,m,l,snr_db,first_entry,trials,successes,success_rate,mean_mse,not_converged,first_entry_vanished`
//! - phase transition: `k,snr_db,first_entry,target,min_m,min_l,rate,predicted_m,relative_deviation`,
//!   with `min_m = "not reached"` when no grid point meets the target
//! - noise sweep: `snr_db,first_entry,k,m,trials,mean_mse,mean_mse_db,se_mse,median_mse_db,success_rate,first_entry_vanished`
//!
//! Noiseless points print `snr_db` as `noiseless`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{EpsilonSetting, ExperimentConfig, OutputFormat, Variant};
use crate::experiments::{mse_slope, Outcome, PointSummary, TransitionRow};
use crate::trial::TrialRecord;
use crate::RunError;

pub const NOT_REACHED: &str = "not reached";

fn snr_text(snr: Option<f64>) -> String {
    snr.map_or_else(|| "noiseless".to_string(), |s| s.to_string())
}

fn snr_json(snr: Option<f64>) -> Value {
    snr.map_or_else(|| json!("noiseless"), |s| json!(s))
}

/// A table as header plus rows of cells, rendered to CSV or JSON.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<Vec<u8>, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                Value::Null => "NaN".to_string(),
                other => other.to_string(),
            }))?;
        }
        w.into_inner().map_err(|e| RunError::Io(e.into_error()))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(
                        self.header
                            .iter()
                            .zip(row)
                            .map(|(h, v)| (h.to_string(), v.clone()))
                            .collect::<Map<_, _>>(),
                    )
                })
                .collect(),
        )
    }

    pub fn render(&self, format: OutputFormat) -> Result<Vec<u8>, RunError> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => {
                let mut out = serde_json::to_vec_pretty(&self.to_json())?;
                out.push(b'\n');
                Ok(out)
            }
        }
    }
}

pub fn trials_table(records: &[TrialRecord]) -> Table {
    Table {
        header: vec![
            "k",
            "m",
            "l",
            "snr_db",
            "first_entry",
            "trial",
            "seed",
            "success",
            "aligned_mse",
            "stage1_residual",
            "solver_iterations",
            "status",
        ],
        rows: records
            .iter()
            .map(|r| {
                vec![
                    json!(r.point.k),
                    json!(r.point.m()),
                    json!(r.point.l),
                    snr_json(r.point.snr_db),
                    json!(r.point.variant.as_str()),
                    json!(r.trial),
                    json!(r.seed),
                    json!(r.success),
                    json!(r.aligned_mse),
                    json!(r.stage1_residual),
                    json!(r.iterations),
                    json!(r.status.as_str()),
                ]
            })
            .collect(),
    }
}

pub fn timings_table(records: &[TrialRecord]) -> Table {
    Table {
        header: vec!["k", "l", "snr_db", "first_entry", "trial", "wall_time_s"],
        rows: records
            .iter()
            .map(|r| {
                vec![
                    json!(r.point.k),
                    json!(r.point.l),
                    snr_json(r.point.snr_db),
                    json!(r.point.variant.as_str()),
                    json!(r.trial),
                    json!(r.wall_time.as_secs_f64()),
                ]
            })
            .collect(),
    }
}

pub fn success_rate_table(table: &[PointSummary]) -> Table {
    Table {
        header: vec![
            "k",
            "m",
            "l",
            "snr_db",
            "first_entry",
            "trials",
            "successes",
            "success_rate",
            "mean_mse",
            "not_converged",
            "first_entry_vanished",
        ],
        rows: table
            .iter()
            .map(|s| {
                vec![
                    json!(s.point.k),
                    json!(s.point.m()),
                    json!(s.point.l),
                    snr_json(s.point.snr_db),
                    json!(s.point.variant.as_str()),
                    json!(s.trials),
                    json!(s.successes),
                    json!(s.success_rate),
                    json!(s.mean_mse),
                    json!(s.not_converged),
                    json!(s.first_entry_vanished),
                ]
            })
            .collect(),
    }
}

pub fn transition_table(rows: &[TransitionRow]) -> Table {
    Table {
        header: vec![
            "k",
            "snr_db",
            "first_entry",
            "target",
            "min_m",
            "min_l",
            "rate",
            "predicted_m",
            "relative_deviation",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    json!(r.k),
                    snr_json(r.snr_db),
                    json!(r.variant.as_str()),
                    json!(r.target),
                    r.min_m().map_or(json!(NOT_REACHED), |m| json!(m)),
                    r.min_l.map_or(json!(NOT_REACHED), |l| json!(l)),
                    r.rate.map_or(Value::Null, |v| json!(v)),
                    json!(r.predicted_m),
                    r.relative_deviation().map_or(Value::Null, |v| json!(v)),
                ]
            })
            .collect(),
    }
}

pub fn noise_table(table: &[PointSummary]) -> Table {
    Table {
        header: vec![
            "snr_db",
            "first_entry",
            "k",
            "m",
            "trials",
            "mean_mse",
            "mean_mse_db",
            "se_mse",
            "median_mse_db",
            "success_rate",
            "first_entry_vanished",
        ],
        rows: table
            .iter()
            .map(|s| {
                vec![
                    snr_json(s.point.snr_db),
                    json!(s.point.variant.as_str()),
                    json!(s.point.k),
                    json!(s.point.m()),
                    json!(s.trials),
                    json!(s.mean_mse),
                    json!(s.mean_mse_db()),
                    json!(s.se_mse),
                    json!(s.median_mse_db()),
                    json!(s.success_rate),
                    json!(s.first_entry_vanished),
                ]
            })
            .collect(),
    }
}

pub fn summary_table(outcome: &Outcome) -> Table {
    match outcome {
        Outcome::SuccessRate(r) => success_rate_table(&r.table),
        Outcome::PhaseTransition(r) => transition_table(&r.table),
        Outcome::NoiseSweep(r) => noise_table(&r.table),
    }
}

/// gnuplot data: index blocks separated by two blank lines, each preceded
/// by a comment naming the series.
pub fn gnuplot_data(outcome: &Outcome) -> String {
    let mut blocks: Vec<(String, Vec<String>)> = Vec::new();
    let mut push = |title: String, line: String| match blocks.last_mut() {
        Some((t, lines)) if *t == title => lines.push(line),
        _ => blocks.push((title, vec![line])),
    };
    match outcome {
        Outcome::SuccessRate(r) => {
            for s in &r.table {
                let title = format!(
                    "k={} snr_db={} first_entry={}  columns: k/M M success_rate",
                    s.point.k,
                    snr_text(s.point.snr_db),
                    s.point.variant.as_str()
                );
                let ratio = s.point.k as f64 / s.point.m() as f64;
                push(title, format!("{ratio} {} {}", s.point.m(), s.success_rate));
            }
        }
        Outcome::PhaseTransition(r) => {
            let mut rows: Vec<&TransitionRow> = r.table.iter().collect();
            rows.sort_by(|a, b| a.target.total_cmp(&b.target).then(a.k.cmp(&b.k)));
            for row in rows {
                let title = format!(
                    "target={} snr_db={} first_entry={}  columns: k min_M predicted_M",
                    row.target,
                    snr_text(row.snr_db),
                    row.variant.as_str()
                );
                let m = row.min_m().map_or_else(|| "NaN".to_string(), |m| m.to_string());
                push(title, format!("{} {m} {}", row.k, row.predicted_m));
            }
        }
        Outcome::NoiseSweep(r) => {
            let mut rows: Vec<&PointSummary> = r.table.iter().collect();
            rows.sort_by_key(|s| (s.point.variant, s.point.k, s.point.l, s.point.sort_key()));
            for s in rows {
                let Some(snr) = s.point.snr_db else { continue };
                let title = format!(
                    "first_entry={} k={} M={}  columns: snr_db mean_mse_db median_mse_db",
                    s.point.variant.as_str(),
                    s.point.k,
                    s.point.m()
                );
                push(title, format!("{snr} {} {}", s.mean_mse_db(), s.median_mse_db()));
            }
        }
    }
    blocks
        .iter()
        .map(|(t, lines)| format!("# {t}\n{}\n", lines.join("\n")))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn config_json(cfg: &ExperimentConfig) -> Value {
    json!({
        "experiment": cfg.experiment.as_str(),
        "n": cfg.n,
        "k": cfg.k,
        "l": cfg.l,
        "measurements": cfg.l.iter().map(|l| 4 * l).collect::<Vec<_>>(),
        "trials": cfg.trials,
        "snr_db": cfg.snr_db.iter().map(|s| snr_json(*s)).collect::<Vec<_>>(),
        "mode": cfg.mode.as_str(),
        "variants": cfg.variants.iter().map(|v| v.as_str()).collect::<Vec<_>>(),
        "threshold": cfg.threshold,
        "seed": cfg.seed,
        "targets": cfg.targets,
        "max_applications": cfg.max_applications,
        "feasibility_tol": cfg.feasibility_tol,
        "epsilon": match cfg.epsilon {
            EpsilonSetting::Fixed(e) => json!({ "fixed": e }),
            EpsilonSetting::Estimated { confidence } => json!({ "estimated": { "confidence": confidence } }),
        },
        "format": cfg.format.as_str(),
        "full_scale": cfg.full_scale,
    })
}

pub fn manifest(cfg: &ExperimentConfig, outcome: &Outcome, files: &[&str]) -> Value {
    let mut m = json!({
        "software": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "config": config_json(cfg),
        "seed_scheme": "trial seed = splitmix64 fold of (master seed, k, L, SNR bits or u64::MAX when noiseless, variant code, trial index); signal, operator and noise streams use sub-seeds 0, 1, 2 via the same fold; ChaCha8 generators",
        "rows": { "trials": outcome.records().len() },
        "files": files,
    });
    match outcome {
        Outcome::PhaseTransition(r) => {
            m["rows"]["summary"] = json!(r.table.len());
            m["rows"]["rates"] = json!(r.rates.len());
            m["unreached_targets"] = json!(r.table.iter().filter(|t| t.min_l.is_none()).count());
        }
        Outcome::SuccessRate(r) => m["rows"]["summary"] = json!(r.table.len()),
        Outcome::NoiseSweep(r) => {
            m["rows"]["summary"] = json!(r.table.len());
            let mut fits = Map::new();
            for v in [Variant::Fixed, Variant::Random] {
                if let Some(s) = mse_slope(&r.table, v, 20.0, 60.0) {
                    fits.insert(v.as_str().to_string(), json!(s));
                }
            }
            m["mse_slope_20_60_db"] = Value::Object(fits);
        }
    }
    m
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path)?;
    f.write_all(bytes)?;
    Ok(path)
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir)?;
    let summary_name = match cfg.format {
        OutputFormat::Csv => "summary.csv",
        OutputFormat::Json => "summary.json",
    };
    let mut names = vec!["trials.csv", summary_name, "summary.dat", "timings.csv"];
    let mut paths = vec![
        write_file(dir, "trials.csv", &trials_table(outcome.records()).to_csv()?)?,
        write_file(dir, summary_name, &summary_table(outcome).render(cfg.format)?)?,
        write_file(dir, "summary.dat", gnuplot_data(outcome).as_bytes())?,
        write_file(dir, "timings.csv", &timings_table(outcome.records()).to_csv()?)?,
    ];
    if let Outcome::PhaseTransition(r) = outcome {
        names.push("rates.csv");
        paths.push(write_file(dir, "rates.csv", &success_rate_table(&r.rates).to_csv()?)?);
    }
    names.push("manifest.json");
    let mut m = serde_json::to_vec_pretty(&manifest(cfg, outcome, &names))?;
    m.push(b'\n');
    paths.push(write_file(dir, "manifest.json", &m)?);
    Ok(paths)
}
