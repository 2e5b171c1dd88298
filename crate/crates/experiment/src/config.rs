//! Experiment configuration: defaults per experiment, an optional TOML file,
//! and command-line overrides, in that order of precedence.

use std::fmt;
use std::path::{Path, PathBuf};

use cpr_core::{EpsilonMode, SensingMode, SolverOptions};
use serde::Deserialize;

use crate::ConfigError;

/// Trial counts of the original study, restored by `--full-scale`.
pub const FULL_SCALE_TRIALS: usize = 2000;
pub const FULL_SCALE_NOISE_TRIALS: usize = 1000;
pub const DESK_TRIALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    SuccessRate,
    PhaseTransition,
    NoiseSweep,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::SuccessRate => "success-rate",
            Experiment::PhaseTransition => "phase-transition",
            Experiment::NoiseSweep => "noise-sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the first signal entry is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    /// Complex Gaussian like the other nonzero entries.
    Random,
    /// Unit modulus with a uniform phase.
    Fixed,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Random => "random",
            Variant::Fixed => "fixed",
        }
    }

    pub fn code(self) -> u64 {
        match self {
            Variant::Random => 0,
            Variant::Fixed => 1,
        }
    }

    pub fn first_entry(self) -> cpr_core::FirstEntry {
        match self {
            Variant::Random => cpr_core::FirstEntry::Gaussian,
            Variant::Fixed => cpr_core::FirstEntry::UnitModulus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSetting {
    Fixed(f64),
    Estimated { confidence: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub k: Vec<usize>,
    /// Sampled frequencies per mask; the measurement count is `M = 4L`.
    pub l: Vec<usize>,
    pub trials: usize,
    /// `None` is the noiseless point.
    pub snr_db: Vec<Option<f64>>,
    pub mode: SensingMode,
    pub variants: Vec<Variant>,
    pub threshold: f64,
    pub seed: u64,
    /// Success rates searched for by the phase-transition experiment.
    pub targets: Vec<f64>,
    pub max_applications: usize,
    pub feasibility_tol: f64,
    pub epsilon: EpsilonSetting,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub full_scale: bool,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            n: 512,
            k: vec![12],
            l: vec![64],
            trials: DESK_TRIALS,
            snr_db: vec![None],
            mode: SensingMode::Fourier,
            variants: vec![Variant::Random],
            threshold: cpr_core::pipeline::DEFAULT_SUCCESS_THRESHOLD,
            seed: 2015,
            targets: vec![0.95, 0.99],
            max_applications: SolverOptions::default().max_applications,
            feasibility_tol: SolverOptions::default().feasibility_tol,
            epsilon: EpsilonSetting::Estimated { confidence: 0.95 },
            out: None,
            format: OutputFormat::Csv,
            full_scale: false,
            threads: None,
        };
        match experiment {
            Experiment::SuccessRate => Self {
                k: vec![5, 10, 20, 40],
                l: vec![16, 32, 48, 64, 96, 128],
                ..base
            },
            Experiment::PhaseTransition => Self {
                k: vec![5, 10, 20],
                l: (1..base.n).collect(),
                ..base
            },
            Experiment::NoiseSweep => Self {
                snr_db: (2..=10).map(|d| Some(10.0 * d as f64)).collect(),
                variants: vec![Variant::Fixed, Variant::Random],
                ..base
            },
        }
    }

    pub fn measurements(&self, l: usize) -> usize {
        4 * l
    }

    pub fn solver_options(&self) -> cpr_core::PipelineOptions {
        cpr_core::PipelineOptions {
            solver: SolverOptions {
                max_applications: self.max_applications,
                feasibility_tol: self.feasibility_tol,
                ..Default::default()
            },
            epsilon: match self.epsilon {
                EpsilonSetting::Fixed(e) => EpsilonMode::Fixed(e),
                EpsilonSetting::Estimated { confidence } => EpsilonMode::Estimated { confidence },
            },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.k.is_empty() || self.l.is_empty() || self.snr_db.is_empty() || self.variants.is_empty() {
            return bad("grids must be non-empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(&k) = self.k.iter().find(|&&k| k == 0 || k > self.n) {
            return bad(format!("sparsity {k} outside 1..={}", self.n));
        }
        if let Some(&l) = self.l.iter().find(|&&l| l == 0 || l + 1 > self.n) {
            return bad(format!(
                "L = {l} (M = {}) is infeasible: need 1 <= L and L + 1 <= N = {}",
                4 * l,
                self.n
            ));
        }
        if self.snr_db.iter().flatten().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite (use 'noiseless' for the noiseless point)".into());
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad(format!("threshold must be positive, got {}", self.threshold));
        }
        if self.experiment == Experiment::PhaseTransition
            && (self.targets.is_empty() || self.targets.iter().any(|t| !(*t > 0.0 && *t <= 1.0)))
        {
            return bad("targets must be a non-empty list of rates in (0, 1]".into());
        }
        if self.max_applications == 0 {
            return bad("max-applications must be positive".into());
        }
        if !(self.feasibility_tol >= 0.0 && self.feasibility_tol.is_finite()) {
            return bad("feasibility tolerance must be finite and nonnegative".into());
        }
        match self.epsilon {
            EpsilonSetting::Fixed(e) if !(e >= 0.0 && e.is_finite()) => {
                return bad(format!("fixed epsilon must be finite and nonnegative, got {e}"))
            }
            EpsilonSetting::Estimated { confidence } if !(confidence > 0.0 && confidence < 1.0) => {
                return bad(format!("confidence must lie in (0, 1), got {confidence}"))
            }
            _ => {}
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }
}

/// Parses `a,b,c`, `start:stop` and `start:stop:step` (inclusive) or any
/// comma-separated mix of them.
pub fn parse_usize_grid(text: &str) -> Result<Vec<usize>, ConfigError> {
    let bad = || ConfigError::Invalid(format!("cannot parse grid '{text}'"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let nums = part
            .split(':')
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        match nums[..] {
            [v] => out.push(v),
            [a, b] if a <= b => out.extend(a..=b),
            [a, b, s] if a <= b && s > 0 => out.extend((a..=b).step_by(s)),
            _ => return Err(bad()),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn parse_f64_list(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| ConfigError::Invalid(format!("cannot parse number '{v}' in '{text}'")))
        })
        .collect()
}

/// Accepts `noiseless`/`inf`, numbers and `start:end[:step]` ranges in dB
/// (step defaults to 10), comma-separated.
pub fn parse_snr_grid(text: &str) -> Result<Vec<Option<f64>>, ConfigError> {
    let bad = |part: &str| ConfigError::Invalid(format!("cannot parse SNR '{part}' (number, range or 'noiseless')"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if matches!(part, "noiseless" | "inf") {
            out.push(None);
            continue;
        }
        let nums = part
            .split(':')
            .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(part))?;
        let (a, b, step) = match nums[..] {
            [v] => (v, v, 1.0),
            [a, b] => (a, b, 10.0),
            [a, b, s] => (a, b, s),
            _ => return Err(bad(part)),
        };
        if a > b || step <= 0.0 {
            return Err(bad(part));
        }
        // Integer stepping avoids accumulated rounding in the grid values.
        let count = ((b - a) / step + 1e-9).floor() as usize;
        out.extend((0..=count).map(|i| Some(a + i as f64 * step)));
    }
    if out.is_empty() {
        return Err(ConfigError::Invalid(format!("empty SNR grid '{text}'")));
    }
    Ok(out)
}

pub fn parse_mode(text: &str) -> Result<SensingMode, ConfigError> {
    text.parse()
        .map_err(|_| ConfigError::Invalid(format!("unknown mode '{text}' (fourier, gaussian or bernoulli)")))
}

pub fn parse_variants(text: &str) -> Result<Vec<Variant>, ConfigError> {
    match text {
        "random" => Ok(vec![Variant::Random]),
        "fixed" => Ok(vec![Variant::Fixed]),
        "both" => Ok(vec![Variant::Fixed, Variant::Random]),
        _ => Err(ConfigError::Invalid(format!("unknown variant set '{text}' (random, fixed or both)"))),
    }
}

pub fn parse_format(text: &str) -> Result<OutputFormat, ConfigError> {
    match text {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        _ => Err(ConfigError::Invalid(format!("unknown format '{text}' (csv or json)"))),
    }
}

pub fn parse_epsilon(text: &str, confidence: Option<f64>) -> Result<EpsilonSetting, ConfigError> {
    match text {
        "estimated" => Ok(EpsilonSetting::Estimated {
            confidence: confidence.unwrap_or(0.95),
        }),
        _ => text
            .parse::<f64>()
            .map(EpsilonSetting::Fixed)
            .map_err(|_| ConfigError::Invalid(format!("epsilon must be 'estimated' or a number, got '{text}'"))),
    }
}

/// A TOML grid entry: a number, an array of numbers, or grid text.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

impl GridValue {
    fn usizes(&self) -> Result<Vec<usize>, ConfigError> {
        let whole = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(ConfigError::Invalid(format!("expected a nonnegative integer, got {v}")))
            }
        };
        match self {
            GridValue::One(v) => Ok(vec![whole(*v)?]),
            GridValue::Many(vs) => vs.iter().map(|&v| whole(v)).collect(),
            GridValue::Text(t) => parse_usize_grid(t),
        }
    }

    fn snr(&self) -> Result<Vec<Option<f64>>, ConfigError> {
        match self {
            GridValue::One(v) => Ok(vec![Some(*v)]),
            GridValue::Many(vs) => Ok(vs.iter().map(|&v| Some(v)).collect()),
            GridValue::Text(t) => parse_snr_grid(t),
        }
    }

    fn floats(&self) -> Result<Vec<f64>, ConfigError> {
        match self {
            GridValue::One(v) => Ok(vec![*v]),
            GridValue::Many(vs) => Ok(vs.clone()),
            GridValue::Text(t) => parse_f64_list(t),
        }
    }
}

/// Every field is optional; present fields override the defaults and are in
/// turn overridden by command-line flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Overrides {
    pub n: Option<usize>,
    pub k: Option<GridValue>,
    pub l: Option<GridValue>,
    pub measurements: Option<GridValue>,
    pub trials: Option<usize>,
    pub snr_db: Option<GridValue>,
    pub mode: Option<String>,
    pub fix_first: Option<bool>,
    pub variants: Option<String>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub targets: Option<GridValue>,
    pub max_applications: Option<usize>,
    pub feasibility_tol: Option<f64>,
    pub epsilon: Option<String>,
    pub confidence: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub full_scale: Option<bool>,
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError::Invalid(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `other` win.
    pub fn merged(self, other: Overrides) -> Overrides {
        Overrides {
            n: other.n.or(self.n),
            k: other.k.or(self.k),
            l: other.l.or(self.l),
            measurements: other.measurements.or(self.measurements),
            trials: other.trials.or(self.trials),
            snr_db: other.snr_db.or(self.snr_db),
            mode: other.mode.or(self.mode),
            fix_first: other.fix_first.or(self.fix_first),
            variants: other.variants.or(self.variants),
            threshold: other.threshold.or(self.threshold),
            seed: other.seed.or(self.seed),
            targets: other.targets.or(self.targets),
            max_applications: other.max_applications.or(self.max_applications),
            feasibility_tol: other.feasibility_tol.or(self.feasibility_tol),
            epsilon: other.epsilon.or(self.epsilon),
            confidence: other.confidence.or(self.confidence),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
            full_scale: other.full_scale.or(self.full_scale),
            threads: other.threads.or(self.threads),
        }
    }

    pub fn apply(self, experiment: Experiment) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::defaults(experiment);
        if let Some(n) = self.n {
            cfg.n = n;
            if experiment == Experiment::PhaseTransition && self.l.is_none() && self.measurements.is_none() {
                cfg.l = (1..n.max(2)).collect();
            }
        }
        if let Some(k) = &self.k {
            cfg.k = k.usizes()?;
        }
        match (&self.l, &self.measurements) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("give either l or measurements, not both".into()));
            }
            (Some(l), None) => cfg.l = l.usizes()?,
            (None, Some(m)) => {
                let ms = m.usizes()?;
                if let Some(bad) = ms.iter().find(|&&m| m % 4 != 0) {
                    return Err(ConfigError::Invalid(format!(
                        "measurement count {bad} is not a multiple of 4 (M = 4L)"
                    )));
                }
                cfg.l = ms.iter().map(|m| m / 4).collect();
            }
            (None, None) => {}
        }
        cfg.l.sort_unstable();
        cfg.l.dedup();
        if let Some(full) = self.full_scale {
            cfg.full_scale = full;
        }
        cfg.trials = match (self.trials, cfg.full_scale) {
            (Some(t), _) => t,
            (None, true) if experiment == Experiment::NoiseSweep => FULL_SCALE_NOISE_TRIALS,
            (None, true) => FULL_SCALE_TRIALS,
            (None, false) => cfg.trials,
        };
        if let Some(s) = &self.snr_db {
            cfg.snr_db = s.snr()?;
        }
        if let Some(m) = &self.mode {
            cfg.mode = parse_mode(m)?;
        }
        match (self.fix_first, &self.variants) {
            (Some(true), Some(v)) if v != "fixed" => {
                return Err(ConfigError::Invalid(format!("fix-first conflicts with variants '{v}'")));
            }
            (_, Some(v)) => cfg.variants = parse_variants(v)?,
            (Some(true), None) => cfg.variants = vec![Variant::Fixed],
            (Some(false), None) => cfg.variants = vec![Variant::Random],
            (None, None) => {}
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = &self.targets {
            cfg.targets = t.floats()?;
        }
        if let Some(m) = self.max_applications {
            cfg.max_applications = m;
        }
        if let Some(f) = self.feasibility_tol {
            cfg.feasibility_tol = f;
        }
        cfg.epsilon = match (&self.epsilon, self.confidence) {
            (Some(e), c) => parse_epsilon(e, c)?,
            (None, Some(c)) => EpsilonSetting::Estimated { confidence: c },
            (None, None) => cfg.epsilon,
        };
        if let Some(o) = self.out {
            cfg.out = Some(o);
        }
        if let Some(f) = &self.format {
            cfg.format = parse_format(f)?;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
