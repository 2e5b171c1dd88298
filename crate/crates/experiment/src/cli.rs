//! `cpr` command line.
//!
//! Exit codes: 0 success, 1 invalid configuration or failed run, 2 the
//! experiment ran but a target success rate was not reached.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cpr_core::format::{from_binary, from_text, to_binary, to_text};
use cpr_core::{align_phase, recover, Complex64, ComplexSignal, IntensityMeasurements};

use crate::config::{parse_epsilon, parse_mode, parse_snr_grid, GridValue, Overrides, Variant};
use crate::experiments::{mse_slope, Outcome};
use crate::output::{summary_table, write_outputs};
use crate::trial::{draw_instance, operator_for, GridPoint};
use crate::{ConfigError, Experiment, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_UNREACHED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cpr", version, about = "Compressive phase retrieval with coded masks: experiments and recovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Empirical success rate over a (k, M) grid.
    SuccessRate(RunArgs),
    /// Smallest M reaching each target success rate, per k.
    PhaseTransition(RunArgs),
    /// Mean normalized MSE against SNR.
    NoiseSweep(RunArgs),
    /// Recover a signal from a measurement file.
    Recover(RecoverArgs),
    /// Draw one instance and write its measurement file.
    Simulate(SimulateArgs),
}

/// Grids accept `a,b,c`, `start:stop` and `start:stop:step`.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML file with any of the keys below (kebab-case); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Signal dimension N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sparsity grid.
    #[arg(long)]
    pub k: Option<String>,
    /// Measurement-count grid (multiples of 4, M = 4L).
    #[arg(long, conflicts_with = "l")]
    pub measurements: Option<String>,
    /// Sampled-frequency grid L.
    #[arg(long)]
    pub l: Option<String>,
    /// Trials per grid point.
    #[arg(long)]
    pub trials: Option<usize>,
    /// SNR grid in dB, or `noiseless`.
    #[arg(long)]
    pub snr_db: Option<String>,
    /// fourier, gaussian or bernoulli.
    #[arg(long)]
    pub mode: Option<String>,
    /// Draw |x[1]| = 1 instead of a Gaussian first entry.
    #[arg(long)]
    pub fix_first: bool,
    /// First-entry variants to run: random, fixed or both.
    #[arg(long)]
    pub variants: Option<String>,
    /// Success threshold on the aligned MSE.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target success rates (phase transition).
    #[arg(long)]
    pub targets: Option<String>,
    /// Solver budget of operator applications.
    #[arg(long)]
    pub max_applications: Option<usize>,
    /// Solver feasibility tolerance relative to the data norm.
    #[arg(long)]
    pub feasibility_tol: Option<f64>,
    /// Residual budget: `estimated` or a fixed value.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Confidence for the estimated residual budget.
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Output directory; the summary goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary format: csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Use the original trial counts (2000, or 1000 for the noise sweep).
    #[arg(long)]
    pub full_scale: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        let text = |s: &Option<String>| s.clone().map(GridValue::Text);
        Overrides {
            n: self.n,
            k: text(&self.k),
            l: text(&self.l),
            measurements: text(&self.measurements),
            trials: self.trials,
            snr_db: text(&self.snr_db),
            mode: self.mode.clone(),
            fix_first: self.fix_first.then_some(true),
            variants: self.variants.clone(),
            threshold: self.threshold,
            seed: self.seed,
            targets: text(&self.targets),
            max_applications: self.max_applications,
            feasibility_tol: self.feasibility_tol,
            epsilon: self.epsilon.clone(),
            confidence: self.confidence,
            out: self.out.clone(),
            format: self.format.clone(),
            full_scale: self.full_scale.then_some(true),
            threads: self.threads,
        }
    }

    pub fn resolve(&self, experiment: Experiment) -> Result<crate::ExperimentConfig, ConfigError> {
        let file = match &self.config {
            Some(p) => Overrides::from_file(p)?,
            None => Overrides::default(),
        };
        file.merged(self.overrides()).apply(experiment)
    }
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Measurement file, text or binary (detected from its first bytes).
    pub input: PathBuf,
    /// Ground truth as `index,re,im` CSV; reports the aligned MSE.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Where to write the estimate as `index,re,im` CSV (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Success threshold on the aligned MSE (with --truth).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Solver budget of operator applications.
    #[arg(long)]
    pub max_applications: Option<usize>,
    /// Solver feasibility tolerance relative to the data norm.
    #[arg(long)]
    pub feasibility_tol: Option<f64>,
    /// `estimated` or a fixed value.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Confidence for the estimated residual budget.
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Fourier mode: add the recovered first entry as a constraint.
    #[arg(long)]
    pub known_first_entry: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long, default_value_t = 12)]
    pub k: usize,
    /// Sampled frequencies L (M = 4L).
    #[arg(long, default_value_t = 64)]
    pub l: usize,
    /// SNR in dB, or `noiseless`.
    #[arg(long, default_value = "noiseless")]
    pub snr_db: String,
    /// fourier, gaussian or bernoulli.
    #[arg(long, default_value = "fourier")]
    pub mode: String,
    /// Draw |x[1]| = 1.
    #[arg(long)]
    pub fix_first: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measurement file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the drawn signal as `index,re,im` CSV.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
    /// Write the binary record instead of text.
    #[arg(long)]
    pub binary: bool,
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

pub fn execute(command: Command) -> Result<i32, RunError> {
    match command {
        Command::SuccessRate(a) => run_experiment(&a, Experiment::SuccessRate),
        Command::PhaseTransition(a) => run_experiment(&a, Experiment::PhaseTransition),
        Command::NoiseSweep(a) => run_experiment(&a, Experiment::NoiseSweep),
        Command::Recover(a) => run_recover(&a),
        Command::Simulate(a) => run_simulate(&a),
    }
}

fn run_experiment(args: &RunArgs, experiment: Experiment) -> Result<i32, RunError> {
    let cfg = args.resolve(experiment)?;
    let start = std::time::Instant::now();
    let outcome = crate::run(&cfg)?;
    eprintln!(
        "{experiment}: {} trials in {:.1} s",
        outcome.records().len(),
        start.elapsed().as_secs_f64()
    );
    match &cfg.out {
        Some(dir) => {
            for p in write_outputs(&cfg, &outcome, dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => std::io::stdout().write_all(&summary_table(&outcome).render(cfg.format)?)?,
    }
    match &outcome {
        Outcome::PhaseTransition(r) if !r.all_reached() => {
            eprintln!("some target rates were not reached within the measurement grid");
            Ok(EXIT_UNREACHED)
        }
        Outcome::NoiseSweep(r) => {
            for v in [Variant::Fixed, Variant::Random] {
                if let Some(s) = mse_slope(&r.table, v, 20.0, 60.0) {
                    eprintln!("MSE slope over 20-60 dB ({} first entry): {s:.3}", v.as_str());
                }
            }
            Ok(EXIT_OK)
        }
        _ => Ok(EXIT_OK),
    }
}

pub fn read_measurements(path: &Path) -> Result<IntensityMeasurements, RunError> {
    let bytes = std::fs::read(path)?;
    let parsed = if bytes.starts_with(b"CPRM") {
        from_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| cpr_core::CprError::Format("measurement file is neither binary nor UTF-8 text".into()))?;
        from_text(&text)
    };
    Ok(parsed?)
}

pub fn signal_csv(x: &ComplexSignal) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "re", "im"])?;
    for (i, v) in x.as_slice().iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

pub fn read_signal_csv(path: &Path) -> Result<ComplexSignal, RunError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| -> Result<&str, RunError> {
            row.get(i)
                .ok_or_else(|| ConfigError::Invalid(format!("{}: short row", path.display())).into())
        };
        let bad = |what: &str| ConfigError::Invalid(format!("{}: bad {what}", path.display()));
        let idx: usize = field(0)?.trim().parse().map_err(|_| bad("index"))?;
        let re: f64 = field(1)?.trim().parse().map_err(|_| bad("real part"))?;
        let im: f64 = field(2)?.trim().parse().map_err(|_| bad("imaginary part"))?;
        entries.push((idx, Complex64::new(re, im)));
    }
    let n = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for (i, z) in entries {
        if i == 0 {
            return Err(ConfigError::Invalid(format!("{}: indices are 1-based", path.display())).into());
        }
        v[i - 1] = z;
    }
    Ok(ComplexSignal::new(v)?)
}

fn run_recover(a: &RecoverArgs) -> Result<i32, RunError> {
    let b = read_measurements(&a.input)?;
    let op = operator_for(&b)?;
    let mut opts = cpr_core::PipelineOptions {
        known_first_entry: a.known_first_entry,
        ..Default::default()
    };
    if let Some(m) = a.max_applications {
        opts.solver.max_applications = m;
    }
    if let Some(f) = a.feasibility_tol {
        opts.solver.feasibility_tol = f;
    }
    if a.epsilon.is_some() || a.confidence.is_some() {
        opts.epsilon = match parse_epsilon(a.epsilon.as_deref().unwrap_or("estimated"), a.confidence)? {
            crate::config::EpsilonSetting::Fixed(e) => cpr_core::EpsilonMode::Fixed(e),
            crate::config::EpsilonSetting::Estimated { confidence } => {
                cpr_core::EpsilonMode::Estimated { confidence }
            }
        };
    }
    let r = recover(&b, &op, &opts)?;
    eprintln!(
        "N = {}, M = {}, mode {}, stage-1 residual {:.3e}, epsilon {:.3e}, solver {} after {} iterations",
        b.n,
        b.count(),
        b.mode,
        r.stage1.residual,
        r.epsilon,
        if r.solver.converged { "converged" } else { "stopped" },
        r.solver.iterations
    );
    let csv = signal_csv(&r.estimate)?;
    match &a.out {
        Some(p) => std::fs::write(p, &csv)?,
        None => std::io::stdout().write_all(&csv)?,
    }
    if let Some(t) = &a.truth {
        let truth = read_signal_csv(t)?;
        let (_, mse) = align_phase(&truth, &r.estimate)?;
        let threshold = a.threshold.unwrap_or(cpr_core::pipeline::DEFAULT_SUCCESS_THRESHOLD);
        eprintln!("aligned MSE {mse:.3e} ({})", if mse < threshold { "success" } else { "failure" });
    }
    Ok(EXIT_OK)
}

fn run_simulate(a: &SimulateArgs) -> Result<i32, RunError> {
    let snr = parse_snr_grid(&a.snr_db)?;
    let [snr_db] = snr[..] else {
        return Err(ConfigError::Invalid("simulate takes a single SNR".into()).into());
    };
    if a.l == 0 || a.l + 1 > a.n || a.k == 0 || a.k > a.n {
        return Err(ConfigError::Invalid(format!("infeasible instance N={}, k={}, L={}", a.n, a.k, a.l)).into());
    }
    let point = GridPoint {
        k: a.k,
        l: a.l,
        snr_db,
        variant: if a.fix_first { Variant::Fixed } else { Variant::Random },
    };
    let inst = draw_instance(a.n, parse_mode(&a.mode)?, &point, a.seed)?;
    if a.binary {
        std::fs::write(&a.out, to_binary(&inst.measurements))?;
    } else {
        std::fs::write(&a.out, to_text(&inst.measurements))?;
    }
    if let Some(p) = &a.truth_out {
        std::fs::write(p, signal_csv(&inst.signal)?)?;
    }
    Ok(EXIT_OK)
}
