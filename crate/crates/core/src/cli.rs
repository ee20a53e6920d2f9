//! Command-line driver.
//!
//! Exit codes: `0` success, `1` a check, synthesis or experiment failed (or an
//! output file could not be written), `2` usage or configuration error, `3`
//! the time integration produced non-finite values.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::conditions::{
    condition_report, logspace, synthesize_params, Synthesis, SynthesisOptions, Verdict,
};
use crate::config::{load_config, ConfigError, RunConfig};
use crate::error::Error;
use crate::experiments::{
    emit, run_attraction_rate, run_coincidence, run_coincidence_witness, run_cone_invariance,
    run_lipschitz_sampling, summary_json, write_trials_csv, Cone, ExperimentResult,
};
use crate::kernel::KernelVariant;
use crate::nonlinear::NonlinearitySpec;
use crate::solver::evolve;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PIMLAB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "pimlab",
    version,
    about = "Certify and simulate delay reaction-diffusion equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the spectral-gap conditions for a configuration.
    Check(CheckArgs),
    /// Search for kernel parameters certifying only the partial manifold.
    Synthesize(SynthesizeArgs),
    /// Integrate a configuration and write the trajectory.
    Simulate(SimulateArgs),
    /// Run a verification experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (experiments: file stem for `.json` and `.csv`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Directory used when `--output` is absent; stdout when neither is set.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
}

impl OutputArgs {
    fn target(&self, default_name: &str) -> Option<PathBuf> {
        self.output
            .clone()
            .or_else(|| self.out_dir.as_ref().map(|d| d.join(default_name)))
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `problem.N`.
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Overrides `problem.mu`.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Exit 0 even when no verdict is certified.
    #[arg(long)]
    pub exit_zero: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long = "n")]
    pub n: usize,
    /// Domain length `L`.
    #[arg(long)]
    pub length: f64,
    /// Nicholson amplitude.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0.1)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.5)]
    pub minus_position: f64,
    #[arg(long, default_value_t = 60)]
    pub r_points: usize,
    #[arg(long, default_value_t = 120)]
    pub m_xi_points: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    ConeInvariance,
    Coincidence,
    Lipschitz,
    Attraction,
}

impl ExperimentName {
    fn stem(self) -> &'static str {
        match self {
            ExperimentName::ConeInvariance => "cone_invariance",
            ExperimentName::Coincidence => "coincidence",
            ExperimentName::Lipschitz => "lipschitz",
            ExperimentName::Attraction => "attraction",
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Rank for the attraction experiment; defaults to `problem.N`.
    #[arg(long = "n")]
    pub n: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

enum Failure {
    Config(ConfigError),
    Run(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(Error::Io(e))
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Check(a) => cmd_check(&a),
        Command::Synthesize(a) => cmd_synthesize(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("error: invalid configuration at {}: {}", e.path, e.message);
            EXIT_USAGE
        }
        Err(Failure::Run(e @ Error::Integration { .. })) => {
            eprintln!("error: {e}");
            EXIT_INTEGRATION
        }
        Err(Failure::Run(e @ (Error::Io(_) | Error::Json(_)))) => {
            eprintln!("error: {e}");
            EXIT_FAILED
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn write_output(
    target: Option<PathBuf>,
    body: impl FnOnce(&mut dyn Write) -> crate::Result<()>,
) -> Result<(), Failure> {
    match target {
        Some(path) => {
            let mut w = BufWriter::new(File::create(&path)?);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn json_line(w: &mut dyn Write, value: &impl serde::Serialize) -> crate::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Flattens a JSON object into `key,value` rows; nested values use dotted keys.
fn write_flat_csv(w: &mut dyn Write, value: &serde_json::Value) -> crate::Result<()> {
    fn walk(prefix: &str, v: &serde_json::Value, rows: &mut Vec<(String, String)>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, x) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, x, rows);
                }
            }
            serde_json::Value::Array(items) => {
                for (i, x) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, rows);
                }
            }
            serde_json::Value::String(s) => rows.push((prefix.to_string(), s.clone())),
            other => rows.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", value, &mut rows);
    writeln!(w, "key,value")?;
    for (k, v) in rows {
        writeln!(w, "{k},{v}")?;
    }
    Ok(())
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    Ok(load_config(path)?)
}

fn cmd_check(a: &CheckArgs) -> Outcome {
    let cfg = load(&a.config)?;
    let pb = cfg.problem_spec()?;
    let n = a.n.unwrap_or(cfg.problem.n);
    let mu = a.mu.or(cfg.problem.mu);
    let report = condition_report(&pb, n, mu).map_err(|e| ConfigError {
        path: "problem".into(),
        message: e.to_string(),
    })?;
    let ext = if a.out.format == Format::Json {
        "json"
    } else {
        "csv"
    };
    write_output(a.out.target(&format!("check.{ext}")), |w| {
        match a.out.format {
            Format::Json => {
                let mut doc = serde_json::to_value(&report)?;
                doc["input"] = serde_json::to_value(&cfg)?;
                json_line(w, &doc)
            }
            Format::Csv => report.write_csv(w),
        }
    })?;
    Ok(
        if report.verdict == Verdict::NeitherCertified && !a.exit_zero {
            EXIT_FAILED
        } else {
            EXIT_OK
        },
    )
}

fn cmd_synthesize(a: &SynthesizeArgs) -> Outcome {
    let nl = NonlinearitySpec::nicholson_certified(a.p).map_err(|e| ConfigError {
        path: "--p".into(),
        message: e.to_string(),
    })?;
    let opts = SynthesisOptions {
        margin: a.margin,
        minus_position: a.minus_position,
        r_grid: logspace(1e-3, 10.0, a.r_points),
        m_xi_grid: logspace(1e-6, 10.0, a.m_xi_points),
    };
    let syn = synthesize_params(a.n, &nl, a.length, &opts)?;
    let ext = if a.out.format == Format::Json {
        "json"
    } else {
        "csv"
    };
    write_output(a.out.target(&format!("synthesis.{ext}")), |w| {
        match a.out.format {
            Format::Json => json_line(w, &syn),
            Format::Csv => write_flat_csv(w, &serde_json::to_value(&syn)?),
        }
    })?;
    Ok(match syn {
        Synthesis::Feasible(_) => EXIT_OK,
        Synthesis::Infeasible(_) => EXIT_FAILED,
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Outcome {
    let mut cfg = load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.horizon {
        cfg.problem.horizon = Some(t);
        cfg.problem.steps = None;
    }
    let pb = cfg.problem_spec()?;
    let phi = cfg.initial_history(&pb)?;
    let record = evolve(&pb, &phi)?;
    let ext = if a.out.format == Format::Json {
        "json"
    } else {
        "csv"
    };
    write_output(a.out.target(&format!("trajectory.{ext}")), |w| {
        match a.out.format {
            Format::Json => json_line(w, &record.samples),
            Format::Csv => record.write_csv(w),
        }
    })?;
    Ok(EXIT_OK)
}

fn cmd_experiment(a: &ExperimentArgs) -> Outcome {
    let mut cfg = load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.trials {
        cfg.experiment.trials = t;
    }
    if let Some(t) = a.horizon {
        cfg.experiment.horizon = Some(t);
    }
    let pb = cfg.problem_spec()?;
    let mut ec = cfg.experiment_config(&pb);
    ec.jobs = a.jobs;
    let results: Vec<ExperimentResult> = match a.name {
        ExperimentName::ConeInvariance => vec![
            run_cone_invariance(&pb, &ec, Cone::Positive)?,
            run_cone_invariance(&pb, &ec, Cone::Negative)?,
        ],
        ExperimentName::Coincidence => vec![
            run_coincidence(&pb, &ec, Cone::Positive)?,
            run_coincidence(&pb, &ec, Cone::Negative)?,
            run_coincidence_witness(&pb, &ec)?,
        ],
        ExperimentName::Lipschitz => KernelVariant::ALL
            .into_iter()
            .map(|v| run_lipschitz_sampling(&pb.clone().with_variant(v), &ec))
            .collect::<crate::Result<_>>()?,
        ExperimentName::Attraction => {
            vec![run_attraction_rate(&pb, &ec, a.n.unwrap_or(cfg.problem.n))?]
        }
    };
    for r in &results {
        eprintln!(
            "{}: {} (max violation {:e}, tolerance {:e})",
            r.name,
            r.status.as_str(),
            r.max_violation,
            r.tolerance
        );
    }
    match a
        .out
        .output
        .clone()
        .or_else(|| a.out.out_dir.as_ref().map(|d| d.join(a.name.stem())))
    {
        Some(stem) => emit(&results, &stem)?,
        None => write_output(None, |w| match a.out.format {
            Format::Json => {
                w.write_all(summary_json(&results)?.as_bytes())?;
                writeln!(w)?;
                Ok(())
            }
            Format::Csv => write_trials_csv(&results, w),
        })?,
    }
    Ok(if results.iter().any(ExperimentResult::is_failure) {
        EXIT_FAILED
    } else {
        EXIT_OK
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(
            run_from(["pimlab", "experiment", "nonsense", "--config", "x.toml"]),
            EXIT_USAGE
        );
        assert_eq!(
            run_from(["pimlab", "synthesize", "--length", "3.0"]),
            EXIT_USAGE
        );
        assert_eq!(
            run_from(["pimlab", "check", "--config", "/nonexistent/config.toml"]),
            EXIT_USAGE
        );
    }

    #[test]
    fn flat_csv() {
        let mut out = Vec::new();
        write_flat_csv(&mut out, &serde_json::json!({"a": 1, "b": {"c": [2, "x"]}})).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "key,value\na,1\nb.c.0,2\nb.c.1,x\n"
        );
    }
}
