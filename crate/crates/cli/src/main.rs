//! Command-line entry point: simulate / predict / verify / sweep over TOML
//! configs with reproducible, content-addressed outputs.
//!
//! Exit codes are a stable contract: 0 success (all verdicts pass), 1
//! verification failure, 2 config error, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use growchoice::config::{self, Config, ConfigError, MDistSection, SweepMode};
use growchoice::harness::{
    self, aggregate, cross_validate_samplers, cross_validation_verdicts, regime_verdicts,
    run_replicates, EnsembleReport, EnsembleSpec, Tolerances, ARTIFACT_VERSION,
};
use growchoice::report::{self, PredictionArtifact};
use growchoice_core::theory::classify_regime;
use growchoice_core::{Regime, TraceSpec};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "growchoice",
    version,
    about = "Simulator and verification harness for preferential attachment with a growing number of choices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (one content-hash-named subdirectory per run).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. --set model.alpha=0.7 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for replicate execution (0 = all cores). Results do
    /// not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Suppress progress and warning output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured ensemble and write traces plus a summary report.
    Simulate,
    /// Print the regime classification and limit constants without
    /// simulating.
    Predict,
    /// Run the ensemble and test it against the predicted limits.
    Verify,
    /// Run simulate or verify over a parameter grid.
    Sweep,
}

/// Exit status per the stable contract; `Ok(code)` carries pass/fail results
/// that are not errors.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<harness::HarnessError> for Failure {
    fn from(e: harness::HarnessError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<report::ReportError> for Failure {
    fn from(e: report::ReportError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::Config("--config PATH is required".into()))?;
    let config = config::load_with_overrides(path, &cli.set)?;
    match cli.command {
        Command::Simulate => simulate(cli, &config),
        Command::Predict => predict(cli, &config),
        Command::Verify => verify(cli, &config),
        Command::Sweep => sweep(cli, &config),
    }
}

fn warn_validation(cli: &Cli, config: &Config) -> Result<growchoice_core::ModelParams, Failure> {
    let (params, warnings) = config.to_model_params()?;
    if !cli.quiet {
        for w in &warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(params)
}

fn trace_spec(config: &Config) -> TraceSpec {
    TraceSpec {
        checkpoint_ratio: config.run.checkpoint_ratio,
        k_list: config.run.k_list.iter().map(|&k| k as usize).collect(),
    }
}

/// Creates the content-hash-named run directory and writes the resolved
/// config into it.
fn prepare_run_dir(out: &Path, single: &Config) -> Result<(PathBuf, String), Failure> {
    let canonical = single.canonical_toml();
    let dir = out.join(single.content_hash());
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    std::fs::write(dir.join("config.toml"), &canonical)
        .map_err(|e| Failure::Runtime(format!("cannot write config.toml: {e}")))?;
    Ok((dir, canonical))
}

/// Shared simulate/verify core: run the ensemble, write traces, aggregate.
fn run_and_persist(
    cli: &Cli,
    config: &Config,
    window: Option<[u64; 2]>,
) -> Result<(PathBuf, EnsembleReport), Failure> {
    let params = warn_validation(cli, config)?;
    let single = config.single_run();
    let (dir, canonical) = prepare_run_dir(&cli.out, &single)?;
    let spec = EnsembleSpec {
        params: params.clone(),
        trace: trace_spec(config),
        replicates: config.run.replicates,
    };
    let outcomes = run_replicates(&spec, cli.jobs)?;
    for trace in outcomes.iter().filter_map(|o| o.as_ref().ok()) {
        report::write_trace(&dir, &canonical, trace)?;
    }
    let report = aggregate(canonical, &params, &outcomes, window)?;
    Ok((dir, report))
}

fn write_report_files(dir: &Path, rep: &EnsembleReport) -> Result<(), Failure> {
    report::write_json(&dir.join("report.json"), rep)?;
    std::fs::write(dir.join("report.txt"), report::render_text(rep))
        .map_err(|e| Failure::Runtime(format!("cannot write report.txt: {e}")))?;
    Ok(())
}

fn simulate(cli: &Cli, config: &Config) -> Result<u8, Failure> {
    let (dir, report) = run_and_persist(cli, config, None)?;
    write_report_files(&dir, &report)?;
    if !cli.quiet {
        eprintln!("wrote {}", dir.display());
    }
    Ok(if report.failures.is_empty() {
        0
    } else {
        EXIT_RUNTIME
    })
}

fn predict(cli: &Cli, config: &Config) -> Result<u8, Failure> {
    let params = warn_validation(cli, config)?;
    let prediction = growchoice_core::theory::predict(&params)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let single = config.single_run();
    let artifact = PredictionArtifact {
        artifact_version: ARTIFACT_VERSION,
        config_toml: single.canonical_toml(),
        prediction,
    };
    let (dir, _) = prepare_run_dir(&cli.out, &single)?;
    report::write_json(&dir.join("prediction.json"), &artifact)?;
    print!("{}", report::to_json(&artifact));
    Ok(0)
}

fn verify(cli: &Cli, config: &Config) -> Result<u8, Failure> {
    let vs = config.verify_section()?.clone();
    let (dir, mut rep) = run_and_persist(cli, config, vs.regression_window)?;
    let tol = Tolerances {
        exponent_tol: vs.exponent_tol,
        ratio_tol: vs.ratio_tol,
        supercritical_frac: vs.supercritical_frac,
    };
    let params = warn_validation(cli, config)?;
    let mut verdicts = regime_verdicts(&rep, &tol);
    let cv = cross_validate_samplers(&params, vs.cross_horizon, vs.cross_replicates, cli.jobs)?;
    verdicts.extend(cross_validation_verdicts(&cv, vs.chi2_p_min, vs.ks_p_min));
    rep.verdicts = verdicts;
    rep.recompute_passed();
    write_report_files(&dir, &rep)?;
    if !cli.quiet {
        eprint!("{}", report::render_text(&rep));
        eprintln!("wrote {}", dir.display());
    }
    if !rep.failures.is_empty() {
        return Ok(EXIT_RUNTIME);
    }
    Ok(if rep.passed { 0 } else { EXIT_VERIFY_FAILED })
}

#[derive(Serialize)]
struct SweepIndexEntry {
    alpha: f64,
    gamma: f64,
    c_d: f64,
    m: String,
    regime: Regime,
    dir: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepIndex {
    artifact_version: u32,
    mode: SweepMode,
    points: Vec<SweepIndexEntry>,
}

fn sweep(cli: &Cli, config: &Config) -> Result<u8, Failure> {
    let sweep = config
        .sweep
        .clone()
        .ok_or(ConfigError::MissingSection("sweep"))?;
    if sweep.alpha.is_none() && sweep.gamma.is_none() && sweep.c_d.is_none() && sweep.m.is_none() {
        return Err(ConfigError::Sweep("defines no grid axes".into()).into());
    }
    for (name, empty) in [
        ("alpha", sweep.alpha.as_ref().is_some_and(Vec::is_empty)),
        ("gamma", sweep.gamma.as_ref().is_some_and(Vec::is_empty)),
        ("c_d", sweep.c_d.as_ref().is_some_and(Vec::is_empty)),
        ("m", sweep.m.as_ref().is_some_and(Vec::is_empty)),
    ] {
        if empty {
            return Err(ConfigError::Sweep(format!("axis `{name}` is empty")).into());
        }
    }
    if sweep.mode == SweepMode::Verify {
        config.verify_section()?;
    }
    let alphas = sweep.alpha.unwrap_or_else(|| vec![config.model.alpha]);
    let gammas = sweep.gamma.unwrap_or_else(|| vec![config.model.gamma]);
    let cds = sweep.c_d.unwrap_or_else(|| vec![config.model.c_d]);
    let ms: Vec<MDistSection> = sweep.m.unwrap_or_else(|| vec![config.m_dist.clone()]);

    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", cli.out.display())))?;
    let mut entries = Vec::new();
    let mut any_runtime = false;
    let mut any_failed_verdict = false;
    for &alpha in &alphas {
        for &gamma in &gammas {
            for &c_d in &cds {
                for m in &ms {
                    let mut point = config.single_run();
                    point.model.alpha = alpha;
                    point.model.gamma = gamma;
                    point.model.c_d = c_d;
                    point.m_dist = m.clone();
                    let regime = classify_regime(alpha, gamma);
                    let dir_name = point.content_hash();
                    let point_cli = Cli {
                        command: Command::Simulate,
                        config: cli.config.clone(),
                        out: cli.out.clone(),
                        set: Vec::new(),
                        jobs: cli.jobs,
                        quiet: true,
                    };
                    let outcome = match sweep.mode {
                        SweepMode::Simulate => simulate(&point_cli, &point),
                        SweepMode::Verify => verify(&point_cli, &point),
                    };
                    let mut entry = SweepIndexEntry {
                        alpha,
                        gamma,
                        c_d,
                        m: m.label(),
                        regime,
                        dir: dir_name,
                        status: "ok",
                        passed: None,
                        error: None,
                    };
                    match outcome {
                        Ok(0) => {
                            if sweep.mode == SweepMode::Verify {
                                entry.passed = Some(true);
                            }
                        }
                        Ok(EXIT_VERIFY_FAILED) => {
                            entry.passed = Some(false);
                            any_failed_verdict = true;
                        }
                        Ok(_) => {
                            entry.status = "error";
                            entry.error = Some("replicates failed during the run".into());
                            any_runtime = true;
                        }
                        Err(Failure::Config(msg)) | Err(Failure::Runtime(msg)) => {
                            entry.status = "error";
                            entry.error = Some(msg);
                            any_runtime = true;
                        }
                    }
                    if !cli.quiet {
                        eprintln!(
                            "sweep point alpha={alpha} gamma={gamma} c_d={c_d} {}: {}",
                            entry.m,
                            entry.error.as_deref().unwrap_or(match entry.passed {
                                Some(true) => "pass",
                                Some(false) => "fail",
                                None => "done",
                            })
                        );
                    }
                    entries.push(entry);
                }
            }
        }
    }
    let index = SweepIndex {
        artifact_version: ARTIFACT_VERSION,
        mode: sweep.mode,
        points: entries,
    };
    report::write_json(&cli.out.join("index.json"), &index)?;
    if !cli.quiet {
        eprintln!("wrote {}", cli.out.join("index.json").display());
    }
    Ok(if any_runtime {
        EXIT_RUNTIME
    } else if any_failed_verdict {
        EXIT_VERIFY_FAILED
    } else {
        0
    })
}
