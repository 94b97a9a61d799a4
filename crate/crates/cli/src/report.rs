//! Artifact persistence: per-replicate trace CSV files with the resolved
//! config embedded as comment lines, JSON reports with stable key order, and
//! an aligned text rendering.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use growchoice_core::{Prediction, RunTrace, TraceRow};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{EnsembleReport, Verdict, VerdictKind, ARTIFACT_VERSION};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {what}")]
    Malformed { path: String, what: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, what: impl Into<String>) -> ReportError {
    ReportError::Malformed {
        path: path.display().to_string(),
        what: what.into(),
    }
}

/// `trace_r0042.csv` for stream 42.
pub fn trace_file_name(stream: u64) -> String {
    format!("trace_r{stream:04}.csv")
}

/// Writes one replicate trace: a `#`-prefixed preamble holding the format
/// line, the stream, and the full resolved config, then a CSV header and one
/// row per checkpoint. Floats use shortest round-trip formatting, so reading
/// the file back reproduces the trace bit for bit.
pub fn write_trace(
    dir: &Path,
    config_toml: &str,
    trace: &RunTrace,
) -> Result<PathBuf, ReportError> {
    let path = dir.join(trace_file_name(trace.stream));
    let mut text = String::new();
    let _ = writeln!(text, "# growchoice trace v{ARTIFACT_VERSION}");
    let _ = writeln!(text, "# stream = {}", trace.stream);
    let _ = writeln!(text, "# config:");
    for line in config_toml.lines() {
        if line.is_empty() {
            text.push_str("#\n");
        } else {
            let _ = writeln!(text, "# {line}");
        }
    }
    text.push_str("n,max_degree,count_at_max,total_weight,edge_count,degree_sum");
    for k in &trace.k_list {
        let _ = write!(text, ",N_{k}");
    }
    text.push('\n');
    for row in &trace.rows {
        let _ = write!(
            text,
            "{},{},{},{},{},{}",
            row.n, row.max_degree, row.count_at_max, row.total_weight, row.edge_count,
            row.degree_sum
        );
        for c in &row.class_counts {
            let _ = write!(text, ",{c}");
        }
        text.push('\n');
    }
    let mut file = fs::File::create(&path).map_err(io_err(&path))?;
    file.write_all(text.as_bytes()).map_err(io_err(&path))?;
    Ok(path)
}

/// Reads a trace file back into the trace plus the embedded config TOML.
pub fn read_trace(path: &Path) -> Result<(RunTrace, String), ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut stream: Option<u64> = None;
    let mut config = String::new();
    let mut in_config = false;
    let mut body_start = 0usize;
    for raw in text.split_inclusive('\n') {
        let line = raw.trim_end_matches(['\n', '\r']);
        if let Some(rest) = line.strip_prefix('#') {
            body_start += raw.len();
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            if let Some(value) = rest.strip_prefix("stream = ") {
                stream = Some(
                    value
                        .trim()
                        .parse()
                        .map_err(|_| malformed(path, format!("bad stream value {value:?}")))?,
                );
            } else if rest == "config:" {
                in_config = true;
            } else if in_config {
                config.push_str(rest);
                config.push('\n');
            }
        } else {
            break;
        }
    }
    let stream = stream.ok_or_else(|| malformed(path, "missing `# stream =` line"))?;
    let body = &text[body_start..];
    let mut lines = body.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed(path, "missing CSV header"))?;
    let mut columns = header.split(',');
    for expected in [
        "n",
        "max_degree",
        "count_at_max",
        "total_weight",
        "edge_count",
        "degree_sum",
    ] {
        let got = columns.next().unwrap_or("");
        if got != expected {
            return Err(malformed(
                path,
                format!("expected column {expected:?}, found {got:?}"),
            ));
        }
    }
    let k_list: Vec<usize> = columns
        .map(|c| {
            c.strip_prefix("N_")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| malformed(path, format!("bad class column {c:?}")))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 + k_list.len() {
            return Err(malformed(
                path,
                format!("row {}: expected {} fields", lineno + 2, 6 + k_list.len()),
            ));
        }
        let parse_u64 = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| malformed(path, format!("row {}: bad integer {s:?}", lineno + 2)))
        };
        let total_weight: f64 = fields[3]
            .parse()
            .map_err(|_| malformed(path, format!("row {}: bad float {:?}", lineno + 2, fields[3])))?;
        rows.push(TraceRow {
            n: parse_u64(fields[0])?,
            max_degree: parse_u64(fields[1])?,
            count_at_max: parse_u64(fields[2])?,
            total_weight,
            edge_count: parse_u64(fields[4])?,
            degree_sum: parse_u64(fields[5])?,
            class_counts: fields[6..]
                .iter()
                .map(|s| parse_u64(s))
                .collect::<Result<_, _>>()?,
        });
    }
    Ok((
        RunTrace {
            stream,
            k_list,
            rows,
        },
        config,
    ))
}

/// Reads every `trace_r*.csv` in a run directory, ordered by stream.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<(RunTrace, String)>, ReportError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trace_r") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_trace(p)).collect()
}

/// Serializes any report artifact as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    fs::write(path, to_json(value)).map_err(io_err(path))
}

/// Prediction output artifact: the regime and limit constants for a config,
/// with the resolved config embedded like every other output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionArtifact {
    pub artifact_version: u32,
    pub config_toml: String,
    pub prediction: Prediction,
}

fn verdict_line(v: &Verdict) -> String {
    let status = if v.pass { "PASS" } else { "FAIL" };
    let gate = if v.gating { "" } else { " (informational)" };
    let rule = match v.kind {
        VerdictKind::AbsWithin => format!("|value - {:.6}| <= {:.6}", v.target, v.tolerance),
        VerdictKind::RelWithin => {
            format!("|value - {:.6}| <= {:.2}% of target", v.target, v.tolerance * 100.0)
        }
        VerdictKind::AtLeast => format!("value >= {:.6}", v.target - v.tolerance),
    };
    format!(
        "  {status} {name:<24} value {value:<12.6} rule {rule}{gate}",
        name = v.name,
        value = v.value,
    )
}

/// Aligned human-readable rendering of a report.
pub fn render_text(report: &EnsembleReport) -> String {
    let mut out = String::new();
    let p = &report.prediction;
    let _ = writeln!(out, "regime        {:?}", p.regime);
    let _ = writeln!(out, "exponent      {:.6}", p.exponent);
    let _ = writeln!(out, "constant      {:.6}", p.constant);
    if let Some(alt) = p.alt_constant {
        let _ = writeln!(out, "alt constant  {alt:.6}");
    }
    let _ = writeln!(out, "E m           {:.6}", p.em);
    let _ = writeln!(out, "E m^alpha     {:.6}", p.em_alpha);
    let _ = writeln!(
        out,
        "replicates    {} ({} completed)",
        report.replicates, report.completed
    );
    for f in &report.failures {
        let _ = writeln!(out, "  failed stream {} at n = {}: {}", f.stream, f.at, f.error);
    }
    if let Some(reg) = &report.regression {
        let _ = writeln!(
            out,
            "log-log fit   slope {:.6} +- {:.6} over n in [{}, {}] ({} points)",
            reg.slope, reg.slope_se, reg.window[0], reg.window[1], reg.points
        );
    }
    if !report.checkpoints.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:>10}  {:>12}  {:>12}  {:>12}  medians over replicates",
            "n", "M/n", "M/n^e", "D/n"
        );
        for c in &report.checkpoints {
            let _ = writeln!(
                out,
                "{:>10}  {:>12.6}  {:>12.6}  {:>12.6}",
                c.n, c.max_over_n.median, c.max_over_n_exp.median, c.weight_over_n.median
            );
        }
    }
    if !report.verdicts.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "verdicts");
        for v in &report.verdicts {
            let _ = writeln!(out, "{}", verdict_line(v));
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "overall: {}", if report.passed { "PASS" } else { "FAIL" });
    out
}
