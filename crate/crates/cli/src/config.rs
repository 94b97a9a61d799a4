//! Config file schema: a single TOML document describing the model, the
//! edge-count law, run geometry, verification tolerances, and optional sweep
//! grids, with dotted-key command-line overrides.

use std::fmt::Write as _;
use std::path::Path;

use growchoice_core::{DRounding, MDistribution, ModelParams, SamplerMode, Warning};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// TOML syntax and unknown-key errors; the underlying message carries
    /// line/column anchors.
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad --set override {spec:?}: {reason}")]
    BadOverride { spec: String, reason: String },
    #[error("[m_dist] {0}")]
    MDist(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("missing [{0}] section required by this subcommand")]
    MissingSection(&'static str),
    #[error("[sweep] {0}")]
    Sweep(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub m_dist: MDistSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub gamma: f64,
    pub c_d: f64,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub d_rounding: Rounding,
    #[serde(default)]
    pub seed: u64,
    pub horizon: u64,
    #[serde(default)]
    pub allow_infinite_second_moment: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    #[default]
    Fast,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Round,
    Ceil,
    Real,
}

/// Edge-count law. `kind` decides which of the remaining fields apply;
/// [`MDistSection::resolve`] enforces that exactly the right ones are set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MDistSection {
    pub kind: MKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_min: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MKindName {
    Deterministic,
    Pmf,
    Zeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_checkpoint_ratio")]
    pub checkpoint_ratio: f64,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<u64>,
}

fn default_replicates() -> usize {
    1
}
fn default_checkpoint_ratio() -> f64 {
    1.1
}
fn default_k_list() -> Vec<u64> {
    vec![1, 2, 3]
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            replicates: default_replicates(),
            checkpoint_ratio: default_checkpoint_ratio(),
            k_list: default_k_list(),
        }
    }
}

/// Verification tolerances. The five tolerance keys are deliberately
/// required: a verify run must state its thresholds, and a missing key is a
/// config error naming that key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Absolute tolerance on the fitted growth exponent (subcritical).
    pub exponent_tol: f64,
    /// Absolute tolerance on median M(n)/n vs the predicted fraction
    /// (critical).
    pub ratio_tol: f64,
    /// Pass when median M(n)/n >= this fraction of E m (supercritical).
    pub supercritical_frac: f64,
    /// Minimum chi-square p-value for naive draws vs the closed-form class
    /// law.
    pub chi2_p_min: f64,
    /// Minimum two-sample KS p-value for naive-vs-fast final M(n)/n.
    pub ks_p_min: f64,
    /// Log-log regression window [n_lo, n_hi]; defaults to the last two
    /// decades before the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression_window: Option<[u64; 2]>,
    /// Horizon for the naive-sampler cross-validation ensembles.
    #[serde(default = "default_cross_horizon")]
    pub cross_horizon: u64,
    /// Replicates per sampler for the KS cross-validation.
    #[serde(default = "default_cross_replicates")]
    pub cross_replicates: usize,
}

fn default_cross_horizon() -> u64 {
    10_000
}
fn default_cross_replicates() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<MDistSection>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Simulate,
    Verify,
}

impl MDistSection {
    /// Builds the edge-count distribution, checking that the fields present
    /// match `kind`.
    pub fn resolve(&self) -> Result<MDistribution, ConfigError> {
        let forbid = |cond: bool, field: &str, kind: &str| {
            if cond {
                Err(ConfigError::MDist(format!(
                    "field `{field}` does not apply to kind = \"{kind}\""
                )))
            } else {
                Ok(())
            }
        };
        match self.kind {
            MKindName::Deterministic => {
                forbid(self.values.is_some(), "values", "deterministic")?;
                forbid(self.probs.is_some(), "probs", "deterministic")?;
                forbid(self.beta.is_some(), "beta", "deterministic")?;
                forbid(self.k_min.is_some(), "k_min", "deterministic")?;
                let value = self.value.ok_or_else(|| {
                    ConfigError::MDist("kind = \"deterministic\" requires `value`".into())
                })?;
                MDistribution::deterministic(value)
                    .map_err(|e| ConfigError::MDist(e.to_string()))
            }
            MKindName::Pmf => {
                forbid(self.value.is_some(), "value", "pmf")?;
                forbid(self.beta.is_some(), "beta", "pmf")?;
                forbid(self.k_min.is_some(), "k_min", "pmf")?;
                let values = self
                    .values
                    .as_ref()
                    .ok_or_else(|| ConfigError::MDist("kind = \"pmf\" requires `values`".into()))?;
                let probs = self
                    .probs
                    .as_ref()
                    .ok_or_else(|| ConfigError::MDist("kind = \"pmf\" requires `probs`".into()))?;
                if values.len() != probs.len() {
                    return Err(ConfigError::MDist(format!(
                        "`values` has {} entries but `probs` has {}",
                        values.len(),
                        probs.len()
                    )));
                }
                let pairs: Vec<(u64, f64)> =
                    values.iter().copied().zip(probs.iter().copied()).collect();
                MDistribution::finite_pmf(&pairs).map_err(|e| ConfigError::MDist(e.to_string()))
            }
            MKindName::Zeta => {
                forbid(self.value.is_some(), "value", "zeta")?;
                forbid(self.values.is_some(), "values", "zeta")?;
                forbid(self.probs.is_some(), "probs", "zeta")?;
                let beta = self
                    .beta
                    .ok_or_else(|| ConfigError::MDist("kind = \"zeta\" requires `beta`".into()))?;
                let k_min = self.k_min.unwrap_or(1);
                MDistribution::zeta(beta, k_min).map_err(|e| ConfigError::MDist(e.to_string()))
            }
        }
    }

    /// Short human label for sweep indexes, e.g. `m=1`, `pmf{1,2,3}`,
    /// `zeta(3.5)`.
    pub fn label(&self) -> String {
        match self.kind {
            MKindName::Deterministic => format!(
                "m={}",
                self.value.map_or_else(|| "?".into(), |v| v.to_string())
            ),
            MKindName::Pmf => {
                let mut s = String::from("pmf{");
                if let Some(values) = &self.values {
                    for (i, v) in values.iter().enumerate() {
                        if i > 0 {
                            s.push(',');
                        }
                        let _ = write!(s, "{v}");
                    }
                }
                s.push('}');
                s
            }
            MKindName::Zeta => format!("zeta({})", self.beta.unwrap_or(f64::NAN)),
        }
    }
}

impl Config {
    /// Parses a TOML string (post-overrides application happens in
    /// [`load_with_overrides`]).
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.m_dist.resolve()?;
        Ok(config)
    }

    /// Canonical serialized form: stable section and key order, shortest
    /// round-trip float formatting. Equal configs produce byte-equal strings.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical form; names the
    /// run directory.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }

    /// Builds validated simulation parameters; validation violations are
    /// config errors, warnings are returned for display.
    pub fn to_model_params(&self) -> Result<(ModelParams, Vec<Warning>), ConfigError> {
        let m_dist = self.m_dist.resolve()?;
        let mut params = ModelParams::new(
            self.model.alpha,
            self.model.gamma,
            self.model.c_d,
            m_dist,
        );
        params.sampler_mode = match self.model.sampler {
            Sampler::Fast => SamplerMode::FastClass,
            Sampler::Naive => SamplerMode::Naive,
        };
        params.d_rounding = match self.model.d_rounding {
            Rounding::Round => DRounding::Round,
            Rounding::Ceil => DRounding::Ceil,
            Rounding::Real => DRounding::RealExponent,
        };
        params.seed = self.model.seed;
        params.horizon = self.model.horizon;
        params.allow_infinite_second_moment = self.model.allow_infinite_second_moment;
        let report = params.validate();
        if !report.is_valid() {
            let mut lines = Vec::new();
            for v in &report.violations {
                lines.push(v.to_string());
            }
            return Err(ConfigError::Invalid(lines.join("; ")));
        }
        Ok((params, report.warnings))
    }

    /// The verify section, or a config error naming it.
    pub fn verify_section(&self) -> Result<&VerifySection, ConfigError> {
        self.verify
            .as_ref()
            .ok_or(ConfigError::MissingSection("verify"))
    }

    /// A copy describing a single run: the sweep section stripped, so sweep
    /// grid points hash like standalone configs.
    pub fn single_run(&self) -> Config {
        let mut c = self.clone();
        c.sweep = None;
        c
    }
}

/// Reads a config file and applies `--set key=value` overrides on the raw
/// TOML table before schema validation, so overrides may both change existing
/// keys and introduce optional sections.
pub fn load_with_overrides(path: &Path, sets: &[String]) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut table: toml::Table = text.parse()?;
    for spec in sets {
        apply_set(&mut table, spec)?;
    }
    let config: Config = toml::Value::Table(table).try_into()?;
    config.m_dist.resolve()?;
    Ok(config)
}

fn apply_set(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let bad = |reason: &str| ConfigError::BadOverride {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let (path, raw) = spec.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() {
        return Err(bad("empty key"));
    }
    let value = parse_override_value(raw);
    let mut segments = path.split('.').peekable();
    let mut current = table;
    loop {
        let segment = segments.next().expect("split yields at least one segment");
        if segment.is_empty() {
            return Err(bad("empty path segment"));
        }
        if segments.peek().is_none() {
            current.insert(segment.to_string(), value);
            return Ok(());
        }
        let entry = current
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| bad(&format!("`{segment}` is not a table")))?;
    }
}

/// Interprets the override's right-hand side as a TOML value (so numbers,
/// booleans, and arrays work); anything unparseable is taken as a bare
/// string, which lets users write `m_dist.kind=zeta` without quotes.
fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed table has key v"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
