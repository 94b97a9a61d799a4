//! Model parameters and the edge-count distribution.
//!
//! A model is `(alpha, gamma, c_d, m)`: attachment weight exponent `alpha` in
//! (0,1), choice-set growth `d_n = c_d * n^gamma` with `gamma` in (0,1), and
//! an i.i.d. per-vertex edge count `m >= 1`. The limit theory assumes
//! `E m^2 < infinity`; the zeta law only satisfies that for `beta > 3`, which
//! the validator enforces unless explicitly overridden for exploratory runs.

use alloc::vec::Vec;

use rand::Rng;

/// How per-edge candidate sets are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerMode {
    /// `d` explicit weight-proportional draws, keep a max-degree candidate.
    Naive,
    /// One inverse-CDF draw of the max via `w = D * U^(1/d)`.
    #[default]
    FastClass,
}

/// How the real-valued `c_d * n^gamma` becomes a choice-set size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DRounding {
    #[default]
    Round,
    Ceil,
    /// Keep the real exponent; only meaningful for the fast sampler.
    RealExponent,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("edge-count pmf must have at least one atom")]
    EmptyPmf,
    #[error("edge-count values must be >= 1")]
    ZeroValue,
    #[error("probability {prob} for value {value} is negative or not finite")]
    BadProbability { value: u64, prob: f64 },
    #[error("edge-count pmf sums to {0}, expected 1 within 1e-12")]
    NotNormalized(f64),
    #[error("duplicate edge-count value {0}")]
    DuplicateValue(u64),
    #[error("zeta exponent beta = {0} is not normalizable (need beta > 1)")]
    BetaNotNormalizable(f64),
    #[error("zeta support must start at k_min >= 1")]
    ZeroKMin,
}

/// Supported edge-count laws.
#[derive(Debug, Clone, PartialEq)]
pub enum MKind {
    Deterministic(u64),
    FinitePmf { values: Vec<u64>, probs: Vec<f64> },
    Zeta { beta: f64, k_min: u64 },
}

/// An i.i.d. edge-count distribution on `{1, 2, ...}` with cached moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MDistribution {
    kind: MKind,
    /// Cumulative probabilities for `FinitePmf`; empty otherwise.
    cum: Vec<f64>,
    mean: f64,
    second_moment: f64,
}

impl MDistribution {
    pub fn deterministic(k: u64) -> Result<Self, ParamError> {
        if k == 0 {
            return Err(ParamError::ZeroValue);
        }
        let kf = k as f64;
        Ok(MDistribution {
            kind: MKind::Deterministic(k),
            cum: Vec::new(),
            mean: kf,
            second_moment: kf * kf,
        })
    }

    /// Finite support; atoms need not be sorted but must be distinct, with
    /// probabilities summing to 1 within 1e-12.
    pub fn finite_pmf(atoms: &[(u64, f64)]) -> Result<Self, ParamError> {
        if atoms.is_empty() {
            return Err(ParamError::EmptyPmf);
        }
        let mut sorted: Vec<(u64, f64)> = atoms.to_vec();
        sorted.sort_unstable_by_key(|&(k, _)| k);
        let mut sum = 0.0;
        for window in sorted.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(ParamError::DuplicateValue(window[0].0));
            }
        }
        for &(k, p) in &sorted {
            if k == 0 {
                return Err(ParamError::ZeroValue);
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(ParamError::BadProbability { value: k, prob: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ParamError::NotNormalized(sum));
        }
        let mut cum = Vec::with_capacity(sorted.len());
        let mut acc = 0.0;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for &(k, p) in &sorted {
            acc += p;
            cum.push(acc);
            mean += k as f64 * p;
            m2 += (k as f64) * (k as f64) * p;
        }
        let (values, probs) = sorted.into_iter().unzip();
        Ok(MDistribution {
            kind: MKind::FinitePmf { values, probs },
            cum,
            mean,
            second_moment: m2,
        })
    }

    /// `Pr(m = k)` proportional to `k^-beta` on `{k_min, k_min + 1, ...}`.
    pub fn zeta(beta: f64, k_min: u64) -> Result<Self, ParamError> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(ParamError::BetaNotNormalizable(beta));
        }
        if k_min == 0 {
            return Err(ParamError::ZeroKMin);
        }
        let norm = zeta_tail_sum(beta, k_min);
        let mean = if beta > 2.0 {
            zeta_tail_sum(beta - 1.0, k_min) / norm
        } else {
            f64::INFINITY
        };
        let second_moment = if beta > 3.0 {
            zeta_tail_sum(beta - 2.0, k_min) / norm
        } else {
            f64::INFINITY
        };
        Ok(MDistribution {
            kind: MKind::Zeta { beta, k_min },
            cum: Vec::new(),
            mean,
            second_moment,
        })
    }

    pub fn kind(&self) -> &MKind {
        &self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `E m^alpha`; finite for every supported law when `alpha < 1` and
    /// `beta > 1 + alpha`, accurate to about 1e-12 for the zeta tail sums.
    pub fn moment_alpha(&self, alpha: f64) -> f64 {
        match &self.kind {
            MKind::Deterministic(k) => libm::pow(*k as f64, alpha),
            MKind::FinitePmf { values, probs } => values
                .iter()
                .zip(probs.iter())
                .map(|(&k, &p)| p * libm::pow(k as f64, alpha))
                .sum(),
            MKind::Zeta { beta, k_min } => {
                if beta - alpha <= 1.0 {
                    f64::INFINITY
                } else {
                    zeta_tail_sum(beta - alpha, *k_min) / zeta_tail_sum(*beta, *k_min)
                }
            }
        }
    }

    /// Exact pmf value `Pr(m = k)`.
    pub fn pmf(&self, k: u64) -> f64 {
        match &self.kind {
            MKind::Deterministic(v) => {
                if k == *v {
                    1.0
                } else {
                    0.0
                }
            }
            MKind::FinitePmf { values, probs } => values
                .iter()
                .position(|&v| v == k)
                .map(|i| probs[i])
                .unwrap_or(0.0),
            MKind::Zeta { beta, k_min } => {
                if k < *k_min {
                    0.0
                } else {
                    libm::pow(k as f64, -beta) / zeta_tail_sum(*beta, *k_min)
                }
            }
        }
    }

    /// One draw. Deterministic laws consume no randomness; the zeta law uses
    /// rejection from a continuous Pareto envelope (exact, O(1) expected).
    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        match &self.kind {
            MKind::Deterministic(k) => *k,
            MKind::FinitePmf { values, .. } => {
                let u: f64 = rng.random();
                let i = self.cum.partition_point(|&c| c <= u);
                values[i.min(values.len() - 1)]
            }
            MKind::Zeta { beta, k_min } => sample_zeta(*beta, *k_min, rng),
        }
    }

    /// Whether `Pr(m = k) <= c * k^-beta` holds with `beta > 1 + (1-alpha)/gamma`,
    /// the tail hypothesis behind the max-degree growth regimes. Finite-support
    /// laws satisfy it trivially.
    pub fn tail_condition_ok(&self, alpha: f64, gamma: f64) -> bool {
        match &self.kind {
            MKind::Deterministic(_) | MKind::FinitePmf { .. } => true,
            MKind::Zeta { beta, .. } => *beta > 1.0 + (1.0 - alpha) / gamma,
        }
    }
}

impl core::fmt::Display for MDistribution {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match &self.kind {
            MKind::Deterministic(k) => write!(f, "deterministic({})", k),
            MKind::FinitePmf { values, probs } => {
                write!(f, "pmf{{")?;
                for (i, (k, p)) in values.iter().zip(probs.iter()).enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}: {}", k, p)?;
                }
                write!(f, "}}")
            }
            MKind::Zeta { beta, k_min } => write!(f, "zeta(beta = {}, k_min = {})", beta, k_min),
        }
    }
}

/// `sum_{k >= k_min} k^-s` for `s > 1`: truncated series plus a midpoint
/// integral tail, absolute truncation error below ~1e-13.
fn zeta_tail_sum(s: f64, k_min: u64) -> f64 {
    debug_assert!(s > 1.0);
    // Euler-Maclaurin midpoint remainder: (s/24) * (K + 1/2)^-(s+1) <= 1e-13.
    let k_stop = libm::pow(s / (24.0 * 1e-13), 1.0 / (s + 1.0));
    let k_stop = (k_stop as u64).clamp(k_min + 64, 1 << 23);
    let mut acc = 0.0;
    // Sum ascending terms in reverse so small terms accumulate first.
    let mut k = k_stop;
    while k >= k_min {
        acc += libm::pow(k as f64, -s);
        k -= 1;
    }
    acc + libm::pow(k_stop as f64 + 0.5, 1.0 - s) / (s - 1.0)
}

/// Devroye-style rejection for `Pr(k) ~ k^-beta`, `k >= k_min`.
fn sample_zeta(beta: f64, k_min: u64, rng: &mut impl Rng) -> u64 {
    let s = beta - 1.0;
    let a = k_min as f64;
    let b = libm::pow(1.0 + 1.0 / a, s);
    loop {
        let u: f64 = rng.random(); // [0, 1); 1 - u is in (0, 1]
        let v: f64 = rng.random();
        let x = libm::floor(a * libm::pow(1.0 - u, -1.0 / s));
        if !(x < 9.0e18) {
            // Resampling truncates only astronomically remote tails;
            // unreachable in practice for beta > 3.
            continue;
        }
        let t = libm::pow(1.0 + 1.0 / x, s);
        // Accept with probability [t / (x (t - 1))] * [a (b - 1) / b], the
        // ratio of the target pmf to the Pareto envelope cell mass.
        if v * x * (t - 1.0) * b <= t * a * (b - 1.0) {
            return x as u64;
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("alpha = {0} outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("gamma = {0} outside (0, 1)")]
    GammaOutOfRange(f64),
    #[error("c_d = {0} must be positive and finite")]
    NonPositiveCd(f64),
    #[error("horizon = {0} must be at least 2")]
    HorizonTooSmall(u64),
    #[error("real-exponent choice sizes require the fast sampler")]
    RealExponentNeedsFastSampler,
    #[error("E m^2 is infinite; the limit theory assumes E m^2 < infinity (set allow_infinite_second_moment to explore anyway)")]
    InfiniteSecondMoment,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Warning {
    #[error("E m^2 is infinite; running outside the supported theory")]
    InfiniteSecondMomentOverridden,
    #[error("edge-count tail exponent beta = {beta} does not satisfy beta > {required}; max-degree predictions are unreliable")]
    TailConditionFails { beta: f64, required: f64 },
}

/// Outcome of `ModelParams::validate`: empty `violations` means runnable.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Full model specification for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub gamma: f64,
    pub c_d: f64,
    pub m_dist: MDistribution,
    pub sampler_mode: SamplerMode,
    pub d_rounding: DRounding,
    pub seed: u64,
    pub horizon: u64,
    pub allow_infinite_second_moment: bool,
}

impl ModelParams {
    pub fn new(alpha: f64, gamma: f64, c_d: f64, m_dist: MDistribution) -> Self {
        ModelParams {
            alpha,
            gamma,
            c_d,
            m_dist,
            sampler_mode: SamplerMode::default(),
            d_rounding: DRounding::default(),
            seed: 0,
            horizon: 1000,
            allow_infinite_second_moment: false,
        }
    }

    /// Choice-set size for the vertex arriving at step `n`: `c_d * n^gamma`,
    /// rounded per `d_rounding` and clamped below at 1. Exact integer values
    /// under `Round`/`Ceil`.
    pub fn sample_size(&self, n: u64) -> f64 {
        let raw = self.c_d * libm::pow(n as f64, self.gamma);
        let d = match self.d_rounding {
            DRounding::Round => libm::round(raw),
            DRounding::Ceil => libm::ceil(raw),
            DRounding::RealExponent => raw,
        };
        d.max(1.0)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            report.violations.push(Violation::AlphaOutOfRange(self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            report.violations.push(Violation::GammaOutOfRange(self.gamma));
        }
        if !(self.c_d > 0.0 && self.c_d.is_finite()) {
            report.violations.push(Violation::NonPositiveCd(self.c_d));
        }
        if self.horizon < 2 {
            report.violations.push(Violation::HorizonTooSmall(self.horizon));
        }
        if self.d_rounding == DRounding::RealExponent && self.sampler_mode == SamplerMode::Naive {
            report.violations.push(Violation::RealExponentNeedsFastSampler);
        }
        if self.m_dist.second_moment().is_infinite() {
            if self.allow_infinite_second_moment {
                report.warnings.push(Warning::InfiniteSecondMomentOverridden);
            } else {
                report.violations.push(Violation::InfiniteSecondMoment);
            }
        }
        if self.alpha > 0.0
            && self.alpha < 1.0
            && self.gamma > 0.0
            && self.gamma < 1.0
            && !self.m_dist.tail_condition_ok(self.alpha, self.gamma)
        {
            if let MKind::Zeta { beta, .. } = self.m_dist.kind() {
                report.warnings.push(Warning::TailConditionFails {
                    beta: *beta,
                    required: 1.0 + (1.0 - self.alpha) / self.gamma,
                });
            }
        }
        report
    }
}
