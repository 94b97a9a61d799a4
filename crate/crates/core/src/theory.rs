//! Closed-form predictions for the limiting behaviour of the maximum degree
//! and the attachment-class law implied by max-of-`d` weighted sampling.
//!
//! With `N(k)` vertices of degree `k`, total weight `D = sum_k N(k) k^alpha`
//! and prefix weights `D(k)`, one attachment lands in class `k` with
//! probability
//!
//! ```text
//! (D(k)/D)^d - (D(k-1)/D)^d
//! ```
//!
//! The growth of the maximum degree `M(n)` splits into three regimes by
//! `alpha + gamma`:
//!
//! * below 1: `M(n) / n^(gamma/(1-alpha)) -> x*`,
//! * equal 1: `M(n) / n -> rho*`, the unique root in (0, 1] of
//!   `1 - exp(-c_d x^alpha / E m^alpha) - x`,
//! * above 1: `M(n) / n -> E m` (the new vertex's edges all but surely reach
//!   the current leader).

use alloc::vec::Vec;

use crate::index::DegreeClassIndex;
use crate::params::ModelParams;

/// Width of the `alpha + gamma = 1` boundary band.
pub const CRITICAL_EPS: f64 = 1e-12;

const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl core::fmt::Display for Regime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    #[error("prediction requires the {expected} regime, parameters are {actual}")]
    RegimeMismatch { expected: Regime, actual: Regime },
    #[error("could not bracket a root in (0, 1]")]
    BracketFailure,
}

/// Classifies by the sign of `alpha + gamma - 1` with a 1e-12 boundary band.
pub fn classify_regime(alpha: f64, gamma: f64) -> Regime {
    let excess = alpha + gamma - 1.0;
    if excess.abs() <= CRITICAL_EPS {
        Regime::Critical
    } else if excess < 0.0 {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    }
}

/// Subcritical prefactor: `M(n) ~ x* n^(gamma/(1-alpha))` with
///
/// ```text
/// x*  = (c_d E m (1-alpha) / (gamma E m^alpha))^(1/(1-alpha))
/// alt = ((E m)^(1-gamma) (1-alpha) / (gamma E m^alpha))^(1/(1-alpha))
/// ```
///
/// The two constants come from matching the lower- and upper-bound drift
/// arguments; they agree when `c_d = 1` and `m` is constant 1. The first is
/// the canonical prediction, the second is reported alongside it.
pub fn predict_x_star(params: &ModelParams) -> Result<(f64, f64), TheoryError> {
    let actual = classify_regime(params.alpha, params.gamma);
    if actual != Regime::Subcritical {
        return Err(TheoryError::RegimeMismatch {
            expected: Regime::Subcritical,
            actual,
        });
    }
    let em = params.m_dist.mean();
    let em_alpha = params.m_dist.moment_alpha(params.alpha);
    let one_minus = 1.0 - params.alpha;
    let inv = 1.0 / one_minus;
    let canonical = libm::pow(
        params.c_d * em * one_minus / (params.gamma * em_alpha),
        inv,
    );
    let alt = libm::pow(
        libm::pow(em, 1.0 - params.gamma) * one_minus / (params.gamma * em_alpha),
        inv,
    );
    Ok((canonical, alt))
}

/// Critical slope: the unique root in (0, 1] of
/// `g(x) = 1 - exp(-c_d x^alpha / E m^alpha) - x`, found by bisection to
/// 1e-12. `g` is positive near 0 (since `alpha < 1`) and strictly negative at
/// 1, so a sign-changing bracket always exists.
pub fn predict_rho_star(params: &ModelParams) -> Result<f64, TheoryError> {
    let actual = classify_regime(params.alpha, params.gamma);
    if actual != Regime::Critical {
        return Err(TheoryError::RegimeMismatch {
            expected: Regime::Critical,
            actual,
        });
    }
    let em_alpha = params.m_dist.moment_alpha(params.alpha);
    let g = |x: f64| -libm::expm1(-params.c_d * libm::pow(x, params.alpha) / em_alpha) - x;
    let mut lo = 0.5;
    while g(lo) <= 0.0 {
        lo /= 2.0;
        if lo < 1e-300 {
            return Err(TheoryError::BracketFailure);
        }
    }
    let mut hi = 1.0;
    if g(hi) >= 0.0 {
        return Err(TheoryError::BracketFailure);
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Assembled prediction for a parameter set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prediction {
    pub regime: Regime,
    /// Growth exponent `e` in `M(n) ~ const * n^e`.
    pub exponent: f64,
    /// `x*`, `rho*`, or `E m` depending on regime.
    pub constant: f64,
    /// Second subcritical constant from the upper-bound argument.
    pub alt_constant: Option<f64>,
    pub em: f64,
    pub em_alpha: f64,
    /// Whether the edge-count tail is light enough for the max-degree
    /// regime results to apply.
    pub tail_condition_ok: bool,
}

/// Regime classification plus the matching growth constant.
pub fn predict(params: &ModelParams) -> Result<Prediction, TheoryError> {
    let regime = classify_regime(params.alpha, params.gamma);
    let em = params.m_dist.mean();
    let em_alpha = params.m_dist.moment_alpha(params.alpha);
    let tail = params.m_dist.tail_condition_ok(params.alpha, params.gamma);
    let (exponent, constant, alt_constant) = match regime {
        Regime::Subcritical => {
            let (x_star, alt) = predict_x_star(params)?;
            (params.gamma / (1.0 - params.alpha), x_star, Some(alt))
        }
        Regime::Critical => (1.0, predict_rho_star(params)?, None),
        Regime::Supercritical => (1.0, em, None),
    };
    Ok(Prediction {
        regime,
        exponent,
        constant,
        alt_constant,
        em,
        em_alpha,
        tail_condition_ok: tail,
    })
}

/// Probability that one max-of-`d` attachment lands in each occupied degree
/// class: `(D(k)/D)^d - (D(k-1)/D)^d`, ascending in `k`. `d` may be any real
/// value >= 1.
pub fn attachment_class_pmf(index: &DegreeClassIndex, d: f64) -> Vec<(usize, f64)> {
    debug_assert!(d >= 1.0);
    let classes: Vec<(usize, u64)> = index.class_counts().collect();
    let total: f64 = classes
        .iter()
        .map(|&(k, c)| c as f64 * index.degree_weight(k))
        .sum();
    let mut out = Vec::with_capacity(classes.len());
    let mut prefix = 0.0;
    let mut prev_pow = 0.0;
    for &(k, c) in &classes {
        prefix += c as f64 * index.degree_weight(k);
        let pow = libm::pow(prefix / total, d);
        out.push((k, pow - prev_pow));
        prev_pow = pow;
    }
    out
}

/// One-step expected gain of the maximum degree, bracketed from the dynamics
/// of `M(n)`: with `L` vertices at the max,
///
/// ```text
/// E m (1 - (1 - M^alpha / D)^d)  <=  drift  <=  E m (1 - (1 - M^alpha L / D)^d)
/// ```
///
/// Bases are clamped to [0, 1], so a degenerate early graph with
/// `M^alpha L >= D` yields `upper = E m`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn drift_bounds(index: &DegreeClassIndex, d: f64, em: f64) -> DriftBounds {
    let m_pow = index.degree_weight(index.max_degree());
    let total = index.total_weight();
    let l = index.count_at_max() as f64;
    let base_lower = (1.0 - m_pow / total).clamp(0.0, 1.0);
    let base_upper = (1.0 - m_pow * l / total).clamp(0.0, 1.0);
    let lower = (em * (1.0 - libm::pow(base_lower, d))).clamp(0.0, em);
    let upper = (em * (1.0 - libm::pow(base_upper, d))).clamp(0.0, em);
    DriftBounds { lower, upper }
}
