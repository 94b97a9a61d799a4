//! Statistical test machinery used by the verification harness: chi-square
//! goodness of fit, two-sample Kolmogorov-Smirnov, and least-squares line
//! fitting. Pure functions, no_std friendly; p-value special functions are
//! hand-rolled and pinned against external references in the tests.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {need} data points, got {got}")]
    Insufficient { need: usize, got: usize },
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("expected counts must be positive and finite")]
    BadExpected,
}

/// Regularized lower incomplete gamma `P(a, x)`; series for `x < a + 1`,
/// continued fraction otherwise (Numerical Recipes construction).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if !(a > 0.0) || !(x >= 0.0) {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_contfrac(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if !(a > 0.0) || !(x >= 0.0) {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_contfrac(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * libm::exp(-x + a * libm::log(x) - libm::lgamma(a))
}

fn gamma_q_contfrac(a: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    libm::exp(-x + a * libm::log(x) - libm::lgamma(a)) * h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub stat: f64,
    pub dof: usize,
    pub p: f64,
}

/// Pearson chi-square against expected cell counts, `dof = cells - 1`.
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> Result<ChiSquare, StatsError> {
    if observed.len() != expected.len() {
        return Err(StatsError::LengthMismatch(observed.len(), expected.len()));
    }
    if observed.len() < 2 {
        return Err(StatsError::Insufficient {
            need: 2,
            got: observed.len(),
        });
    }
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected.iter()) {
        if !(e > 0.0) || !e.is_finite() {
            return Err(StatsError::BadExpected);
        }
        let diff = o - e;
        stat += diff * diff / e;
    }
    let dof = observed.len() - 1;
    Ok(ChiSquare {
        stat,
        dof,
        p: gamma_q(dof as f64 / 2.0, stat / 2.0),
    })
}

/// Merges adjacent cells until every expected count reaches `min_expected`,
/// the usual validity fix for chi-square with sparse tails. A trailing
/// underfull bucket is folded into its predecessor.
pub fn pool_low_expected(
    observed: &[f64],
    expected: &[f64],
    min_expected: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &e) in observed.iter().zip(expected.iter()) {
        acc_o += o;
        acc_e += e;
        if acc_e >= min_expected {
            obs.push(acc_o);
            exp.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            obs.push(acc_o);
            exp.push(acc_e);
        }
    }
    (obs, exp)
}

/// Complementary CDF of the Kolmogorov statistic, `Q_KS(z)`; the two-branch
/// expansion keeps full accuracy on both ends.
pub fn ks_complement_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        let pi = core::f64::consts::PI;
        let t = libm::exp(-pi * pi / (8.0 * z * z));
        let y = libm::sqrt(2.0 * pi) / z
            * (t + libm::pow(t, 9.0) + libm::pow(t, 25.0) + libm::pow(t, 49.0));
        1.0 - y
    } else {
        let t = libm::exp(-2.0 * z * z);
        2.0 * (t - libm::pow(t, 4.0) + libm::pow(t, 9.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ks2 {
    pub stat: f64,
    pub p: f64,
}

/// Two-sample Kolmogorov-Smirnov with the finite-sample-corrected asymptotic
/// p-value.
pub fn ks2_test(sample_a: &[f64], sample_b: &[f64]) -> Result<Ks2, StatsError> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(StatsError::Insufficient {
            need: 1,
            got: 0,
        });
    }
    let mut a: Vec<f64> = sample_a.to_vec();
    let mut b: Vec<f64> = sample_b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let mut i = 0;
    let mut j = 0;
    let mut stat = 0.0f64;
    while i < na && j < nb {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / na as f64 - j as f64 / nb as f64).abs();
        if diff > stat {
            stat = diff;
        }
    }
    let ne = (na as f64 * nb as f64) / (na as f64 + nb as f64);
    let sqrt_ne = libm::sqrt(ne);
    let p = ks_complement_cdf((sqrt_ne + 0.12 + 0.11 / sqrt_ne) * stat);
    Ok(Ks2 { stat, p })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope estimate.
    pub slope_se: f64,
}

/// Ordinary least squares `y = slope * x + intercept`; needs >= 3 points for
/// the slope standard error.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::Insufficient { need: 3, got: n });
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(StatsError::BadExpected);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut sse = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        let r = y - (slope * x + intercept);
        sse += r * r;
    }
    let slope_se = libm::sqrt(sse / (nf - 2.0) / sxx);
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation percentile (`q` in [0, 1]) on a sorted slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    percentile(&v, 0.5)
}
