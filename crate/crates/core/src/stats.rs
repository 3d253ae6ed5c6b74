//! Window statistics: moments, Pearson correlation, beta, skewness, the
//! rank-ordered revised skewness and Fisher confidence intervals.
//!
//! Every function is pure and works on plain `f64` slices. Volatility uses the
//! `n - 1` sample estimator; the two skewness statistics are shape statistics
//! and use population (`1 / n`) moments.

use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StatError {
    #[error("empty input")]
    Empty,
    #[error("need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero volatility")]
    ZeroVolatility,
    #[error("non-finite input")]
    NonFinite,
    #[error("correlation {0} is outside the open interval (-1, 1)")]
    CorrelationOutOfRange(f64),
}

/// Two-sided 97.5% standard normal quantile.
pub const Z_975: f64 = 1.959964;

/// Relative threshold under which a dispersion counts as zero.
const DEGENERATE_REL: f64 = 1e-12;

fn check_finite(x: &[f64]) -> Result<(), StatError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatError::NonFinite)
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// True when a standard deviation is zero up to rounding relative to the data scale.
pub(crate) fn is_degenerate(sd: f64, x: &[f64]) -> bool {
    sd <= DEGENERATE_REL * max_abs(x)
}

pub fn mean(x: &[f64]) -> Result<f64, StatError> {
    if x.is_empty() {
        return Err(StatError::Empty);
    }
    check_finite(x)?;
    Ok(x.iter().sum::<f64>() / x.len() as f64)
}

fn centered_sum_sq(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Sample standard deviation (`n - 1` denominator).
pub fn volatility(x: &[f64]) -> Result<f64, StatError> {
    if x.len() < 2 {
        return Err(StatError::TooShort { need: 2, got: x.len() });
    }
    let m = mean(x)?;
    Ok(libm::sqrt(centered_sum_sq(x, m) / (x.len() - 1) as f64))
}

fn nondegenerate_volatility(x: &[f64]) -> Result<f64, StatError> {
    let sd = volatility(x)?;
    if is_degenerate(sd, x) {
        return Err(StatError::ZeroVolatility);
    }
    Ok(sd)
}

pub fn sharpe(x: &[f64]) -> Result<f64, StatError> {
    let sd = nondegenerate_volatility(x)?;
    Ok(mean(x)? / sd)
}

fn check_pair(x: &[f64], y: &[f64], need: usize) -> Result<(), StatError> {
    if x.len() != y.len() {
        return Err(StatError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < need {
        return Err(StatError::TooShort { need, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)
}

/// Sample covariance (`n - 1` denominator).
pub fn covariance(x: &[f64], y: &[f64]) -> Result<f64, StatError> {
    check_pair(x, y, 2)?;
    let (mx, my) = (mean(x)?, mean(y)?);
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(s / (x.len() - 1) as f64)
}

/// Pearson correlation, clamped to `[-1, 1]`.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64, StatError> {
    check_pair(x, y, 3)?;
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let n1 = (x.len() - 1) as f64;
    if is_degenerate(libm::sqrt(sxx / n1), x) || is_degenerate(libm::sqrt(syy / n1), y) {
        return Err(StatError::ZeroVolatility);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Least-squares slope of `x` on the benchmark `b`, i.e. `rho * sd(x) / sd(b)`.
pub fn beta(x: &[f64], b: &[f64]) -> Result<f64, StatError> {
    check_pair(x, b, 3)?;
    let (mx, mb) = (mean(x)?, mean(b)?);
    let (mut sxb, mut sbb) = (0.0, 0.0);
    for (a, c) in x.iter().zip(b) {
        sxb += (a - mx) * (c - mb);
        sbb += (c - mb) * (c - mb);
    }
    if is_degenerate(libm::sqrt(sbb / (b.len() - 1) as f64), b) {
        return Err(StatError::ZeroVolatility);
    }
    Ok(sxb / sbb)
}

fn population_moments(x: &[f64]) -> Result<(f64, f64), StatError> {
    if x.len() < 3 {
        return Err(StatError::TooShort { need: 3, got: x.len() });
    }
    let m = mean(x)?;
    let sd = libm::sqrt(centered_sum_sq(x, m) / x.len() as f64);
    if is_degenerate(sd, x) {
        return Err(StatError::ZeroVolatility);
    }
    Ok((m, sd))
}

/// Third standardized moment with population moments.
pub fn skewness(x: &[f64]) -> Result<f64, StatError> {
    let (m, sd) = population_moments(x)?;
    let third: f64 = x.iter().map(|v| libm::pow((v - m) / sd, 3.0)).sum();
    Ok(third / x.len() as f64)
}

/// Rank-ordered skewness.
///
/// Standardize to zero mean and unit (population) variance, order by absolute
/// value ascending (negative first on exact ties, then by time), accumulate
/// the ordered values and return `-(2 / n^2) * sum_k C_k`. A few steep
/// losses keep the running sum positive until the very end, which makes the
/// statistic negative; a right-skewed series gives a positive value.
pub fn revised_skewness(x: &[f64]) -> Result<f64, StatError> {
    let (m, sd) = population_moments(x)?;
    let mut z: Vec<(f64, usize)> = x.iter().enumerate().map(|(i, v)| ((v - m) / sd, i)).collect();
    z.sort_by(|a, b| {
        a.0.abs()
            .total_cmp(&b.0.abs())
            .then_with(|| a.0.is_sign_positive().cmp(&b.0.is_sign_positive()))
            .then_with(|| a.1.cmp(&b.1))
    });
    let mut running = 0.0;
    let mut area = 0.0;
    for (v, _) in &z {
        running += v;
        area += running;
    }
    let n = x.len() as f64;
    Ok(-2.0 * area / (n * n))
}

/// Correlation with its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub rho: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl CorrelationEstimate {
    /// Estimate with a Fisher interval, or a zero-width interval when
    /// `|rho| = 1` exactly.
    pub fn from_sample(rho: f64, n: usize) -> Result<Self, StatError> {
        if rho.abs() >= 1.0 {
            if n < 4 {
                return Err(StatError::TooShort { need: 4, got: n });
            }
            return Ok(Self { rho, ci_low: rho, ci_high: rho, n });
        }
        fisher_ci(rho, n)
    }
}

/// 95% interval from the Fisher z-transform: `tanh(atanh(rho) +- 1.959964 / sqrt(n - 3))`.
pub fn fisher_ci(rho: f64, n: usize) -> Result<CorrelationEstimate, StatError> {
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(StatError::CorrelationOutOfRange(rho));
    }
    if n < 4 {
        return Err(StatError::TooShort { need: 4, got: n });
    }
    let z = libm::atanh(rho);
    let half = Z_975 / libm::sqrt((n - 3) as f64);
    Ok(CorrelationEstimate {
        rho,
        ci_low: libm::tanh(z - half).clamp(-1.0, rho),
        ci_high: libm::tanh(z + half).clamp(rho, 1.0),
        n,
    })
}

/// Per-asset summary over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowStats {
    pub mean: f64,
    pub volatility: f64,
    pub sharpe: f64,
    pub skewness: f64,
    pub revised_skewness: f64,
}

impl WindowStats {
    pub fn compute(x: &[f64]) -> Result<Self, StatError> {
        Ok(Self {
            mean: mean(x)?,
            volatility: nondegenerate_volatility(x)?,
            sharpe: sharpe(x)?,
            skewness: skewness(x)?,
            revised_skewness: revised_skewness(x)?,
        })
    }
}
