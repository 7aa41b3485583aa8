//! Series normalization for predictor input.

use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerMethod {
    MinMax,
    ZScore,
    Clip,
}

/// Fitted, invertible scaling of one series.
///
/// `MinMax` maps the fitting window into `[0,1]`; `ZScore` centers to mean 0
/// and scales by the population standard deviation; `Clip` clamps into the
/// fitted bounds and is the identity (hence invertible) inside them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalizer<S> {
    MinMax { min: S, max: S },
    ZScore { mean: S, stddev: S },
    Clip { lo: S, hi: S },
}

pub(crate) fn mean<S: Scalar>(series: &[S]) -> S {
    let n = S::from_usize(series.len()).unwrap();
    series.iter().fold(S::zero(), |a, &v| a + v) / n
}

/// Population variance (mean squared deviation).
pub(crate) fn variance<S: Scalar>(series: &[S]) -> S {
    let m = mean(series);
    let n = S::from_usize(series.len()).unwrap();
    series.iter().fold(S::zero(), |a, &v| a + (v - m) * (v - m)) / n
}

impl<S: Scalar> Normalizer<S> {
    /// Fits parameters on a non-empty series.
    ///
    /// A constant series is degenerate for `ZScore`; `MinMax` falls back to a
    /// unit range so the constant maps to 0.
    pub fn fit(series: &[S], method: NormalizerMethod) -> Result<Self, WorkloadError> {
        if series.is_empty() {
            return Err(WorkloadError::EmptySeries);
        }
        match method {
            NormalizerMethod::MinMax => {
                let min = series.iter().fold(S::infinity(), |a, &v| a.min(v));
                let max = series.iter().fold(S::neg_infinity(), |a, &v| a.max(v));
                let max = if max > min { max } else { min + S::one() };
                Ok(Normalizer::MinMax { min, max })
            }
            NormalizerMethod::ZScore => {
                let stddev = variance(series).sqrt();
                if stddev <= S::zero() {
                    return Err(WorkloadError::DegenerateSeries);
                }
                Ok(Normalizer::ZScore {
                    mean: mean(series),
                    stddev,
                })
            }
            NormalizerMethod::Clip => {
                let lo = series.iter().fold(S::infinity(), |a, &v| a.min(v));
                let hi = series.iter().fold(S::neg_infinity(), |a, &v| a.max(v));
                Ok(Normalizer::Clip { lo, hi })
            }
        }
    }

    /// Fits the requested method, degrading ZScore to a unit-range MinMax on
    /// constant series.
    pub fn fit_or_fallback(series: &[S], method: NormalizerMethod) -> Result<Self, WorkloadError> {
        match Self::fit(series, method) {
            Err(WorkloadError::DegenerateSeries) => Self::fit(series, NormalizerMethod::MinMax),
            other => other,
        }
    }

    pub fn apply(&self, x: S) -> S {
        match *self {
            Normalizer::MinMax { min, max } => (x - min) / (max - min),
            Normalizer::ZScore { mean, stddev } => (x - mean) / stddev,
            Normalizer::Clip { lo, hi } => x.max(lo).min(hi),
        }
    }

    pub fn invert(&self, y: S) -> S {
        match *self {
            Normalizer::MinMax { min, max } => min + y * (max - min),
            Normalizer::ZScore { mean, stddev } => mean + y * stddev,
            Normalizer::Clip { .. } => y,
        }
    }
}
