//! Accuracy, Wolpaw information transfer rate and the paired t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::types::CommandLabel;

pub fn accuracy(predictions: &[CommandLabel], labels: &[CommandLabel]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::invalid("accuracy of an empty prediction list"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// `w log2 x` with `0 log2 0 = 0`.
fn xlog2(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * x.log2()
    }
}

/// Bits conveyed by one selection among `n_commands` at accuracy `p`:
///
/// ```text
/// B = log2 N + P log2 P + (1 - P) log2((1 - P) / (N - 1))
/// ```
///
/// with `0 * log2 0 = 0`.
pub fn bits_per_trial(p: f64, n_commands: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("accuracy {p} outside [0, 1]")));
    }
    if n_commands < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 commands, got {n_commands}"
        )));
    }
    let n = n_commands as f64;
    let q = 1.0 - p;
    // Same sum regrouped as P log2(NP) + Q log2(NQ/(N-1)); both logs are
    // exactly zero at P = 1/N, so chance level gives exactly 0 bits.
    Ok(xlog2(p, n * p) + xlog2(q, n * q / (n - 1.0)))
}

/// How many classifications happen per minute when converting bits per
/// trial into bits per minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "snake_case")]
pub enum TimeBase {
    /// One classification per stimulation window.
    Stimulation { seconds: f64 },
    /// One classification per measured (or supplied) compute interval.
    Compute { seconds_per_classification: f64 },
}

impl Default for TimeBase {
    fn default() -> Self {
        TimeBase::Stimulation { seconds: 5.0 }
    }
}

impl TimeBase {
    pub fn seconds_per_classification(&self) -> f64 {
        match *self {
            TimeBase::Stimulation { seconds } => seconds,
            TimeBase::Compute {
                seconds_per_classification,
            } => seconds_per_classification,
        }
    }

    pub fn classifications_per_minute(&self) -> Result<f64> {
        let s = self.seconds_per_classification();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid(format!(
                "seconds per classification must be positive, got {s}"
            )));
        }
        Ok(60.0 / s)
    }

    pub fn describe(&self) -> String {
        match *self {
            TimeBase::Stimulation { seconds } => {
                format!("stimulation time ({seconds} s/selection)")
            }
            TimeBase::Compute {
                seconds_per_classification,
            } => format!("compute time ({seconds_per_classification:.4} s/classification)"),
        }
    }
}

pub fn itr_bits_per_minute(bits: f64, per_minute: f64) -> Result<f64> {
    if !(per_minute.is_finite() && per_minute > 0.0) {
        return Err(Error::invalid(format!(
            "classifications per minute must be positive, got {per_minute}"
        )));
    }
    Ok(bits * per_minute)
}

/// Convenience: accuracy and command count straight to bits per minute.
pub fn itr_for(p: f64, n_commands: usize, base: &TimeBase) -> Result<f64> {
    itr_bits_per_minute(
        bits_per_trial(p, n_commands)?,
        base.classifications_per_minute()?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p_value: f64,
    pub df: usize,
    pub mean_difference: f64,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "paired t-test needs at least 2 pairs, got {n}"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    // Relative guard: a constant offset can leave rounding-level spread.
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if sd <= 1e-12 * scale.max(f64::MIN_POSITIVE) || sd == 0.0 {
        return Err(Error::Degenerate(
            "differences have zero variance; t is undefined".into(),
        ));
    }
    let t = mean / (sd / (n as f64).sqrt());
    let df = n - 1;
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest {
        t,
        p_value,
        df,
        mean_difference: mean,
    })
}
