//! Partial sums of nonnegative series with finite-depth convergence verdicts.

use serde::{Deserialize, Serialize};

use crate::numerics::CompensatedSum;

/// Relative tail threshold for a `Converged` verdict.
pub const DEFAULT_RTOL: f64 = 1e-4;
/// Level-to-level ratio at or above which a level is counted as non-decaying.
pub const NON_DECAY_RATIO: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    DivergingSuspected,
    Undecided,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::DivergingSuspected => "diverging_suspected",
            Verdict::Undecided => "undecided",
        }
    }
}

/// Per-level sums `L_1..L_n`, their partial sums `S_1..S_n` and a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub exponent: f64,
    pub level_sums: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    /// Geometric tail extrapolation, present only when the last levels decay.
    pub tail_bound: Option<f64>,
}

impl SeriesEstimate {
    /// Builds the estimate from level sums using the default thresholds.
    pub fn from_levels(exponent: f64, level_sums: Vec<f64>) -> Self {
        Self::from_levels_with(exponent, level_sums, DEFAULT_RTOL)
    }

    pub fn from_levels_with(exponent: f64, level_sums: Vec<f64>, rtol: f64) -> Self {
        let mut acc = CompensatedSum::new();
        let partial_sums: Vec<f64> = level_sums
            .iter()
            .map(|&l| {
                acc += l;
                acc.value()
            })
            .collect();
        let verdict = classify(&level_sums, &partial_sums, rtol);
        let tail_bound = geometric_tail(&level_sums);
        Self {
            exponent,
            level_sums,
            partial_sums,
            verdict,
            tail_bound,
        }
    }

    /// `S_n`, or zero for an empty series.
    pub fn value(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }

    pub fn depth(&self) -> usize {
        self.level_sums.len()
    }
}

/// Converged: each of the last three levels is below `rtol` of its partial sum.
/// Diverging suspected: each of the last three level-to-level ratios is at least
/// [`NON_DECAY_RATIO`]. Anything else is undecided.
pub fn classify(levels: &[f64], partial: &[f64], rtol: f64) -> Verdict {
    let n = levels.len();
    if n == 0 {
        return Verdict::Undecided;
    }
    if partial[n - 1] == 0.0 {
        return Verdict::Converged;
    }
    if n >= 3 && (n - 3..n).all(|k| partial[k] > 0.0 && levels[k] / partial[k] < rtol) {
        return Verdict::Converged;
    }
    if n >= 4 && (n - 3..n).all(|k| levels[k - 1] > 0.0 && levels[k] >= NON_DECAY_RATIO * levels[k - 1]) {
        return Verdict::DivergingSuspected;
    }
    Verdict::Undecided
}

fn geometric_tail(levels: &[f64]) -> Option<f64> {
    let n = levels.len();
    if n < 4 {
        return None;
    }
    let ratio = (n - 3..n).map(|k| levels[k] / levels[k - 1]).fold(0.0, f64::max);
    (ratio.is_finite() && ratio < 1.0).then(|| levels[n - 1] * ratio / (1.0 - ratio))
}
