use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::pairing::PairSet;

/// A pair reduced to its absolute metric delta and whether humans agree with the
/// metric's ranking.
///
/// Orienting each pair so the metric delta is non-negative turns sign agreement
/// into "human delta is positive". A zero metric delta never agrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint {
    pub delta: f64,
    pub agrees: bool,
}

/// Oriented points sorted by delta, with human ties dropped.
///
/// Ties in delta are ordered by the pair's orientation-free identity, so the
/// result does not depend on the input order of `pairs`.
pub fn oriented_points(pairs: &PairSet, metric: &str) -> Result<Vec<OrientedPoint>, CalibrationError> {
    let mut keyed = Vec::with_capacity(pairs.len());
    for p in &pairs.pairs {
        let d = p.metric_delta(metric).ok_or_else(|| CalibrationError::MissingMetric {
            metric: metric.to_string(),
            pair: p.label(),
        })?;
        if p.human_delta == 0.0 {
            continue;
        }
        let agrees = d != 0.0 && (d > 0.0) == (p.human_delta > 0.0);
        keyed.push((
            OrientedPoint {
                delta: d.abs(),
                agrees,
            },
            p.canonical_id(),
        ));
    }
    if keyed.is_empty() {
        return Err(CalibrationError::EmptyPairSet(metric.to_string()));
    }
    keyed.sort_by(|(a, ida), (b, idb)| a.delta.total_cmp(&b.delta).then_with(|| ida.cmp(idb)));
    Ok(keyed.into_iter().map(|(p, _)| p).collect())
}

/// Where to evaluate the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelGrid {
    /// Every distinct observed value; above `cap` distinct values, `cap`
    /// evenly spaced order statistics of them.
    Observed { cap: usize },
    Explicit { levels: Vec<f64> },
    /// `start, start + step, …` up to and including `end`.
    Range { start: f64, end: f64, step: f64 },
}

impl Default for LevelGrid {
    fn default() -> Self {
        LevelGrid::Observed { cap: 2000 }
    }
}

impl LevelGrid {
    /// Resolves the grid against sorted observed values.
    pub fn levels(&self, sorted_values: &[f64]) -> Result<Vec<f64>, CalibrationError> {
        let invalid = |m: &str| CalibrationError::InvalidGrid(m.to_string());
        let mut levels = match self {
            LevelGrid::Observed { cap } => {
                if *cap == 0 {
                    return Err(invalid("observed grid cap must be at least 1"));
                }
                let mut distinct = sorted_values.to_vec();
                distinct.dedup();
                if distinct.len() <= *cap {
                    distinct
                } else if *cap == 1 {
                    vec![distinct[distinct.len() / 2]]
                } else {
                    let last = distinct.len() - 1;
                    (0..*cap)
                        .map(|i| distinct[((i * last) as f64 / (*cap - 1) as f64).round() as usize])
                        .collect()
                }
            }
            LevelGrid::Explicit { levels } => {
                if levels.is_empty() {
                    return Err(invalid("explicit grid is empty"));
                }
                levels.clone()
            }
            LevelGrid::Range { start, end, step } => {
                if !(step.is_finite() && *step > 0.0 && start.is_finite() && end.is_finite() && start <= end) {
                    return Err(invalid("range grid needs finite start <= end and step > 0"));
                }
                let n = ((end - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + step * i as f64).collect()
            }
        };
        if levels.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(invalid("levels must be finite and non-negative"));
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(levels)
    }
}

/// The `k` pairs nearest in delta to one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBin {
    pub level: f64,
    pub mean_delta: f64,
    pub accuracy: f64,
    /// Largest minus smallest member delta.
    pub width: f64,
    pub count: usize,
}

/// Half-open index range `[start, end)` of the `k` values nearest to `level`
/// in a sorted slice. Equidistant candidates favour the lower side.
pub fn nearest_window(sorted: &[f64], level: f64, k: usize) -> (usize, usize) {
    let n = sorted.len();
    if k >= n {
        return (0, n);
    }
    let split = sorted.partition_point(|&d| d < level);
    let (mut lo, mut hi) = (split, split);
    while hi - lo < k {
        if lo > 0 && (hi == n || level - sorted[lo - 1] <= sorted[hi] - level) {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

pub(crate) fn summarize(level: f64, deltas: &[f64], agrees: impl Iterator<Item = bool>) -> AccuracyBin {
    let count = deltas.len();
    let agreeing = agrees.filter(|&a| a).count();
    AccuracyBin {
        level,
        mean_delta: deltas.iter().sum::<f64>() / count as f64,
        accuracy: agreeing as f64 / count as f64,
        width: deltas[count - 1] - deltas[0],
        count,
    }
}

/// Empirical accuracy curve from nearest-`k` bins, one bin per grid level.
pub fn bin_curve(
    pairs: &PairSet,
    metric: &str,
    k: usize,
    grid: &LevelGrid,
) -> Result<Vec<AccuracyBin>, CalibrationError> {
    if k == 0 {
        return Err(CalibrationError::InvalidK);
    }
    let points = oriented_points(pairs, metric)?;
    let deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    let levels = grid.levels(&deltas)?;
    Ok(levels
        .into_iter()
        .map(|level| {
            let (lo, hi) = nearest_window(&deltas, level, k);
            summarize(level, &deltas[lo..hi], points[lo..hi].iter().map(|p| p.agrees))
        })
        .collect())
}
