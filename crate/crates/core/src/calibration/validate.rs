use serde::{Deserialize, Serialize};

use super::{binning, nearest_window, oriented_points, CalibrationError, CalibrationSet, LevelGrid};
use crate::pairing::PairSet;

/// Held-out accuracy of the `k` pairs whose estimated accuracy is nearest a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub level: f64,
    /// Mean estimated accuracy of the members, the value a perfect
    /// calibration would reproduce as `real_accuracy`.
    pub mean_estimated: f64,
    pub real_accuracy: f64,
    pub count: usize,
}

/// Checks a calibration against pairs it was not necessarily fitted on.
///
/// Levels whose nearest-`k` windows coincide are merged into one point placed
/// at their mean level.
pub fn validate(
    calibration: &CalibrationSet,
    held_out: &PairSet,
    metric: &str,
    k: usize,
    grid: &LevelGrid,
) -> Result<Vec<ValidationPoint>, CalibrationError> {
    let entry = calibration.get(metric)?;
    if k == 0 {
        return Err(CalibrationError::InvalidK);
    }
    let points = oriented_points(held_out, metric)?;
    // Sorted by delta, so estimates are sorted too.
    let estimates: Vec<f64> = points.iter().map(|p| entry.fit.eval(p.delta)).collect();
    let levels = grid.levels(&estimates)?;

    let mut out: Vec<ValidationPoint> = Vec::new();
    let mut last: Option<((usize, usize), f64, usize)> = None;
    let mut flush = |window: (usize, usize), level_sum: f64, n_levels: usize| {
        let (lo, hi) = window;
        let bin = binning::summarize(0.0, &estimates[lo..hi], points[lo..hi].iter().map(|p| p.agrees));
        out.push(ValidationPoint {
            level: level_sum / n_levels as f64,
            mean_estimated: bin.mean_delta,
            real_accuracy: bin.accuracy,
            count: bin.count,
        });
    };
    for level in levels {
        let window = nearest_window(&estimates, level, k);
        last = match last {
            Some((w, sum, n)) if w == window => Some((w, sum + level, n + 1)),
            Some((w, sum, n)) => {
                flush(w, sum, n);
                Some((window, level, 1))
            }
            None => Some((window, level, 1)),
        };
    }
    if let Some((w, sum, n)) = last {
        flush(w, sum, n);
    }
    Ok(out)
}
