//! Delta-vs-accuracy curves, sigmoid fits and accuracy thresholds.
//!
//! Pipeline per metric: orient pairs so the metric delta is non-negative, build
//! nearest-`k` bins over a grid of delta levels, fit
//! `f(x) = phi1 / (1 + exp(-phi2 * x))` to the bin `(mean_delta, accuracy)`
//! points, then read thresholds off the closed-form inverse.

mod binning;
mod fit;
mod json;
mod validate;

pub use binning::{bin_curve, nearest_window, oriented_points, AccuracyBin, LevelGrid, OrientedPoint};
pub use fit::{fit_sigmoid, fit_sigmoid_best_of, fit_sigmoid_weighted, FitOptions, SigmoidFit};
pub use json::{calibration_from_json, calibration_to_json, threshold_key, validate_calibration_value};
pub use validate::{validate, ValidationPoint};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairing::PairSet;

/// Accuracy levels of the threshold table: 50% to 95% in steps of 5.
pub const THRESHOLD_LEVELS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

pub const DEFAULT_K: usize = 300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("no non-tied pairs for metric {0}")]
    EmptyPairSet(String),
    #[error("pair {pair} has no delta for metric {metric}")]
    MissingMetric { metric: String, pair: String },
    #[error("invalid level grid: {0}")]
    InvalidGrid(String),
    #[error("bin size k must be at least 1")]
    InvalidK,
    #[error("degenerate fit input: {0}")]
    DegenerateInput(String),
    #[error("delta must be a non-negative number, got {0}")]
    NegativeDelta(f64),
    #[error("accuracy must lie strictly between 0 and 1, got {0}")]
    InvalidAccuracy(f64),
    #[error("metric {0} is not calibrated")]
    MetricNotCalibrated(String),
    #[error("calibration JSON {path}: {reason}")]
    Schema { path: String, reason: String },
}

/// Delta needed for a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `clamped` is set when the target sits at or below `f(0)` and the delta
    /// was clamped to zero.
    Reachable { delta: f64, clamped: bool },
    /// The target is at or above the asymptote `phi1`.
    Unreachable,
}

impl Threshold {
    pub fn delta(self) -> Option<f64> {
        match self {
            Threshold::Reachable { delta, .. } => Some(delta),
            Threshold::Unreachable => None,
        }
    }
}

/// `f(delta)` under the fitted sigmoid.
pub fn estimated_accuracy(fit: &SigmoidFit, delta: f64) -> Result<f64, CalibrationError> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(CalibrationError::NegativeDelta(delta));
    }
    Ok(fit.eval(delta))
}

/// Inverse of [`estimated_accuracy`], clamped to `delta >= 0`.
pub fn threshold_for_accuracy(fit: &SigmoidFit, accuracy: f64) -> Result<Threshold, CalibrationError> {
    if !(accuracy > 0.0 && accuracy < 1.0) {
        return Err(CalibrationError::InvalidAccuracy(accuracy));
    }
    if accuracy >= fit.phi1 {
        return Ok(Threshold::Unreachable);
    }
    let x = -(fit.phi1 / accuracy - 1.0).ln() / fit.phi2;
    Ok(if x > 0.0 {
        Threshold::Reachable { delta: x, clamped: false }
    } else {
        Threshold::Reachable { delta: 0.0, clamped: true }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Each bin weighted by `1 / width`.
    InverseWidth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrateOptions {
    pub k: usize,
    pub grid: LevelGrid,
    pub weighting: Weighting,
    pub fit: FitOptions,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            grid: LevelGrid::default(),
            weighting: Weighting::Uniform,
            fit: FitOptions::default(),
        }
    }
}

/// Calibration of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCalibration {
    pub fit: SigmoidFit,
    pub curve: Vec<AccuracyBin>,
    pub k: usize,
    /// Fewer than `k` usable pairs: the curve is one saturated bin and the fit
    /// was made on the individual pairs.
    pub low_confidence: bool,
    /// One cell per [`THRESHOLD_LEVELS`] entry; `None` means unreachable.
    pub thresholds: Vec<Option<f64>>,
    /// Decimal places for display.
    pub precision: usize,
    pub provenance: Option<String>,
}

impl MetricCalibration {
    pub fn from_fit(fit: SigmoidFit, curve: Vec<AccuracyBin>, k: usize) -> Self {
        let thresholds = fitted_thresholds(&fit);
        let precision = default_precision(&thresholds);
        Self {
            fit,
            curve,
            k,
            low_confidence: false,
            thresholds,
            precision,
            provenance: None,
        }
    }

    pub fn metric(&self) -> &str {
        &self.fit.metric
    }

    /// Threshold cell for one of the [`THRESHOLD_LEVELS`], if that is what `level` is.
    pub fn stored_threshold(&self, level: f64) -> Option<Option<f64>> {
        THRESHOLD_LEVELS
            .iter()
            .position(|&l| (l - level).abs() < 1e-12)
            .and_then(|i| self.thresholds.get(i).copied())
    }
}

/// Closed-form thresholds for [`THRESHOLD_LEVELS`].
pub fn fitted_thresholds(fit: &SigmoidFit) -> Vec<Option<f64>> {
    THRESHOLD_LEVELS
        .iter()
        .map(|&a| threshold_for_accuracy(fit, a).ok().and_then(Threshold::delta))
        .collect()
}

/// Three decimals for metrics whose reachable thresholds all stay below 0.1, else two.
pub fn default_precision(thresholds: &[Option<f64>]) -> usize {
    let max = thresholds.iter().flatten().copied().fold(0.0, f64::max);
    if max > 0.0 && max < 0.1 {
        3
    } else {
        2
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationSet {
    /// In insertion order, which is the display order.
    pub entries: Vec<MetricCalibration>,
    /// Metrics that could not be calibrated.
    pub errors: Vec<(String, CalibrationError)>,
    pub k: usize,
    pub provenance: String,
}

impl CalibrationSet {
    pub fn get(&self, metric: &str) -> Result<&MetricCalibration, CalibrationError> {
        self.entries
            .iter()
            .find(|e| e.metric() == metric)
            .ok_or_else(|| CalibrationError::MetricNotCalibrated(metric.to_string()))
    }

    pub fn metrics(&self) -> Vec<&str> {
        self.entries.iter().map(MetricCalibration::metric).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn calibrate_metric(pairs: &PairSet, metric: &str, options: &CalibrateOptions) -> Result<MetricCalibration, CalibrationError> {
    if options.k == 0 {
        return Err(CalibrationError::InvalidK);
    }
    let points = oriented_points(pairs, metric)?;
    let mut calibration = if points.len() <= options.k {
        let deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
        let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        let bin = binning::summarize(mean, &deltas, points.iter().map(|p| p.agrees));
        let raw: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.delta, if p.agrees { 1.0 } else { 0.0 }))
            .collect();
        let mut cal = MetricCalibration::from_fit(fit_sigmoid(&raw, &options.fit)?, vec![bin], options.k);
        cal.low_confidence = true;
        cal
    } else {
        let curve = bin_curve(pairs, metric, options.k, &options.grid)?;
        let xy: Vec<(f64, f64)> = curve.iter().map(|b| (b.mean_delta, b.accuracy)).collect();
        let fit = match options.weighting {
            Weighting::Uniform => fit_sigmoid(&xy, &options.fit)?,
            Weighting::InverseWidth => {
                let w: Vec<f64> = curve.iter().map(|b| 1.0 / b.width.max(1e-9)).collect();
                fit_sigmoid_weighted(&xy, Some(&w), &options.fit)?
            }
        };
        MetricCalibration::from_fit(fit, curve, options.k)
    };
    calibration.fit.metric = metric.to_string();
    Ok(calibration)
}

/// Calibrates every metric independently; failures are collected per metric.
pub fn calibrate(pairs: &PairSet, metrics: &[String], options: &CalibrateOptions) -> CalibrationSet {
    let results: Vec<_> = metrics
        .par_iter()
        .map(|m| (m.clone(), calibrate_metric(pairs, m, options)))
        .collect();
    let mut set = CalibrationSet {
        k: options.k,
        provenance: pairs.provenance.join(" | "),
        ..Default::default()
    };
    for (metric, result) in results {
        match result {
            Ok(cal) => set.entries.push(cal),
            Err(e) => set.errors.push((metric, e)),
        }
    }
    set
}
