//! Probe file for checking another implementation of the closed forms
//! against this one.

use mtcal::calibration::{estimated_accuracy, threshold_for_accuracy, THRESHOLD_LEVELS};
use mtcal::conversion::convert_to_all;
use mtcal::{CalibrationSet, Threshold};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

pub const FORMAT: &str = "mtcal-test-vectors/1";
pub const TOLERANCE: f64 = 1e-6;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn probe_span(cal: &mtcal::calibration::MetricCalibration) -> f64 {
    let top = cal.thresholds.iter().flatten().copied().fold(0.0, f64::max);
    if top > 0.0 {
        1.5 * top
    } else {
        6.0 / cal.fit.phi2
    }
}

/// At least `probes` forward probes spread over all metrics, each converted
/// into every metric, plus inverse probes at the table levels and at one
/// below-floor and one unreachable accuracy per metric.
pub fn test_vectors(cal: &CalibrationSet, probes: usize, seed: u64) -> CliResult<Value> {
    let err = |e| CliError::domain("calibration", e);
    let per_metric = probes.div_ceil(cal.entries.len().max(1)).max(1);
    let mut forward = Vec::new();
    let mut inverse = Vec::new();
    for entry in &cal.entries {
        let span = probe_span(entry);
        for i in 0..per_metric {
            // Weyl sequence; index 0 pins the f(0) = phi1 / 2 case.
            let delta = if i == 0 {
                0.0
            } else {
                span * ((seed as f64 + i as f64) * GOLDEN).fract()
            };
            let accuracy = estimated_accuracy(&entry.fit, delta).map_err(err)?;
            let equivalents: Vec<Value> = convert_to_all(cal, entry.metric(), delta)
                .map_err(err)?
                .into_iter()
                .map(|e| json!({"metric": e.to_metric, "delta": e.to_delta, "below_floor": e.below_floor}))
                .collect();
            forward.push(json!({
                "metric": entry.metric(),
                "delta": delta,
                "accuracy": accuracy,
                "equivalents": equivalents,
            }));
        }
        let phi1 = entry.fit.phi1;
        let mut levels = THRESHOLD_LEVELS.to_vec();
        levels.push(phi1 / 4.0);
        if phi1 < 1.0 {
            levels.push((phi1 + 1.0) / 2.0);
        }
        for a in levels {
            let (threshold, clamped) = match threshold_for_accuracy(&entry.fit, a).map_err(err)? {
                Threshold::Reachable { delta, clamped } => (Some(delta), clamped),
                Threshold::Unreachable => (None, false),
            };
            inverse.push(json!({
                "metric": entry.metric(),
                "accuracy": a,
                "threshold": threshold,
                "clamped": clamped,
            }));
        }
    }
    Ok(json!({
        "format": FORMAT,
        "tolerance": TOLERANCE,
        "seed": seed,
        "metrics": cal.metrics(),
        "forward": forward,
        "inverse": inverse,
    }))
}
