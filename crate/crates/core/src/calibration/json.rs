//! Calibration JSON: a top-level array with one object per metric.
//!
//! Required fields: `metric, phi1, phi2, rmse, n_points, k, converged, curve,
//! thresholds`. `thresholds` maps `"0.50"` … `"0.95"` to a delta or `null`
//! (unreachable). Optional: `precision`, `low_confidence`, `provenance`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AccuracyBin, CalibrationError, CalibrationSet, MetricCalibration, SigmoidFit, THRESHOLD_LEVELS};

pub fn threshold_key(level: f64) -> String {
    format!("{level:.2}")
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    metric: String,
    phi1: f64,
    phi2: f64,
    rmse: f64,
    n_points: usize,
    k: usize,
    converged: bool,
    curve: Vec<AccuracyBin>,
    thresholds: BTreeMap<String, Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    precision: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    low_confidence: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> CalibrationError {
    CalibrationError::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

fn number(obj: &serde_json::Map<String, Value>, path: &str, field: &str) -> Result<f64, CalibrationError> {
    obj.get(field)
        .ok_or_else(|| schema(format!("{path}/{field}"), "missing"))?
        .as_f64()
        .ok_or_else(|| schema(format!("{path}/{field}"), "expected a number"))
}

fn count(obj: &serde_json::Map<String, Value>, path: &str, field: &str, min: u64) -> Result<(), CalibrationError> {
    let v = obj
        .get(field)
        .ok_or_else(|| schema(format!("{path}/{field}"), "missing"))?
        .as_u64()
        .ok_or_else(|| schema(format!("{path}/{field}"), "expected a non-negative integer"))?;
    if v < min {
        return Err(schema(format!("{path}/{field}"), format!("must be at least {min}")));
    }
    Ok(())
}

/// Structural and range checks; reports the first failing JSON path.
pub fn validate_calibration_value(value: &Value) -> Result<(), CalibrationError> {
    let entries = value.as_array().ok_or_else(|| schema("", "top level must be an array"))?;
    let mut seen = std::collections::HashSet::new();
    for (i, entry) in entries.iter().enumerate() {
        let path = format!("/{i}");
        let obj = entry.as_object().ok_or_else(|| schema(&path, "expected an object"))?;

        let metric = obj
            .get("metric")
            .and_then(Value::as_str)
            .ok_or_else(|| schema(format!("{path}/metric"), "expected a string"))?;
        if metric.is_empty() {
            return Err(schema(format!("{path}/metric"), "empty metric name"));
        }
        if !seen.insert(metric) {
            return Err(schema(format!("{path}/metric"), format!("duplicate metric {metric:?}")));
        }

        let phi1 = number(obj, &path, "phi1")?;
        if !(phi1 > 0.0 && phi1 <= 1.0) {
            return Err(schema(format!("{path}/phi1"), "must lie in (0, 1]"));
        }
        let phi2 = number(obj, &path, "phi2")?;
        if !(phi2 > 0.0 && phi2.is_finite()) {
            return Err(schema(format!("{path}/phi2"), "must be positive"));
        }
        if !(number(obj, &path, "rmse")? >= 0.0) {
            return Err(schema(format!("{path}/rmse"), "must be non-negative"));
        }
        count(obj, &path, "n_points", 0)?;
        count(obj, &path, "k", 1)?;
        if !obj.get("converged").is_some_and(Value::is_boolean) {
            return Err(schema(format!("{path}/converged"), "expected a boolean"));
        }

        let curve = obj
            .get("curve")
            .and_then(Value::as_array)
            .ok_or_else(|| schema(format!("{path}/curve"), "expected an array"))?;
        for (j, bin) in curve.iter().enumerate() {
            let bpath = format!("{path}/curve/{j}");
            let b = bin.as_object().ok_or_else(|| schema(&bpath, "expected an object"))?;
            number(b, &bpath, "level")?;
            number(b, &bpath, "mean_delta")?;
            let acc = number(b, &bpath, "accuracy")?;
            if !(0.0..=1.0).contains(&acc) {
                return Err(schema(format!("{bpath}/accuracy"), "must lie in [0, 1]"));
            }
            if !(number(b, &bpath, "width")? >= 0.0) {
                return Err(schema(format!("{bpath}/width"), "must be non-negative"));
            }
            count(b, &bpath, "count", 1)?;
        }

        let thresholds = obj
            .get("thresholds")
            .and_then(Value::as_object)
            .ok_or_else(|| schema(format!("{path}/thresholds"), "expected an object"))?;
        for level in THRESHOLD_LEVELS {
            let key = threshold_key(level);
            match thresholds.get(&key) {
                None => return Err(schema(format!("{path}/thresholds/{key}"), "missing")),
                Some(Value::Null) => {}
                Some(v) => {
                    if !v.as_f64().is_some_and(|x| x >= 0.0 && x.is_finite()) {
                        return Err(schema(
                            format!("{path}/thresholds/{key}"),
                            "expected null or a non-negative number",
                        ));
                    }
                }
            }
        }
        if let Some(extra) = thresholds.keys().find(|k| !THRESHOLD_LEVELS.iter().any(|&l| threshold_key(l) == **k)) {
            return Err(schema(format!("{path}/thresholds/{extra}"), "unexpected accuracy level"));
        }

        if let Some(p) = obj.get("precision") {
            if !p.as_u64().is_some_and(|p| p <= 10) {
                return Err(schema(format!("{path}/precision"), "expected an integer in 0..=10"));
            }
        }
        if obj.get("low_confidence").is_some_and(|v| !v.is_boolean()) {
            return Err(schema(format!("{path}/low_confidence"), "expected a boolean"));
        }
        if obj.get("provenance").is_some_and(|v| !v.is_string()) {
            return Err(schema(format!("{path}/provenance"), "expected a string"));
        }
    }
    Ok(())
}

pub fn calibration_from_json(text: &str) -> Result<CalibrationSet, CalibrationError> {
    let value: Value = serde_json::from_str(text).map_err(|e| schema("", format!("invalid JSON: {e}")))?;
    validate_calibration_value(&value)?;
    let records: Vec<Record> = serde_json::from_value(value).map_err(|e| schema("", e.to_string()))?;
    let k = records.first().map_or(0, |r| r.k);
    let entries = records
        .into_iter()
        .map(|r| {
            let thresholds: Vec<Option<f64>> = THRESHOLD_LEVELS
                .iter()
                .map(|&l| r.thresholds.get(&threshold_key(l)).copied().flatten())
                .collect();
            MetricCalibration {
                precision: r.precision.unwrap_or_else(|| super::default_precision(&thresholds)),
                fit: SigmoidFit {
                    metric: r.metric,
                    phi1: r.phi1,
                    phi2: r.phi2,
                    rmse: r.rmse,
                    n_points: r.n_points,
                    converged: r.converged,
                    iterations: 0,
                },
                curve: r.curve,
                k: r.k,
                low_confidence: r.low_confidence,
                thresholds,
                provenance: r.provenance,
            }
        })
        .collect();
    Ok(CalibrationSet {
        entries,
        errors: Vec::new(),
        k,
        provenance: "calibration JSON".into(),
    })
}

pub fn calibration_to_json(set: &CalibrationSet) -> String {
    let records: Vec<Record> = set
        .entries
        .iter()
        .map(|e| Record {
            metric: e.fit.metric.clone(),
            phi1: e.fit.phi1,
            phi2: e.fit.phi2,
            rmse: e.fit.rmse,
            n_points: e.fit.n_points,
            k: e.k,
            converged: e.fit.converged,
            curve: e.curve.clone(),
            thresholds: THRESHOLD_LEVELS
                .iter()
                .zip(&e.thresholds)
                .map(|(&l, &t)| (threshold_key(l), t))
                .collect(),
            precision: Some(e.precision),
            low_confidence: e.low_confidence,
            provenance: e.provenance.clone(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&records).expect("calibration serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CalibrationSet {
        let fit = SigmoidFit::from_params("BLEU", 0.88, 0.96);
        let bin = AccuracyBin {
            level: 1.0,
            mean_delta: 1.02,
            accuracy: 0.64,
            width: 0.2,
            count: 300,
        };
        CalibrationSet {
            entries: vec![MetricCalibration::from_fit(fit, vec![bin], 300)],
            ..Default::default()
        }
    }

    #[test]
    fn round_trip() {
        let set = sample();
        let text = calibration_to_json(&set);
        let back = calibration_from_json(&text).unwrap();
        assert_eq!(back.entries, set.entries);
        assert!(text.contains("\"0.90\": null"));
    }

    #[test]
    fn rejects_with_path() {
        let mut value: Value = serde_json::from_str(&calibration_to_json(&sample())).unwrap();
        value[0]["phi1"] = Value::from(1.5);
        match validate_calibration_value(&value) {
            Err(CalibrationError::Schema { path, .. }) => assert_eq!(path, "/0/phi1"),
            other => panic!("{other:?}"),
        }

        let mut value: Value = serde_json::from_str(&calibration_to_json(&sample())).unwrap();
        value[0]["thresholds"].as_object_mut().unwrap().remove("0.75");
        assert!(matches!(
            validate_calibration_value(&value),
            Err(CalibrationError::Schema { path, .. }) if path == "/0/thresholds/0.75"
        ));

        let mut value: Value = serde_json::from_str(&calibration_to_json(&sample())).unwrap();
        value[0]["curve"][0]["count"] = Value::from(0);
        assert!(validate_calibration_value(&value).is_err());

        assert!(calibration_from_json("[{\"metric\": \"x\"").is_err());
        assert!(calibration_from_json("{}").is_err());
    }
}
