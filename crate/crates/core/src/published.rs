//! The published ToShip23 threshold table as a loadable calibration.
//!
//! Cells are kept verbatim. `phi1` and `phi2` are least-squares fits to each
//! row's reachable `(threshold, accuracy)` cells.

use crate::calibration::{
    calibration_from_json, default_precision, fit_sigmoid, CalibrationSet, FitOptions, MetricCalibration,
    THRESHOLD_LEVELS,
};

pub const PUBLISHED_METRICS: [&str; 10] = [
    "BLEU",
    "ChrF",
    "spBLEU-200",
    "Bleurt-default",
    "Bleurt20",
    "Comet20",
    "Comet22",
    "Comet21-QE",
    "CometKiwi22-QE",
    "xCOMET-XXL",
];

/// Rows follow [`PUBLISHED_METRICS`], columns [`THRESHOLD_LEVELS`].
pub const PUBLISHED_THRESHOLDS: [[Option<f64>; 10]; 10] = [
    [Some(0.27), Some(0.52), Some(0.78), Some(1.06), Some(1.39), Some(1.79), Some(2.34), Some(3.35), None, None],
    [Some(0.14), Some(0.33), Some(0.54), Some(0.76), Some(1.00), Some(1.28), Some(1.63), Some(2.12), Some(3.05), None],
    [Some(0.25), Some(0.52), Some(0.82), Some(1.13), Some(1.49), Some(1.91), Some(2.46), Some(3.28), Some(5.57), None],
    [Some(0.23), Some(0.66), Some(1.11), Some(1.59), Some(2.11), Some(2.71), Some(3.43), Some(4.39), Some(5.98), None],
    [Some(0.02), Some(0.17), Some(0.33), Some(0.49), Some(0.66), Some(0.85), Some(1.07), Some(1.35), Some(1.73), Some(2.44)],
    [Some(0.08), Some(0.36), Some(0.65), Some(0.96), Some(1.29), Some(1.67), Some(2.10), Some(2.66), Some(3.45), Some(5.10)],
    [Some(0.03), Some(0.10), Some(0.18), Some(0.26), Some(0.35), Some(0.45), Some(0.56), Some(0.71), Some(0.94), Some(1.53)],
    [Some(0.003), Some(0.008), Some(0.013), Some(0.019), Some(0.025), Some(0.032), Some(0.041), Some(0.052), Some(0.073), None],
    [Some(0.01), Some(0.08), Some(0.16), Some(0.24), Some(0.33), Some(0.42), Some(0.53), Some(0.67), Some(0.85), Some(1.18)],
    [Some(0.02), Some(0.19), Some(0.37), Some(0.56), Some(0.76), Some(0.98), Some(1.24), Some(1.55), Some(1.99), Some(2.74)],
];

pub const PUBLISHED_PROVENANCE: &str =
    "published ToShip23 thresholds (k = 300); cells verbatim, phi1/phi2 fitted to the reachable cells";

/// Bin size the published table was computed with.
pub const PUBLISHED_K: usize = 300;

/// The shipped `toship23-published.json`.
pub const BUNDLED_JSON: &str = include_str!("../data/toship23-published.json");

/// Reachable `(threshold, accuracy)` cells of one published row.
pub fn published_points(row: usize) -> Vec<(f64, f64)> {
    THRESHOLD_LEVELS
        .iter()
        .zip(PUBLISHED_THRESHOLDS[row])
        .filter_map(|(&a, cell)| cell.map(|x| (x, a)))
        .collect()
}

/// Builds the published calibration from the transcribed cells.
pub fn published_calibration() -> CalibrationSet {
    let entries = PUBLISHED_METRICS
        .iter()
        .enumerate()
        .map(|(row, &metric)| {
            let mut fit = fit_sigmoid(&published_points(row), &FitOptions::default())
                .expect("published rows have distinct thresholds");
            fit.metric = metric.to_string();
            fit.iterations = 0;
            let thresholds = PUBLISHED_THRESHOLDS[row].to_vec();
            MetricCalibration {
                precision: default_precision(&thresholds),
                fit,
                curve: Vec::new(),
                k: PUBLISHED_K,
                low_confidence: false,
                thresholds,
                provenance: Some(PUBLISHED_PROVENANCE.to_string()),
            }
        })
        .collect();
    CalibrationSet {
        entries,
        errors: Vec::new(),
        k: PUBLISHED_K,
        provenance: PUBLISHED_PROVENANCE.to_string(),
    }
}

/// Parses the shipped file.
pub fn bundled() -> CalibrationSet {
    let mut set = calibration_from_json(BUNDLED_JSON).expect("bundled calibration is valid");
    set.provenance = PUBLISHED_PROVENANCE.to_string();
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::calibration_to_json;

    #[test]
    fn shipped_file_matches_transcription() {
        let generated = calibration_to_json(&published_calibration());
        if std::env::var_os("MTCAL_REGENERATE").is_some() {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toship23-published.json");
            std::fs::write(path, &generated).unwrap();
        }
        assert_eq!(BUNDLED_JSON, generated, "run with MTCAL_REGENERATE=1 to refresh the data file");
    }

    #[test]
    fn bundled_loads() {
        let set = bundled();
        assert_eq!(set.metrics(), PUBLISHED_METRICS.to_vec());
        let chrf = set.get("ChrF").unwrap();
        assert_eq!(chrf.thresholds[8], Some(3.05));
        assert_eq!(chrf.thresholds[9], None);
        assert_eq!(set.get("Comet21-QE").unwrap().precision, 3);
        assert_eq!(set.get("BLEU").unwrap().precision, 2);
    }
}
