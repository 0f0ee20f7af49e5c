//! Cross-metric delta conversion at equal estimated accuracy, and threshold tables.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::calibration::{
    estimated_accuracy, threshold_for_accuracy, threshold_key, CalibrationError, CalibrationSet, Threshold,
    THRESHOLD_LEVELS,
};

/// A delta in one metric and the delta in another with the same estimated accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equivalence {
    pub from_metric: String,
    pub to_metric: String,
    pub from_delta: f64,
    pub accuracy: f64,
    /// `None` when `accuracy` is at or above the target's asymptote.
    pub to_delta: Option<f64>,
    /// The accuracy sits at or below the target metric's `f(0)`, so `to_delta`
    /// was clamped to 0.
    pub below_floor: bool,
}

pub fn convert_delta(
    calibration: &CalibrationSet,
    from_metric: &str,
    delta: f64,
    to_metric: &str,
) -> Result<Equivalence, CalibrationError> {
    let from = calibration.get(from_metric)?;
    let to = calibration.get(to_metric)?;
    let accuracy = estimated_accuracy(&from.fit, delta)?;
    let (to_delta, below_floor) = if from_metric == to_metric {
        (Some(delta), false)
    } else {
        match threshold_for_accuracy(&to.fit, accuracy)? {
            Threshold::Reachable { delta, clamped } => (Some(delta), clamped),
            Threshold::Unreachable => (None, false),
        }
    };
    Ok(Equivalence {
        from_metric: from_metric.to_string(),
        to_metric: to_metric.to_string(),
        from_delta: delta,
        accuracy,
        to_delta,
        below_floor,
    })
}

/// Equivalents of one delta in every calibrated metric, in calibration order.
pub fn convert_to_all(
    calibration: &CalibrationSet,
    from_metric: &str,
    delta: f64,
) -> Result<Vec<Equivalence>, CalibrationError> {
    calibration
        .metrics()
        .into_iter()
        .map(|to| convert_delta(calibration, from_metric, delta, to))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub metric: String,
    pub precision: usize,
    /// One per level; `None` is unreachable.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub levels: Vec<f64>,
    pub rows: Vec<ThresholdRow>,
}

/// Thresholds per metric and accuracy level. Stored cells are used for the
/// standard levels; other levels come from the fitted inverse.
pub fn threshold_table(calibration: &CalibrationSet, levels: &[f64]) -> Result<ThresholdTable, CalibrationError> {
    if let Some(&bad) = levels.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(CalibrationError::InvalidAccuracy(bad));
    }
    let rows = calibration
        .entries
        .iter()
        .map(|entry| {
            let cells = levels
                .iter()
                .map(|&a| match entry.stored_threshold(a) {
                    Some(cell) => Ok(cell),
                    None => threshold_for_accuracy(&entry.fit, a).map(Threshold::delta),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ThresholdRow {
                metric: entry.metric().to_string(),
                precision: entry.precision,
                cells,
            })
        })
        .collect::<Result<Vec<_>, CalibrationError>>()?;
    Ok(ThresholdTable {
        levels: levels.to_vec(),
        rows,
    })
}

pub fn standard_table(calibration: &CalibrationSet) -> Result<ThresholdTable, CalibrationError> {
    threshold_table(calibration, &THRESHOLD_LEVELS)
}

fn format_cell(cell: Option<f64>, precision: usize) -> String {
    match cell {
        Some(x) => format!("{x:.precision$}"),
        None => "-".to_string(),
    }
}

fn level_header(level: f64) -> String {
    let pct = level * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{pct:.0}%")
    } else {
        format!("{pct}%")
    }
}

impl ThresholdTable {
    /// Column-aligned text: a header row of accuracy levels, then one row per metric.
    pub fn render_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        let mut header = vec!["Estimated Accuracy".to_string()];
        header.extend(self.levels.iter().map(|&l| level_header(l)));
        grid.push(header);
        for row in &self.rows {
            let mut line = vec![row.metric.clone()];
            line.extend(row.cells.iter().map(|&c| format_cell(c, row.precision)));
            grid.push(line);
        }
        let columns = grid[0].len();
        let widths: Vec<usize> = (0..columns)
            .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c == 0 {
                    line.push_str(&format!("{cell:<w$}", w = widths[0]));
                } else {
                    line.push_str(&format!("  {cell:>w$}", w = widths[c]));
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn render_tsv(&self) -> String {
        let mut out = String::from("metric");
        for &l in &self.levels {
            out.push('\t');
            out.push_str(&threshold_key(l));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.metric);
            for &c in &row.cells {
                out.push('\t');
                out.push_str(&format_cell(c, row.precision));
            }
            out.push('\n');
        }
        out
    }

    /// `{metric: {"0.50": value-or-null, ...}}` in the calibration JSON's thresholds shape.
    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        for row in &self.rows {
            let block: Map<String, Value> = self
                .levels
                .iter()
                .zip(&row.cells)
                .map(|(&l, &c)| (threshold_key(l), c.map_or(Value::Null, Value::from)))
                .collect();
            out.insert(row.metric.clone(), Value::Object(block));
        }
        Value::Object(out)
    }
}
