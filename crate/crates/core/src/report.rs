//! Per-pair metric disagreement matrix around a pivot-metric delta.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::pairing::{PairSet, SystemPair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("no pair has |{pivot}| delta in [{low}, {high}]")]
    EmptySelection { pivot: String, low: f64, high: f64 },
    #[error("pivot metric {0} is missing from the pair set")]
    MissingPivot(String),
    #[error("invalid delta window: center and radius must be finite, radius non-negative")]
    InvalidWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisagreementCell {
    /// Signed, with the pair oriented so the pivot delta is non-negative.
    pub delta: f64,
    /// The metric ranks the pair differently from humans (a zero metric delta
    /// against a non-zero human delta counts).
    pub disagrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisagreementReport {
    pub pivot: String,
    pub metrics: Vec<String>,
    /// Selected pairs, oriented so the pivot delta is non-negative.
    pub pairs: Vec<SystemPair>,
    /// `cells[m][p]` for metric `m` and pair `p`; `None` when the pair lacks the metric.
    pub cells: Vec<Vec<Option<DisagreementCell>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementOptions {
    pub center: f64,
    pub radius: f64,
    /// Keep at most this many selected pairs, drawn with `seed`.
    pub limit: Option<usize>,
    pub seed: u64,
}

fn disagrees(metric_delta: f64, human_delta: f64) -> bool {
    human_delta != 0.0 && !(metric_delta != 0.0 && (metric_delta > 0.0) == (human_delta > 0.0))
}

pub fn disagreement_report(
    pairs: &PairSet,
    metrics: &[String],
    pivot: &str,
    options: &DisagreementOptions,
) -> Result<DisagreementReport, ReportError> {
    if !(options.center.is_finite() && options.radius.is_finite() && options.radius >= 0.0) {
        return Err(ReportError::InvalidWindow);
    }
    if !pairs.pairs.iter().any(|p| p.metric_delta(pivot).is_some()) {
        return Err(ReportError::MissingPivot(pivot.to_string()));
    }
    let (low, high) = (options.center - options.radius, options.center + options.radius);
    let mut selected: Vec<SystemPair> = pairs
        .pairs
        .iter()
        .filter_map(|p| {
            let d = p.metric_delta(pivot)?;
            (low..=high).contains(&d.abs()).then(|| if d < 0.0 { p.swapped() } else { p.clone() })
        })
        .collect();
    if selected.is_empty() {
        return Err(ReportError::EmptySelection {
            pivot: pivot.to_string(),
            low,
            high,
        });
    }
    if let Some(limit) = options.limit {
        if limit < selected.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            let mut keep = sample(&mut rng, selected.len(), limit).into_vec();
            keep.sort_unstable();
            selected = keep.into_iter().map(|i| selected[i].clone()).collect();
        }
    }
    let cells = metrics
        .iter()
        .map(|m| {
            selected
                .iter()
                .map(|p| {
                    p.metric_delta(m).map(|d| DisagreementCell {
                        delta: d,
                        disagrees: disagrees(d, p.human_delta),
                    })
                })
                .collect()
        })
        .collect();
    Ok(DisagreementReport {
        pivot: pivot.to_string(),
        metrics: metrics.to_vec(),
        pairs: selected,
        cells,
    })
}

impl DisagreementReport {
    pub fn flagged(&self) -> usize {
        self.cells.iter().flatten().flatten().filter(|c| c.disagrees).count()
    }

    /// Rows are metrics, columns pairs; disagreeing cells carry a trailing `*`.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("metric");
        for p in &self.pairs {
            out.push('\t');
            out.push_str(&p.label());
        }
        out.push_str("\nhuman");
        for p in &self.pairs {
            out.push_str(&format!("\t{}", p.human_delta));
        }
        out.push('\n');
        for (m, row) in self.metrics.iter().zip(&self.cells) {
            out.push_str(m);
            for cell in row {
                out.push('\t');
                match cell {
                    Some(c) => out.push_str(&format!("{:.3}{}", c.delta, if c.disagrees { "*" } else { "" })),
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{DirectionGroup, Relation};

    fn pair(name: &str, human: f64, deltas: &[(&str, f64)]) -> SystemPair {
        SystemPair {
            dataset: "d".into(),
            lang_pair: "en-de".into(),
            sys_a: format!("{name}a"),
            sys_b: format!("{name}b"),
            human_delta: human,
            metric_deltas: deltas.iter().map(|(m, d)| (m.to_string(), *d)).collect(),
            relation: Relation::Unknown,
            direction_group: DirectionGroup::Ex,
            cjk: false,
            year: None,
        }
    }

    fn opts(center: f64, radius: f64) -> DisagreementOptions {
        DisagreementOptions {
            center,
            radius,
            limit: None,
            seed: 0,
        }
    }

    #[test]
    fn one_flag() {
        let ps = PairSet::new(
            vec![
                pair("x", 2.0, &[("BLEU", 1.0), ("M", 0.3)]),
                pair("y", 2.0, &[("BLEU", -0.95), ("M", 0.3)]),
            ],
            "t",
        );
        let r = disagreement_report(&ps, &["M".into()], "BLEU", &opts(1.0, 0.1)).unwrap();
        assert_eq!(r.pairs.len(), 2);
        // The second pair is swapped, turning M's +0.3 into -0.3 against human -2.
        assert!(!r.cells[0][0].unwrap().disagrees);
        assert_eq!(r.cells[0][1].unwrap(), DisagreementCell { delta: -0.3, disagrees: false });
        assert_eq!(r.flagged(), 0);

        let ps = PairSet::new(
            vec![
                pair("x", 2.0, &[("BLEU", 1.0), ("M", 0.3)]),
                pair("y", 2.0, &[("BLEU", 1.0), ("M", -0.3)]),
            ],
            "t",
        );
        let r = disagreement_report(&ps, &["M".into()], "BLEU", &opts(1.0, 0.1)).unwrap();
        assert_eq!(r.flagged(), 1);
        assert!(r.cells[0][1].unwrap().disagrees);
        assert!(r.render_tsv().contains("-0.300*"));
    }

    #[test]
    fn empty_window() {
        let ps = PairSet::new(vec![pair("x", 1.0, &[("BLEU", 3.0)])], "t");
        assert!(matches!(
            disagreement_report(&ps, &[], "BLEU", &opts(1.0, 0.1)),
            Err(ReportError::EmptySelection { .. })
        ));
        assert_eq!(
            disagreement_report(&ps, &[], "chrF", &opts(1.0, 0.1)).unwrap_err(),
            ReportError::MissingPivot("chrF".into())
        );
        assert_eq!(
            disagreement_report(&ps, &[], "BLEU", &opts(1.0, -0.1)).unwrap_err(),
            ReportError::InvalidWindow
        );
    }

    #[test]
    fn limit_is_seeded() {
        let ps = PairSet::new(
            (0..20).map(|i| pair(&format!("p{i:02}"), 1.0, &[("BLEU", 1.0)])).collect(),
            "t",
        );
        let o = DisagreementOptions { limit: Some(6), seed: 3, ..opts(1.0, 0.0) };
        let a = disagreement_report(&ps, &["BLEU".into()], "BLEU", &o).unwrap();
        let b = disagreement_report(&ps, &["BLEU".into()], "BLEU", &o).unwrap();
        assert_eq!(a.pairs.len(), 6);
        assert_eq!(a, b);
    }
}
