//! Score-file and human-judgment ingestion.
//!
//! Two line-oriented formats are accepted for both record kinds:
//!
//! * TSV, one record per line, `#` starts a comment line.
//!   Segment scores: `metric, dataset, lang_pair, system, segment_id, score`.
//!   System records: `dataset, lang_pair, system, human_score[, protocol, year, team, domain]`.
//! * JSONL, one object per line with the same field names.
//!
//! Parsing is total: every byte stream yields either the full record list or a
//! structured [`IngestError`] that names the offending line.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: input is not valid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: duplicate key {key}")]
    DuplicateKey { line: usize, key: String },
    #[error("segment scores for metric {metric} reference undeclared system {system}")]
    OrphanScore { metric: String, system: SystemKey },
    #[error(
        "ragged testset for metric {metric} in {dataset}/{lang_pair}: system {system} has {found} segments, expected the {expected} segment ids of {reference}"
    )]
    RaggedTestset {
        metric: String,
        dataset: String,
        lang_pair: String,
        system: String,
        reference: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    #[default]
    Tsv,
    Jsonl,
}

/// Identity of a system inside one testset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SystemKey {
    pub dataset: String,
    pub lang_pair: String,
    pub system: String,
}

impl SystemKey {
    pub fn new(dataset: impl Into<String>, lang_pair: impl Into<String>, system: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            lang_pair: lang_pair.into(),
            system: system.into(),
        }
    }
}

impl fmt::Display for SystemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.dataset, self.lang_pair, self.system)
    }
}

/// One metric score for one (system, segment) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentScoreRecord {
    pub metric: String,
    pub dataset: String,
    pub lang_pair: String,
    pub system: String,
    pub segment_id: u64,
    pub score: f64,
}

impl SegmentScoreRecord {
    pub fn system_key(&self) -> SystemKey {
        SystemKey::new(&self.dataset, &self.lang_pair, &self.system)
    }
}

/// Human evaluation protocol that produced a system-level score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Protocol {
    Mqm,
    DaSqm,
    #[default]
    Other,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Mqm => "MQM",
            Protocol::DaSqm => "DA_SQM",
            Protocol::Other => "OTHER",
        }
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "" | "OTHER" => Ok(Protocol::Other),
            "MQM" => Ok(Protocol::Mqm),
            "DA_SQM" | "DA+SQM" | "DASQM" => Ok(Protocol::DaSqm),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

impl TryFrom<String> for Protocol {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Protocol> for String {
    fn from(p: Protocol) -> Self {
        p.as_str().to_string()
    }
}

/// System-level human judgment plus slicing metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemRecord {
    pub dataset: String,
    pub lang_pair: String,
    pub system: String,
    pub human_score: f64,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub team: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl SystemRecord {
    pub fn key(&self) -> SystemKey {
        SystemKey::new(&self.dataset, &self.lang_pair, &self.system)
    }
}

/// Yields `(line_number, text)` for every non-empty, non-comment line.
fn content_lines<R: BufRead>(mut reader: R) -> Result<Vec<(usize, String)>, IngestError> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let text = std::str::from_utf8(&buf).map_err(|_| IngestError::InvalidUtf8 { line: line_no })?;
        let text = text.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() || text.trim_start().starts_with('#') {
            continue;
        }
        out.push((line_no, text.to_string()));
    }
    Ok(out)
}

fn malformed(line: usize, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

fn identifier(line: usize, name: &str, value: &str) -> Result<String, IngestError> {
    let value = value.trim();
    if value.is_empty() {
        return Err(malformed(line, format!("empty {name}")));
    }
    Ok(value.to_string())
}

fn finite_score(line: usize, name: &str, value: &str) -> Result<f64, IngestError> {
    let parsed: f64 = value
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("unparseable {name} {:?}", value.trim())))?;
    if !parsed.is_finite() {
        return Err(malformed(line, format!("non-finite {name} {:?}", value.trim())));
    }
    Ok(parsed)
}

fn optional(value: Option<&str>) -> Option<String> {
    value.map(str::trim).filter(|v| !v.is_empty()).map(str::to_string)
}

fn segment_from_tsv(line: usize, text: &str) -> Result<SegmentScoreRecord, IngestError> {
    let cols: Vec<&str> = text.split('\t').collect();
    if cols.len() != 6 {
        return Err(malformed(line, format!("expected 6 columns, found {}", cols.len())));
    }
    let segment_id = cols[4]
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("unparseable segment_id {:?}", cols[4].trim())))?;
    Ok(SegmentScoreRecord {
        metric: identifier(line, "metric", cols[0])?,
        dataset: identifier(line, "dataset", cols[1])?,
        lang_pair: identifier(line, "lang_pair", cols[2])?,
        system: identifier(line, "system", cols[3])?,
        segment_id,
        score: finite_score(line, "score", cols[5])?,
    })
}

fn system_from_tsv(line: usize, text: &str) -> Result<SystemRecord, IngestError> {
    let cols: Vec<&str> = text.split('\t').collect();
    if !(4..=8).contains(&cols.len()) {
        return Err(malformed(line, format!("expected 4 to 8 columns, found {}", cols.len())));
    }
    let protocol = match cols.get(4) {
        Some(p) => p.parse().map_err(|e: String| malformed(line, e))?,
        None => Protocol::Other,
    };
    let year = match optional(cols.get(5).copied()) {
        Some(y) => Some(
            y.parse()
                .map_err(|_| malformed(line, format!("unparseable year {y:?}")))?,
        ),
        None => None,
    };
    Ok(SystemRecord {
        dataset: identifier(line, "dataset", cols[0])?,
        lang_pair: identifier(line, "lang_pair", cols[1])?,
        system: identifier(line, "system", cols[2])?,
        human_score: finite_score(line, "human_score", cols[3])?,
        protocol,
        year,
        team: optional(cols.get(6).copied()),
        domain: optional(cols.get(7).copied()),
    })
}

fn from_json<T: for<'de> Deserialize<'de>>(line: usize, text: &str) -> Result<T, IngestError> {
    serde_json::from_str(text).map_err(|e| malformed(line, e.to_string()))
}

fn check_segment(line: usize, rec: SegmentScoreRecord) -> Result<SegmentScoreRecord, IngestError> {
    for (name, v) in [
        ("metric", &rec.metric),
        ("dataset", &rec.dataset),
        ("lang_pair", &rec.lang_pair),
        ("system", &rec.system),
    ] {
        identifier(line, name, v)?;
    }
    if !rec.score.is_finite() {
        return Err(malformed(line, "non-finite score"));
    }
    Ok(rec)
}

fn check_system(line: usize, rec: SystemRecord) -> Result<SystemRecord, IngestError> {
    for (name, v) in [
        ("dataset", &rec.dataset),
        ("lang_pair", &rec.lang_pair),
        ("system", &rec.system),
    ] {
        identifier(line, name, v)?;
    }
    if !rec.human_score.is_finite() {
        return Err(malformed(line, "non-finite human_score"));
    }
    Ok(rec)
}

/// Parses segment-level metric scores, preserving input order.
pub fn parse_segment_scores<R: BufRead>(
    reader: R,
    format: InputFormat,
) -> Result<Vec<SegmentScoreRecord>, IngestError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, text) in content_lines(reader)? {
        let rec = match format {
            InputFormat::Tsv => segment_from_tsv(line, &text)?,
            InputFormat::Jsonl => check_segment(line, from_json(line, &text)?)?,
        };
        let key = (
            rec.metric.clone(),
            rec.system_key(),
            rec.segment_id,
        );
        if !seen.insert(key) {
            return Err(IngestError::DuplicateKey {
                line,
                key: format!("{}/{}#{}", rec.metric, rec.system_key(), rec.segment_id),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Parses system-level human judgments, preserving input order.
pub fn parse_system_records<R: BufRead>(
    reader: R,
    format: InputFormat,
) -> Result<Vec<SystemRecord>, IngestError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, text) in content_lines(reader)? {
        let rec = match format {
            InputFormat::Tsv => system_from_tsv(line, &text)?,
            InputFormat::Jsonl => check_system(line, from_json(line, &text)?)?,
        };
        if !seen.insert(rec.key()) {
            return Err(IngestError::DuplicateKey {
                line,
                key: rec.key().to_string(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_segment_scores(records: &[SegmentScoreRecord], format: InputFormat) -> String {
    let mut out = String::new();
    match format {
        InputFormat::Tsv => {
            out.push_str("# metric\tdataset\tlang_pair\tsystem\tsegment_id\tscore\n");
            for r in records {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.metric, r.dataset, r.lang_pair, r.system, r.segment_id, r.score
                ));
            }
        }
        InputFormat::Jsonl => {
            for r in records {
                out.push_str(&serde_json::to_string(r).expect("segment record serializes"));
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_system_records(records: &[SystemRecord], format: InputFormat) -> String {
    let mut out = String::new();
    match format {
        InputFormat::Tsv => {
            out.push_str("# dataset\tlang_pair\tsystem\thuman_score\tprotocol\tyear\tteam\tdomain\n");
            for r in records {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.dataset,
                    r.lang_pair,
                    r.system,
                    r.human_score,
                    r.protocol.as_str(),
                    r.year.map(|y| y.to_string()).unwrap_or_default(),
                    r.team.as_deref().unwrap_or(""),
                    r.domain.as_deref().unwrap_or(""),
                ));
            }
        }
        InputFormat::Jsonl => {
            for r in records {
                out.push_str(&serde_json::to_string(r).expect("system record serializes"));
                out.push('\n');
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ScoreKey {
    metric: String,
    system: SystemKey,
}

/// Systems of a testset that have no scores under some metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageGap {
    pub metric: String,
    pub dataset: String,
    pub lang_pair: String,
    pub missing_systems: Vec<String>,
}

/// Cross-referenced, validated collection of systems and their segment scores.
///
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct Dataset {
    systems: Vec<SystemRecord>,
    index: BTreeMap<SystemKey, usize>,
    scores: BTreeMap<ScoreKey, Vec<(u64, f64)>>,
    metrics: BTreeSet<String>,
    coverage: Vec<CoverageGap>,
}

impl Dataset {
    /// Validates cross references and testset parallelism.
    pub fn build(
        systems: Vec<SystemRecord>,
        segment_scores: Vec<SegmentScoreRecord>,
    ) -> Result<Self, IngestError> {
        let mut index = BTreeMap::new();
        for (i, s) in systems.iter().enumerate() {
            if index.insert(s.key(), i).is_some() {
                return Err(IngestError::DuplicateKey {
                    line: i + 1,
                    key: s.key().to_string(),
                });
            }
        }

        let mut scores: BTreeMap<ScoreKey, Vec<(u64, f64)>> = BTreeMap::new();
        let mut metrics = BTreeSet::new();
        for rec in segment_scores {
            let system = rec.system_key();
            if !index.contains_key(&system) {
                return Err(IngestError::OrphanScore {
                    metric: rec.metric,
                    system,
                });
            }
            metrics.insert(rec.metric.clone());
            scores
                .entry(ScoreKey {
                    metric: rec.metric,
                    system,
                })
                .or_default()
                .push((rec.segment_id, rec.score));
        }
        for cells in scores.values_mut() {
            cells.sort_by_key(|(id, _)| *id);
        }
        for (key, cells) in &scores {
            if let Some(w) = cells.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(IngestError::DuplicateKey {
                    line: 0,
                    key: format!("{}/{}#{}", key.metric, key.system, w[0].0),
                });
            }
        }

        // Parallel-testset check: the first system seen in each testset fixes the id set.
        let mut reference: BTreeMap<(&str, &str, &str), (&str, Vec<u64>)> = BTreeMap::new();
        for (key, cells) in &scores {
            let ids: Vec<u64> = cells.iter().map(|(id, _)| *id).collect();
            let slot = (
                key.metric.as_str(),
                key.system.dataset.as_str(),
                key.system.lang_pair.as_str(),
            );
            match reference.get(&slot) {
                None => {
                    reference.insert(slot, (key.system.system.as_str(), ids));
                }
                Some((ref_system, ref_ids)) if *ref_ids != ids => {
                    return Err(IngestError::RaggedTestset {
                        metric: key.metric.clone(),
                        dataset: key.system.dataset.clone(),
                        lang_pair: key.system.lang_pair.clone(),
                        system: key.system.system.clone(),
                        reference: (*ref_system).to_string(),
                        expected: ref_ids.len(),
                        found: ids.len(),
                    });
                }
                Some(_) => {}
            }
        }

        let mut coverage = Vec::new();
        let testsets: BTreeSet<(&str, &str)> = systems
            .iter()
            .map(|s| (s.dataset.as_str(), s.lang_pair.as_str()))
            .collect();
        for metric in &metrics {
            for &(dataset, lang_pair) in &testsets {
                let missing: Vec<String> = systems
                    .iter()
                    .filter(|s| s.dataset == dataset && s.lang_pair == lang_pair)
                    .filter(|s| {
                        !scores.contains_key(&ScoreKey {
                            metric: metric.clone(),
                            system: s.key(),
                        })
                    })
                    .map(|s| s.system.clone())
                    .collect();
                if !missing.is_empty() {
                    coverage.push(CoverageGap {
                        metric: metric.clone(),
                        dataset: dataset.to_string(),
                        lang_pair: lang_pair.to_string(),
                        missing_systems: missing,
                    });
                }
            }
        }

        Ok(Self {
            systems,
            index,
            scores,
            metrics,
            coverage,
        })
    }

    /// Systems in declaration order.
    pub fn systems(&self) -> &[SystemRecord] {
        &self.systems
    }

    pub fn system(&self, key: &SystemKey) -> Option<&SystemRecord> {
        self.index.get(key).map(|&i| &self.systems[i])
    }

    pub fn metrics(&self) -> &BTreeSet<String> {
        &self.metrics
    }

    /// Per-metric report of systems lacking scores.
    pub fn coverage(&self) -> &[CoverageGap] {
        &self.coverage
    }

    /// `(segment_id, score)` cells sorted by segment id.
    pub fn segment_scores(&self, metric: &str, system: &SystemKey) -> Option<&[(u64, f64)]> {
        self.scores
            .get(&ScoreKey {
                metric: metric.to_string(),
                system: system.clone(),
            })
            .map(Vec::as_slice)
    }

    /// Distinct `(dataset, lang_pair)` testsets in first-seen order.
    pub fn testsets(&self) -> Vec<(String, String)> {
        let mut seen = HashSet::new();
        self.systems
            .iter()
            .map(|s| (s.dataset.clone(), s.lang_pair.clone()))
            .filter(|t| seen.insert(t.clone()))
            .collect()
    }
}
