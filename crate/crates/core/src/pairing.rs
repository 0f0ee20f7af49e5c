//! System-level aggregation, pair construction and pairwise ranking accuracy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, SystemKey};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PairError {
    #[error("no {metric} scores for system {system}")]
    NoScores { metric: String, system: SystemKey },
    #[error("no testset in scope has at least two systems")]
    InsufficientSystems,
    #[error("no usable pairs for {0}")]
    EmptyPairSet(String),
    #[error("pair {pair} has no delta for metric {metric}")]
    MissingMetric { metric: String, pair: String },
    #[error("filter needs {field}, which pair {pair} lacks")]
    MissingMetadata { field: &'static str, pair: String },
    #[error("invalid filter {0:?}")]
    InvalidFilter(String),
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("pair file line {line}: {reason}")]
    MalformedPairRow { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Relation {
    Iterated,
    Unrelated,
    Unknown,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Iterated => "ITERATED",
            Relation::Unrelated => "UNRELATED",
            Relation::Unknown => "UNKNOWN",
        }
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ITERATED" => Ok(Relation::Iterated),
            "UNRELATED" => Ok(Relation::Unrelated),
            "UNKNOWN" => Ok(Relation::Unknown),
            other => Err(format!("unknown relation {other:?}")),
        }
    }
}

/// Translation direction relative to English.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DirectionGroup {
    /// Into English.
    Xe,
    /// Out of English.
    Ex,
    NonEnglish,
}

impl DirectionGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionGroup::Xe => "XE",
            DirectionGroup::Ex => "EX",
            DirectionGroup::NonEnglish => "NONENGLISH",
        }
    }
}

impl FromStr for DirectionGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "XE" => Ok(DirectionGroup::Xe),
            "EX" => Ok(DirectionGroup::Ex),
            "NONENGLISH" => Ok(DirectionGroup::NonEnglish),
            other => Err(format!("unknown direction group {other:?}")),
        }
    }
}

const CJK: [&str; 3] = ["zh", "ja", "ko"];

fn base_language(code: &str) -> String {
    code.split(['_', '@'])
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

/// Splits `src-tgt` into base language codes, e.g. `zh_Hant-en` gives `("zh", "en")`.
pub fn split_lang_pair(lang_pair: &str) -> Option<(String, String)> {
    let (src, tgt) = lang_pair.split_once('-')?;
    Some((base_language(src), base_language(tgt)))
}

pub fn direction_group(lang_pair: &str) -> DirectionGroup {
    match split_lang_pair(lang_pair) {
        Some((_, tgt)) if tgt == "en" => DirectionGroup::Xe,
        Some((src, _)) if src == "en" => DirectionGroup::Ex,
        _ => DirectionGroup::NonEnglish,
    }
}

pub fn is_cjk(lang_pair: &str) -> bool {
    split_lang_pair(lang_pair)
        .is_some_and(|(src, tgt)| CJK.contains(&src.as_str()) || CJK.contains(&tgt.as_str()))
}

/// An oriented pair of systems from one testset with `a − b` deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPair {
    pub dataset: String,
    pub lang_pair: String,
    pub sys_a: String,
    pub sys_b: String,
    pub human_delta: f64,
    pub metric_deltas: BTreeMap<String, f64>,
    pub relation: Relation,
    pub direction_group: DirectionGroup,
    pub cjk: bool,
    pub year: Option<i32>,
}

impl SystemPair {
    pub fn metric_delta(&self, metric: &str) -> Option<f64> {
        self.metric_deltas.get(metric).copied()
    }

    /// The same pair oriented `b − a`.
    pub fn swapped(&self) -> Self {
        Self {
            sys_a: self.sys_b.clone(),
            sys_b: self.sys_a.clone(),
            human_delta: -self.human_delta,
            metric_deltas: self.metric_deltas.iter().map(|(m, d)| (m.clone(), -d)).collect(),
            ..self.clone()
        }
    }

    /// Orientation-independent identity used for stable ordering.
    pub fn canonical_id(&self) -> (&str, &str, &str, &str) {
        let (lo, hi) = if self.sys_a <= self.sys_b {
            (&self.sys_a, &self.sys_b)
        } else {
            (&self.sys_b, &self.sys_a)
        };
        (&self.dataset, &self.lang_pair, lo, hi)
    }

    pub fn label(&self) -> String {
        format!("{}/{}:{}|{}", self.dataset, self.lang_pair, self.sys_a, self.sys_b)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<SystemPair>,
    /// Source description followed by every filter applied, in order.
    pub provenance: Vec<String>,
}

impl PairSet {
    pub fn new(pairs: Vec<SystemPair>, source: impl Into<String>) -> Self {
        Self {
            pairs,
            provenance: vec![source.into()],
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Metric names present on at least one pair.
    pub fn metrics(&self) -> BTreeSet<String> {
        self.pairs.iter().flat_map(|p| p.metric_deltas.keys().cloned()).collect()
    }

    /// Keeps pairs matching an arbitrary predicate; `description` is recorded in the provenance.
    pub fn retain_where(&self, description: impl Into<String>, mut keep: impl FnMut(&SystemPair) -> bool) -> PairSet {
        let mut provenance = self.provenance.clone();
        provenance.push(description.into());
        PairSet {
            pairs: self.pairs.iter().filter(|p| keep(p)).cloned().collect(),
            provenance,
        }
    }
}

/// Mean of the segment scores of one system under one metric.
pub fn system_score(dataset: &Dataset, metric: &str, system: &SystemKey) -> Result<f64, PairError> {
    match dataset.segment_scores(metric, system) {
        Some(cells) if !cells.is_empty() => {
            Ok(cells.iter().map(|(_, s)| s).sum::<f64>() / cells.len() as f64)
        }
        _ => Err(PairError::NoScores {
            metric: metric.to_string(),
            system: system.clone(),
        }),
    }
}

/// Restricts pair construction to a dataset and/or language pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scope {
    pub dataset: Option<String>,
    pub lang_pair: Option<String>,
}

impl Scope {
    pub fn all() -> Self {
        Self::default()
    }

    fn contains(&self, dataset: &str, lang_pair: &str) -> bool {
        self.dataset.as_deref().is_none_or(|d| d == dataset)
            && self.lang_pair.as_deref().is_none_or(|l| l == lang_pair)
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dataset={} lang_pair={}",
            self.dataset.as_deref().unwrap_or("*"),
            self.lang_pair.as_deref().unwrap_or("*")
        )
    }
}

/// All unordered system pairs within each in-scope testset.
///
/// Pairs are oriented by declaration order (`sys_a` was declared first). A
/// metric delta is present only when both systems have scores for it.
pub fn build_pairs(dataset: &Dataset, scope: &Scope) -> Result<PairSet, PairError> {
    let mut pairs = Vec::new();
    let mut any_testset = false;
    for (ds, lp) in dataset.testsets() {
        if !scope.contains(&ds, &lp) {
            continue;
        }
        let systems: Vec<_> = dataset
            .systems()
            .iter()
            .filter(|s| s.dataset == ds && s.lang_pair == lp)
            .collect();
        if systems.len() < 2 {
            continue;
        }
        any_testset = true;

        let scores: Vec<BTreeMap<&str, f64>> = systems
            .iter()
            .map(|s| {
                dataset
                    .metrics()
                    .iter()
                    .filter_map(|m| system_score(dataset, m, &s.key()).ok().map(|v| (m.as_str(), v)))
                    .collect()
            })
            .collect();
        let direction = direction_group(&lp);
        let cjk = is_cjk(&lp);

        for i in 0..systems.len() {
            for j in i + 1..systems.len() {
                let (a, b) = (systems[i], systems[j]);
                let metric_deltas = scores[i]
                    .iter()
                    .filter_map(|(m, sa)| scores[j].get(m).map(|sb| (m.to_string(), sa - sb)))
                    .collect();
                let relation = match (&a.team, &b.team) {
                    (Some(ta), Some(tb)) if ta == tb => Relation::Iterated,
                    (Some(_), Some(_)) => Relation::Unrelated,
                    _ => Relation::Unknown,
                };
                let year = match (a.year, b.year) {
                    (Some(ya), Some(yb)) => Some(ya.max(yb)),
                    _ => None,
                };
                pairs.push(SystemPair {
                    dataset: ds.clone(),
                    lang_pair: lp.clone(),
                    sys_a: a.system.clone(),
                    sys_b: b.system.clone(),
                    human_delta: a.human_score - b.human_score,
                    metric_deltas,
                    relation,
                    direction_group: direction,
                    cjk,
                    year,
                });
            }
        }
    }
    if !any_testset {
        return Err(PairError::InsufficientSystems);
    }
    Ok(PairSet::new(pairs, format!("build_pairs({scope})")))
}

/// Outcome of [`pairwise_accuracy`] with the tie bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub metric: String,
    pub accuracy: f64,
    pub agreements: usize,
    /// Pairs in the denominator, after excluding human ties.
    pub total: usize,
    pub human_ties_excluded: usize,
    /// Zero metric deltas against non-zero human deltas, counted as disagreements.
    pub metric_ties: usize,
}

/// Fraction of pairs whose metric delta has the same sign as the human delta.
///
/// Pairs with a zero human delta are left out of the denominator. A zero metric
/// delta never agrees.
pub fn pairwise_accuracy(pairs: &PairSet, metric: &str) -> Result<AccuracyReport, PairError> {
    let mut agreements = 0;
    let mut total = 0;
    let mut human_ties_excluded = 0;
    let mut metric_ties = 0;
    for p in &pairs.pairs {
        let delta = p.metric_delta(metric).ok_or_else(|| PairError::MissingMetric {
            metric: metric.to_string(),
            pair: p.label(),
        })?;
        if p.human_delta == 0.0 {
            human_ties_excluded += 1;
            continue;
        }
        total += 1;
        if delta == 0.0 {
            metric_ties += 1;
        } else if (delta > 0.0) == (p.human_delta > 0.0) {
            agreements += 1;
        }
    }
    if total == 0 {
        return Err(PairError::EmptyPairSet(metric.to_string()));
    }
    Ok(AccuracyReport {
        metric: metric.to_string(),
        accuracy: agreements as f64 / total as f64,
        agreements,
        total,
        human_ties_excluded,
        metric_ties,
    })
}

/// Accuracy of every metric present on all pairs, best first.
pub fn leaderboard(pairs: &PairSet) -> Vec<Result<AccuracyReport, PairError>> {
    let mut rows: Vec<_> = pairs.metrics().iter().map(|m| pairwise_accuracy(pairs, m)).collect();
    rows.sort_by(|a, b| match (a, b) {
        (Ok(x), Ok(y)) => y.accuracy.total_cmp(&x.accuracy).then_with(|| x.metric.cmp(&y.metric)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => std::cmp::Ordering::Equal,
    });
    rows
}

/// Metadata predicates for slicing pair sets.
#[derive(Debug, Clone, PartialEq)]
pub enum PairFilter {
    Relation(Relation),
    Direction(DirectionGroup),
    Cjk(bool),
    Year(i32),
    Dataset(String),
    LangPair(String),
    Not(Box<PairFilter>),
    All(Vec<PairFilter>),
    Any(Vec<PairFilter>),
}

impl PairFilter {
    fn eval(&self, p: &SystemPair) -> Result<bool, PairError> {
        Ok(match self {
            PairFilter::Relation(r) => {
                if p.relation == Relation::Unknown && *r != Relation::Unknown {
                    return Err(PairError::MissingMetadata {
                        field: "team",
                        pair: p.label(),
                    });
                }
                p.relation == *r
            }
            PairFilter::Direction(d) => p.direction_group == *d,
            PairFilter::Cjk(c) => p.cjk == *c,
            PairFilter::Year(y) => match p.year {
                Some(py) => py == *y,
                None => {
                    return Err(PairError::MissingMetadata {
                        field: "year",
                        pair: p.label(),
                    })
                }
            },
            PairFilter::Dataset(d) => p.dataset == *d,
            PairFilter::LangPair(l) => p.lang_pair == *l,
            PairFilter::Not(inner) => !inner.eval(p)?,
            PairFilter::All(fs) => {
                for f in fs {
                    if !f.eval(p)? {
                        return Ok(false);
                    }
                }
                true
            }
            PairFilter::Any(fs) => {
                for f in fs {
                    if f.eval(p)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }
}

impl fmt::Display for PairFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairFilter::Relation(r) => write!(f, "relation={}", r.as_str()),
            PairFilter::Direction(d) => write!(f, "direction={}", d.as_str()),
            PairFilter::Cjk(c) => write!(f, "cjk={c}"),
            PairFilter::Year(y) => write!(f, "year={y}"),
            PairFilter::Dataset(d) => write!(f, "dataset={d}"),
            PairFilter::LangPair(l) => write!(f, "lang_pair={l}"),
            PairFilter::Not(inner) => write!(f, "not({inner})"),
            PairFilter::All(fs) => {
                if fs.is_empty() {
                    return write!(f, "true");
                }
                let parts: Vec<String> = fs.iter().map(ToString::to_string).collect();
                write!(f, "{}", parts.join(" & "))
            }
            PairFilter::Any(fs) => {
                let parts: Vec<String> = fs.iter().map(ToString::to_string).collect();
                write!(f, "any({})", parts.join(", "))
            }
        }
    }
}

/// Parses `key=value` with keys `relation`, `direction`, `cjk`, `year`,
/// `dataset`, `lang_pair`; a leading `!` negates.
impl FromStr for PairFilter {
    type Err = PairError;

    fn from_str(s: &str) -> Result<Self, PairError> {
        let invalid = || PairError::InvalidFilter(s.to_string());
        let s = s.trim();
        if let Some(rest) = s.strip_prefix('!') {
            return Ok(PairFilter::Not(Box::new(rest.parse()?)));
        }
        let (key, value) = s.split_once('=').ok_or_else(invalid)?;
        let value = value.trim();
        Ok(match key.trim().to_ascii_lowercase().as_str() {
            "relation" => PairFilter::Relation(value.parse().map_err(|_| invalid())?),
            "direction" | "direction_group" => PairFilter::Direction(value.parse().map_err(|_| invalid())?),
            "cjk" => PairFilter::Cjk(value.parse().map_err(|_| invalid())?),
            "year" => PairFilter::Year(value.parse().map_err(|_| invalid())?),
            "dataset" => PairFilter::Dataset(value.to_string()),
            "lang_pair" => PairFilter::LangPair(value.to_string()),
            _ => return Err(invalid()),
        })
    }
}

/// Order-preserving subset of pairs matching `filter`.
pub fn filter_pairs(pairs: &PairSet, filter: &PairFilter) -> Result<PairSet, PairError> {
    let mut kept = Vec::new();
    for p in &pairs.pairs {
        if filter.eval(p)? {
            kept.push(p.clone());
        }
    }
    let mut provenance = pairs.provenance.clone();
    provenance.push(format!("filter({filter})"));
    Ok(PairSet { pairs: kept, provenance })
}

#[derive(Debug, Clone, PartialEq)]
pub enum HistogramBins {
    /// Equal-width bins spanning `[min, max]` of the data.
    Uniform(usize),
    /// Explicit, strictly increasing edges. Values outside land in `below`/`above`.
    Edges(Vec<f64>),
}

impl Default for HistogramBins {
    fn default() -> Self {
        HistogramBins::Uniform(20)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

/// Spread of absolute metric deltas over a pair set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub metric: String,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub stddev: f64,
    pub histogram: Histogram,
}

pub fn delta_distribution(pairs: &PairSet, metric: &str, bins: &HistogramBins) -> Result<DeltaSummary, PairError> {
    let values = pairs
        .pairs
        .iter()
        .map(|p| {
            p.metric_delta(metric).map(f64::abs).ok_or_else(|| PairError::MissingMetric {
                metric: metric.to_string(),
                pair: p.label(),
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.len() < 2 {
        return Err(PairError::EmptyPairSet(metric.to_string()));
    }

    // Welford
    let (mut mean, mut m2) = (0.0, 0.0);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
        min = min.min(v);
        max = max.max(v);
    }
    let stddev = (m2 / (values.len() - 1) as f64).max(0.0).sqrt();

    let edges = match bins {
        HistogramBins::Uniform(0) => return Err(PairError::InvalidHistogram("zero bins".into())),
        HistogramBins::Uniform(n) => {
            let width = (max - min) / *n as f64;
            let mut e: Vec<f64> = (0..*n).map(|i| min + width * i as f64).collect();
            e.push(max);
            e
        }
        HistogramBins::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) || e.iter().any(|x| !x.is_finite()) {
                return Err(PairError::InvalidHistogram(
                    "edges must be finite and strictly increasing, at least two".into(),
                ));
            }
            e.clone()
        }
    };
    let nbins = edges.len() - 1;
    let mut counts = vec![0; nbins];
    let (mut below, mut above) = (0, 0);
    for &v in &values {
        if v < edges[0] {
            below += 1;
        } else if v > edges[nbins] {
            above += 1;
        } else {
            // Last bin is closed on the right.
            let idx = edges.partition_point(|&e| e <= v).saturating_sub(1).min(nbins - 1);
            counts[idx] += 1;
        }
    }

    Ok(DeltaSummary {
        metric: metric.to_string(),
        count: values.len(),
        min,
        max,
        mean,
        stddev,
        histogram: Histogram {
            edges,
            counts,
            below,
            above,
        },
    })
}

const PAIR_FIXED_HEAD: [&str; 5] = ["dataset", "lang_pair", "sys_a", "sys_b", "human_delta"];
const PAIR_FIXED_TAIL: [&str; 4] = ["relation", "direction_group", "cjk", "year"];

/// Pair export TSV with a header row. Missing metric deltas are empty cells.
pub fn write_pairs_tsv(pairs: &PairSet) -> String {
    let metrics = pairs.metrics();
    let mut out = String::new();
    let header: Vec<&str> = PAIR_FIXED_HEAD
        .iter()
        .copied()
        .chain(metrics.iter().map(String::as_str))
        .chain(PAIR_FIXED_TAIL.iter().copied())
        .collect();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for p in &pairs.pairs {
        let mut row = vec![
            p.dataset.clone(),
            p.lang_pair.clone(),
            p.sys_a.clone(),
            p.sys_b.clone(),
            p.human_delta.to_string(),
        ];
        row.extend(metrics.iter().map(|m| p.metric_delta(m).map(|d| d.to_string()).unwrap_or_default()));
        row.push(p.relation.as_str().to_string());
        row.push(p.direction_group.as_str().to_string());
        row.push(p.cjk.to_string());
        row.push(p.year.map(|y| y.to_string()).unwrap_or_default());
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

/// Reads the format produced by [`write_pairs_tsv`].
pub fn parse_pairs_tsv<R: BufRead>(reader: R, source: &str) -> Result<PairSet, PairError> {
    let bad = |line: usize, reason: String| PairError::MalformedPairRow { line, reason };
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((i, l)) => {
                let l = l.map_err(|e| bad(i + 1, e.to_string()))?;
                if !l.trim().is_empty() && !l.starts_with('#') {
                    break l;
                }
            }
            None => return Ok(PairSet::new(Vec::new(), source)),
        }
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let head_len = PAIR_FIXED_HEAD.len();
    let tail_len = PAIR_FIXED_TAIL.len();
    if cols.len() < head_len + tail_len
        || cols[..head_len] != PAIR_FIXED_HEAD
        || cols[cols.len() - tail_len..] != PAIR_FIXED_TAIL
    {
        return Err(bad(1, "unexpected header".into()));
    }
    let metrics: Vec<String> = cols[head_len..cols.len() - tail_len].iter().map(|s| s.to_string()).collect();

    let mut pairs = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let l = l.map_err(|e| bad(line, e.to_string()))?;
        if l.trim().is_empty() || l.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != cols.len() {
            return Err(bad(line, format!("expected {} columns, found {}", cols.len(), f.len())));
        }
        let num = |s: &str| -> Result<f64, PairError> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("bad number {s:?}")))
        };
        let mut metric_deltas = BTreeMap::new();
        for (k, m) in metrics.iter().enumerate() {
            let cell = f[head_len + k].trim();
            if !cell.is_empty() {
                metric_deltas.insert(m.clone(), num(cell)?);
            }
        }
        let t = cols.len() - tail_len;
        let year = match f[t + 3].trim() {
            "" => None,
            y => Some(y.parse().map_err(|_| bad(line, format!("bad year {y:?}")))?),
        };
        pairs.push(SystemPair {
            dataset: f[0].trim().to_string(),
            lang_pair: f[1].trim().to_string(),
            sys_a: f[2].trim().to_string(),
            sys_b: f[3].trim().to_string(),
            human_delta: num(f[4])?,
            metric_deltas,
            relation: f[t].parse().map_err(|e| bad(line, e))?,
            direction_group: f[t + 1].parse().map_err(|e| bad(line, e))?,
            cjk: f[t + 2].trim().parse().map_err(|_| bad(line, format!("bad cjk {:?}", f[t + 2])))?,
            year,
        });
    }
    Ok(PairSet::new(pairs, source))
}
