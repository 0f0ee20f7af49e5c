use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Args;
use mtcal::calibration::calibration_from_json;
use mtcal::ingest::{parse_segment_scores, parse_system_records};
use mtcal::pairing::{filter_pairs, parse_pairs_tsv, PairFilter};
use mtcal::published::bundled;
use mtcal::{build_pairs, CalibrationSet, Dataset, InputFormat, PairSet, Scope};

use crate::error::{CliError, CliResult};

/// Where system pairs come from: a pair export, or scores plus human judgments.
#[derive(Debug, Args)]
pub struct PairInput {
    /// Pair export TSV (as written by `mtcal pairs`)
    #[arg(long, conflicts_with_all = ["scores", "systems"])]
    pub pairs: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataInput,
    /// Keep pairs matching key=value (relation, direction, cjk, year, dataset,
    /// lang_pair; `!` negates). Repeatable, all must hold.
    #[arg(long = "filter", value_name = "KEY=VALUE")]
    pub filters: Vec<String>,
}

#[derive(Debug, Args)]
pub struct DataInput {
    /// Segment-level metric scores (.tsv or .jsonl)
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// System-level human judgments (.tsv or .jsonl)
    #[arg(long)]
    pub systems: Option<PathBuf>,
    /// Only this dataset
    #[arg(long)]
    pub dataset: Option<String>,
    /// Only this language pair, e.g. en-de
    #[arg(long)]
    pub lang_pair: Option<String>,
}

pub fn existing(path: &Path) -> CliResult<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::usage(format!("input file {} does not exist", path.display())))
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::domain("io", e).with("path", path.display()))
}

fn format_of(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") | Some("ndjson") => InputFormat::Jsonl,
        _ => InputFormat::Tsv,
    }
}

impl DataInput {
    /// Checks presence of the required paths before anything is read.
    pub fn check(&self) -> CliResult<(&Path, &Path)> {
        match (&self.scores, &self.systems) {
            (Some(s), Some(y)) => Ok((existing(s)?, existing(y)?)),
            _ => Err(CliError::usage("both --scores and --systems are required")),
        }
    }

    pub fn scope(&self) -> Scope {
        Scope {
            dataset: self.dataset.clone(),
            lang_pair: self.lang_pair.clone(),
        }
    }

    pub fn load(&self) -> CliResult<Dataset> {
        let (scores, systems) = self.check()?;
        let records = parse_segment_scores(open(scores)?, format_of(scores))
            .map_err(|e| CliError::domain("ingest", e).with("path", scores.display()))?;
        let judgments = parse_system_records(open(systems)?, format_of(systems))
            .map_err(|e| CliError::domain("ingest", e).with("path", systems.display()))?;
        Dataset::build(judgments, records).map_err(|e| CliError::domain("ingest", e))
    }
}

impl PairInput {
    pub fn check(&self) -> CliResult<Vec<PairFilter>> {
        match &self.pairs {
            Some(p) => {
                existing(p)?;
            }
            None => {
                self.data.check().map_err(|e| {
                    if self.data.scores.is_none() && self.data.systems.is_none() {
                        CliError::usage("give --pairs, or --scores with --systems")
                    } else {
                        e
                    }
                })?;
            }
        }
        self.filters
            .iter()
            .map(|f| f.parse().map_err(|e| CliError::usage(format!("--filter: {e}"))))
            .collect()
    }

    pub fn load(&self) -> CliResult<PairSet> {
        let filters = self.check()?;
        let mut pairs = match &self.pairs {
            Some(path) => {
                let mut set = parse_pairs_tsv(open(path)?, &path.display().to_string())
                    .map_err(|e| CliError::domain("pairing", e).with("path", path.display()))?;
                let scope = self.data.scope();
                if scope != Scope::all() {
                    set = set.retain_where(format!("scope({scope})"), |p| {
                        scope.dataset.as_deref().is_none_or(|d| d == p.dataset)
                            && scope.lang_pair.as_deref().is_none_or(|l| l == p.lang_pair)
                    });
                }
                set
            }
            None => build_pairs(&self.data.load()?, &self.data.scope()).map_err(|e| CliError::domain("pairing", e))?,
        };
        for f in &filters {
            pairs = filter_pairs(&pairs, f).map_err(|e| CliError::domain("pairing", e))?;
        }
        Ok(pairs)
    }
}

/// Calibration JSON from `path`, or the bundled published thresholds.
pub fn load_calibration(path: Option<&Path>) -> CliResult<CalibrationSet> {
    match path {
        None => Ok(bundled()),
        Some(p) => {
            let text = std::fs::read_to_string(existing(p)?)
                .map_err(|e| CliError::domain("io", e).with("path", p.display()))?;
            calibration_from_json(&text).map_err(|e| CliError::domain("calibration", e).with("path", p.display()))
        }
    }
}

pub fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::domain("io", e).with("path", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}
