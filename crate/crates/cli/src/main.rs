mod error;
mod input;
mod output;
mod vectors;

use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use mtcal::calibration::{
    calibration_to_json, validate, validate_calibration_value, CalibrateOptions, LevelGrid, Weighting,
};
use mtcal::conversion::{convert_delta, convert_to_all, standard_table};
use mtcal::ingest::write_segment_scores;
use mtcal::metrics::{bleu, chrf, sentence_bleu, BleuConfig, ChrfConfig, Smoothing, Tokenizer};
use mtcal::pairing::{delta_distribution, leaderboard, pairwise_accuracy, write_pairs_tsv, HistogramBins};
use mtcal::report::{disagreement_report, DisagreementOptions};
use mtcal::significance::{segment_differences, subsample_diffs, trace_csv, CiMethod, Resampling, SubsampleConfig};
use mtcal::{calibrate, paired_t_test, InputFormat, SegmentScoreRecord, SystemKey};
use serde_json::{json, Value};

use error::{color_enabled, stderr_color, CliError, CliResult};
use input::{existing, load_calibration, read_lines, DataInput, PairInput};
use output::{align, emit, tsv, write_all};

#[derive(Debug, Parser)]
#[command(name = "mtcal", version, about = "Calibrate MT metric deltas against human system rankings")]
struct Cli {
    /// Output format (each command has its own default)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corpus BLEU or chrF from hypothesis and reference files
    Score(ScoreArgs),
    /// Export system pairs, or summarize one metric's delta distribution
    Pairs(PairsArgs),
    /// Pairwise accuracy against human rankings
    Accuracy(AccuracyArgs),
    /// Fit accuracy curves and write calibration JSON
    Calibrate(CalibrateArgs),
    /// Compare a calibration's estimates with held-out pairs
    Validate(ValidateArgs),
    /// Threshold table at 50..95% estimated accuracy
    Thresholds(ThresholdsArgs),
    /// Delta in one metric to equally accurate deltas in others
    Convert(ConvertArgs),
    /// Paired t-test between two systems, optionally across testset sizes
    Significance(SignificanceArgs),
    /// Per-pair metric disagreement around a pivot-metric delta
    Disagreement(DisagreementArgs),
    /// Calibration JSON for the threshold explorer, with optional test vectors
    #[command(name = "export-ui")]
    ExportUi(ExportUiArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricKind {
    Bleu,
    Chrf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// One hypothesis per line
    #[arg(long)]
    hyp: PathBuf,
    /// One reference per line, parallel to --hyp
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, value_enum, default_value = "bleu")]
    metric: MetricKind,
    #[arg(long, value_enum, default_value = "default")]
    tokenizer: TokenizerArg,
    #[arg(long)]
    lowercase: bool,
    /// Add-k smoothing for orders above unigrams (BLEU only)
    #[arg(long, value_name = "K")]
    add_k: Option<f64>,
    /// Emit per-segment scores as segment-score records for this system instead
    /// of one corpus score. Needs --dataset and --lang-pair.
    #[arg(long, value_name = "SYSTEM")]
    segments: Option<String>,
    #[arg(long, requires = "segments")]
    dataset: Option<String>,
    #[arg(long, requires = "segments")]
    lang_pair: Option<String>,
    /// Metric name written into segment records
    #[arg(long, requires = "segments")]
    name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TokenizerArg {
    Default,
    Char,
}

#[derive(Debug, Args)]
struct PairsArgs {
    #[command(flatten)]
    input: PairInput,
    /// Summarize |delta| of this metric instead of exporting pairs
    #[arg(long, value_name = "METRIC")]
    distribution: Option<String>,
    /// Histogram bins for --distribution
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Debug, Args)]
struct AccuracyArgs {
    #[command(flatten)]
    input: PairInput,
    /// One metric instead of the full leaderboard
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightingArg {
    Uniform,
    InverseWidth,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    input: PairInput,
    /// Comma-separated metrics; default all
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Pairs per bin
    #[arg(long, default_value_t = 300)]
    k: usize,
    /// Maximum number of bin levels
    #[arg(long, default_value_t = 2000)]
    levels: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    weighting: WeightingArg,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: PairInput,
    /// Calibration JSON to check; default the bundled published thresholds
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    metric: String,
    #[arg(long, default_value_t = 300)]
    k: usize,
    #[arg(long, default_value_t = 2000)]
    levels: usize,
}

#[derive(Debug, Args)]
struct ThresholdsArgs {
    /// Calibration JSON; default the bundled published thresholds
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    from: String,
    #[arg(long, allow_negative_numbers = true)]
    delta: f64,
    /// Target metric; default every calibrated metric
    #[arg(long)]
    to: Option<String>,
}

#[derive(Debug, Args)]
struct SignificanceArgs {
    #[command(flatten)]
    data: DataInput,
    #[arg(long)]
    metric: String,
    #[arg(long = "sys-a")]
    sys_a: String,
    #[arg(long = "sys-b")]
    sys_b: String,
    /// Comma-separated testset sizes for the subsampling trace
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.999)]
    confidence: f64,
    /// Bootstrap the CI over per-run means with this many resamples instead of a t interval
    #[arg(long, value_name = "N")]
    bootstrap: Option<usize>,
    /// Take the first N segments instead of resampling (diagnostic)
    #[arg(long)]
    identity: bool,
}

#[derive(Debug, Args)]
struct DisagreementArgs {
    #[command(flatten)]
    input: PairInput,
    #[arg(long)]
    pivot: String,
    #[arg(long, default_value_t = 1.0)]
    center: f64,
    #[arg(long, default_value_t = 0.1)]
    radius: f64,
    /// Comma-separated metrics; default all
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Keep at most this many pairs, drawn with --seed
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExportUiArgs {
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Also write forward and inverse probes
    #[arg(long, action = ArgAction::SetTrue)]
    with_test_vectors: bool,
    /// Where to write the probes; default next to --out as <stem>.vectors.json
    #[arg(long, requires = "with_test_vectors")]
    vectors: Option<PathBuf>,
    /// Minimum number of forward probes
    #[arg(long, default_value_t = 500)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct Ctx {
    format: Option<Format>,
    out: Option<PathBuf>,
}

impl Ctx {
    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn emit(&self, content: &str) -> CliResult<()> {
        emit(self.out.as_deref(), content)
    }

    fn color(&self) -> bool {
        self.out.is_none() && color_enabled(std::io::stdout().is_terminal())
    }
}

fn main() -> ExitCode {
    let color = if std::env::var_os("MTCAL_NO_COLOR").is_some() {
        ColorChoice::Never
    } else {
        ColorChoice::Auto
    };
    let matches = Cli::command().color(color).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let ctx = Ctx {
        format: cli.format,
        out: cli.out,
    };
    match run(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{}", e.render(stderr_color()));
            ExitCode::from(e.exit as u8)
        }
    }
}

fn run(ctx: &Ctx, command: Command) -> CliResult<()> {
    if let Some(out) = &ctx.out {
        if out.is_dir() {
            return Err(CliError::usage(format!("--out {} is a directory", out.display())));
        }
    }
    match command {
        Command::Score(a) => score(ctx, a),
        Command::Pairs(a) => pairs(ctx, a),
        Command::Accuracy(a) => accuracy(ctx, a),
        Command::Calibrate(a) => calibrate_cmd(ctx, a),
        Command::Validate(a) => validate_cmd(ctx, a),
        Command::Thresholds(a) => thresholds(ctx, a),
        Command::Convert(a) => convert(ctx, a),
        Command::Significance(a) => significance(ctx, a),
        Command::Disagreement(a) => disagreement(ctx, a),
        Command::ExportUi(a) => export_ui(ctx, a),
    }
}

fn f64_text(x: f64, precision: usize) -> String {
    format!("{x:.precision$}")
}

fn score(ctx: &Ctx, a: ScoreArgs) -> CliResult<()> {
    existing(&a.hyp)?;
    existing(&a.reference)?;
    if a.add_k.is_some() && a.metric != MetricKind::Bleu {
        return Err(CliError::usage("--add-k applies to BLEU only"));
    }
    let tokenizer = match a.tokenizer {
        TokenizerArg::Default => Tokenizer::Default,
        TokenizerArg::Char => Tokenizer::Char,
    };
    let bleu_config = BleuConfig {
        smoothing: a.add_k.map_or(Smoothing::None, |k| Smoothing::AddK { k }),
        tokenizer,
        lowercase: a.lowercase,
        ..Default::default()
    };
    let segment_target = match &a.segments {
        Some(system) => match (&a.dataset, &a.lang_pair) {
            (Some(d), Some(l)) => Some(SystemKey::new(d.clone(), l.clone(), system.clone())),
            _ => return Err(CliError::usage("--segments needs --dataset and --lang-pair")),
        },
        None => None,
    };
    let hyps = read_lines(&a.hyp)?;
    let refs = read_lines(&a.reference)?;
    let metric_err = |e| CliError::domain("metric", e);
    let label = match a.metric {
        MetricKind::Bleu => "BLEU",
        MetricKind::Chrf => "chrF",
    };

    if let Some(key) = segment_target {
        if hyps.len() != refs.len() {
            return Err(metric_err(mtcal::metrics::MetricError::LengthMismatch {
                hypotheses: hyps.len(),
                references: refs.len(),
            }));
        }
        let name = a.name.clone().unwrap_or_else(|| label.to_string());
        let records = hyps
            .iter()
            .zip(&refs)
            .enumerate()
            .map(|(i, (h, r))| {
                let score = match a.metric {
                    MetricKind::Bleu => sentence_bleu(h, r, &bleu_config).map(|b| b.score),
                    MetricKind::Chrf => chrf(&[h], &[r], &ChrfConfig::default()),
                }
                .map_err(metric_err)?;
                Ok(SegmentScoreRecord {
                    metric: name.clone(),
                    dataset: key.dataset.clone(),
                    lang_pair: key.lang_pair.clone(),
                    system: key.system.clone(),
                    segment_id: i as u64,
                    score,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let format = match ctx.format(Format::Tsv) {
            Format::Json => InputFormat::Jsonl,
            _ => InputFormat::Tsv,
        };
        return ctx.emit(&write_segment_scores(&records, format));
    }

    match a.metric {
        MetricKind::Bleu => {
            let report = bleu(&hyps, &refs, &bleu_config).map_err(metric_err)?;
            let text = match ctx.format(Format::Text) {
                Format::Json => output::json(&serde_json::to_value(&report).expect("report serializes")),
                Format::Tsv => tsv(&[
                    vec!["metric".into(), "score".into(), "brevity_penalty".into(), "signature".into()],
                    vec![label.into(), report.score.to_string(), report.brevity_penalty.to_string(), report.tokenizer.clone()],
                ]),
                Format::Text => format!(
                    "BLEU = {:.2} {} (BP = {:.3} hyp_len = {} ref_len = {}; {})\n",
                    report.score,
                    report.precisions.iter().map(|p| format!("{:.1}", 100.0 * p)).collect::<Vec<_>>().join("/"),
                    report.brevity_penalty,
                    report.hyp_length,
                    report.ref_length,
                    report.tokenizer
                ),
            };
            ctx.emit(&text)
        }
        MetricKind::Chrf => {
            let score = chrf(&hyps, &refs, &ChrfConfig::default()).map_err(metric_err)?;
            let text = match ctx.format(Format::Text) {
                Format::Json => output::json(&json!({"metric": label, "score": score})),
                Format::Tsv => tsv(&[vec!["metric".into(), "score".into()], vec![label.into(), score.to_string()]]),
                Format::Text => format!("chrF = {score:.2}\n"),
            };
            ctx.emit(&text)
        }
    }
}

fn pairs(ctx: &Ctx, a: PairsArgs) -> CliResult<()> {
    a.input.check()?;
    if a.bins == 0 {
        return Err(CliError::usage("--bins must be at least 1"));
    }
    let set = a.input.load()?;
    let Some(metric) = a.distribution else {
        return match ctx.format(Format::Tsv) {
            Format::Json => ctx.emit(&output::json(&serde_json::to_value(&set.pairs).expect("pairs serialize"))),
            _ => ctx.emit(&write_pairs_tsv(&set)),
        };
    };
    let summary =
        delta_distribution(&set, &metric, &HistogramBins::Uniform(a.bins)).map_err(|e| CliError::domain("pairing", e))?;
    let h = &summary.histogram;
    let bins: Vec<Vec<String>> = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![h.edges[i].to_string(), h.edges[i + 1].to_string(), c.to_string()])
        .collect();
    let text = match ctx.format(Format::Text) {
        Format::Json => output::json(&serde_json::to_value(&summary).expect("summary serializes")),
        Format::Tsv => {
            let mut rows = vec![vec!["low".to_string(), "high".into(), "count".into()]];
            rows.extend(bins);
            tsv(&rows)
        }
        Format::Text => {
            let mut s = format!(
                "{metric}: n = {}, |delta| min {:.4} max {:.4} mean {:.4} sd {:.4}\n",
                summary.count, summary.min, summary.max, summary.mean, summary.stddev
            );
            let mut rows = vec![vec!["low".to_string(), "high".into(), "count".into()]];
            rows.extend(bins.into_iter().map(|r| {
                let parse = |x: &str| x.parse::<f64>().map(|v| format!("{v:.4}")).unwrap_or_default();
                vec![parse(&r[0]), parse(&r[1]), r[2].clone()]
            }));
            s.push_str(&align(&rows));
            s
        }
    };
    ctx.emit(&text)
}

fn accuracy(ctx: &Ctx, a: AccuracyArgs) -> CliResult<()> {
    a.input.check()?;
    let set = a.input.load()?;
    let reports = match &a.metric {
        Some(m) => vec![pairwise_accuracy(&set, m).map_err(|e| CliError::domain("pairing", e))?],
        None => {
            let rows = leaderboard(&set);
            if rows.is_empty() {
                return Err(CliError::domain("pairing", "pair set carries no metric deltas"));
            }
            for r in rows.iter().filter_map(|r| r.as_ref().err()) {
                eprintln!("warning: {r}");
            }
            rows.into_iter().filter_map(Result::ok).collect()
        }
    };
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.metric.clone(),
                format!("{:.3}", r.accuracy),
                r.agreements.to_string(),
                r.total.to_string(),
                r.human_ties_excluded.to_string(),
                r.metric_ties.to_string(),
            ]
        })
        .collect();
    let header = ["metric", "accuracy", "agree", "pairs", "human_ties", "metric_ties"].map(String::from).to_vec();
    let text = match ctx.format(Format::Text) {
        Format::Json => output::json(&serde_json::to_value(&reports).expect("reports serialize")),
        Format::Tsv => tsv(&[vec![header], rows].concat()),
        Format::Text => align(&[vec![header], rows].concat()),
    };
    ctx.emit(&text)
}

fn calibrate_cmd(ctx: &Ctx, a: CalibrateArgs) -> CliResult<()> {
    a.input.check()?;
    if a.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    if a.levels == 0 {
        return Err(CliError::usage("--levels must be at least 1"));
    }
    let set = a.input.load()?;
    let metrics: Vec<String> = if a.metrics.is_empty() {
        set.metrics().into_iter().collect()
    } else {
        a.metrics
    };
    if metrics.is_empty() {
        return Err(CliError::domain("calibration", "pair set carries no metric deltas"));
    }
    let options = CalibrateOptions {
        k: a.k,
        grid: LevelGrid::Observed { cap: a.levels },
        weighting: match a.weighting {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::InverseWidth => Weighting::InverseWidth,
        },
        ..Default::default()
    };
    let cal = calibrate(&set, &metrics, &options);
    for (m, e) in &cal.errors {
        eprintln!("warning: metric {m} not calibrated: {e}");
    }
    if cal.is_empty() {
        let mut err = CliError::domain("calibration", "no metric could be calibrated");
        for (m, e) in &cal.errors {
            err = err.with("metric", format!("{m}: {e}"));
        }
        return Err(err);
    }
    let text = match ctx.format(Format::Json) {
        Format::Json => calibration_to_json(&cal),
        f => {
            let mut rows = vec![["metric", "phi1", "phi2", "rmse", "bins", "converged", "low_confidence"]
                .map(String::from)
                .to_vec()];
            for e in &cal.entries {
                rows.push(vec![
                    e.metric().to_string(),
                    f64_text(e.fit.phi1, 4),
                    f64_text(e.fit.phi2, 4),
                    f64_text(e.fit.rmse, 4),
                    e.fit.n_points.to_string(),
                    e.fit.converged.to_string(),
                    e.low_confidence.to_string(),
                ]);
            }
            if f == Format::Tsv {
                tsv(&rows)
            } else {
                align(&rows)
            }
        }
    };
    ctx.emit(&text)
}

fn validate_cmd(ctx: &Ctx, a: ValidateArgs) -> CliResult<()> {
    a.input.check()?;
    if a.k == 0 || a.levels == 0 {
        return Err(CliError::usage("--k and --levels must be at least 1"));
    }
    let cal = load_calibration(a.calibration.as_deref())?;
    let set = a.input.load()?;
    let points = validate(&cal, &set, &a.metric, a.k, &LevelGrid::Observed { cap: a.levels })
        .map_err(|e| CliError::domain("calibration", e))?;
    let header = ["level", "mean_estimated", "real_accuracy", "count"].map(String::from).to_vec();
    let rows = |p: usize| -> Vec<Vec<String>> {
        points
            .iter()
            .map(|v| {
                let n = |x: f64| if p == 0 { x.to_string() } else { f64_text(x, p) };
                vec![n(v.level), n(v.mean_estimated), n(v.real_accuracy), v.count.to_string()]
            })
            .collect()
    };
    let text = match ctx.format(Format::Text) {
        Format::Json => output::json(&serde_json::to_value(&points).expect("points serialize")),
        Format::Tsv => tsv(&[vec![header], rows(0)].concat()),
        Format::Text => align(&[vec![header], rows(4)].concat()),
    };
    ctx.emit(&text)
}

fn thresholds(ctx: &Ctx, a: ThresholdsArgs) -> CliResult<()> {
    let cal = load_calibration(a.calibration.as_deref())?;
    let table = standard_table(&cal).map_err(|e| CliError::domain("calibration", e))?;
    let text = match ctx.format(Format::Text) {
        Format::Json => output::json(&table.to_json()),
        Format::Tsv => table.render_tsv(),
        Format::Text => table.render_text(),
    };
    ctx.emit(&text)
}

fn percent(accuracy: f64) -> String {
    format!("{:.0}%", 100.0 * accuracy)
}

fn convert(ctx: &Ctx, a: ConvertArgs) -> CliResult<()> {
    if !a.delta.is_finite() {
        return Err(CliError::usage("--delta must be a finite number"));
    }
    let cal = load_calibration(a.calibration.as_deref())?;
    let err = |e| CliError::domain("calibration", e);
    let eqs = match &a.to {
        Some(to) => vec![convert_delta(&cal, &a.from, a.delta, to).map_err(err)?],
        None => convert_to_all(&cal, &a.from, a.delta).map_err(err)?,
    };
    let precision = |m: &str| cal.get(m).map(|e| e.precision).unwrap_or(2);
    let cell = |e: &mtcal::Equivalence| match e.to_delta {
        Some(d) if e.below_floor => format!("{} (below floor)", f64_text(d, precision(&e.to_metric))),
        Some(d) => f64_text(d, precision(&e.to_metric)),
        None => "unreachable".to_string(),
    };
    let text = match ctx.format(Format::Text) {
        Format::Json => output::json(&Value::Array(
            eqs.iter()
                .map(|e| {
                    json!({
                        "from_metric": e.from_metric,
                        "to_metric": e.to_metric,
                        "from_delta": e.from_delta,
                        "accuracy": e.accuracy,
                        "to_delta": e.to_delta,
                        "below_floor": e.below_floor,
                    })
                })
                .collect(),
        )),
        Format::Tsv => {
            let mut rows = vec![["metric", "delta", "accuracy", "below_floor"].map(String::from).to_vec()];
            for e in &eqs {
                rows.push(vec![
                    e.to_metric.clone(),
                    e.to_delta.map_or(String::new(), |d| d.to_string()),
                    e.accuracy.to_string(),
                    e.below_floor.to_string(),
                ]);
            }
            tsv(&rows)
        }
        Format::Text if a.to.is_some() => format!("{} (est. accuracy {})\n", cell(&eqs[0]), percent(eqs[0].accuracy)),
        Format::Text => {
            let mut s = format!("{} {} (est. accuracy {})\n", a.from, a.delta, percent(eqs[0].accuracy));
            let rows: Vec<Vec<String>> = eqs.iter().map(|e| vec![e.to_metric.clone(), cell(e)]).collect();
            s.push_str(&align(&rows));
            s
        }
    };
    ctx.emit(&text)
}

fn significance(ctx: &Ctx, a: SignificanceArgs) -> CliResult<()> {
    a.data.check()?;
    if a.runs < 2 && !a.sizes.is_empty() {
        return Err(CliError::usage("--runs must be at least 2"));
    }
    if !(a.confidence > 0.0 && a.confidence < 1.0) {
        return Err(CliError::usage("--confidence must lie in (0, 1)"));
    }
    let dataset = a.data.load()?;
    let testsets = dataset.testsets();
    let pick = |given: &Option<String>, field: &str, all: Vec<String>| -> CliResult<String> {
        match given {
            Some(v) => Ok(v.clone()),
            None => {
                let mut all = all;
                all.dedup();
                match all.as_slice() {
                    [one] => Ok(one.clone()),
                    _ => Err(CliError::usage(format!("several {field}s in the data; pick one with --{field}"))),
                }
            }
        }
    };
    let mut datasets: Vec<String> = testsets.iter().map(|t| t.0.clone()).collect();
    datasets.sort();
    let ds = pick(&a.data.dataset, "dataset", datasets)?;
    let mut lps: Vec<String> = testsets.iter().filter(|t| t.0 == ds).map(|t| t.1.clone()).collect();
    lps.sort();
    let lp = pick(&a.data.lang_pair, "lang-pair", lps)?;
    let key_a = SystemKey::new(ds.clone(), lp.clone(), a.sys_a.clone());
    let key_b = SystemKey::new(ds, lp, a.sys_b.clone());
    let err = |e| CliError::domain("significance", e);
    let diffs = segment_differences(&dataset, &a.metric, &key_a, &key_b).map_err(err)?;

    if a.sizes.is_empty() {
        let r = paired_t_test(&diffs).map_err(err)?;
        let text = match ctx.format(Format::Text) {
            Format::Json => output::json(&json!({
                "metric": a.metric,
                "system_a": key_a.to_string(),
                "system_b": key_b.to_string(),
                "segments": diffs.len(),
                "result": r,
            })),
            Format::Tsv => tsv(&[
                ["mean_diff", "t", "dof", "p", "degenerate"].map(String::from).to_vec(),
                vec![
                    r.mean_diff.to_string(),
                    r.t_statistic.to_string(),
                    r.dof.to_string(),
                    r.p_value.to_string(),
                    r.degenerate.to_string(),
                ],
            ]),
            Format::Text => format!(
                "{} - {} on {} ({} segments): mean diff {:.6}, t = {:.4}, dof = {}, p = {:.4e}{}\n",
                key_a,
                key_b,
                a.metric,
                diffs.len(),
                r.mean_diff,
                r.t_statistic,
                r.dof,
                r.p_value,
                if r.degenerate { " (zero variance)" } else { "" }
            ),
        };
        return ctx.emit(&text);
    }

    let cfg = SubsampleConfig {
        sizes: a.sizes,
        runs: a.runs,
        seed: a.seed,
        resampling: if a.identity { Resampling::Identity } else { Resampling::WithReplacement },
        ci: a.bootstrap.map_or(CiMethod::T, |resamples| CiMethod::PercentileBootstrap { resamples }),
        confidence: a.confidence,
    };
    let trace = subsample_diffs(&diffs, &cfg).map_err(err)?;
    if trace.supersampled.iter().any(|&s| s) {
        eprintln!("warning: sizes above {} segments are supersampled", trace.supersampled_from);
    }
    let text = match ctx.format(Format::Text) {
        Format::Json => output::json(&serde_json::to_value(&trace).expect("trace serializes")),
        Format::Tsv => trace_csv(&trace).replace(',', "\t"),
        Format::Text => trace_csv(&trace),
    };
    ctx.emit(&text)
}

fn disagreement(ctx: &Ctx, a: DisagreementArgs) -> CliResult<()> {
    a.input.check()?;
    if !(a.center.is_finite() && a.radius.is_finite() && a.radius >= 0.0) {
        return Err(CliError::usage("--center and --radius must be finite, --radius non-negative"));
    }
    let set = a.input.load()?;
    let metrics: Vec<String> = if a.metrics.is_empty() {
        set.metrics().into_iter().collect()
    } else {
        a.metrics
    };
    let options = DisagreementOptions {
        center: a.center,
        radius: a.radius,
        limit: a.limit,
        seed: a.seed,
    };
    let report = disagreement_report(&set, &metrics, &a.pivot, &options).map_err(|e| CliError::domain("report", e))?;
    let text = match ctx.format(Format::Text) {
        Format::Json => output::json(&json!({
            "pivot": report.pivot,
            "metrics": report.metrics,
            "pairs": report.pairs.iter().map(|p| json!({
                "label": p.label(),
                "human_delta": p.human_delta,
            })).collect::<Vec<_>>(),
            "cells": report.cells,
            "flagged": report.flagged(),
        })),
        Format::Tsv => report.render_tsv(),
        Format::Text => {
            let rows: Vec<Vec<String>> = report.render_tsv().lines().map(|l| l.split('\t').map(String::from).collect()).collect();
            let mut s = align(&rows);
            if ctx.color() {
                s = s
                    .split_inclusive('\n')
                    .map(|line| {
                        line.split(' ')
                            .map(|w| if w.ends_with('*') { format!("\x1b[31m{w}\x1b[0m") } else { w.to_string() })
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .collect();
            }
            s.push_str(&format!("{} of {} cells disagree with humans\n", report.flagged(), report.cells.iter().flatten().flatten().count()));
            s
        }
    };
    ctx.emit(&text)
}

fn vectors_path(a: &ExportUiArgs, out: Option<&Path>) -> CliResult<Option<PathBuf>> {
    if !a.with_test_vectors {
        return Ok(None);
    }
    if let Some(v) = &a.vectors {
        return Ok(Some(v.clone()));
    }
    let out = out.ok_or_else(|| CliError::usage("--with-test-vectors needs --out or --vectors"))?;
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("calibration");
    Ok(Some(out.with_file_name(format!("{stem}.vectors.json"))))
}

fn export_ui(ctx: &Ctx, a: ExportUiArgs) -> CliResult<()> {
    if ctx.format.is_some_and(|f| f != Format::Json) {
        return Err(CliError::usage("export-ui writes JSON only"));
    }
    let vectors_out = vectors_path(&a, ctx.out.as_deref())?;
    if vectors_out.is_some() && vectors_out.as_deref() == ctx.out.as_deref() {
        return Err(CliError::usage("--vectors must differ from --out"));
    }
    let cal = load_calibration(a.calibration.as_deref())?;
    let text = calibration_to_json(&cal);
    let value: Value = serde_json::from_str(&text).expect("calibration JSON parses");
    validate_calibration_value(&value).map_err(|e| CliError::domain("calibration", e))?;
    let Some(vpath) = vectors_out else {
        return ctx.emit(&text);
    };
    let vectors = output::json(&vectors::test_vectors(&cal, a.probes, a.seed)?);
    match ctx.out.as_deref() {
        Some(out) => write_all(&[(out, &text), (&vpath, &vectors)]),
        None => {
            write_all(&[(&vpath, &vectors)])?;
            ctx.emit(&text)
        }
    }
}
