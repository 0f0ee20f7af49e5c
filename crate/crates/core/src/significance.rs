//! Paired t-test on segment-level differences and the testset-size
//! subsampling study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::ingest::{Dataset, SystemKey};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignificanceError {
    #[error("paired t-test needs at least 2 differences, got {0}")]
    TooFewSamples(usize),
    #[error("differences must be finite")]
    NonFinite,
    #[error("unknown system(s): {0}")]
    UnknownSystems(String),
    #[error("metric {metric} has no segment scores for {system}")]
    MetricMissing { metric: String, system: String },
    #[error("systems {a} and {b} do not share a parallel segment set")]
    NotParallel { a: String, b: String },
    #[error("invalid subsample configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub mean_diff: f64,
    /// Zero sample variance. `p_value` is then 1 for a zero mean and 0 otherwise.
    pub degenerate: bool,
}

/// `P(T <= t)` for Student's t with `dof` degrees of freedom.
pub fn t_cdf(t: f64, dof: f64) -> f64 {
    let tail = 0.5 * t_two_sided_p(t, dof);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `ln B(a, 1/2)`. For large `a` the difference `ln Γ(a + 1/2) - ln Γ(a)` comes
/// from its asymptotic series; subtracting two huge `ln Γ` values would lose
/// about 1e-9 relative precision at `a = 5e5`.
fn ln_beta_half(a: f64) -> f64 {
    let ln_gamma_half = 0.5 * std::f64::consts::PI.ln();
    if a < 20.0 {
        return ln_gamma(a) + ln_gamma_half - ln_gamma(a + 0.5);
    }
    let z = 1.0 / a;
    let z2 = z * z;
    let ratio = 0.5 * a.ln() - z / 8.0 + z * z2 / 192.0 - z * z2 * z2 / 640.0 + 17.0 * z * z2 * z2 * z2 / 14336.0;
    ln_gamma_half - ratio
}

/// Continued fraction of the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let clamp = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `P(|T| >= |t|)` as the regularized incomplete beta `I_x(dof/2, 1/2)` with
/// `x = dof / (dof + t^2)`. Tiny p-values keep their relative precision.
pub fn t_two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_nan() || !(dof > 0.0) {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let (a, b) = (dof / 2.0, 0.5);
    let t2 = t * t;
    let x = dof / (dof + t2);
    let y = t2 / (dof + t2);
    let ln_front = -a * (t2 / dof).ln_1p() + b * y.ln() - ln_beta_half(a);
    let p = if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, y) / b
    };
    p.clamp(0.0, 1.0)
}

fn t_pdf(t: f64, dof: f64) -> f64 {
    let ln_norm = ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0) - 0.5 * (dof * std::f64::consts::PI).ln();
    (ln_norm - (dof + 1.0) / 2.0 * (t * t / dof).ln_1p()).exp()
}

/// Quantile of Student's t: the `t` with `P(T <= t) = p`.
pub fn t_quantile(p: f64, dof: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0 && dof > 0.0, "t_quantile needs p in (0, 1) and dof > 0");
    if p == 0.5 {
        return 0.0;
    }
    let tail = p.min(1.0 - p);
    let y = inv_beta_reg(dof / 2.0, 0.5, 2.0 * tail);
    let mut t = (dof * (1.0 - y) / y).sqrt();
    // Polish the upper-tail value with Newton steps on the tail probability.
    for _ in 0..4 {
        let f = 0.5 * t_two_sided_p(t, dof) - tail;
        let step = f / t_pdf(t, dof);
        if !step.is_finite() {
            break;
        }
        t += step;
        if step.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    if p < 0.5 {
        -t
    } else {
        t
    }
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Two-sided paired t-test on per-segment differences with `n - 1` dof.
pub fn paired_t_test(diffs: &[f64]) -> Result<TTestResult, SignificanceError> {
    if diffs.len() < 2 {
        return Err(SignificanceError::TooFewSamples(diffs.len()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(SignificanceError::NonFinite);
    }
    let dof = diffs.len() - 1;
    let (mean, var) = mean_and_variance(diffs);
    if var == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTestResult {
            t_statistic: t,
            p_value: p,
            dof,
            mean_diff: mean,
            degenerate: true,
        });
    }
    let t = mean / (var / diffs.len() as f64).sqrt();
    Ok(TTestResult {
        t_statistic: t,
        p_value: t_two_sided_p(t, dof as f64),
        dof,
        mean_diff: mean,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    WithReplacement,
    /// The first `size` differences in order; a diagnostic mode.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CiMethod {
    /// t-distribution over the per-run means with `runs - 1` dof.
    #[default]
    T,
    /// Percentiles of bootstrap means of the per-run means.
    PercentileBootstrap { resamples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub resampling: Resampling,
    pub ci: CiMethod,
    pub confidence: f64,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        Self {
            sizes: vec![100, 250, 500, 1000, 2000],
            runs: 50,
            seed: 0,
            resampling: Resampling::WithReplacement,
            ci: CiMethod::T,
            confidence: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleTrace {
    pub sizes: Vec<usize>,
    pub mean_delta: Vec<f64>,
    pub delta_ci: Vec<(f64, f64)>,
    pub mean_p: Vec<f64>,
    /// Sizes larger than the original testset.
    pub supersampled: Vec<bool>,
    /// Runs per size whose t-test was degenerate.
    pub degenerate_runs: Vec<usize>,
    pub runs: usize,
    pub supersampled_from: usize,
    pub seed: u64,
}

fn run_rng(seed: u64, size: usize, run: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(size as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(run as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn run_once(diffs: &[f64], size: usize, rng: Option<ChaCha8Rng>) -> TTestResult {
    let sample: Vec<f64> = match rng {
        Some(mut rng) => (0..size).map(|_| diffs[rng.random_range(0..diffs.len())]).collect(),
        None => diffs[..size].to_vec(),
    };
    paired_t_test(&sample).expect("size >= 2 and finite differences were checked")
}

fn confidence_interval(means: &[f64], cfg: &SubsampleConfig, size: usize) -> (f64, f64) {
    let n = means.len();
    let (m, var) = if n > 1 {
        mean_and_variance(means)
    } else {
        (means[0], 0.0)
    };
    if n < 2 || var == 0.0 {
        return (m, m);
    }
    let alpha = 1.0 - cfg.confidence;
    match cfg.ci {
        CiMethod::T => {
            let half = t_quantile(1.0 - alpha / 2.0, (n - 1) as f64) * (var / n as f64).sqrt();
            (m - half, m + half)
        }
        CiMethod::PercentileBootstrap { resamples } => {
            let mut rng = run_rng(cfg.seed, size, usize::MAX);
            let mut boots: Vec<f64> = (0..resamples.max(1))
                .map(|_| (0..n).map(|_| means[rng.random_range(0..n)]).sum::<f64>() / n as f64)
                .collect();
            boots.sort_by(f64::total_cmp);
            let at = |q: f64| boots[((q * (boots.len() - 1) as f64).round() as usize).min(boots.len() - 1)];
            (at(alpha / 2.0).min(m), at(1.0 - alpha / 2.0).max(m))
        }
    }
}

/// Runs the subsampling study over a difference population.
pub fn subsample_diffs(diffs: &[f64], cfg: &SubsampleConfig) -> Result<SubsampleTrace, SignificanceError> {
    if diffs.is_empty() {
        return Err(SignificanceError::InvalidConfig("empty difference population".into()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(SignificanceError::NonFinite);
    }
    if cfg.runs == 0 {
        return Err(SignificanceError::InvalidConfig("runs must be at least 1".into()));
    }
    if cfg.sizes.is_empty() {
        return Err(SignificanceError::InvalidConfig("no sizes".into()));
    }
    if let Some(s) = cfg.sizes.iter().find(|&&s| s < 2) {
        return Err(SignificanceError::InvalidConfig(format!("size {s} is below 2")));
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(SignificanceError::InvalidConfig("confidence must lie in (0, 1)".into()));
    }
    if cfg.resampling == Resampling::Identity {
        if let Some(s) = cfg.sizes.iter().find(|&&s| s > diffs.len()) {
            return Err(SignificanceError::InvalidConfig(format!(
                "identity resampling cannot produce size {s} from {} differences",
                diffs.len()
            )));
        }
    }

    let mut trace = SubsampleTrace {
        sizes: cfg.sizes.clone(),
        mean_delta: Vec::new(),
        delta_ci: Vec::new(),
        mean_p: Vec::new(),
        supersampled: Vec::new(),
        degenerate_runs: Vec::new(),
        runs: cfg.runs,
        supersampled_from: diffs.len(),
        seed: cfg.seed,
    };
    for &size in &cfg.sizes {
        let results: Vec<TTestResult> = (0..cfg.runs)
            .into_par_iter()
            .map(|run| {
                let rng = match cfg.resampling {
                    Resampling::WithReplacement => Some(run_rng(cfg.seed, size, run)),
                    Resampling::Identity => None,
                };
                run_once(diffs, size, rng)
            })
            .collect();
        let means: Vec<f64> = results.iter().map(|r| r.mean_diff).collect();
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let (lo, hi) = confidence_interval(&means, cfg, size);
        trace.mean_delta.push(mean);
        trace.delta_ci.push((lo.min(mean), hi.max(mean)));
        trace.mean_p.push(results.iter().map(|r| r.p_value).sum::<f64>() / results.len() as f64);
        trace.supersampled.push(size > diffs.len());
        trace.degenerate_runs.push(results.iter().filter(|r| r.degenerate).count());
    }
    Ok(trace)
}

/// Per-segment differences `a - b` for one metric, ordered by segment id.
pub fn segment_differences(
    dataset: &Dataset,
    metric: &str,
    a: &SystemKey,
    b: &SystemKey,
) -> Result<Vec<f64>, SignificanceError> {
    let unknown: Vec<String> = [a, b]
        .iter()
        .filter(|k| dataset.system(k).is_none())
        .map(|k| k.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(SignificanceError::UnknownSystems(unknown.join(", ")));
    }
    let scores = |k: &SystemKey| {
        dataset
            .segment_scores(metric, k)
            .ok_or_else(|| SignificanceError::MetricMissing {
                metric: metric.to_string(),
                system: k.to_string(),
            })
    };
    let (sa, sb) = (scores(a)?, scores(b)?);
    let same_ids = sa.len() == sb.len() && sa.iter().zip(sb).all(|(x, y)| x.0 == y.0);
    if !same_ids {
        return Err(SignificanceError::NotParallel {
            a: a.to_string(),
            b: b.to_string(),
        });
    }
    Ok(sa.iter().zip(sb).map(|(x, y)| x.1 - y.1).collect())
}

pub fn subsample_study(
    dataset: &Dataset,
    metric: &str,
    a: &SystemKey,
    b: &SystemKey,
    cfg: &SubsampleConfig,
) -> Result<SubsampleTrace, SignificanceError> {
    subsample_diffs(&segment_differences(dataset, metric, a, b)?, cfg)
}

/// CSV with columns `size,mean_delta,ci_low,ci_high,mean_p,supersampled`.
pub fn trace_csv(trace: &SubsampleTrace) -> String {
    let mut out = String::from("size,mean_delta,ci_low,ci_high,mean_p,supersampled\n");
    for i in 0..trace.sizes.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            trace.sizes[i],
            trace.mean_delta[i],
            trace.delta_ci[i].0,
            trace.delta_ci[i].1,
            trace.mean_p[i],
            trace.supersampled[i]
        ));
    }
    out
}
