use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_corpus, tokenize, MetricError, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    None,
    /// Adds `k` to numerator and denominator of every order above unigrams.
    AddK { k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
    pub tokenizer: Tokenizer,
    pub lowercase: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            smoothing: Smoothing::None,
            tokenizer: Tokenizer::Default,
            lowercase: false,
        }
    }
}

impl BleuConfig {
    fn validate(&self) -> Result<(), MetricError> {
        if self.max_order < 1 {
            return Err(MetricError::InvalidConfig("max_order must be at least 1".into()));
        }
        if let Smoothing::AddK { k } = self.smoothing {
            if !(k > 0.0 && k.is_finite()) {
                return Err(MetricError::InvalidConfig(format!("add-k smoothing needs k > 0, got {k}")));
            }
        }
        Ok(())
    }
}

/// Corpus BLEU with its sufficient statistics.
///
/// Orders for which the hypotheses contain no n-grams at all are dropped from
/// the geometric mean, so `precisions` has `effective_order` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_length: usize,
    pub ref_length: usize,
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub effective_order: usize,
    pub tokenizer: String,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

pub fn bleu(
    hypotheses: &[impl AsRef<str>],
    references: &[impl AsRef<str>],
    config: &BleuConfig,
) -> Result<BleuReport, MetricError> {
    config.validate()?;
    check_corpus(hypotheses, references)?;

    let order = config.max_order;
    let mut matches = vec![0u64; order];
    let mut totals = vec![0u64; order];
    let (mut hyp_length, mut ref_length) = (0usize, 0usize);

    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp = tokenize(hyp.as_ref(), config.tokenizer, config.lowercase);
        let reference = tokenize(reference.as_ref(), config.tokenizer, config.lowercase);
        hyp_length += hyp.len();
        ref_length += reference.len();
        for n in 1..=order {
            let ref_counts = ngram_counts(&reference, n);
            for (gram, count) in ngram_counts(&hyp, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += (hyp.len() + 1).saturating_sub(n) as u64;
        }
    }

    let effective_order = totals.iter().take_while(|&&t| t > 0).count();
    let precisions: Vec<f64> = (0..effective_order)
        .map(|i| match config.smoothing {
            Smoothing::AddK { k } if i > 0 => (matches[i] as f64 + k) / (totals[i] as f64 + k),
            _ => matches[i] as f64 / totals[i] as f64,
        })
        .collect();

    let brevity_penalty = if hyp_length > ref_length {
        1.0
    } else if hyp_length == 0 {
        0.0
    } else {
        (1.0 - ref_length as f64 / hyp_length as f64).exp()
    };

    let score = if effective_order == 0 || precisions.contains(&0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / effective_order as f64;
        (100.0 * brevity_penalty * log_mean.exp()).min(100.0)
    };

    Ok(BleuReport {
        score,
        precisions,
        brevity_penalty,
        hyp_length,
        ref_length,
        matches,
        totals,
        effective_order,
        tokenizer: config.tokenizer.signature().to_string(),
    })
}

/// Single-segment BLEU. Pair with add-k smoothing, zero counts are common here.
pub fn sentence_bleu(hypothesis: &str, reference: &str, config: &BleuConfig) -> Result<BleuReport, MetricError> {
    bleu(&[hypothesis], &[reference], config)
}
