use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_corpus, MetricError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChrfConfig {
    pub char_order: usize,
    pub beta: f64,
    pub strip_whitespace: bool,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        Self {
            char_order: 6,
            beta: 2.0,
            strip_whitespace: true,
        }
    }
}

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], u64> {
    let mut counts = HashMap::new();
    if chars.len() >= n {
        for gram in chars.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus chrF in `[0, 100]`.
///
/// Match and length statistics are summed over the corpus per order. Precision
/// and recall are averaged over the orders where both sides have n-grams, then
/// combined into F-beta.
pub fn chrf(
    hypotheses: &[impl AsRef<str>],
    references: &[impl AsRef<str>],
    config: &ChrfConfig,
) -> Result<f64, MetricError> {
    if config.char_order < 1 {
        return Err(MetricError::InvalidConfig("char_order must be at least 1".into()));
    }
    if !(config.beta > 0.0 && config.beta.is_finite()) {
        return Err(MetricError::InvalidConfig(format!("beta must be > 0, got {}", config.beta)));
    }
    check_corpus(hypotheses, references)?;

    let order = config.char_order;
    let mut matches = vec![0u64; order];
    let mut hyp_totals = vec![0u64; order];
    let mut ref_totals = vec![0u64; order];

    let prepare = |s: &str| -> Vec<char> {
        if config.strip_whitespace {
            s.chars().filter(|c| !c.is_whitespace()).collect()
        } else {
            s.chars().collect()
        }
    };

    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp = prepare(hyp.as_ref());
        let reference = prepare(reference.as_ref());
        for n in 1..=order {
            let ref_counts = char_ngrams(&reference, n);
            for (gram, count) in char_ngrams(&hyp, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            hyp_totals[n - 1] += (hyp.len() + 1).saturating_sub(n) as u64;
            ref_totals[n - 1] += (reference.len() + 1).saturating_sub(n) as u64;
        }
    }

    let effective: Vec<usize> = (0..order)
        .filter(|&i| hyp_totals[i] > 0 && ref_totals[i] > 0)
        .collect();
    if effective.is_empty() {
        return Ok(0.0);
    }
    let k = effective.len() as f64;
    let precision = effective.iter().map(|&i| matches[i] as f64 / hyp_totals[i] as f64).sum::<f64>() / k;
    let recall = effective.iter().map(|&i| matches[i] as f64 / ref_totals[i] as f64).sum::<f64>() / k;
    let beta2 = config.beta * config.beta;
    let denom = beta2 * precision + recall;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((100.0 * (1.0 + beta2) * precision * recall / denom).min(100.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_100() {
        let refs = ["Ein kleiner Test.", "noch einer"];
        assert_eq!(chrf(&refs, &refs, &ChrfConfig::default()).unwrap(), 100.0);
    }

    #[test]
    fn disjoint_characters_give_zero() {
        assert_eq!(chrf(&["abc"], &["xyz"], &ChrfConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn abcd_vs_abce_order_two() {
        // Unigrams: 3 of 4 match both ways; bigrams ab, bc match out of 3 each side.
        let cfg = ChrfConfig { char_order: 2, ..Default::default() };
        let got = chrf(&["abcd"], &["abce"], &cfg).unwrap();
        let p = (3.0 / 4.0 + 2.0 / 3.0) / 2.0;
        assert!((got - 100.0 * p).abs() < 1e-12);
    }

    #[test]
    fn whitespace_handling() {
        let strip = ChrfConfig::default();
        assert_eq!(chrf(&["a b c"], &["abc"], &strip).unwrap(), 100.0);
        let keep = ChrfConfig { strip_whitespace: false, ..Default::default() };
        assert!(chrf(&["a b c"], &["abc"], &keep).unwrap() < 100.0);
    }

    #[test]
    fn config_and_corpus_errors() {
        assert!(matches!(
            chrf(&["a"], &["a"], &ChrfConfig { char_order: 0, ..Default::default() }),
            Err(MetricError::InvalidConfig(_))
        ));
        assert!(matches!(
            chrf(&["a"], &["a"], &ChrfConfig { beta: 0.0, ..Default::default() }),
            Err(MetricError::InvalidConfig(_))
        ));
        assert!(matches!(chrf(&["a"], &["a", "b"], &ChrfConfig::default()), Err(MetricError::LengthMismatch { .. })));
    }
}
