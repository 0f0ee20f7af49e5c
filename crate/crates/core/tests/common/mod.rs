//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use mtcal::ingest::{Dataset, Protocol, SegmentScoreRecord, SystemRecord};
use mtcal::pairing::{DirectionGroup, PairSet, Relation, SystemPair};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct RawDataset {
    pub systems: Vec<SystemRecord>,
    pub scores: Vec<SegmentScoreRecord>,
}

impl RawDataset {
    pub fn build(&self) -> Dataset {
        Dataset::build(self.systems.clone(), self.scores.clone()).unwrap()
    }
}

/// One testset `("ds", "en-de")` with random human and segment scores.
/// `dup` copies system 0's scores into the last system to create exact ties.
pub fn random_dataset(rng: &mut impl Rng, n_systems: usize, n_segments: usize, metrics: &[&str], dup: bool) -> RawDataset {
    let mut systems = Vec::new();
    let mut scores = Vec::new();
    let mut first: Vec<Vec<f64>> = Vec::new();
    let mut first_human = 0.0;
    for s in 0..n_systems {
        let copy = dup && s == n_systems - 1 && s > 0;
        let human = if copy { first_human } else { rng.random_range(-5.0..5.0) };
        if s == 0 {
            first_human = human;
        }
        systems.push(SystemRecord {
            dataset: "ds".into(),
            lang_pair: "en-de".into(),
            system: format!("sys{s}"),
            human_score: human,
            protocol: Protocol::Mqm,
            year: Some(2020 + s as i32 % 4),
            team: Some(format!("team{}", s % 3)),
            domain: None,
        });
        for (mi, m) in metrics.iter().enumerate() {
            if s == 0 {
                first.push(Vec::new());
            }
            for seg in 0..n_segments {
                let score = if copy { first[mi][seg] } else { rng.random_range(0.0..100.0) };
                if s == 0 {
                    first[mi].push(score);
                }
                scores.push(SegmentScoreRecord {
                    metric: m.to_string(),
                    dataset: "ds".into(),
                    lang_pair: "en-de".into(),
                    system: format!("sys{s}"),
                    segment_id: seg as u64,
                    score,
                });
            }
        }
    }
    RawDataset { systems, scores }
}

/// Enumerates all C(n, 2) system pairs directly from the raw records.
/// Returns `(agreements, counted pairs)`.
pub fn brute_force_accuracy(raw: &RawDataset, metric: &str) -> (usize, usize) {
    let mean = |sys: &str| {
        let cells: Vec<f64> = raw
            .scores
            .iter()
            .filter(|r| r.metric == metric && r.system == sys)
            .map(|r| r.score)
            .collect();
        cells.iter().sum::<f64>() / cells.len() as f64
    };
    let (mut agree, mut total) = (0, 0);
    for i in 0..raw.systems.len() {
        for j in i + 1..raw.systems.len() {
            let (a, b) = (&raw.systems[i], &raw.systems[j]);
            let h = a.human_score - b.human_score;
            if h == 0.0 {
                continue;
            }
            total += 1;
            let m = mean(&a.system) - mean(&b.system);
            if m != 0.0 && (m > 0.0) == (h > 0.0) {
                agree += 1;
            }
        }
    }
    (agree, total)
}

const VOCAB: [&str; 8] = ["the", "cat", "sat", "on", "a", "mat", "dog", "ran"];

pub fn random_sentence(rng: &mut impl Rng, max_len: usize) -> String {
    let n = rng.random_range(0..=max_len);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

pub fn random_corpus(rng: &mut impl Rng, segments: usize) -> (Vec<String>, Vec<String>) {
    let hyps = (0..segments).map(|_| random_sentence(rng, 9)).collect();
    let refs = (0..segments).map(|_| random_sentence(rng, 9)).collect();
    (hyps, refs)
}

fn count_of<T: PartialEq>(haystack: &[Vec<T>], needle: &[T]) -> u64 {
    haystack.iter().filter(|g| g.as_slice() == needle).count() as u64
}

fn grams<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    if items.len() < n {
        return Vec::new();
    }
    (0..=items.len() - n).map(|i| items[i..i + n].to_vec()).collect()
}

/// Clipped matches and totals by quadratic scanning.
fn clipped<T: Clone + PartialEq>(hyp: &[T], reference: &[T], n: usize) -> (u64, u64, u64) {
    let hg = grams(hyp, n);
    let rg = grams(reference, n);
    let mut matched = 0;
    for (i, g) in hg.iter().enumerate() {
        if hg[..i].contains(g) {
            continue;
        }
        matched += count_of(&hg, g).min(count_of(&rg, g));
    }
    (matched, hg.len() as u64, rg.len() as u64)
}

/// Whitespace-token corpus BLEU, dropping orders with no hypothesis n-grams.
pub fn naive_bleu(hyps: &[String], refs: &[String], max_order: usize, add_k: Option<f64>) -> f64 {
    let mut m = vec![0u64; max_order];
    let mut t = vec![0u64; max_order];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in hyps.iter().zip(refs) {
        let h: Vec<&str> = h.split_whitespace().collect();
        let rf: Vec<&str> = rf.split_whitespace().collect();
        c += h.len();
        r += rf.len();
        for n in 1..=max_order {
            let (mm, tt, _) = clipped(&h, &rf, n);
            m[n - 1] += mm;
            t[n - 1] += tt;
        }
    }
    let mut log_sum = 0.0;
    let mut used = 0;
    for n in 0..max_order {
        if t[n] == 0 {
            break;
        }
        let p = match add_k {
            Some(k) if n > 0 => (m[n] as f64 + k) / (t[n] as f64 + k),
            _ => m[n] as f64 / t[n] as f64,
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
        used += 1;
    }
    if used == 0 || c == 0 {
        return 0.0;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    (100.0 * bp * (log_sum / used as f64).exp()).min(100.0)
}

/// Corpus chrF over whitespace-stripped characters.
pub fn naive_chrf(hyps: &[String], refs: &[String], order: usize, beta: f64) -> f64 {
    let mut m = vec![0u64; order];
    let mut th = vec![0u64; order];
    let mut tr = vec![0u64; order];
    for (h, rf) in hyps.iter().zip(refs) {
        let h: Vec<char> = h.chars().filter(|c| !c.is_whitespace()).collect();
        let rf: Vec<char> = rf.chars().filter(|c| !c.is_whitespace()).collect();
        for n in 1..=order {
            let (mm, a, b) = clipped(&h, &rf, n);
            m[n - 1] += mm;
            th[n - 1] += a;
            tr[n - 1] += b;
        }
    }
    let (mut p, mut r, mut k) = (0.0, 0.0, 0.0);
    for n in 0..order {
        if th[n] > 0 && tr[n] > 0 {
            p += m[n] as f64 / th[n] as f64;
            r += m[n] as f64 / tr[n] as f64;
            k += 1.0;
        }
    }
    if k == 0.0 {
        return 0.0;
    }
    let (p, r) = (p / k, r / k);
    let b2 = beta * beta;
    if b2 * p + r == 0.0 {
        return 0.0;
    }
    (100.0 * (1.0 + b2) * p * r / (b2 * p + r)).min(100.0)
}

pub fn sigmoid(phi1: f64, phi2: f64, x: f64) -> f64 {
    phi1 / (1.0 + (-phi2 * x).exp())
}

pub fn bare_pair(id: usize, human: f64, deltas: &[(&str, f64)]) -> SystemPair {
    SystemPair {
        dataset: "syn".into(),
        lang_pair: "en-de".into(),
        sys_a: format!("a{id:05}"),
        sys_b: format!("b{id:05}"),
        human_delta: human,
        metric_deltas: deltas.iter().map(|(m, d)| (m.to_string(), *d)).collect(),
        relation: Relation::Unknown,
        direction_group: DirectionGroup::Ex,
        cjk: false,
        year: None,
    }
}

/// Pairs with `|delta|` drawn from `delta_dist` and humans agreeing with the
/// metric's sign with probability `f(|delta|; phi1, phi2)`.
pub fn sigmoid_pairs(
    rng: &mut impl Rng,
    n: usize,
    phi1: f64,
    phi2: f64,
    metric: &str,
    mut delta_dist: impl FnMut(&mut dyn rand::RngCore) -> f64,
) -> PairSet {
    let pairs = (0..n)
        .map(|i| {
            let mag = delta_dist(rng);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let agree = rng.random_bool(sigmoid(phi1, phi2, mag));
            let human = if agree { sign } else { -sign } * rng.random_range(0.01..1.0);
            bare_pair(i, human, &[(metric, sign * mag)])
        })
        .collect();
    PairSet::new(pairs, "sigmoid generator")
}

/// Deltas 1..6 with alternating signs; pair 4 disagrees with humans.
pub fn hand_six() -> PairSet {
    let pairs = (1..=6)
        .map(|i| {
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            let human = sign * if i == 4 { -1.0 } else { 1.0 };
            bare_pair(i, human, &[("M", sign * i as f64)])
        })
        .collect();
    PairSet::new(pairs, "hand six")
}
