//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero on any failure.

mod common;

use std::time::{Duration, Instant};

use mtcal::calibration::{
    bin_curve, calibrate, estimated_accuracy, fit_sigmoid, nearest_window, oriented_points, threshold_for_accuracy,
    validate, CalibrateOptions, CalibrationSet, FitOptions, LevelGrid, SigmoidFit, Threshold, THRESHOLD_LEVELS,
};
use mtcal::conversion::convert_delta;
use mtcal::ingest::Dataset;
use mtcal::metrics::{bleu, chrf, BleuConfig, ChrfConfig, Smoothing};
use mtcal::pairing::{build_pairs, pairwise_accuracy, PairSet, Scope};
use mtcal::published::{bundled, published_points, PUBLISHED_METRICS, PUBLISHED_THRESHOLDS};
use mtcal::significance::{paired_t_test, subsample_diffs, t_quantile, SubsampleConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(id: u32, name: &str, limit: Option<Duration>, f: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = result.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / limit {:.0}s", l.as_secs_f64()));
    println!(
        "[{}] {id:>2} {name}: {} ({:.2}s{budget})",
        if pass { "PASS" } else { "FAIL" },
        result.detail,
        elapsed.as_secs_f64()
    );
    pass
}

fn c1_accuracy_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let metrics = ["M1", "M2"];
    let mut checked = 0;
    for trial in 0..200 {
        let n_sys = rng.random_range(3..=10);
        let n_seg = rng.random_range(5..=50);
        let raw = common::random_dataset(&mut rng, n_sys, n_seg, &metrics, trial % 4 == 0);
        let pairs = build_pairs(&raw.build(), &Scope::all()).unwrap();
        for m in metrics {
            let (agree, total) = common::brute_force_accuracy(&raw, m);
            let report = pairwise_accuracy(&pairs, m).unwrap();
            if report.agreements != agree || report.total != total || report.accuracy != agree as f64 / total as f64 {
                return outcome(false, format!("trial {trial} metric {m}: {report:?} vs {agree}/{total}"));
            }
            checked += 1;
        }
    }
    outcome(true, format!("{checked} (dataset, metric) cases equal brute force"))
}

fn transform(raw: &common::RawDataset, metric: &str, f: impl Fn(f64) -> f64) -> Dataset {
    let scores = raw
        .scores
        .iter()
        .cloned()
        .map(|mut r| {
            if r.metric == metric {
                r.score = f(r.score);
            }
            r
        })
        .collect();
    Dataset::build(raw.systems.clone(), scores).unwrap()
}

fn c2_sign_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..100 {
        let n_sys = rng.random_range(3..=10);
        let n_seg = rng.random_range(5..=50);
        let raw = common::random_dataset(&mut rng, n_sys, n_seg, &["M1", "M2"], trial % 3 == 0);
        let base = build_pairs(&raw.build(), &Scope::all()).unwrap();
        let scale = rng.random_range(0.01..100.0);
        let shift = rng.random_range(-1000.0..1000.0);
        for m in ["M1", "M2"] {
            let acc = pairwise_accuracy(&base, m).unwrap();
            let scaled = build_pairs(&transform(&raw, m, |s| s * scale), &Scope::all()).unwrap();
            let shifted = build_pairs(&transform(&raw, m, |s| s + shift), &Scope::all()).unwrap();
            let swapped = PairSet::new(base.pairs.iter().map(|p| p.swapped()).collect(), "swapped");
            for (what, ps) in [("scale", &scaled), ("shift", &shifted), ("swap", &swapped)] {
                let other = pairwise_accuracy(ps, m).unwrap();
                if other.accuracy.to_bits() != acc.accuracy.to_bits() || other.total != acc.total {
                    return outcome(false, format!("trial {trial} {what} {m}: {} vs {}", other.accuracy, acc.accuracy));
                }
            }
        }
    }
    outcome(true, "100 trials of scale, shift and swap bit-identical")
}

/// 40 x-values over the rise and the start of the plateau (f reaches 99.97% of phi1).
fn fit_grid(phi2: f64) -> Vec<f64> {
    let end = 8.0 / phi2;
    (1..=40).map(|i| end * i as f64 / 40.0).collect()
}

fn c3_fit_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut worst = 1.0f64;
    let mut worst_noiseless = 0.0f64;
    for phi1 in [0.85, 0.95] {
        for phi2 in [0.5, 1.5, 4.0] {
            let xs = fit_grid(phi2);
            let clean: Vec<(f64, f64)> = xs.iter().map(|&x| (x, common::sigmoid(phi1, phi2, x))).collect();
            let fit = fit_sigmoid(&clean, &FitOptions::default()).unwrap();
            let rel = ((fit.phi1 - phi1) / phi1).abs().max(((fit.phi2 - phi2) / phi2).abs());
            worst_noiseless = worst_noiseless.max(rel);

            let mut ok = 0;
            for _ in 0..100 {
                let noisy: Vec<(f64, f64)> = clean.iter().map(|&(x, y)| (x, y + noise.sample(&mut rng))).collect();
                let fit = fit_sigmoid(&noisy, &FitOptions::default()).unwrap();
                if ((fit.phi1 - phi1) / phi1).abs() <= 0.05 && ((fit.phi2 - phi2) / phi2).abs() <= 0.05 {
                    ok += 1;
                }
            }
            worst = worst.min(ok as f64 / 100.0);
        }
    }
    outcome(
        worst >= 0.95 && worst_noiseless < 1e-4,
        format!("worst noisy recovery rate {worst:.2} (need >= 0.95), worst noiseless rel. error {worst_noiseless:.1e}"),
    )
}

fn fitted_calibrations() -> Vec<SigmoidFit> {
    let mut fits: Vec<SigmoidFit> = bundled().entries.into_iter().map(|e| e.fit).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let exp = Exp::new(0.6).unwrap();
    let pairs = common::sigmoid_pairs(&mut rng, 3000, 0.9, 1.5, "M", |r| exp.sample(r));
    let set = calibrate(&pairs, &["M".into()], &CalibrateOptions::default());
    fits.push(set.get("M").unwrap().fit.clone());
    fits
}

fn c4_inverse_round_trip() -> Outcome {
    let eps = 1e-6;
    let mut worst = 0.0f64;
    let mut fits = fitted_calibrations();
    fits.extend([SigmoidFit::from_params("wide", 0.999, 0.05), SigmoidFit::from_params("steep", 0.7, 40.0)]);
    for fit in &fits {
        let (lo, hi) = (fit.phi1 / 2.0 + eps, fit.phi1 - eps);
        for i in 0..1000 {
            let a = lo + (hi - lo) * i as f64 / 999.0;
            let x = threshold_for_accuracy(fit, a).unwrap().delta().unwrap();
            worst = worst.max((estimated_accuracy(fit, x).unwrap() - a).abs());
        }
        for a in [fit.phi1, (fit.phi1 + 1.0) / 2.0] {
            if a < 1.0 && threshold_for_accuracy(fit, a).unwrap() != Threshold::Unreachable {
                return outcome(false, format!("{}: a = {a} >= phi1 not unreachable", fit.metric));
            }
        }
    }
    // Dash pattern of the published table: a cell is a dash exactly when its level is at or above phi1.
    let set = bundled();
    for e in &set.entries {
        for (&level, cell) in THRESHOLD_LEVELS.iter().zip(&e.thresholds) {
            if cell.is_none() != (level >= e.fit.phi1) {
                return outcome(false, format!("{} dash pattern differs at {level}", e.metric()));
            }
        }
    }
    outcome(
        worst < 1e-9,
        format!("{} fits x 1000 levels, max |f(f^-1(a)) - a| = {worst:.1e}; dash pattern matches", fits.len()),
    )
}

fn round_to(x: f64, digits: usize) -> f64 {
    let s = 10f64.powi(digits as i32);
    (x * s).round() / s
}

fn c5_published_table() -> Outcome {
    let set: CalibrationSet = bundled();
    let mut good_rows = 0;
    let mut worst = 0.0f64;
    for (row, metric) in PUBLISHED_METRICS.iter().enumerate() {
        let fit = fit_sigmoid(&published_points(row), &FitOptions::default()).unwrap();
        let precision = set.get(metric).unwrap().precision;
        let mut ok = true;
        for (i, &level) in THRESHOLD_LEVELS.iter().enumerate() {
            let published = PUBLISHED_THRESHOLDS[row][i];
            let fitted = threshold_for_accuracy(&fit, level).unwrap().delta();
            match (published, fitted) {
                (Some(p), Some(f)) => {
                    let d = (round_to(f, precision) - p).abs();
                    worst = worst.max(d);
                    ok &= d <= 0.02 + 1e-12;
                }
                (None, None) => {}
                _ => ok = false,
            }
        }
        good_rows += ok as usize;
    }
    let kiwi = |d: f64| convert_delta(&set, "BLEU", d, "CometKiwi22-QE").unwrap();
    let (a, b) = (kiwi(1.06), kiwi(3.35));
    let conv_ok = a.to_delta.is_some_and(|x| (x - 0.24).abs() <= 0.02) && b.to_delta.is_some_and(|x| (x - 0.67).abs() <= 0.02);
    outcome(
        good_rows >= 8 && conv_ok,
        format!(
            "{good_rows}/10 rows within 0.02 (max cell error {worst:.3}); BLEU 1.06 -> {:.3} at {:.1}%, BLEU 3.35 -> {:.3}",
            a.to_delta.unwrap_or(f64::NAN),
            100.0 * a.accuracy,
            b.to_delta.unwrap_or(f64::NAN)
        ),
    )
}

fn c6_subsampling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let normal = Normal::new(0.3, 1.0).unwrap();
    let diffs: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
    let cfg = SubsampleConfig {
        sizes: vec![100, 250, 500, 1000, 2000, 4000],
        runs: 50,
        seed: 6,
        ..Default::default()
    };
    let trace = subsample_diffs(&diffs, &cfg).unwrap();
    let decreasing = trace.mean_p.windows(2).all(|w| w[1] < w[0]);
    // The subsample means vary around the testset mean, which itself is one
    // draw around 0.3. Both spreads enter the interval.
    let pop = paired_t_test(&diffs).unwrap();
    let pop_var = {
        let m = pop.mean_diff;
        diffs.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (diffs.len() - 1) as f64
    };
    let q = t_quantile(0.9995, (cfg.runs - 1) as f64);
    let mut within = true;
    for i in 0..trace.sizes.len() {
        let (lo, hi) = trace.delta_ci[i];
        let run_sd = (hi - lo) / (2.0 * q) * (cfg.runs as f64).sqrt();
        let half = q * (pop_var / diffs.len() as f64 + run_sd * run_sd / cfg.runs as f64).sqrt();
        within &= (trace.mean_delta[i] - 0.3).abs() <= half;
    }
    let width = |i: usize| trace.delta_ci[i].1 - trace.delta_ci[i].0;
    let narrower = width(0) > width(4);
    outcome(
        decreasing && within && narrower && trace.supersampled == vec![false, false, false, false, false, true],
        format!(
            "mean_p {:?}; mean_delta {:?}; CI width 100: {:.4}, 2000: {:.4}",
            trace.mean_p.iter().map(|p| format!("{p:.2e}")).collect::<Vec<_>>(),
            trace.mean_delta.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>(),
            width(0),
            width(4)
        ),
    )
}

fn c7_ttest_oracle() -> Outcome {
    let oracle: Value = serde_json::from_str(include_str!("data/ttest_oracle.json")).unwrap();
    let vectors = oracle["ttest_1samp"].as_array().unwrap();
    let (mut dt, mut dp) = (0.0f64, 0.0f64);
    for v in vectors {
        let diffs: Vec<f64> = v["diffs"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let r = paired_t_test(&diffs).unwrap();
        dt = dt.max((r.t_statistic - v["t"].as_f64().unwrap()).abs());
        dp = dp.max((r.p_value - v["p"].as_f64().unwrap()).abs());
    }
    outcome(
        vectors.len() == 25 && dt < 1e-6 && dp < 1e-6,
        format!("{} vectors, max |dt| = {dt:.1e}, max |dp| = {dp:.1e}", vectors.len()),
    )
}

fn c8_string_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut db, mut dc) = (0.0f64, 0.0f64);
    let none = BleuConfig::default();
    let addk = BleuConfig {
        smoothing: Smoothing::AddK { k: 1.0 },
        ..Default::default()
    };
    for _ in 0..100 {
        let segs = rng.random_range(1..=5);
        let (h, r) = common::random_corpus(&mut rng, segs);
        db = db.max((bleu(&h, &r, &none).unwrap().score - common::naive_bleu(&h, &r, 4, None)).abs());
        db = db.max((bleu(&h, &r, &addk).unwrap().score - common::naive_bleu(&h, &r, 4, Some(1.0))).abs());
        dc = dc.max((chrf(&h, &r, &ChrfConfig::default()).unwrap() - common::naive_chrf(&h, &r, 6, 2.0)).abs());
    }
    let identity = ["the cat sat on the mat", "a dog ran"];
    let id_bleu = bleu(&identity, &identity, &none).unwrap().score;
    let id_chrf = chrf(&identity, &identity, &ChrfConfig::default()).unwrap();
    let zero_bleu = bleu(&["aaa bbb ccc"], &["xxx yyy zzz"], &none).unwrap().score;
    let zero_chrf = chrf(&["abc"], &["xyz"], &ChrfConfig::default()).unwrap();
    outcome(
        db < 1e-9 && dc < 1e-9 && id_bleu == 100.0 && id_chrf == 100.0 && zero_bleu == 0.0 && zero_chrf == 0.0,
        format!("max |BLEU - naive| = {db:.1e}, max |chrF - naive| = {dc:.1e}; identity {id_bleu}/{id_chrf}; zero overlap {zero_bleu}/{zero_chrf}"),
    )
}

fn c9_binning_contract() -> Outcome {
    let pairs = common::hand_six();
    // Hand-enumerated nearest-3 sets of |delta| in {1..6}.
    let expected: [(f64, [f64; 3]); 8] = [
        (1.0, [1.0, 2.0, 3.0]),
        (2.0, [1.0, 2.0, 3.0]),
        (2.5, [1.0, 2.0, 3.0]),
        (3.0, [2.0, 3.0, 4.0]),
        (3.5, [2.0, 3.0, 4.0]),
        (4.0, [3.0, 4.0, 5.0]),
        (5.0, [4.0, 5.0, 6.0]),
        (6.0, [4.0, 5.0, 6.0]),
    ];
    let points = oriented_points(&pairs, "M").unwrap();
    let deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    let levels: Vec<f64> = expected.iter().map(|e| e.0).collect();
    let bins = bin_curve(&pairs, "M", 3, &LevelGrid::Explicit { levels }).unwrap();
    for ((level, set), bin) in expected.iter().zip(&bins) {
        let (lo, hi) = nearest_window(&deltas, *level, 3);
        if deltas[lo..hi] != set[..] {
            return outcome(false, format!("level {level}: members {:?}", &deltas[lo..hi]));
        }
        let mean = set.iter().sum::<f64>() / 3.0;
        if bin.width != set[2] - set[0] || bin.mean_delta != mean || bin.count != 3 {
            return outcome(false, format!("level {level}: {bin:?}"));
        }
    }
    let default_bins = bin_curve(&pairs, "M", 3, &LevelGrid::default()).unwrap();
    let observed_ok = default_bins.len() == 6
        && default_bins.iter().all(|b| {
            let set = expected.iter().find(|e| e.0 == b.level).unwrap().1;
            b.width == set[2] - set[0]
        });
    outcome(observed_ok, format!("{} explicit + {} observed levels match the hand sets", bins.len(), default_bins.len()))
}

fn c10_end_to_end() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let exp = Exp::new(0.5).unwrap();
    let train = common::sigmoid_pairs(&mut rng, 5000, 0.9, 1.5, "M", |r| exp.sample(r));
    let held_out = common::sigmoid_pairs(&mut rng, 5000, 0.9, 1.5, "M", |r| exp.sample(r));
    let set = calibrate(&train, &["M".into()], &CalibrateOptions::default());
    let fit = &set.get("M").unwrap().fit;
    let points = validate(&set, &held_out, "M", 300, &LevelGrid::default()).unwrap();
    let near = points
        .iter()
        .filter(|p| (p.real_accuracy - p.mean_estimated).abs() <= 0.05)
        .count();
    let frac = near as f64 / points.len() as f64;
    outcome(
        frac >= 0.9,
        format!(
            "fit phi1 = {:.3}, phi2 = {:.3}; {near}/{} validation points within 0.05 ({:.0}%)",
            fit.phi1,
            fit.phi2,
            points.len(),
            100.0 * frac
        ),
    )
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        run(1, "accuracy oracle", secs(10), c1_accuracy_oracle),
        run(2, "sign invariance", None, c2_sign_invariance),
        run(3, "fit recovery", secs(30), c3_fit_recovery),
        run(4, "inverse round trip", None, c4_inverse_round_trip),
        run(5, "published table consistency", None, c5_published_table),
        run(6, "subsampling shape", secs(60), c6_subsampling),
        run(7, "t-test oracle", None, c7_ttest_oracle),
        run(8, "string-metric oracle", None, c8_string_metrics),
        run(9, "binning contract", None, c9_binning_contract),
        run(10, "end-to-end calibration", secs(60), c10_end_to_end),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
