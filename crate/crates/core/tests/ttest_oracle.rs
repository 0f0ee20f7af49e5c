//! Paired t-test and t-distribution against a scipy-generated table.

use mtcal::significance::{paired_t_test, t_cdf, t_quantile, t_two_sided_p};
use serde_json::Value;

fn oracle() -> Value {
    serde_json::from_str(include_str!("data/ttest_oracle.json")).unwrap()
}

#[test]
fn ttest_vectors() {
    let o = oracle();
    let vectors = o["ttest_1samp"].as_array().unwrap();
    assert_eq!(vectors.len(), 25);
    for v in vectors {
        let diffs: Vec<f64> = v["diffs"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(diffs.len() as u64, v["n"].as_u64().unwrap());
        let r = paired_t_test(&diffs).unwrap();
        let (t, p) = (v["t"].as_f64().unwrap(), v["p"].as_f64().unwrap());
        assert!((r.t_statistic - t).abs() < 1e-6, "n={} t {} vs {t}", diffs.len(), r.t_statistic);
        assert!((r.p_value - p).abs() < 1e-6, "n={} p {} vs {p}", diffs.len(), r.p_value);
        assert_eq!(r.dof as u64, v["dof"].as_u64().unwrap());
    }
}

#[test]
fn one_two_three_four() {
    // scipy.stats.ttest_1samp([1, 2, 3, 4], 0)
    let r = paired_t_test(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!((r.t_statistic - 3.872983346207417).abs() < 1e-12);
    assert!((r.p_value - 0.030466291662170977).abs() < 1e-12);
}

#[test]
fn cdf_table() {
    for row in oracle()["t_cdf"].as_array().unwrap() {
        let dof = row["dof"].as_f64().unwrap();
        let t = row["t"].as_f64().unwrap();
        let p = row["two_sided_p"].as_f64().unwrap();
        let c = row["cdf"].as_f64().unwrap();
        assert!((t_two_sided_p(t, dof) - p).abs() < 1e-10, "dof={dof} t={t}");
        assert!((t_cdf(t, dof) - c).abs() < 1e-10, "dof={dof} t={t}");
        assert!((t_cdf(-t, dof) - (1.0 - c)).abs() < 1e-10, "dof={dof} t={t}");
    }
}

#[test]
fn tiny_tail_keeps_relative_precision() {
    // 2 * scipy.stats.t.sf(8, 100)
    let p = t_two_sided_p(8.0, 100.0);
    assert!(((p - 2.2728648077280803e-12) / 2.2728648077280803e-12).abs() < 1e-6, "{p}");
}

#[test]
fn quantile_table() {
    for row in oracle()["t_quantile"].as_array().unwrap() {
        let dof = row["dof"].as_f64().unwrap();
        let p = row["p"].as_f64().unwrap();
        let t = row["t"].as_f64().unwrap();
        let q = t_quantile(p, dof);
        assert!((q - t).abs() < 1e-8 * t.max(1.0), "dof={dof}: {q} vs {t}");
    }
}
