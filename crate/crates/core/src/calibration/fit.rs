//! Damped least-squares (Levenberg–Marquardt) fit of the bounded sigmoid
//! `f(x) = phi1 / (1 + exp(-phi2 * x))`.
//!
//! The optimizer works on unconstrained `(u, v)` with `phi1 = logistic(u)` and
//! `phi2 = exp(v)`, which keeps `phi1` in `(0, 1)` and `phi2 > 0` without
//! clipping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CalibrationError;

/// Fitted sigmoid parameters plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFit {
    pub metric: String,
    pub phi1: f64,
    pub phi2: f64,
    pub rmse: f64,
    pub n_points: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl SigmoidFit {
    pub fn from_params(metric: impl Into<String>, phi1: f64, phi2: f64) -> Self {
        Self {
            metric: metric.into(),
            phi1,
            phi2,
            rmse: 0.0,
            n_points: 0,
            converged: true,
            iterations: 0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        sigmoid(self.phi1, self.phi2, x)
    }
}

pub(crate) fn sigmoid(phi1: f64, phi2: f64, x: f64) -> f64 {
    phi1 / (1.0 + (-phi2 * x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Starting `(phi1, phi2)`; `None` uses `(max(max y, 0.6), 1.0)`.
    pub initial: Option<(f64, f64)>,
    pub initial_damping: f64,
    pub max_iterations: usize,
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            initial: None,
            initial_damping: 1e-3,
            max_iterations: 500,
            step_tolerance: 1e-10,
        }
    }
}

const PHI1_START_CAP: f64 = 0.999;

/// Largest accepted step in `(u, v)`.
const MAX_STEP: f64 = 1.0;

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_points(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<(), CalibrationError> {
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(CalibrationError::DegenerateInput("non-finite point".into()));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(CalibrationError::DegenerateInput(format!(
            "need at least 2 distinct x values, got {}",
            xs.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != points.len() || w.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(CalibrationError::DegenerateInput(
                "weights must be positive, finite and one per point".into(),
            ));
        }
    }
    Ok(())
}

fn weighted_cost(points: &[(f64, f64)], weights: Option<&[f64]>, phi1: f64, phi2: f64) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let r = sigmoid(phi1, phi2, x) - y;
            weights.map_or(1.0, |w| w[i]) * r * r
        })
        .sum()
}

fn rmse(points: &[(f64, f64)], phi1: f64, phi2: f64) -> f64 {
    (weighted_cost(points, None, phi1, phi2) / points.len() as f64).sqrt()
}

/// Unweighted fit of `(x, accuracy)` points.
pub fn fit_sigmoid(points: &[(f64, f64)], options: &FitOptions) -> Result<SigmoidFit, CalibrationError> {
    fit_sigmoid_weighted(points, None, options)
}

/// Extra `phi2` starts tried after the default one when no explicit start is
/// given. A single start at `phi2 = 1` can slide into the `phi1 -> 1` boundary
/// when the true slope is steep.
const PHI2_STARTS: [f64; 7] = [0.03, 0.1, 0.3, 3.0, 10.0, 30.0, 100.0];

/// Weighted fit minimising `sum w_i * (f(x_i) - y_i)^2`.
///
/// With `options.initial` unset, starts from `(max(max y, 0.6), 1.0)` and then
/// from the same `phi1` with each of a fixed set of `phi2` values, keeping the
/// lowest cost (earliest start on ties).
pub fn fit_sigmoid_weighted(
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
    options: &FitOptions,
) -> Result<SigmoidFit, CalibrationError> {
    check_points(points, weights)?;
    if let Some(start) = options.initial {
        return Ok(levenberg_marquardt(points, weights, start, options));
    }
    let max_y = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let phi1 = max_y.max(0.6);
    let mut best = levenberg_marquardt(points, weights, (phi1, 1.0), options);
    let mut best_cost = weighted_cost(points, weights, best.phi1, best.phi2);
    for phi2 in PHI2_STARTS {
        let candidate = levenberg_marquardt(points, weights, (phi1, phi2), options);
        let cost = weighted_cost(points, weights, candidate.phi1, candidate.phi2);
        if cost < best_cost {
            best = candidate;
            best_cost = cost;
        }
    }
    Ok(best)
}

fn levenberg_marquardt(
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
    (phi1_0, phi2_0): (f64, f64),
    options: &FitOptions,
) -> SigmoidFit {
    let phi1_0 = phi1_0.clamp(1e-6, PHI1_START_CAP);
    let phi2_0 = if phi2_0 > 0.0 && phi2_0.is_finite() { phi2_0 } else { 1.0 };

    let mut u = logit(phi1_0);
    let mut v = phi2_0.ln();
    let mut lambda = options.initial_damping;
    let mut cost = weighted_cost(points, weights, logistic(u), v.exp());
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let (phi1, phi2) = (logistic(u), v.exp());

        // Normal equations of the 2-parameter problem.
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &(x, y)) in points.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            let s = 1.0 / (1.0 + (-phi2 * x).exp());
            let r = phi1 * s - y;
            let du = s * phi1 * (1.0 - phi1);
            let dv = phi1 * s * (1.0 - s) * x * phi2;
            a11 += w * du * du;
            a12 += w * du * dv;
            a22 += w * dv * dv;
            g1 += w * du * r;
            g2 += w * dv * r;
        }
        if g1 == 0.0 && g2 == 0.0 {
            converged = true;
            break;
        }

        let floor = 1e-12 * a11.max(a22).max(f64::MIN_POSITIVE);
        let d11 = a11 + lambda * a11.max(floor);
        let d22 = a22 + lambda * a22.max(floor);
        let det = d11 * d22 - a12 * a12;
        if !(det.is_finite() && det > 0.0) {
            lambda *= 10.0;
            continue;
        }
        let mut du = -(d22 * g1 - a12 * g2) / det;
        let mut dv = -(d11 * g2 - a12 * g1) / det;
        let step = du.hypot(dv);
        if step < options.step_tolerance {
            converged = true;
            break;
        }
        // Far from the optimum the u-direction is nearly singular and a raw
        // Gauss-Newton step can throw phi1 onto the flat part of the logistic.
        if step > MAX_STEP {
            du *= MAX_STEP / step;
            dv *= MAX_STEP / step;
        }

        let (nu, nv) = (u + du, v + dv);
        let new_cost = weighted_cost(points, weights, logistic(nu), nv.exp());
        if new_cost.is_finite() && new_cost < cost {
            u = nu;
            v = nv;
            cost = new_cost;
            lambda = (lambda / 10.0).max(1e-15);
        } else {
            lambda *= 10.0;
            if lambda > 1e30 {
                // No descent direction left at machine precision.
                converged = true;
                break;
            }
        }
    }

    let (phi1, phi2) = (logistic(u), v.exp());
    SigmoidFit {
        metric: String::new(),
        phi1,
        phi2,
        rmse: rmse(points, phi1, phi2),
        n_points: points.len(),
        converged,
        iterations,
    }
}

/// Runs the default start plus `restarts` random starts and keeps the lowest RMSE.
pub fn fit_sigmoid_best_of(
    points: &[(f64, f64)],
    restarts: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<SigmoidFit, CalibrationError> {
    let mut best = fit_sigmoid(points, options)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let phi1 = rng.random_range(0.5..PHI1_START_CAP);
        let phi2 = 10f64.powf(rng.random_range(-1.5..1.7));
        let opts = FitOptions {
            initial: Some((phi1, phi2)),
            ..options.clone()
        };
        let candidate = fit_sigmoid(points, &opts)?;
        if candidate.rmse < best.rmse {
            best = candidate;
        }
    }
    Ok(best)
}
