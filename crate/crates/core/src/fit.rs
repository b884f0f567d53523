//! Zero-order RB decay fits, `F(L) = A₀ pᴸ + B₀`.
//!
//! The fit runs in two passes:
//!
//! 1. unweighted damped least squares for `p` alone, with `A₀`, `B₀` frozen
//!    at the SPAM estimates;
//! 2. weighted damped least squares with all three parameters floating and
//!    weights `1 / v_L`, where `v_L` is the larger of the per-length
//!    variance bound and the binomial variance of the pass-1 model.
//!
//! During iteration `p = p_max / (1 + e^{-q})` with `p_max = 1.05`, so that
//! `p = 1` is an interior point. The covariance is reported in `p`-space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const P_MAX: f64 = 1.05;
pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOL: f64 = 1e-10;

/// A survival observation for one sequence.
pub trait SurvivalSample {
    fn length(&self) -> usize;
    fn survival(&self) -> f64;
    fn shots(&self) -> u32;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpamInit {
    pub a0: f64,
    pub b0: f64,
}

impl Default for SpamInit {
    fn default() -> Self {
        Self { a0: 0.47, b0: 0.517 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthAggregate {
    pub length: usize,
    pub mean_survival: f64,
    /// Sequence-spread variance of the mean plus the binomial shot term.
    pub variance_bound: f64,
    pub n_sequences: usize,
    pub shots: f64,
}

/// Groups samples by length.
///
/// `variance_bound = s² / n + m(1 - m) / (shots · n)` with `s²` the sample
/// variance of the per-sequence survivals.
pub fn aggregate<S: SurvivalSample>(samples: &[S]) -> Result<Vec<LengthAggregate>> {
    let mut groups: BTreeMap<usize, Vec<&S>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.length()).or_default().push(s);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (length, group) in groups {
        let n = group.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "length {length} has {n} sequence(s); need at least 2"
            )));
        }
        let nf = n as f64;
        // Sort so the floating-point sums do not depend on input order.
        let mut values: Vec<f64> = group.iter().map(|s| s.survival()).collect();
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / nf;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let mut shot_counts: Vec<u32> = group.iter().map(|s| s.shots()).collect();
        shot_counts.sort_unstable();
        let shots = shot_counts.iter().map(|&s| f64::from(s)).sum::<f64>() / nf;
        let shot_term = (mean * (1.0 - mean)).max(0.0) / (shots * nf);
        out.push(LengthAggregate {
            length,
            mean_survival: mean,
            variance_bound: var / nf + shot_term,
            n_sequences: n,
            shots,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub length: usize,
    pub mean_survival: f64,
    pub fitted: f64,
    pub residual: f64,
    /// Variance used to weight this point in pass 2.
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a0: f64,
    pub b0: f64,
    pub p: f64,
    /// `(1 - p) / 2`.
    pub avg_error: f64,
    /// Covariance of `(A₀, B₀, p)`.
    pub covariance: [[f64; 3]; 3],
    /// One standard deviation, `sqrt(cov_pp) / 2`.
    pub stderr_avg_error: f64,
    pub pass1_p: f64,
    pub iterations: usize,
    /// Set when the result is usable but suspicious.
    pub flag: Option<String>,
    pub residuals: Vec<ResidualPoint>,
}

impl DecayFit {
    pub fn model(&self, length: f64) -> f64 {
        self.a0 * self.p.powf(length) + self.b0
    }
}

fn p_of_q(q: f64) -> f64 {
    P_MAX / (1.0 + (-q).exp())
}

fn q_of_p(p: f64) -> f64 {
    let r = (p / P_MAX).clamp(1e-12, 1.0 - 1e-12);
    (r / (1.0 - r)).ln()
}

/// Model values and q-space Jacobian rows for `(A₀, B₀, q)`.
fn model_and_jacobian(theta: &[f64; 3], length: f64) -> (f64, [f64; 3]) {
    let [a0, b0, q] = *theta;
    let p = p_of_q(q);
    let dp_dq = p * (1.0 - p / P_MAX);
    let pl = p.powf(length);
    let dpl = if length == 0.0 { 0.0 } else { length * p.powf(length - 1.0) };
    (a0 * pl + b0, [pl, 1.0, a0 * dpl * dp_dq])
}

struct Problem<'a> {
    lengths: &'a [f64],
    values: &'a [f64],
    weights: &'a [f64],
    free: [bool; 3],
}

impl Problem<'_> {
    fn cost(&self, theta: &[f64; 3]) -> f64 {
        self.lengths
            .iter()
            .zip(self.values)
            .zip(self.weights)
            .map(|((&l, &y), &w)| w * (model_and_jacobian(theta, l).0 - y).powi(2))
            .sum()
    }

    /// Rounding floor of `cost`: residuals are differences of O(1) numbers, so
    /// each carries an absolute error of about `ε·(|y| + |model|)`.
    fn cost_noise(&self, theta: &[f64; 3]) -> f64 {
        self.lengths
            .iter()
            .zip(self.values)
            .zip(self.weights)
            .map(|((&l, &y), &w)| {
                let m = model_and_jacobian(theta, l).0;
                2.0 * w * (m - y).abs() * f64::EPSILON * (y.abs() + m.abs())
            })
            .sum::<f64>()
            + f64::EPSILON * self.cost(theta)
    }

    /// One undamped Gauss-Newton step from a converged point. Near the optimum
    /// the cost change is below its rounding floor, so the step is kept unless
    /// it is uphill beyond that floor.
    fn polish(&self, theta: [f64; 3], cost: f64) -> [f64; 3] {
        let (jtj, jtr, idx) = self.normal_equations(&theta);
        let Some(step) = solve_dense(jtj, jtr.iter().map(|g| -g).collect()) else {
            return theta;
        };
        let mut out = theta;
        for (&k, s) in idx.iter().zip(&step) {
            out[k] += s;
        }
        let c = self.cost(&out);
        if c.is_finite() && c <= cost + 4.0 * self.cost_noise(&theta) {
            out
        } else {
            theta
        }
    }

    /// `JᵀWJ` and `JᵀWr` restricted to free parameters.
    fn normal_equations(&self, theta: &[f64; 3]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
        let idx: Vec<usize> = (0..3).filter(|&k| self.free[k]).collect();
        let n = idx.len();
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for ((&l, &y), &w) in self.lengths.iter().zip(self.values).zip(self.weights) {
            let (m, row) = model_and_jacobian(theta, l);
            let r = m - y;
            for (a, &ka) in idx.iter().enumerate() {
                jtr[a] += w * row[ka] * r;
                for (b, &kb) in idx.iter().enumerate() {
                    jtj[a][b] += w * row[ka] * row[kb];
                }
            }
        }
        (jtj, jtr, idx)
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Levenberg-Marquardt with Marquardt diagonal scaling.
fn levenberg_marquardt(problem: &Problem<'_>, start: [f64; 3]) -> Result<([f64; 3], usize)> {
    let mut theta = start;
    let mut cost = problem.cost(&theta);
    let mut lambda = 1e-3;
    for iter in 1..=MAX_ITERATIONS {
        let (jtj, jtr, idx) = problem.normal_equations(&theta);
        let grad_norm = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
        if cost == 0.0 || grad_norm == 0.0 {
            return Ok((theta, iter));
        }
        // Converged when the undamped Gauss-Newton step is negligible; a small
        // step under heavy damping says nothing about stationarity.
        let scale = idx.iter().map(|&k| theta[k] * theta[k]).sum::<f64>().sqrt();
        let gauss_newton = solve_dense(jtj.clone(), jtr.iter().map(|g| -g).collect());
        if let Some(gn) = gauss_newton.filter(|s| s.iter().all(|v| v.is_finite())) {
            if gn.iter().map(|s| s * s).sum::<f64>().sqrt() <= STEP_TOL * (scale + STEP_TOL) {
                return Ok((problem.polish(theta, cost), iter));
            }
        }
        let max_diag = (0..idx.len()).map(|k| jtj[k][k]).fold(0.0, f64::max);
        loop {
            let mut damped = jtj.clone();
            for (k, row) in damped.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(1e-12 * max_diag);
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let step = solve_dense(damped, rhs);
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    return Err(Error::FitFailure {
                        iterations: iter,
                        reason: "singular normal equations".into(),
                    });
                }
                continue;
            };
            let mut trial = theta;
            for (&k, s) in idx.iter().zip(&step) {
                trial[k] += s;
            }
            let trial_cost = problem.cost(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                // A decrease below the rounding floor of the cost means a
                // minimum to working precision.
                let stalled = cost - trial_cost <= problem.cost_noise(&trial);
                theta = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                if stalled {
                    return Ok((problem.polish(theta, cost), iter));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No downhill step at any damping: a minimum to working precision.
                return Ok((problem.polish(theta, cost), iter));
            }
        }
    }
    Err(Error::FitFailure {
        iterations: MAX_ITERATIONS,
        reason: format!("no convergence; last estimate A0={}, B0={}, p={}", theta[0], theta[1], p_of_q(theta[2])),
    })
}

/// Jacobi eigen-decomposition of a symmetric 3×3 matrix.
fn symmetric_eigen3(m: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = *m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-300 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Moore-Penrose inverse of a symmetric positive semi-definite 3×3 matrix.
/// Only eigenvalues at the rounding level are discarded, so a weakly
/// identified direction gets a large variance rather than none.
fn pseudo_inverse3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let (vals, vecs) = symmetric_eigen3(m);
    let max = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut out = [[0.0; 3]; 3];
    for (k, &val) in vals.iter().enumerate() {
        if val <= 64.0 * f64::EPSILON * max || val <= 0.0 {
            continue;
        }
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += vecs[i][k] * vecs[j][k] / val;
            }
        }
    }
    // symmetrize
    for i in 0..3 {
        for j in 0..i {
            let s = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = s;
            out[j][i] = s;
        }
    }
    out
}

/// Weighted linear least squares for `(A₀, B₀)` at fixed `p`, with its cost.
fn linear_spam(lengths: &[f64], values: &[f64], weights: &[f64], p: f64) -> Option<(f64, f64, f64)> {
    let (mut sw, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&l, &y), &w) in lengths.iter().zip(values).zip(weights) {
        let x = p.powf(l);
        sw += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 1e-12 * sw * sxx) {
        return None;
    }
    let a0 = (sw * sxy - sx * sy) / det;
    let b0 = (sy - a0 * sx) / sw;
    let cost = lengths
        .iter()
        .zip(values)
        .zip(weights)
        .map(|((&l, &y), &w)| w * (a0 * p.powf(l) + b0 - y).powi(2))
        .sum();
    Some((a0, b0, cost))
}

/// Best point of the profile cost over a log-spaced grid in `1 - p`. Since
/// the model is linear in `(A₀, B₀)`, this locates the valley floor that a
/// local search from the SPAM guess would otherwise have to crawl along.
fn profile_start(lengths: &[f64], values: &[f64], weights: &[f64]) -> Option<(f64, f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in 0..=200 {
        let gap = 10f64.powf(-10.0 + 0.05 * k as f64);
        for p in [1.0 - gap, 1.0 + gap] {
            if !(p > 0.0 && p < P_MAX) {
                continue;
            }
            if let Some((a0, b0, cost)) = linear_spam(lengths, values, weights, p) {
                if best.is_none_or(|b| cost < b.3) {
                    best = Some((a0, b0, p, cost));
                }
            }
        }
    }
    best
}

/// Weighted three-parameter fit with fixed per-point variances.
pub fn fit_weighted(
    aggregates: &[LengthAggregate],
    variances: &[f64],
    start: (f64, f64, f64),
) -> Result<(f64, f64, f64, [[f64; 3]; 3], usize)> {
    if variances.len() != aggregates.len() || variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Domain("variances must be positive and match the data".into()));
    }
    let lengths: Vec<f64> = aggregates.iter().map(|a| a.length as f64).collect();
    let values: Vec<f64> = aggregates.iter().map(|a| a.mean_survival).collect();
    let weights: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
    let problem = Problem { lengths: &lengths, values: &values, weights: &weights, free: [true; 3] };
    let init = [start.0, start.1, q_of_p(start.2)];
    let (theta, iterations) = match levenberg_marquardt(&problem, init) {
        Ok(done) => done,
        // A long curved A₀-p valley can exhaust the iteration budget; restart
        // from the floor of the profile cost before giving up.
        Err(first) => match profile_start(&lengths, &values, &weights) {
            Some((a0, b0, p, _)) => {
                let (theta, more) = levenberg_marquardt(&problem, [a0, b0, q_of_p(p)]).map_err(|_| first)?;
                (theta, MAX_ITERATIONS + more)
            }
            None => return Err(first),
        },
    };
    let (a0, b0, p) = (theta[0], theta[1], p_of_q(theta[2]));

    // Covariance in p-space: (J_pᵀ W J_p)⁺.
    let mut info = [[0.0; 3]; 3];
    for (&l, &w) in lengths.iter().zip(&weights) {
        let row = [p.powf(l), 1.0, if l == 0.0 { 0.0 } else { a0 * l * p.powf(l - 1.0) }];
        for i in 0..3 {
            for j in 0..3 {
                info[i][j] += w * row[i] * row[j];
            }
        }
    }
    Ok((a0, b0, p, pseudo_inverse3(&info), iterations))
}

/// Two-pass fit of the zero-order decay model.
pub fn fit_decay(aggregates: &[LengthAggregate], spam: SpamInit) -> Result<DecayFit> {
    if aggregates.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 distinct lengths, got {}",
            aggregates.len()
        )));
    }
    let lengths: Vec<f64> = aggregates.iter().map(|a| a.length as f64).collect();
    let values: Vec<f64> = aggregates.iter().map(|a| a.mean_survival).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite survival".into()));
    }

    // Pass 1: p only, unweighted, SPAM frozen.
    let ones = vec![1.0; lengths.len()];
    let pass1 = Problem { lengths: &lengths, values: &values, weights: &ones, free: [false, false, true] };
    let start_p = initial_p(aggregates, spam);
    let (theta1, _) = levenberg_marquardt(&pass1, [spam.a0, spam.b0, q_of_p(start_p)])?;
    let p1 = p_of_q(theta1[2]);

    // Pass-2 variances: per-length bound, floored by the pass-1 binomial variance.
    let variances: Vec<f64> = aggregates
        .iter()
        .map(|a| {
            let f1 = (spam.a0 * p1.powf(a.length as f64) + spam.b0).clamp(0.0, 1.0);
            let floor = f1 * (1.0 - f1) / (a.shots * a.n_sequences as f64);
            a.variance_bound.max(floor).max(1e-16)
        })
        .collect();

    let (a0, b0, p, covariance, iterations) = fit_weighted(aggregates, &variances, (spam.a0, spam.b0, p1))?;

    // Survival probabilities live in [0, 1]; SPAM estimates far outside
    // that range mean the decay is not resolved over the measured lengths.
    let flag = if !(p > 1e-9 && p < P_MAX - 1e-9) {
        Some(format!("p = {p} at the edge of (0, {P_MAX}]"))
    } else if a0.abs() > 1.0 || !(-0.5..=1.5).contains(&b0) {
        Some(format!("unphysical SPAM estimate A0 = {a0:.3}, B0 = {b0:.3}"))
    } else {
        None
    };
    let residuals = aggregates
        .iter()
        .zip(&variances)
        .map(|(agg, &variance)| {
            let fitted = a0 * p.powf(agg.length as f64) + b0;
            ResidualPoint {
                length: agg.length,
                mean_survival: agg.mean_survival,
                fitted,
                residual: agg.mean_survival - fitted,
                variance,
            }
        })
        .collect();
    Ok(DecayFit {
        a0,
        b0,
        p,
        avg_error: (1.0 - p) / 2.0,
        covariance,
        stderr_avg_error: covariance[2][2].max(0.0).sqrt() / 2.0,
        pass1_p: p1,
        iterations,
        flag,
        residuals,
    })
}

/// Starting `p` from the longest length with survival above `B₀`.
fn initial_p(aggregates: &[LengthAggregate], spam: SpamInit) -> f64 {
    aggregates
        .iter()
        .rev()
        .find_map(|a| {
            let ratio = (a.mean_survival - spam.b0) / spam.a0;
            (ratio > 0.05 && ratio < 1.0).then(|| ratio.powf(1.0 / a.length as f64))
        })
        .unwrap_or(0.99)
        .clamp(0.01, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Obs(usize, f64, u32);

    impl SurvivalSample for Obs {
        fn length(&self) -> usize {
            self.0
        }
        fn survival(&self) -> f64 {
            self.1
        }
        fn shots(&self) -> u32 {
            self.2
        }
    }

    fn synthetic(a0: f64, b0: f64, p: f64, lengths: &[usize]) -> Vec<LengthAggregate> {
        lengths
            .iter()
            .map(|&l| {
                let m = a0 * p.powi(l as i32) + b0;
                LengthAggregate {
                    length: l,
                    mean_survival: m,
                    variance_bound: m * (1.0 - m) / (800.0 * 20.0),
                    n_sequences: 20,
                    shots: 800.0,
                }
            })
            .collect()
    }

    #[test]
    fn aggregate_examples() {
        let ones = [Obs(4, 1.0, 800), Obs(4, 1.0, 800), Obs(4, 1.0, 800)];
        let a = aggregate(&ones).unwrap();
        assert_eq!(a[0].mean_survival, 1.0);
        assert_eq!(a[0].variance_bound, 0.0);

        let two = [Obs(8, 0.4, 800), Obs(8, 0.6, 800)];
        let a = aggregate(&two).unwrap();
        assert!((a[0].mean_survival - 0.5).abs() < 1e-15);
        assert!((a[0].variance_bound - 0.01015625).abs() < 1e-15);

        let single = [Obs(1, 0.9, 800), Obs(2, 0.8, 800), Obs(2, 0.7, 800)];
        assert!(matches!(aggregate(&single), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn aggregate_is_order_independent() {
        let a = [Obs(2, 0.91, 800), Obs(1, 0.97, 800), Obs(2, 0.83, 800), Obs(1, 0.95, 800), Obs(2, 0.77, 800)];
        let b = [Obs(2, 0.77, 800), Obs(1, 0.95, 800), Obs(2, 0.91, 800), Obs(2, 0.83, 800), Obs(1, 0.97, 800)];
        assert_eq!(aggregate(&a).unwrap(), aggregate(&b).unwrap());
    }

    #[test]
    fn noiseless_recovery() {
        let lengths = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000];
        let data = synthetic(0.47, 0.517, 0.99928, &lengths);
        let fit = fit_decay(&data, SpamInit::default()).unwrap();
        assert!((fit.a0 - 0.47).abs() < 1e-6, "{fit:?}");
        assert!((fit.b0 - 0.517).abs() < 1e-6);
        assert!((fit.p - 0.99928).abs() < 1e-6);
        assert_eq!(fit.avg_error, (1.0 - fit.p) / 2.0);
        assert!(fit.flag.is_none());
    }

    #[test]
    fn recovers_other_spam_values() {
        let data = synthetic(0.45, 0.5, 0.95, &[1, 2, 4, 8, 16, 32, 64]);
        let fit = fit_decay(&data, SpamInit::default()).unwrap();
        assert!((fit.p - 0.95).abs() < 1e-6);
        assert!((fit.a0 - 0.45).abs() < 1e-6);
    }

    #[test]
    fn flat_data_reports_zero_error() {
        let data = synthetic(0.47, 0.517, 1.0, &[1, 2, 4, 8, 16, 32]);
        let fit = fit_decay(&data, SpamInit::default()).unwrap();
        assert!(fit.avg_error.abs() <= fit.stderr_avg_error.max(1e-12), "{fit:?}");
    }

    #[test]
    fn unresolved_decay_is_flagged() {
        // Nearly linear data: the least-squares optimum runs off to large |A0|.
        let mut data = synthetic(0.47, 0.517, 1.0, &[1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 24, 32]);
        for d in &mut data {
            d.mean_survival -= 1e-4 * d.length as f64;
        }
        let fit = fit_decay(&data, SpamInit::default()).unwrap();
        assert!(fit.a0.abs() > 1.0, "{fit:?}");
        assert!(fit.flag.as_deref().is_some_and(|f| f.starts_with("unphysical SPAM")), "{:?}", fit.flag);
    }

    #[test]
    fn too_few_lengths() {
        let data = synthetic(0.47, 0.517, 0.99, &[1, 2, 4]);
        assert!(matches!(fit_decay(&data, SpamInit::default()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn covariance_is_psd_and_symmetric() {
        let mut data = synthetic(0.47, 0.517, 0.98, &[1, 2, 4, 8, 16, 32, 64, 128]);
        for (k, d) in data.iter_mut().enumerate() {
            d.mean_survival += if k % 2 == 0 { 2e-3 } else { -1.5e-3 };
        }
        let fit = fit_decay(&data, SpamInit::default()).unwrap();
        let (vals, _) = symmetric_eigen3(&fit.covariance);
        assert!(vals.iter().all(|&v| v >= -1e-10));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(fit.covariance[i][j], fit.covariance[j][i]);
            }
        }
    }

    #[test]
    fn pseudo_inverse_matches_inverse_when_regular() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = pseudo_inverse3(&m);
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((e - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_inverse_handles_rank_deficiency() {
        // Two identical directions, as for flat decay data.
        let m = [[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let pinv = pseudo_inverse3(&m);
        assert!((pinv[2][2] - 0.5).abs() < 1e-12);
        assert!((pinv[0][0] - 0.25).abs() < 1e-12);
    }
}
