//! Soft-margin RBF support vector machine trained by sequential minimal
//! optimisation with second-order working-set selection on a dense
//! kernel matrix.
//!
//! Probabilities are `sigmoid(f(x))` of the decision value, so the label
//! agrees with the sign of `f`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest training set the dense kernel cache accepts.
pub const MAX_TRAIN: usize = 12_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Svm {
    pub gamma: f64,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_norms(x: &[Vec<f64>]) -> Vec<f64> {
    x.iter().map(|r| r.iter().map(|v| v * v).sum()).collect()
}

fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> DMatrix<f64> {
    let (m, d) = (x.len(), x[0].len());
    let xm = DMatrix::from_fn(m, d, |i, j| x[i][j]);
    let gram = &xm * xm.transpose();
    let n = sq_norms(x);
    DMatrix::from_fn(m, m, |i, j| (-gamma * (n[i] + n[j] - 2.0 * gram[(i, j)]).max(0.0)).exp())
}

impl Svm {
    pub fn fit(x: &[Vec<f64>], y: &[u8], c: f64, gamma: f64, tol: f64, max_iter: usize) -> Result<Self> {
        if !(c > 0.0 && gamma > 0.0 && tol > 0.0) {
            return Err(Error::config("SVM needs positive C, gamma and tolerance"));
        }
        let m = x.len();
        if m > MAX_TRAIN {
            return Err(Error::invalid(format!(
                "{m} training rows exceed the dense kernel limit of {MAX_TRAIN}"
            )));
        }
        let k = kernel_matrix(x, gamma);
        let s: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        let mut alpha = vec![0.0; m];
        // Gradient of 0.5 a'Qa - e'a with Q_ij = s_i s_j K_ij.
        let mut grad = vec![-1.0; m];
        let up = |a: f64, s: f64| (s > 0.0 && a < c) || (s < 0.0 && a > 0.0);
        let low = |a: f64, s: f64| (s > 0.0 && a > 0.0) || (s < 0.0 && a < c);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            let mut i = usize::MAX;
            let mut g_max = f64::NEG_INFINITY;
            for t in 0..m {
                if up(alpha[t], s[t]) && -s[t] * grad[t] >= g_max {
                    g_max = -s[t] * grad[t];
                    i = t;
                }
            }
            let mut j = usize::MAX;
            let mut g_min = f64::INFINITY;
            let mut best = f64::INFINITY;
            for t in 0..m {
                if !low(alpha[t], s[t]) {
                    continue;
                }
                let v = -s[t] * grad[t];
                g_min = g_min.min(v);
                if i != usize::MAX {
                    let b = g_max - v;
                    if b > 0.0 {
                        let a = (k[(i, i)] + k[(t, t)] - 2.0 * k[(i, t)]).max(TAU);
                        let obj = -b * b / a;
                        if obj <= best {
                            best = obj;
                            j = t;
                        }
                    }
                }
            }
            if g_max - g_min < tol || i == usize::MAX || j == usize::MAX {
                converged = true;
                break;
            }
            iterations += 1;

            let (ai, aj) = (alpha[i], alpha[j]);
            let qij = s[i] * s[j] * k[(i, j)];
            if s[i] != s[j] {
                let quad = (k[(i, i)] + k[(j, j)] + 2.0 * qij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = ai - aj;
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (k[(i, i)] + k[(j, j)] - 2.0 * qij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = ai + aj;
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
            for t in 0..m {
                grad[t] += s[t] * (s[i] * k[(t, i)] * di + s[j] * k[(t, j)] * dj);
            }
        }

        // Offset from free vectors, else the midpoint of the feasible range.
        let (mut sum, mut free) = (0.0, 0usize);
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in 0..m {
            let yg = s[t] * grad[t];
            if alpha[t] > 0.0 && alpha[t] < c {
                sum += yg;
                free += 1;
            } else if (alpha[t] >= c && s[t] < 0.0) || (alpha[t] <= 0.0 && s[t] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
        let (support, coef) = (0..m)
            .filter(|&t| alpha[t] > 0.0)
            .map(|t| (x[t].clone(), alpha[t] * s[t]))
            .unzip();
        Ok(Svm {
            gamma,
            support,
            coef,
            rho,
            iterations,
            converged,
        })
    }

    pub fn decision(&self, q: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(sv, a)| {
                let d: f64 = sv.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum();
                a * (-self.gamma * d).exp()
            })
            .sum::<f64>()
            - self.rho
    }

    pub fn probabilities(&self, q: &[f64]) -> [f64; 2] {
        let f = self.decision(q);
        let p1 = if f >= 0.0 {
            1.0 / (1.0 + (-f).exp())
        } else {
            let e = f.exp();
            e / (1.0 + e)
        };
        [1.0 - p1, p1]
    }
}
