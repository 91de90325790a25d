//! L2-regularised logistic regression fitted by Newton's method
//! (iteratively reweighted least squares) with step halving.
//!
//! Objective: `sum_i logloss_i + |w|^2 / (2c)`; the intercept is not
//! penalised.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LogReg {
    pub w: Vec<f64>,
    pub b: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn design(x: &[Vec<f64>]) -> DMatrix<f64> {
    let d = x[0].len();
    DMatrix::from_fn(x.len(), d + 1, |i, j| if j < d { x[i][j] } else { 1.0 })
}

fn objective(xa: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>, c: f64) -> f64 {
    let t = xa * theta;
    let d = theta.len() - 1;
    let data: f64 = t.iter().zip(y.iter()).map(|(&t, &y)| softplus(t) - y * t).sum();
    data + theta.rows(0, d).norm_squared() / (2.0 * c)
}

impl LogReg {
    pub fn fit(x: &[Vec<f64>], y: &[u8], c: f64, max_iter: usize, tol: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::config(format!("regularisation C must be positive, got {c}")));
        }
        let xa = design(x);
        let (m, p) = xa.shape();
        let d = p - 1;
        let yv = DVector::from_iterator(m, y.iter().map(|&v| f64::from(v)));
        let mut theta = DVector::zeros(p);
        let mut f = objective(&xa, &yv, &theta, c);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            let t = &xa * &theta;
            let prob = t.map(sigmoid);
            let mut grad = xa.transpose() * (&prob - &yv);
            for j in 0..d {
                grad[j] += theta[j] / c;
            }
            let weighted = DMatrix::from_fn(m, p, |i, j| xa[(i, j)] * (prob[i] * (1.0 - prob[i])).sqrt());
            let mut hess = weighted.transpose() * &weighted;
            for j in 0..d {
                hess[(j, j)] += 1.0 / c;
            }
            // Keeps the intercept direction positive definite on separable data.
            hess[(d, d)] += 1e-10;
            let step = hess
                .cholesky()
                .ok_or_else(|| Error::invalid("logistic Hessian is not positive definite"))?
                .solve(&grad);
            let mut scale = 1.0;
            let mut next = &theta - &step;
            let mut f_next = objective(&xa, &yv, &next, c);
            while f_next > f && scale > 1e-10 {
                scale *= 0.5;
                next = &theta - &step * scale;
                f_next = objective(&xa, &yv, &next, c);
            }
            let moved = (&step * scale).amax();
            theta = next;
            f = f_next;
            if moved < tol {
                converged = true;
                break;
            }
        }
        Ok(LogReg {
            w: theta.rows(0, d).iter().copied().collect(),
            b: theta[d],
            iterations,
            converged,
        })
    }

    pub fn decision(&self, q: &[f64]) -> f64 {
        self.w.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() + self.b
    }

    pub fn probabilities(&self, q: &[f64]) -> [f64; 2] {
        let p1 = sigmoid(self.decision(q));
        [1.0 - p1, p1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_vanishes_at_optimum() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from((i * 7) % 5 < 2)).collect();
        let m = LogReg::fit(&x, &y, 1.0, 100, 1e-12).unwrap();
        assert!(m.converged);
        let mut g = [0.0; 3];
        for (r, &t) in x.iter().zip(&y) {
            let e = m.probabilities(r)[1] - f64::from(t);
            g[0] += e * r[0];
            g[1] += e * r[1];
            g[2] += e;
        }
        g[0] += m.w[0];
        g[1] += m.w[1];
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }
}
