//! Ridge-stabilised logistic regression fitted by iteratively reweighted
//! least squares on standardised features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// L2 penalty on the standardised slopes (the intercept is free).
    pub ridge: f64,
    /// Relative change of the penalised log-likelihood that ends iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            ridge: 1e-6,
            tolerance: 1e-8,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    /// Slopes on the original feature scale; zero for constant features.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn fit(data: &Dataset, params: &LogisticParams) -> Result<Self> {
        let n = data.n_rows();
        let m = data.n_cols();
        let pos = data.n_positive();
        if pos == 0 || pos == n {
            return Err(Error::invalid("logistic regression needs both classes"));
        }
        let mut mean = vec![0.0; m];
        let mut scale = vec![0.0; m];
        for c in 0..m {
            let col = data.column(c);
            let mu = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n as f64;
            mean[c] = mu;
            scale[c] = var.sqrt();
        }
        let active: Vec<usize> = (0..m).filter(|&c| scale[c] > 1e-12 * (1.0 + mean[c].abs())).collect();
        let p = active.len() + 1;
        let z = DMatrix::from_fn(n, p, |r, k| {
            if k == 0 {
                1.0
            } else {
                let c = active[k - 1];
                (data.get(r, c) - mean[c]) / scale[c]
            }
        });
        let y = DVector::from_iterator(n, data.y().iter().map(|&v| f64::from(u8::from(v))));
        let lambda = params.ridge;
        let objective = |beta: &DVector<f64>| {
            let eta = &z * beta;
            let ll: f64 = eta.iter().zip(y.iter()).map(|(e, yi)| yi * e - softplus(*e)).sum();
            ll - 0.5 * lambda * beta.rows(1, p - 1).norm_squared()
        };

        let base = pos as f64 / n as f64;
        let mut beta = DVector::zeros(p);
        beta[0] = (base / (1.0 - base)).ln();
        let mut current = objective(&beta);
        let mut change = f64::INFINITY;
        for iter in 1..=params.max_iterations {
            let eta = &z * &beta;
            let prob: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
            let w: Vec<f64> = prob.iter().map(|q| (q * (1.0 - q)).max(1e-12)).collect();
            let resid = DVector::from_iterator(n, y.iter().zip(&prob).map(|(yi, q)| yi - q));
            let mut grad = z.tr_mul(&resid);
            let mut zw = z.clone();
            for (r, wr) in w.iter().enumerate() {
                zw.row_mut(r).scale_mut(*wr);
            }
            let mut hess = z.tr_mul(&zw);
            for k in 1..p {
                grad[k] -= lambda * beta[k];
                hess[(k, k)] += lambda;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    for k in 0..p {
                        hess[(k, k)] += 1e-8;
                    }
                    hess.lu()
                        .solve(&grad)
                        .ok_or_else(|| Error::invalid("singular information matrix"))?
                }
            };
            let mut t = 1.0;
            let mut next = &beta + &step;
            let mut value = objective(&next);
            let mut halvings = 0;
            while !(value >= current - 1e-12 * current.abs()) && halvings < 40 {
                t *= 0.5;
                next = &beta + &step * t;
                value = objective(&next);
                halvings += 1;
            }
            change = (value - current).abs() / (value.abs() + 0.1);
            beta = next;
            current = value;
            if change < params.tolerance {
                let mut coefficients = vec![0.0; m];
                let mut intercept = beta[0];
                for (k, &c) in active.iter().enumerate() {
                    coefficients[c] = beta[k + 1] / scale[c];
                    intercept -= coefficients[c] * mean[c];
                }
                return Ok(LogisticModel {
                    intercept,
                    coefficients,
                    iterations: iter,
                });
            }
        }
        Err(Error::NoConvergence {
            iterations: params.max_iterations,
            residual: change,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let eta = self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>();
        sigmoid(eta)
    }

    pub fn predict(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows()).map(|r| self.predict_row(data.row(r))).collect()
    }
}
