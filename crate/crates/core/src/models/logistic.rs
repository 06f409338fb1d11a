use log::warn;
use serde::{Deserialize, Serialize};

use super::encode::Dense;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub lambda: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            lambda: 1e-4,
            grad_tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Mean log-loss plus `lambda/2 |w|^2`; the intercept (last coordinate of
/// the parameter vector) is not penalized.
pub struct LogisticObjective<'a, T> {
    pub x: &'a Dense<T>,
    pub y: &'a [usize],
    pub lambda: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<T: Scalar> LogisticObjective<'_, T> {
    pub fn dim(&self) -> usize {
        self.x.n_cols + 1
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.x.n_cols;
        self.x.row(i).iter().zip(theta).map(|(&a, &w)| a.to_f64_lossy() * w).sum::<f64>() + theta[d]
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let n = self.x.n_rows as f64;
        let d = self.x.n_cols;
        let data: f64 = (0..self.x.n_rows)
            .map(|i| {
                let z = self.margin(theta, i);
                if self.y[i] == 1 {
                    softplus(-z)
                } else {
                    softplus(z)
                }
            })
            .sum::<f64>()
            / n;
        data + 0.5 * self.lambda * theta[..d].iter().map(|w| w * w).sum::<f64>()
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.x.n_rows as f64;
        let d = self.x.n_cols;
        let mut g = vec![0.0; d + 1];
        for i in 0..self.x.n_rows {
            let r = (sigmoid(self.margin(theta, i)) - self.y[i] as f64) / n;
            for (gj, &a) in g.iter_mut().zip(self.x.row(i)) {
                *gj += r * a.to_f64_lossy();
            }
            g[d] += r;
        }
        for j in 0..d {
            g[j] += self.lambda * theta[j];
        }
        g
    }

    pub fn hessian(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let n = self.x.n_rows as f64;
        let d = self.x.n_cols;
        let mut h = vec![vec![0.0; d + 1]; d + 1];
        let mut xi = vec![0.0; d + 1];
        for i in 0..self.x.n_rows {
            let p = sigmoid(self.margin(theta, i));
            let s = p * (1.0 - p) / n;
            for (v, &a) in xi.iter_mut().zip(self.x.row(i)) {
                *v = a.to_f64_lossy();
            }
            xi[d] = 1.0;
            for a in 0..=d {
                let sa = s * xi[a];
                for b in 0..=a {
                    h[a][b] += sa * xi[b];
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                h[b][a] = h[a][b];
            }
        }
        for (j, row) in h.iter_mut().enumerate().take(d) {
            row[j] += self.lambda;
        }
        h
    }
}

/// Solves `H x = g` for symmetric positive definite `H` by Cholesky,
/// adding diagonal jitter if needed.
fn cholesky_solve(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut jitter = 0.0;
    loop {
        let mut l = vec![vec![0.0; n]; n];
        let mut ok = true;
        'outer: for i in 0..n {
            for j in 0..=i {
                let mut s = h[i][j] + if i == j { jitter } else { 0.0 };
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        if ok {
            let mut z = vec![0.0; n];
            for i in 0..n {
                z[i] = (g[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                x[i] = (z[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
            }
            return x;
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl LogisticRegression {
    /// Damped Newton iterations until the gradient norm drops below tolerance.
    pub fn fit<T: Scalar>(x: &Dense<T>, y: &[usize], params: &LogisticParams) -> LogisticRegression {
        let obj = LogisticObjective { x, y, lambda: params.lambda };
        let mut theta = vec![0.0; obj.dim()];
        let mut loss = obj.loss(&theta);
        let mut iterations = 0;
        let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut g = obj.gradient(&theta);
        while norm(&g) > params.grad_tol && iterations < params.max_iter {
            let step = cholesky_solve(&obj.hessian(&theta), &g);
            let mut t = 1.0;
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            loop {
                let cand: Vec<f64> = theta.iter().zip(&step).map(|(w, s)| w - t * s).collect();
                let l = obj.loss(&cand);
                if l <= loss - 1e-4 * t * slope || t < 1e-10 {
                    theta = cand;
                    loss = l;
                    break;
                }
                t *= 0.5;
            }
            g = obj.gradient(&theta);
            iterations += 1;
            if t < 1e-10 {
                break;
            }
        }
        let grad_norm = norm(&g);
        if grad_norm > params.grad_tol {
            warn!("logistic regression stopped at gradient norm {grad_norm:e}");
        }
        let d = x.n_cols;
        LogisticRegression {
            intercept: theta[d],
            weights: theta[..d].to_vec(),
            iterations,
            grad_norm,
        }
    }

    pub fn decision<T: Scalar>(&self, row: &[T]) -> f64 {
        row.iter().zip(&self.weights).map(|(&a, w)| a.to_f64_lossy() * w).sum::<f64>() + self.intercept
    }

    pub fn predict<T: Scalar>(&self, x: &Dense<T>) -> Vec<usize> {
        (0..x.n_rows).map(|i| usize::from(self.decision(x.row(i)) > 0.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let x = Dense::from_rows(&[vec![0.5, -1.0], vec![1.5, 0.3], vec![-0.7, 0.9], vec![0.1, 0.2]]);
        let y = [1, 0, 1, 0];
        let obj = LogisticObjective { x: &x, y: &y, lambda: 0.1 };
        let theta = [0.3, -0.2, 0.05];
        let g = obj.gradient(&theta);
        for j in 0..3 {
            let h = 1e-6;
            let mut p = theta;
            let mut m = theta;
            p[j] += h;
            m[j] -= h;
            let fd = (obj.loss(&p) - obj.loss(&m)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-8), "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn converges_on_overlapping_data() {
        let x = Dense::from_rows(&(0..40).map(|i| vec![(i as f64 * 0.7).sin() + if i % 2 == 1 { 0.8 } else { 0.0 }]).collect::<Vec<_>>());
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let m = LogisticRegression::fit(&x, &y, &LogisticParams::default());
        assert!(m.grad_norm <= 1e-8);
        assert!(m.weights[0] > 0.0);
    }
}
