//! Soft-margin SVM with the quadratic kernel `(1 + u.v)^2`, trained by SMO
//! with second-order working-set selection.

use std::collections::VecDeque;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::Dense;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub box_constraint: f64,
    pub tolerance: f64,
    /// 0 picks `max(10^6, 100 n)`.
    pub max_iter: usize,
    pub cache_mb: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            box_constraint: 1.0,
            tolerance: 1e-3,
            max_iter: 0,
            cache_mb: 128,
        }
    }
}

pub fn quadratic_kernel<T: Scalar>(a: &[T], b: &[T]) -> T {
    let d = T::one() + a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();
    d * d
}

/// Kernel rows computed on demand, oldest evicted first once over budget.
struct KernelCache<'a, T> {
    x: &'a Dense<T>,
    rows: Vec<Option<Arc<[T]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a, T: Scalar> KernelCache<'a, T> {
    fn new(x: &'a Dense<T>, budget_bytes: usize) -> Self {
        let row_bytes = (x.n_rows * std::mem::size_of::<T>()).max(1);
        KernelCache {
            x,
            rows: vec![None; x.n_rows],
            order: VecDeque::new(),
            capacity: (budget_bytes / row_bytes).max(2),
        }
    }

    fn row(&mut self, i: usize) -> Arc<[T]> {
        if let Some(r) = &self.rows[i] {
            return r.clone();
        }
        let xi = self.x.row(i);
        let r: Arc<[T]> = (0..self.x.n_rows).map(|j| quadratic_kernel(xi, self.x.row(j))).collect();
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        self.rows[i] = Some(r.clone());
        self.order.push_back(i);
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSolution<T> {
    pub alpha: Vec<T>,
    pub bias: T,
    pub iterations: usize,
    pub converged: bool,
}

fn in_up<T: Scalar>(a: T, y: T, c: T) -> bool {
    (y > T::zero() && a < c) || (y < T::zero() && a > T::zero())
}

fn in_low<T: Scalar>(a: T, y: T, c: T) -> bool {
    (y < T::zero() && a < c) || (y > T::zero() && a > T::zero())
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a <= C`, with
/// `Q_ij = y_i y_j K(x_i, x_j)`. Labels are `+1` / `-1`.
///
/// Variables stuck at a bound are shrunk out of the working set
/// periodically; before declaring convergence the full gradient is rebuilt
/// and optimality is rechecked over every variable.
pub fn solve_smo<T: Scalar>(x: &Dense<T>, y: &[T], params: &SvmParams) -> SvmSolution<T> {
    let n = x.n_rows;
    let c = T::of(params.box_constraint);
    let eps = T::of(params.tolerance);
    let tau = T::of(1e-12);
    let max_iter = if params.max_iter == 0 { (100 * n).max(1_000_000) } else { params.max_iter };
    let shrink_every = n.clamp(1, 1000);
    let mut cache = KernelCache::new(x, params.cache_mb << 20);
    let diag: Vec<T> = (0..n).map(|i| quadratic_kernel(x.row(i), x.row(i))).collect();
    let mut alpha = vec![T::zero(); n];
    let mut grad = vec![-T::one(); n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut unshrunk = false;
    let mut countdown = shrink_every;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        countdown -= 1;
        if countdown == 0 {
            countdown = shrink_every;
            let (g1, g2) = violation_extremes(&active, &alpha, y, &grad, c);
            if !unshrunk && g1 + g2 <= eps * T::of(10.0) {
                unshrunk = true;
                reconstruct_gradient(x, y, &alpha, &mut grad, &active);
                active = (0..n).collect();
            }
            let (g1, g2) = violation_extremes(&active, &alpha, y, &grad, c);
            active.retain(|&t| !can_shrink(alpha[t], y[t], grad[t], c, g1, g2));
        }

        let mut sel = select_pair(&active, &alpha, y, &grad, &diag, c, eps, tau, &mut cache);
        if sel.is_none() {
            if active.len() == n {
                converged = true;
                break;
            }
            reconstruct_gradient(x, y, &alpha, &mut grad, &active);
            active = (0..n).collect();
            sel = select_pair(&active, &alpha, y, &grad, &diag, c, eps, tau, &mut cache);
            countdown = 1;
            if sel.is_none() {
                converged = true;
                break;
            }
        }
        let (i, j, ki) = sel.expect("pair selected");
        iterations += 1;

        let kj = cache.row(j);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let mut quad = diag[i] + diag[j] - T::of(2.0) * ki[j];
        if quad <= T::zero() {
            quad = tau;
        }
        let (mut ai, mut aj) = (ai_old, aj_old);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > T::zero() {
                if aj < T::zero() {
                    aj = T::zero();
                    ai = diff;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = -diff;
            }
            if diff > T::zero() {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < T::zero() {
                aj = T::zero();
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = sum;
            }
        }
        alpha[i] = ai.max(T::zero()).min(c);
        alpha[j] = aj.max(T::zero()).min(c);
        let di = (alpha[i] - ai_old) * y[i];
        let dj = (alpha[j] - aj_old) * y[j];
        for &t in &active {
            grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
    }
    if !converged {
        warn!("SMO stopped after {iterations} iterations without reaching tolerance");
        reconstruct_gradient(x, y, &alpha, &mut grad, &active);
    }
    let bias = -compute_rho(&alpha, y, &grad, c);
    SvmSolution {
        alpha,
        bias,
        iterations,
        converged,
    }
}

/// `(max_{I_up} -y G, max_{I_low} y G)` over the given indices.
fn violation_extremes<T: Scalar>(idx: &[usize], alpha: &[T], y: &[T], grad: &[T], c: T) -> (T, T) {
    let (mut g1, mut g2) = (T::neg_infinity(), T::neg_infinity());
    for &t in idx {
        let yg = y[t] * grad[t];
        if in_up(alpha[t], y[t], c) {
            g1 = g1.max(-yg);
        }
        if in_low(alpha[t], y[t], c) {
            g2 = g2.max(yg);
        }
    }
    (g1, g2)
}

/// A variable at a bound whose gradient points further into that bound
/// cannot be picked by the selection rule.
fn can_shrink<T: Scalar>(a: T, y: T, g: T, c: T, g1: T, g2: T) -> bool {
    let pos = y > T::zero();
    if a >= c {
        if pos {
            -g > g1
        } else {
            -g > g2
        }
    } else if a <= T::zero() {
        if pos {
            g > g2
        } else {
            g > g1
        }
    } else {
        false
    }
}

/// Recomputes the gradient of every variable outside `active` from the
/// nonzero multipliers.
fn reconstruct_gradient<T: Scalar>(x: &Dense<T>, y: &[T], alpha: &[T], grad: &mut [T], active: &[usize]) {
    let n = x.n_rows;
    if active.len() == n {
        return;
    }
    let mut is_active = vec![false; n];
    for &t in active {
        is_active[t] = true;
    }
    let nz: Vec<usize> = (0..n).filter(|&s| alpha[s] > T::zero()).collect();
    grad.par_iter_mut().enumerate().filter(|(t, _)| !is_active[*t]).for_each(|(t, g)| {
        let xt = x.row(t);
        let s = nz.iter().map(|&s| alpha[s] * y[s] * quadratic_kernel(xt, x.row(s))).sum::<T>();
        *g = y[t] * s - T::one();
    });
}

/// Second-order working-set selection; `None` once the violation gap on
/// the given indices is below tolerance.
#[allow(clippy::too_many_arguments)]
fn select_pair<T: Scalar>(
    active: &[usize],
    alpha: &[T],
    y: &[T],
    grad: &[T],
    diag: &[T],
    c: T,
    eps: T,
    tau: T,
    cache: &mut KernelCache<'_, T>,
) -> Option<(usize, usize, Arc<[T]>)> {
    let mut gmax = T::neg_infinity();
    let mut i = usize::MAX;
    for &t in active {
        if in_up(alpha[t], y[t], c) && -y[t] * grad[t] > gmax {
            gmax = -y[t] * grad[t];
            i = t;
        }
    }
    if i == usize::MAX {
        return None;
    }
    let ki = cache.row(i);
    let mut j = usize::MAX;
    let mut gmax2 = T::neg_infinity();
    let mut obj_min = T::infinity();
    for &t in active {
        if !in_low(alpha[t], y[t], c) {
            continue;
        }
        gmax2 = gmax2.max(y[t] * grad[t]);
        let b = gmax + y[t] * grad[t];
        if b > T::zero() {
            let mut a = diag[i] + diag[t] - T::of(2.0) * ki[t];
            if a <= T::zero() {
                a = tau;
            }
            let obj = -(b * b) / a;
            if obj < obj_min {
                obj_min = obj;
                j = t;
            }
        }
    }
    if j == usize::MAX || gmax + gmax2 < eps {
        None
    } else {
        Some((i, j, ki))
    }
}

fn compute_rho<T: Scalar>(alpha: &[T], y: &[T], grad: &[T], c: T) -> T {
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut sum, mut free) = (T::zero(), 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= T::zero() {
            if y[t] > T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / T::of_usize(free)
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / T::of(2.0)
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        T::zero()
    }
}

/// Maximal KKT violation `max_{I_up} -y G - min_{I_low} -y G` of a dual
/// point, with the gradient recomputed from scratch. Zero or negative means
/// optimal.
pub fn kkt_violation<T: Scalar>(x: &Dense<T>, y: &[T], alpha: &[T], box_constraint: f64) -> T {
    let n = x.n_rows;
    let c = T::of(box_constraint);
    let (mut up, mut low) = (T::neg_infinity(), T::infinity());
    for t in 0..n {
        let g = (0..n).map(|s| y[t] * y[s] * quadratic_kernel(x.row(t), x.row(s)) * alpha[s]).sum::<T>() - T::one();
        let v = -y[t] * g;
        if in_up(alpha[t], y[t], c) {
            up = up.max(v);
        }
        if in_low(alpha[t], y[t], c) {
            low = low.min(v);
        }
    }
    if up.is_finite() && low.is_finite() {
        up - low
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSvm<T> {
    pub support: Dense<T>,
    /// `alpha_i y_i` per support vector.
    pub coef: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> QuadraticSvm<T> {
    /// Fits on classes 0/1 (class 1 is the positive side).
    pub fn fit(x: &Dense<T>, classes: &[usize], params: &SvmParams) -> (QuadraticSvm<T>, SvmSolution<T>) {
        let y: Vec<T> = classes.iter().map(|&c| if c == 1 { T::one() } else { -T::one() }).collect();
        let sol = solve_smo(x, &y, params);
        let sv: Vec<usize> = (0..x.n_rows).filter(|&i| sol.alpha[i] > T::zero()).collect();
        let model = QuadraticSvm {
            support: x.take_rows(&sv),
            coef: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
            bias: sol.bias,
        };
        (model, sol)
    }

    pub fn decision(&self, row: &[T]) -> T {
        (0..self.support.n_rows)
            .map(|s| self.coef[s] * quadratic_kernel(self.support.row(s), row))
            .sum::<T>()
            + self.bias
    }

    pub fn predict(&self, x: &Dense<T>) -> Vec<usize> {
        (0..x.n_rows).map(|i| usize::from(self.decision(x.row(i)) > T::zero())).collect()
    }
}
