//! Sequential minimal optimization for the soft-margin dual
//!
//! ```text
//! min 1/2 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Working pairs use second-order selection; the solver stops when the
//! maximal violating pair gap drops below `tol`.

use std::collections::VecDeque;
use std::rc::Rc;

use super::{rbf, SvmParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverStats {
    pub iterations: usize,
    pub kernel_evaluations: u64,
}

pub(super) struct Solution<T> {
    pub alphas: Vec<T>,
    pub bias: T,
    pub stats: SolverStats,
}

struct KernelRows<'a, T> {
    x: &'a [Vec<T>],
    gamma: T,
    rows: Vec<Option<Rc<[T]>>>,
    order: VecDeque<usize>,
    capacity: usize,
    evaluations: u64,
}

impl<'a, T: Real> KernelRows<'a, T> {
    fn new(x: &'a [Vec<T>], gamma: T, cache_bytes: usize) -> Self {
        let row_bytes = (x.len() * std::mem::size_of::<T>()).max(1);
        Self {
            x,
            gamma,
            rows: vec![None; x.len()],
            order: VecDeque::new(),
            capacity: (cache_bytes / row_bytes).max(2),
            evaluations: 0,
        }
    }

    fn row(&mut self, i: usize) -> Rc<[T]> {
        if let Some(r) = &self.rows[i] {
            return Rc::clone(r);
        }
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let xi = &self.x[i];
        let r: Rc<[T]> = self.x.iter().map(|xj| rbf(self.gamma, xi, xj)).collect();
        self.evaluations += self.x.len() as u64;
        self.rows[i] = Some(Rc::clone(&r));
        self.order.push_back(i);
        r
    }
}

#[inline]
fn in_up<T: Real>(y: i8, a: T, c: T) -> bool {
    (y > 0 && a < c) || (y < 0 && a > T::zero())
}

#[inline]
fn in_low<T: Real>(y: i8, a: T, c: T) -> bool {
    (y > 0 && a > T::zero()) || (y < 0 && a < c)
}

pub(super) fn solve<T: Real>(x: &[Vec<T>], y: &[i8], params: &SvmParams<T>) -> Result<Solution<T>> {
    let n = x.len();
    let c = params.c;
    let tau = T::of(1e-12);
    let yf: Vec<T> = y.iter().map(|&v| T::of(v as f64)).collect();
    let mut alpha = vec![T::zero(); n];
    // gradient of the dual objective, Q a - e
    let mut grad = vec![-T::one(); n];
    let mut kernel = KernelRows::new(x, params.gamma, params.cache_bytes);

    let mut iterations = 0;
    loop {
        // i: maximal violator in I_up
        let mut g_max = T::neg_infinity();
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(y[t], alpha[t], c) {
                let v = -yf[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = t;
                }
            }
        }
        let mut g_min = T::infinity();
        let mut j_sel = usize::MAX;
        if i_sel != usize::MAX {
            let ki = kernel.row(i_sel);
            let mut best = T::infinity();
            for t in 0..n {
                if !in_low(y[t], alpha[t], c) {
                    continue;
                }
                let v = -yf[t] * grad[t];
                if v < g_min {
                    g_min = v;
                }
                let b = g_max - v;
                if b > T::zero() {
                    let mut a = T::one() + T::one() - (ki[t] + ki[t]);
                    if a <= T::zero() {
                        a = tau;
                    }
                    let obj = -(b * b) / a;
                    if obj < best {
                        best = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || g_max - g_min < params.tol {
            let bias = bias_from(&alpha, &grad, &yf, c, g_max, g_min);
            return Ok(Solution {
                alphas: alpha,
                bias,
                stats: SolverStats {
                    iterations,
                    kernel_evaluations: kernel.evaluations,
                },
            });
        }
        if iterations >= params.max_iter {
            return Err(Error::NotConverged(iterations));
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let ki = kernel.row(i);
        let kj = kernel.row(j);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let kij = ki[j];
        if y[i] != y[j] {
            let mut quad = T::one() + T::one() - (kij + kij);
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] = alpha[i] + delta;
            alpha[j] = alpha[j] + delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > T::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = T::one() + T::one() - (kij + kij);
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] = alpha[i] - delta;
            alpha[j] = alpha[j] + delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }

        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        // Q_ti = y_t y_i K_ti
        let si = yf[i] * dai;
        let sj = yf[j] * daj;
        for t in 0..n {
            grad[t] = grad[t] + yf[t] * (ki[t] * si + kj[t] * sj);
        }
    }
}

fn bias_from<T: Real>(alpha: &[T], grad: &[T], yf: &[T], c: T, g_max: T, g_min: T) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    for t in 0..alpha.len() {
        if alpha[t] > T::zero() && alpha[t] < c {
            sum = sum + (-yf[t] * grad[t]);
            count += 1;
        }
    }
    if count > 0 {
        sum / T::of_usize(count)
    } else if g_max.is_finite() && g_min.is_finite() {
        (g_max + g_min) * T::of(0.5)
    } else if g_max.is_finite() {
        g_max
    } else {
        g_min
    }
}
