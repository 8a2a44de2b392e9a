//! Pairwise dual coordinate ascent for the linear soft-margin SVM.
//!
//! Solves
//!
//! ```text
//! max  sum_i l_i - 1/2 sum_ij l_i l_j y_i y_j <x_i, x_j>
//! s.t. sum_i l_i y_i = 0,  0 <= l_i <= C
//! ```
//!
//! written as the equivalent minimization `1/2 l'Ql - e'l`. Each step picks
//! the maximal violating pair with second-order working set selection and
//! solves the two-variable subproblem in closed form. The stopping rule is
//! `m(l) - M(l) <= tol`, which bounds every KKT residual by `tol`.

use super::{dot, LabeledSample};

/// Curvature floor for flat pair directions.
const TAU: f64 = 1e-12;

pub(crate) struct Solution {
    pub lambdas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn solve(samples: &[LabeledSample], c: f64, tol: f64, max_iter: usize) -> Solution {
    let n = samples.len();
    let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let k = |i: usize, j: usize| dot(&samples[i].x, &samples[j].x);
    let diag: Vec<f64> = (0..n).map(|i| k(i, i)).collect();

    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a'Qa - e'a
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal -y G over the up set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t]) {
                gmin = gmin.min(-y[t] * grad[t]);
            }
        }
        if gmax - gmin <= tol {
            converged = true;
            break;
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };

        // j: best second-order gain among violators in the low set
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b > 0.0 {
                let mut a = diag[i] + diag[t] - 2.0 * k(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let gain = -(b * b) / a;
                if gain < best {
                    best = gain;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        // in raw kernel terms the pair curvature is |x_i - x_j|^2 for both
        // label combinations
        let mut quad = diag[i] + diag[j] - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
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
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
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

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        if di == 0.0 && dj == 0.0 {
            // clipped to a corner without progress; the same pair would be
            // selected again forever
            break;
        }
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    // drop accumulated update drift before reading b off the gradient
    let w = super::weight_vector(samples, &alpha);
    for t in 0..n {
        grad[t] = y[t] * dot(&w, &samples[t].x) - 1.0;
    }
    let bias = bias_from_gradient(&alpha, &grad, &y, c);
    Solution {
        lambdas: alpha,
        bias,
        iterations,
        converged,
    }
}

/// Mean of `y_t - <w, x_t>` over free multipliers, or the midpoint of the
/// feasible interval when every multiplier sits on a bound.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut sum, mut nfree) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += v;
            nfree += 1;
            continue;
        }
        // y = +1 at 0 and y = -1 at C bound b from below, the others from above
        let at_upper = alpha[t] >= c;
        if (y[t] > 0.0) != at_upper {
            lb = lb.max(v);
        } else {
            ub = ub.min(v);
        }
    }
    if nfree > 0 {
        sum / nfree as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    }
}
