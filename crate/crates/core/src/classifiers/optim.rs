//! Limited-memory BFGS with a backtracking (Armijo) line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when the gradient's infinity norm drops below this.
    pub grad_tol: f64,
    /// Stop when `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` drops below this.
    pub f_rel_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 1000,
            memory: 10,
            grad_tol: 1e-6,
            f_rel_tol: 1e7 * f64::EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    FunctionChange,
    MaxIterations,
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which returns the objective and writes the gradient into its
/// second argument.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];

    for iter in 0..opts.max_iter {
        if inf_norm(&g) < opts.grad_tol {
            return LbfgsResult { x, f: fx, iterations: iter, stop: StopReason::Gradient };
        }

        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= alpha[k] * yi);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / inf_norm(&g).max(1.0));
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let beta = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (alpha[k] - beta) * si);
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // not a descent direction; restart from steepest descent
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi / inf_norm(&g).max(1.0));
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return LbfgsResult { x, f: fx, iterations: iter, stop: StopReason::LineSearch };
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let f_old = fx;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if (f_old - fx) / f_old.abs().max(fx.abs()).max(1.0) <= opts.f_rel_tol {
            return LbfgsResult { x, f: fx, iterations: iter + 1, stop: StopReason::FunctionChange };
        }
    }
    LbfgsResult { x, f: fx, iterations: opts.max_iter, stop: StopReason::MaxIterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let center = [3.0, -2.0, 0.5];
        let res = minimize(
            |x, g| {
                let mut f = 0.0;
                for i in 0..3 {
                    let w = (i + 1) as f64;
                    f += w * (x[i] - center[i]).powi(2);
                    g[i] = 2.0 * w * (x[i] - center[i]);
                }
                f
            },
            vec![0.0; 3],
            &LbfgsOptions { f_rel_tol: 0.0, ..Default::default() },
        );
        assert_eq!(res.stop, StopReason::Gradient);
        for i in 0..3 {
            assert!((res.x[i] - center[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn rosenbrock() {
        let res = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            &LbfgsOptions { f_rel_tol: 0.0, max_iter: 500, ..Default::default() },
        );
        assert!((res.x[0] - 1.0).abs() < 1e-5 && (res.x[1] - 1.0).abs() < 1e-5, "{res:?}");
    }
}
