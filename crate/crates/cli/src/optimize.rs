//! Limited-memory quasi-Newton minimization with central finite-difference
//! gradients, under a hard objective-call budget.
//!
//! The objective is assumed deterministic (exact simulation), so the
//! finite-difference noise floor sits near machine precision and a tight
//! gradient tolerance is attainable.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

pub struct OptimizeOptions {
    /// L-BFGS history length.
    pub history: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub grad_tol: f64,
    /// Hard cap on objective evaluations, finite-difference probes included.
    pub max_calls: usize,
    /// Central finite-difference step.
    pub fd_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            history: 10,
            grad_tol: 1e-6,
            max_calls: 5000,
            fd_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub calls: usize,
    pub converged: bool,
    /// Set when the search broke down before improving on the start point
    /// (non-finite objective or an immediately failed line search).
    pub failed: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimize `f` from `x0`. `f` must be safe to evaluate from multiple threads;
/// finite-difference probes run in parallel.
pub fn minimize<F>(f: &F, x0: &[f64], opts: &OptimizeOptions) -> OptimizeOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let calls = AtomicUsize::new(0);
    let eval = |x: &[f64]| -> f64 {
        calls.fetch_add(1, Ordering::Relaxed);
        f(x)
    };
    let gradient = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut plus = x.to_vec();
                plus[i] += opts.fd_step;
                let mut minus = x.to_vec();
                minus[i] -= opts.fd_step;
                (eval(&plus) - eval(&minus)) / (2.0 * opts.fd_step)
            })
            .collect()
    };

    let mut x = x0.to_vec();
    let mut fx = eval(&x);
    if !fx.is_finite() {
        return OptimizeOutcome {
            x,
            fx,
            calls: calls.load(Ordering::Relaxed),
            converged: false,
            failed: true,
        };
    }
    let f_start = fx;
    let mut g = gradient(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, rho)
    let mut converged = false;
    let mut any_step = false;

    loop {
        if inf_norm(&g) < opts.grad_tol {
            converged = true;
            break;
        }
        if calls.load(Ordering::Relaxed) + 2 * n >= opts.max_calls {
            break;
        }

        // two-loop recursion
        let mut direction: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &direction);
            for (d, yv) in direction.iter_mut().zip(y) {
                *d -= alpha * yv;
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = history.back() {
            let scale = dot(s, y) / dot(y, y);
            if scale.is_finite() && scale > 0.0 {
                for d in &mut direction {
                    *d *= scale;
                }
            }
        }
        for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * dot(y, &direction);
            for (d, sv) in direction.iter_mut().zip(s) {
                *d += (alpha - beta) * sv;
            }
        }

        let mut slope = dot(&g, &direction);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            history.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = dot(&g, &direction);
        }

        // backtracking line search with an Armijo condition
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            if calls.load(Ordering::Relaxed) >= opts.max_calls {
                break;
            }
            let trial: Vec<f64> = x
                .iter()
                .zip(&direction)
                .map(|(xi, di)| xi + step * di)
                .collect();
            let f_trial = eval(&trial);
            if f_trial.is_finite() && f_trial <= fx + 1e-4 * step * slope {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        any_step = true;

        if calls.load(Ordering::Relaxed) + 2 * n > opts.max_calls {
            x = x_new;
            fx = f_new;
            break;
        }
        let g_new = gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.history {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }

    let failed = !any_step && !converged && fx >= f_start;
    OptimizeOutcome {
        x,
        fx,
        calls: calls.load(Ordering::Relaxed),
        converged,
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_converges() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let out = minimize(&f, &[5.0, 5.0], &OptimizeOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5);
        assert!((out.x[1] + 2.0).abs() < 1e-5);
        assert!(!out.failed);
    }

    #[test]
    fn rosenbrock_reaches_the_valley_floor() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(
            &f,
            &[-1.2, 1.0],
            &OptimizeOptions {
                max_calls: 20_000,
                ..Default::default()
            },
        );
        assert!(out.fx < 1e-9, "fx = {}", out.fx);
    }

    #[test]
    fn call_budget_is_respected() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let budget = 50;
        let out = minimize(
            &f,
            &vec![1.0; 8],
            &OptimizeOptions {
                max_calls: budget,
                grad_tol: 1e-14,
                ..Default::default()
            },
        );
        assert!(out.calls <= budget + 1, "calls = {}", out.calls);
    }

    #[test]
    fn non_finite_objective_flags_failure() {
        let f = |_: &[f64]| f64::NAN;
        let out = minimize(&f, &[0.5], &OptimizeOptions::default());
        assert!(out.failed);
    }

    #[test]
    fn trigonometric_surface_matches_known_minimum() {
        // f(x) = -cos(x) has minimum -1 at 0
        let f = |x: &[f64]| -x[0].cos();
        let out = minimize(&f, &[0.7], &OptimizeOptions::default());
        assert!((out.fx + 1.0).abs() < 1e-10);
    }
}
