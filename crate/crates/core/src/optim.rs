//! Unconstrained quasi-Newton minimization (BFGS with Armijo backtracking).

/// Stopping rules for [`bfgs`].
#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once the gradient norm drops below this.
    pub grad_tol: f64,
    /// Upper bound on the step length in parameter space.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { max_iter: 2000, grad_tol: 1e-12, max_step: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which returns the value and writes the gradient into its
/// second argument.
///
/// Near the minimum, where the Armijo test is swamped by rounding, a step is
/// still accepted if it leaves the value unchanged to rounding and shrinks the
/// gradient.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut h = identity(n);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < opts.max_iter {
        let gn = norm(&g);
        if !fx.is_finite() || gn < opts.grad_tol {
            break;
        }
        iterations += 1;
        for i in 0..n {
            p[i] = -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            h = identity(n);
            for i in 0..n {
                p[i] = -g[i];
            }
            slope = -gn * gn;
        }
        let pn = norm(&p);
        let mut alpha = if pn > opts.max_step { opts.max_step / pn } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + alpha * p[i];
            }
            let f_new = f(&x_new, &mut g_new);
            let flat = (f_new - fx).abs() <= 1e-14 * (1.0 + fx.abs()) && norm(&g_new) < gn;
            if f_new.is_finite() && (f_new <= fx + 1e-4 * alpha * slope || flat) {
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                update_inverse_hessian(&mut h, &s, &y);
                stalled = if f_new < fx { 0 } else { stalled + 1 };
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut g, &mut g_new);
                fx = f_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || stalled > 20 {
            break;
        }
    }
    let grad_norm = norm(&g);
    Minimum { x, value: fx, grad_norm, iterations, converged: grad_norm < opts.grad_tol }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn update_inverse_hessian(h: &mut [f64], s: &[f64], y: &[f64]) {
    let n = s.len();
    let sy = dot(s, y);
    if sy <= 1e-300 || !sy.is_finite() {
        return;
    }
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
    }
}

/// Central-difference gradient, for tests and cross-checks.
pub fn numeric_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
