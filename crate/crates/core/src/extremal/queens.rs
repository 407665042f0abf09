//! Distance from a pure state to the convex hull of coherent states.
//!
//! For fixed directions n_i the squared Hilbert–Schmidt distance
//! ‖|ψ⟩⟨ψ| − Σ ν_i |n_i⟩⟨n_i|‖² is a convex quadratic in the weights ν, to be
//! minimized over the probability simplex.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::sphere::fibonacci_sphere;
use super::{minimize_over_states, random_amplitudes, restart_rng, run_restarts, SearchResult};
use crate::error::{Error, Result};
use crate::husimi::coherent_row;
use crate::optim::{bfgs, BfgsOptions};
use crate::par::map_indexed;
use crate::states::{SpinState, SphereVec};
use crate::stellar::{extract_constellation, DEFAULT_MERGE_TOL};

/// Iteration cap for the simplex solvers.
pub const QP_MAX_ITER: usize = 200_000;
/// Stationarity threshold on the projected-gradient residual.
pub const QP_TOL: f64 = 1e-13;
/// Largest support on which the exact affine solve is attempted.
const SUPPORT_SOLVE_MAX: usize = 4096;
/// Frank–Wolfe duality gap bounding f − f*; stops projected gradient too.
pub const QP_GAP_TOL: f64 = 1e-12;
/// Once f has stopped decreasing for [`QP_STALL`] iterations, a gap below
/// this is accepted: closing it further is below the rounding of f.
pub const QP_STALL_GAP: f64 = 1e-6;
const QP_STALL: usize = 200;
/// Gap at which the Frank–Wolfe cross-check stops.
pub const FW_GAP_TOL: f64 = 1e-10;

/// gᵀν − min_i g_i, an upper bound on f(ν) − f*.
fn duality_gap(nu: &[f64], g: &[f64]) -> f64 {
    let g_nu: f64 = nu.iter().zip(g).map(|(a, b)| a * b).sum();
    g_nu - g.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Default Fibonacci grid size max(400, 40(2S+1)).
pub fn default_grid_size(two_s: u32) -> usize {
    400usize.max(40 * (two_s as usize + 1))
}

/// The weight problem for one target and one set of directions.
#[derive(Debug, Clone)]
pub struct QueenProblem {
    dim: usize,
    /// Rows r_i with ⟨n_i|φ⟩ = r_i·φ.
    rows: Vec<Vec<Complex64>>,
    /// Q_ψ(n_i).
    q: Vec<f64>,
    /// |ψ⟩⟨ψ|, row-major.
    rho: Vec<Complex64>,
    purity: f64,
}

impl QueenProblem {
    pub fn new(target: &SpinState, directions: &[[f64; 3]]) -> Self {
        let two_s = target.two_s();
        let rows: Vec<Vec<Complex64>> =
            map_indexed(directions.len(), |i| coherent_row(two_s, SphereVec::from_cartesian(directions[i])));
        let q = rows.iter().map(|r| r.iter().zip(target.amplitudes()).map(|(a, b)| a * b).sum::<Complex64>().norm_sqr()).collect();
        let psi = target.amplitudes();
        let rho = psi.iter().flat_map(|a| psi.iter().map(move |b| a * b.conj())).collect();
        QueenProblem { dim: two_s as usize + 1, rows, q, rho, purity: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// X = Σ ν_i |n_i⟩⟨n_i|, row-major d×d.
    fn mixture(&self, nu: &[f64]) -> Vec<Complex64> {
        let d = self.dim;
        let mut x = vec![Complex64::new(0.0, 0.0); d * d];
        for (r, &w) in self.rows.iter().zip(nu) {
            if w == 0.0 {
                continue;
            }
            for k in 0..d {
                let a = r[k].conj() * w;
                for l in 0..d {
                    x[k * d + l] += a * r[l];
                }
            }
        }
        x
    }

    /// ⟨n_i|X|n_i⟩ for every direction.
    fn expectations(&self, x: &[Complex64]) -> Vec<f64> {
        let d = self.dim;
        self.rows
            .iter()
            .map(|r| {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    let mut inner = Complex64::new(0.0, 0.0);
                    for l in 0..d {
                        inner += x[k * d + l] * r[l].conj();
                    }
                    s += r[k] * inner;
                }
                s.re
            })
            .collect()
    }

    fn value_from(&self, x: &[Complex64], nu: &[f64]) -> f64 {
        let tr_x2: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let cross: f64 = nu.iter().zip(&self.q).map(|(a, b)| a * b).sum();
        (tr_x2 - 2.0 * cross + self.purity).max(0.0)
    }

    /// Squared distance for weights ν.
    pub fn value(&self, nu: &[f64]) -> f64 {
        self.value_from(&self.mixture(nu), nu)
    }

    /// Moves toward the minimizer of f on the affine hull of the current
    /// support, stopping at the simplex boundary. Returns the new point if it
    /// lowers f.
    fn support_step(&self, nu: &[f64], f: f64) -> Option<(Vec<f64>, f64)> {
        let support: Vec<usize> = (0..nu.len()).filter(|&i| nu[i] > 0.0).collect();
        let m = support.len();
        if m > SUPPORT_SOLVE_MAX {
            return None;
        }
        // min ‖p_0 + Σ_i c_i (p_i − p_0)‖ over the affine hull, p_i = P_i − ρ
        let d = self.dim;
        let vec_of = |i: usize| -> Vec<f64> {
            let r = &self.rows[i];
            let mut v = Vec::with_capacity(2 * d * d);
            for k in 0..d {
                for l in 0..d {
                    let z = r[k].conj() * r[l] - self.rho[k * d + l];
                    v.push(z.re);
                    v.push(z.im);
                }
            }
            v
        };
        let p0 = DVector::from_vec(vec_of(support[0]));
        let mut alpha = vec![1.0; m];
        if m > 1 {
            let mut basis = DMatrix::<f64>::zeros(2 * d * d, m - 1);
            for (c, &i) in support.iter().enumerate().skip(1) {
                let v = DVector::from_vec(vec_of(i)) - &p0;
                basis.set_column(c - 1, &v);
            }
            let scale = basis.amax().max(1e-300);
            let c = basis.svd(true, true).solve(&(-&p0), 1e-12 * scale).ok()?;
            alpha[0] = 1.0 - c.sum();
            alpha[1..].copy_from_slice(c.as_slice());
        }
        let mut theta: f64 = 1.0;
        for (a, &i) in support.iter().enumerate() {
            let d = alpha[a] - nu[i];
            if d < 0.0 {
                theta = theta.min(nu[i] / -d);
            }
        }
        let mut cand = nu.to_vec();
        for (a, &i) in support.iter().enumerate() {
            cand[i] = (nu[i] + theta * (alpha[a] - nu[i])).max(0.0);
        }
        let total: f64 = cand.iter().sum();
        cand.iter_mut().for_each(|w| *w /= total);
        let f_c = self.value(&cand);
        (f_c < f).then_some((cand, f_c))
    }

    fn gradient(&self, x: &[Complex64]) -> Vec<f64> {
        self.expectations(x).iter().zip(&self.q).map(|(e, q)| 2.0 * (e - q)).collect()
    }
}

/// Euclidean projection onto the probability simplex (sort-based, exact).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            shift = t;
        }
    }
    v.iter().map(|x| (x - shift).max(0.0)).collect()
}

/// Minimizes the squared distance by accelerated projected gradient (monotone
/// FISTA) with backtracking on the step, interleaved with exact solves on the
/// affine hull of the current support. Iterates stay feasible and the
/// objective never increases; stops on a duality gap below [`QP_GAP_TOL`] or
/// a projected-gradient residual below [`QP_TOL`].
pub fn queen_weights_projected(p: &QueenProblem, start: Option<&[f64]>) -> Result<(Vec<f64>, f64)> {
    let n = p.len();
    let mut nu = match start {
        Some(s) => project_simplex(s),
        None => vec![1.0 / n as f64; n],
    };
    let mut f = p.value(&nu);
    let mut y = nu.clone();
    let mut t: f64 = 1.0;
    let mut step = 1.0;
    let mut residual = f64::INFINITY;
    let mut last_decrease = 0;
    for iter in 0..QP_MAX_ITER {
        if iter % 10 == 0 {
            let g = p.gradient(&p.mixture(&nu));
            let full: Vec<f64> = nu.iter().zip(&g).map(|(a, b)| a - b).collect();
            residual = nu.iter().zip(project_simplex(&full)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let gap = duality_gap(&nu, &g);
            if residual < QP_TOL || gap < QP_GAP_TOL || (gap < QP_STALL_GAP && iter - last_decrease > QP_STALL) {
                return Ok((nu, f));
            }
            if let Some((cand, f_c)) = p.support_step(&nu, f) {
                last_decrease = iter;
                nu = cand;
                f = f_c;
                y = nu.clone();
                t = 1.0;
                continue;
            }
        }
        let x_y = p.mixture(&y);
        let f_y = p.value_from(&x_y, &y);
        let g_y = p.gradient(&x_y);
        step *= 1.5;
        let z = loop {
            let trial: Vec<f64> = y.iter().zip(&g_y).map(|(a, b)| a - step * b).collect();
            let z = project_simplex(&trial);
            let f_z = p.value(&z);
            let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let lin: f64 = diff.iter().zip(&g_y).map(|(a, b)| a * b).sum();
            let quad: f64 = diff.iter().map(|a| a * a).sum::<f64>() / (2.0 * step);
            if f_z <= f_y + lin + quad + 1e-15 * f_y.abs() || step < 1e-20 {
                break (z, f_z);
            }
            step *= 0.5;
        };
        let (z, f_z) = z;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let prev = nu.clone();
        if f_z <= f {
            if f_z < f {
                last_decrease = iter;
            }
            nu = z.clone();
            f = f_z;
        }
        let (a, b) = (t / t_next, (t - 1.0) / t_next);
        y = (0..n).map(|i| nu[i] + a * (z[i] - nu[i]) + b * (nu[i] - prev[i])).collect();
        // adaptive restart when the momentum stops helping
        if f_z > f {
            y = nu.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
    }
    Err(Error::NoConvergence { iterations: QP_MAX_ITER, residual })
}

/// Minimizes the same quadratic by Frank–Wolfe with away steps and exact line
/// search; an independent cross-check of [`queen_weights_projected`].
pub fn queen_weights_frank_wolfe(p: &QueenProblem) -> Result<(Vec<f64>, f64)> {
    let n = p.len();
    let d = p.dim;
    // start at the vertex with the largest Q
    let first = (0..n).max_by(|&a, &b| p.q[a].total_cmp(&p.q[b]).then(b.cmp(&a))).unwrap_or(0);
    let mut nu = vec![0.0; n];
    nu[first] = 1.0;
    let mut x = p.mixture(&nu);
    let mut gap = f64::INFINITY;
    for _ in 0..QP_MAX_ITER {
        let g = p.gradient(&x);
        let s = (0..n).min_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b))).unwrap();
        let v = (0..n).filter(|&i| nu[i] > 0.0).max_by(|&a, &b| g[a].total_cmp(&g[b]).then(b.cmp(&a))).unwrap();
        let g_nu: f64 = nu.iter().zip(&g).map(|(a, b)| a * b).sum();
        gap = g_nu - g[s];
        if gap < FW_GAP_TOL {
            return Ok((nu.clone(), p.value_from(&x, &nu)));
        }
        let away_gain = g[v] - g_nu;
        let (toward, gamma_max) = if gap >= away_gain { (true, 1.0) } else { (false, nu[v] / (1.0 - nu[v])) };
        // D = Σ d_i P_i for the chosen direction
        let target = if toward { s } else { v };
        let mut dmat = vec![Complex64::new(0.0, 0.0); d * d];
        let r = &p.rows[target];
        for k in 0..d {
            for l in 0..d {
                let pk = r[k].conj() * r[l];
                dmat[k * d + l] = if toward { pk - x[k * d + l] } else { x[k * d + l] - pk };
            }
        }
        let slope = if toward { -gap } else { -away_gain };
        let curvature: f64 = 2.0 * dmat.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let gamma = if curvature > 0.0 { (-slope / curvature).min(gamma_max) } else { gamma_max };
        if toward {
            for w in nu.iter_mut() {
                *w *= 1.0 - gamma;
            }
            nu[s] += gamma;
        } else {
            for w in nu.iter_mut() {
                *w *= 1.0 + gamma;
            }
            nu[v] -= gamma;
            if gamma == gamma_max {
                nu[v] = 0.0;
            }
        }
        for (xk, dk) in x.iter_mut().zip(&dmat) {
            *xk += dk * gamma;
        }
    }
    Err(Error::NoConvergence { iterations: QP_MAX_ITER, residual: gap })
}

/// Closest mixture of coherent states found for one target.
#[derive(Debug, Clone, Serialize)]
pub struct QueenFit {
    /// Distance after continuous polishing of the support directions.
    pub distance: f64,
    /// Distance restricted to the Fibonacci grid.
    pub grid_distance: f64,
    /// Optimal weights on the grid directions.
    pub weights: Vec<f64>,
    /// Polished support: directions and weights.
    pub support: Vec<([f64; 3], f64)>,
}

/// Hilbert–Schmidt distance from `target` to the closest mixture of coherent
/// states, over a Fibonacci grid of `grid_n` directions, then polished by
/// moving the support directions off the grid.
pub fn find_queen(target: &SpinState, grid_n: usize) -> Result<QueenFit> {
    if grid_n < 100 {
        return Err(Error::domain("Queen grids need at least 100 directions"));
    }
    let dirs = fibonacci_sphere(grid_n);
    let problem = QueenProblem::new(target, &dirs);
    let (weights, f) = queen_weights_projected(&problem, None)?;
    let grid_distance = f.sqrt();
    let support: Vec<([f64; 3], f64)> = weights.iter().zip(&dirs).filter(|(w, _)| **w > 1e-9).map(|(w, d)| (*d, *w)).collect();
    let polished = polish(target, support.clone());
    let (distance, support) = match polished {
        Some((d, s)) if d < grid_distance => (d, s),
        _ => (grid_distance, support),
    };
    Ok(QueenFit { distance, grid_distance, weights, support })
}

/// Alternates BFGS over the support directions (weights fixed) with an exact
/// weight solve on the moved directions.
fn polish(target: &SpinState, mut support: Vec<([f64; 3], f64)>) -> Option<(f64, Vec<([f64; 3], f64)>)> {
    if support.is_empty() || support.len() > 64 {
        return None;
    }
    let opts = BfgsOptions { grad_tol: 1e-12, max_iter: 500, max_step: 0.1 };
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let weights: Vec<f64> = support.iter().map(|s| s.1).collect();
        let x0: Vec<f64> = support.iter().flat_map(|s| s.0).collect();
        let objective = |x: &[f64]| -> f64 {
            let dirs: Vec<[f64; 3]> = x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            QueenProblem::new(target, &dirs).value(&weights)
        };
        let m = bfgs(
            |x, g| {
                let grad = crate::optim::numeric_gradient(objective, x, 1e-7);
                g.copy_from_slice(&grad);
                objective(x)
            },
            &x0,
            &opts,
        );
        let dirs: Vec<[f64; 3]> = m
            .x
            .chunks(3)
            .map(|c| {
                let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                [c[0] / n, c[1] / n, c[2] / n]
            })
            .collect();
        let problem = QueenProblem::new(target, &dirs);
        let (w, f) = queen_weights_projected(&problem, Some(&weights)).ok()?;
        support = dirs.into_iter().zip(w).filter(|(_, w)| *w > 1e-12).collect();
        if f.sqrt() >= best - 1e-15 {
            best = best.min(f.sqrt());
            break;
        }
        best = f.sqrt();
    }
    Some((best, support))
}

/// Searches for the pure state farthest from every mixture of coherent
/// states. The weights are re-solved at each step (warm-started), and the
/// gradient follows from the envelope theorem.
pub fn search_queen(two_s: u32, grid_n: usize, restarts: usize, seed: u64) -> Result<SearchResult> {
    if grid_n < 100 || restarts == 0 {
        return Err(Error::domain("Queen search needs ≥ 100 directions and at least one restart"));
    }
    let dirs = fibonacci_sphere(grid_n);
    let d = two_s as usize + 1;
    let rows: Vec<Vec<Complex64>> = dirs.iter().map(|p| coherent_row(two_s, SphereVec::from_cartesian(*p))).collect();
    let opts = BfgsOptions { grad_tol: 1e-9, max_iter: 300, max_step: 0.3 };
    let (best, used) = run_restarts(
        restarts,
        |i| {
            let mut rng = restart_rng(seed, i as u64);
            let init = random_amplitudes(d, &mut rng);
            let warm = std::sync::Mutex::new(None::<Vec<f64>>);
            let objective = |psi: &[Complex64]| -> (f64, Vec<Complex64>) {
                let Ok(state) = SpinState::new(two_s, psi.to_vec()) else {
                    return (f64::INFINITY, vec![Complex64::new(0.0, 0.0); d]);
                };
                let problem = QueenProblem::new(&state, &dirs);
                let start = warm.lock().expect("warm start").clone();
                let Ok((nu, f)) = queen_weights_projected(&problem, start.as_deref()) else {
                    return (f64::INFINITY, vec![Complex64::new(0.0, 0.0); d]);
                };
                let mut g = vec![Complex64::new(0.0, 0.0); d];
                for (r, &w) in rows.iter().zip(&nu) {
                    if w == 0.0 {
                        continue;
                    }
                    let amp: Complex64 = r.iter().zip(psi).map(|(a, b)| a * b).sum();
                    for k in 0..d {
                        g[k] += r[k].conj() * amp * (2.0 * w);
                    }
                }
                *warm.lock().expect("warm start") = Some(nu);
                (-f, g)
            };
            minimize_over_states(&init, &objective, &opts)
        },
        |_| false,
        |r| r.1,
    )
    .expect("at least one restart");
    let state = SpinState::new(two_s, best.0)?;
    let fit = find_queen(&state, grid_n)?;
    let constellation = extract_constellation(&state, DEFAULT_MERGE_TOL).ok();
    Ok(SearchResult { state, objective: fit.distance, order_achieved: 0, restarts_used: used as u32, converged: true, constant_objective: false, constellation })
}
