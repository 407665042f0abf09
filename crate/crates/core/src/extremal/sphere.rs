//! Point configurations on the unit sphere: design checks, Thomson and
//! Tammes problems.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{restart_rng, run_restarts};
use crate::error::{Error, Result};
use crate::optim::{bfgs, BfgsOptions};
use crate::specfun::{normalized_legendre_table, ylm_from_table};

/// N points on the unit sphere, as `{"points": [[x, y, z], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    pub points: Vec<[f64; 3]>,
}

impl PointConfig {
    /// Normalizes every point; fails on a zero vector.
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::domain("points must be nonzero and finite"));
            }
            out.push([p[0] / n, p[1] / n, p[2] / n]);
        }
        Ok(PointConfig { points: out })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-rank defects of a point set as a spherical design.
#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub pass: bool,
    pub defect: f64,
    /// defect_K for K = 1..=t.
    pub per_rank: Vec<f64>,
}

/// Design defect threshold.
pub const DESIGN_TOL: f64 = 1e-10;

/// A point set is a t-design iff Σ_i Y_Kq(n_i) = 0 for 1 ≤ K ≤ t. The defect
/// of rank K is √(4π/(2K+1) Σ_q |mean_i Y_Kq(n_i)|²), which is 1 for a single
/// point and 0 for a perfect design.
pub fn design_check(c: &PointConfig, t: u32) -> DesignReport {
    let kmax = t as usize;
    let mut sums = vec![vec![num_complex::Complex64::new(0.0, 0.0); 2 * kmax + 1]; kmax + 1];
    for p in &c.points {
        let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let theta = rho.atan2(p[2]);
        let phi = p[1].atan2(p[0]);
        let table = normalized_legendre_table(kmax, theta);
        for (k, row) in sums.iter_mut().enumerate().skip(1) {
            for q in -(k as i32)..=(k as i32) {
                row[(q + kmax as i32) as usize] += ylm_from_table(&table, k, q, phi);
            }
        }
    }
    let n = c.points.len().max(1) as f64;
    let per_rank: Vec<f64> = (1..=kmax)
        .map(|k| {
            let s: f64 = sums[k].iter().map(|z| (z / n).norm_sqr()).sum();
            (s * 4.0 * PI / (2 * k + 1) as f64).sqrt()
        })
        .collect();
    let defect = per_rank.iter().copied().fold(0.0, f64::max);
    DesignReport { pass: defect < DESIGN_TOL, defect, per_rank }
}

/// A solved configuration and its objective.
#[derive(Debug, Clone, Serialize)]
pub struct SphereConfig {
    #[serde(flatten)]
    pub points: PointConfig,
    /// Riesz energy (Thomson) or largest pairwise cosine (Tammes).
    pub objective: f64,
    pub restarts_used: u32,
}

/// Σ_{i<j} |n_i − n_j|^{−d}.
pub fn thomson_energy(c: &PointConfig, d: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            e += dist(c.points[i], c.points[j]).powf(-d);
        }
    }
    e
}

/// Largest pairwise cosine, cos of the smallest angle.
pub fn min_angle_cos(c: &PointConfig) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            m = m.max(dot(c.points[i], c.points[j]));
        }
    }
    m
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn unit_points(x: &[f64]) -> Vec<([f64; 3], f64)> {
    x.chunks(3)
        .map(|c| {
            let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            ([c[0] / n, c[1] / n, c[2] / n], n)
        })
        .collect()
}

/// Chain rule from unit vectors u = v/|v| back to v, plus a (|v|² − 1)²
/// penalty that pins the scale.
fn pull_back(x: &[f64], pts: &[([f64; 3], f64)], gu: &[[f64; 3]], grad: &mut [f64]) -> f64 {
    let mut penalty = 0.0;
    for (i, (u, n)) in pts.iter().enumerate() {
        let radial = dot(*u, gu[i]);
        let n2 = n * n;
        penalty += (n2 - 1.0).powi(2);
        for a in 0..3 {
            grad[3 * i + a] = (gu[i][a] - radial * u[a]) / n + 4.0 * (n2 - 1.0) * x[3 * i + a];
        }
    }
    penalty
}

fn random_start(n: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = restart_rng(seed, index as u64);
    (0..3 * n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn finish(x: &[f64]) -> PointConfig {
    PointConfig { points: unit_points(x).into_iter().map(|(u, _)| u).collect() }
}

/// Minimizes the Riesz energy Σ r_ij^{−d} by multistart BFGS.
pub fn thomson(n: usize, d: f64, restarts: usize, seed: u64) -> Result<SphereConfig> {
    if n < 2 || !(d > 0.0) || restarts == 0 {
        return Err(Error::domain("Thomson needs N ≥ 2, d > 0 and at least one restart"));
    }
    let opts = BfgsOptions { grad_tol: 1e-12, max_iter: 5000, max_step: 0.3 };
    let (cfg, used) = run_restarts(
        restarts,
        |r| {
            let x0 = random_start(n, seed, r);
            let m = bfgs(
                |x, grad| {
                    let pts = unit_points(x);
                    let mut gu = vec![[0.0; 3]; n];
                    let mut e = 0.0;
                    for i in 0..n {
                        for j in i + 1..n {
                            let (a, b) = (pts[i].0, pts[j].0);
                            let r = dist(a, b);
                            e += r.powf(-d);
                            let f = -d * r.powf(-d - 2.0);
                            for k in 0..3 {
                                gu[i][k] += f * (a[k] - b[k]);
                                gu[j][k] -= f * (a[k] - b[k]);
                            }
                        }
                    }
                    e + pull_back(x, &pts, &gu, grad)
                },
                &x0,
                &opts,
            );
            let c = finish(&m.x);
            let e = thomson_energy(&c, d);
            (c, e)
        },
        |_| false,
        |r| r.1,
    )
    .expect("at least one restart");
    Ok(SphereConfig { objective: cfg.1, points: cfg.0, restarts_used: used as u32 })
}

/// Maximizes the smallest pairwise angle by minimizing the smooth maximum
/// τ ln Σ_{i<j} exp(n_i·n_j/τ), with τ lowered from 10⁻¹ to 10⁻⁶.
pub fn tammes(n: usize, restarts: usize, seed: u64) -> Result<SphereConfig> {
    if n < 2 || restarts == 0 {
        return Err(Error::domain("Tammes needs N ≥ 2 and at least one restart"));
    }
    if n == 2 {
        let c = PointConfig { points: vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]] };
        return Ok(SphereConfig { objective: -1.0, points: c, restarts_used: 0 });
    }
    let opts = BfgsOptions { grad_tol: 1e-12, max_iter: 3000, max_step: 0.3 };
    let (cfg, used) = run_restarts(
        restarts,
        |r| {
            let mut x = random_start(n, seed, r);
            for tau in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
                let m = bfgs(
                    |x, grad| {
                        let pts = unit_points(x);
                        let mut cos = Vec::with_capacity(n * (n - 1) / 2);
                        for i in 0..n {
                            for j in i + 1..n {
                                cos.push((i, j, dot(pts[i].0, pts[j].0)));
                            }
                        }
                        let top = cos.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
                        let weights: Vec<f64> = cos.iter().map(|c| ((c.2 - top) / tau).exp()).collect();
                        let z: f64 = weights.iter().sum();
                        let mut gu = vec![[0.0; 3]; n];
                        for (&(i, j, _), w) in cos.iter().zip(&weights) {
                            let p = w / z;
                            for k in 0..3 {
                                gu[i][k] += p * pts[j].0[k];
                                gu[j][k] += p * pts[i].0[k];
                            }
                        }
                        top + tau * z.ln() + pull_back(x, &pts, &gu, grad)
                    },
                    &x,
                    &opts,
                );
                x = m.x;
            }
            let c = finish(&x);
            let m = min_angle_cos(&c);
            (c, m)
        },
        |_| false,
        |r| r.1,
    )
    .expect("at least one restart");
    Ok(SphereConfig { objective: cfg.1, points: cfg.0, restarts_used: used as u32 })
}

/// Fibonacci lattice of `n` nearly uniform directions.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tetrahedron() -> PointConfig {
        let s = 1.0 / 3f64.sqrt();
        PointConfig { points: vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]] }
    }

    fn octahedron() -> PointConfig {
        PointConfig {
            points: vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]],
        }
    }

    #[test]
    fn design_examples() {
        assert!(design_check(&tetrahedron(), 2).pass);
        let r = design_check(&tetrahedron(), 3);
        assert!(!r.pass && r.per_rank[2] > 0.1);
        assert!(design_check(&octahedron(), 3).pass);
        assert!(!design_check(&octahedron(), 4).pass);
        let single = PointConfig { points: vec![[0.0, 0.0, 1.0]] };
        assert_abs_diff_eq!(design_check(&single, 1).defect, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn thomson_small() {
        let two = thomson(2, 1.0, 2, 1).unwrap();
        assert_abs_diff_eq!(two.objective, 0.5, epsilon = 1e-10);
        let four = thomson(4, 1.0, 4, 1).unwrap();
        assert_abs_diff_eq!(four.objective, 6.0 * (3.0f64 / 8.0).sqrt(), epsilon = 1e-9);
        assert!(design_check(&four.points, 2).defect < 1e-6);
    }

    #[test]
    fn tammes_small() {
        assert_abs_diff_eq!(tammes(3, 4, 2).unwrap().objective, -0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(tammes(4, 4, 2).unwrap().objective, -1.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn fibonacci_is_unit_and_balanced() {
        let pts = fibonacci_sphere(400);
        assert!(pts.iter().all(|p| (dot(*p, *p) - 1.0).abs() < 1e-14));
        let c = PointConfig { points: pts };
        assert!(design_check(&c, 1).defect < 1e-2);
    }
}
