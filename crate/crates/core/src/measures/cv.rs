//! Oscillator measures.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::entropy_term;
use crate::error::{Error, Result};
use crate::husimi::{cv_overlap, husimi_cv, PlaneGrid};
use crate::optim::{bfgs, BfgsOptions};
use crate::par::{map_indexed, map_slice};
use crate::specfun::{laguerre, log_factorial};
use crate::states::FockState;
use crate::stellar::cv_polynomial_roots;

/// S_W = −(1/π) ∫ Q ln Q d²α.
///
/// Q vanishes at the zeros w_i of the stellar function, where Q ln Q has
/// logarithmic singularities that spoil polar quadrature. With
/// Q_reg = Q / Π|α − w_i|², the entropy splits exactly into
/// −(1/π)∫ Q ln Q_reg (smooth, by quadrature) minus Σ_i U(w_i), where
/// U(w) = (1/π)∫ Q ln|α − w|² = Σ_n |⟨n|D(−w)|ψ⟩|² ψ(n+1).
/// Zeros outside the disc or where Q is negligible are left to the quadrature.
pub fn wehrl_cv(psi: &FockState, grid: &PlaneGrid) -> Result<f64> {
    let zeros = relevant_zeros(psi, grid);
    let q = grid.husimi_values(psi);
    let h: Vec<f64> = map_indexed(q.len(), |i| {
        let qi = q[i];
        if qi <= 0.0 {
            return 0.0;
        }
        let (z, _) = grid.node(i);
        let ln_reg = qi.ln() - zeros.iter().map(|w| (z - w).norm_sqr().ln()).sum::<f64>();
        -qi * ln_reg
    });
    let smooth = grid.integrate_values(&h)?;
    let potentials: f64 = zeros.iter().map(|&w| log_potential(psi, w)).sum();
    Ok(smooth - potentials)
}

/// Plain quadrature of −(1/π) ∫ Q ln Q, without zero subtraction.
pub fn wehrl_cv_quadrature(psi: &FockState, grid: &PlaneGrid) -> Result<f64> {
    let q = grid.husimi_values(psi);
    let h: Vec<f64> = q.iter().map(|&x| -entropy_term(x)).collect();
    grid.integrate_values(&h)
}

/// Largest Q accepted at a computed zero.
const SPURIOUS_ZERO_Q: f64 = 1e-16;
/// Relative size below which trailing amplitudes are ignored when locating zeros.
const TAIL_TOL: f64 = 1e-14;

/// Zeros of Q inside the grid disc with non-negligible Q nearby.
fn relevant_zeros(psi: &FockState, grid: &PlaneGrid) -> Vec<Complex64> {
    // a long tail of rounding-level amplitudes makes the root finder unreliable
    let a = psi.amplitudes();
    let top = a.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let keep = a.iter().rposition(|x| x.norm() > TAIL_TOL * top).map_or(1, |i| i + 1);
    let Ok(trimmed) = FockState::new(a[..keep].to_vec()) else {
        return Vec::new();
    };
    let Ok(roots) = cv_polynomial_roots(&trimmed) else {
        return Vec::new();
    };
    roots
        .into_iter()
        .map(|r| r.conj())
        .filter(|w| w.is_finite() && w.norm() <= grid.radius())
        .filter(|&w| husimi_cv(psi, w) < SPURIOUS_ZERO_Q)
        .filter(|&w| {
            (0..8).map(|j| husimi_cv(psi, w + Complex64::from_polar(0.5, j as f64 * PI / 4.0))).fold(0.0, f64::max) > 1e-24
        })
        .collect()
}

/// U(w) = (1/π) ∫ Q(α) ln|α − w|² d²α = Σ_n |c_n|² ψ(n+1), c = D(−w)ψ.
pub fn log_potential(psi: &FockState, w: Complex64) -> f64 {
    let c = displaced_amplitudes(psi.amplitudes(), -w);
    let mut harmonic = 0.0;
    let mut total = 0.0;
    for (n, a) in c.iter().enumerate() {
        if n > 0 {
            harmonic += 1.0 / n as f64;
        }
        total += a.norm_sqr() * (harmonic - EULER_GAMMA);
    }
    total
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// D(β)ψ in a Fock space enlarged to hold the displaced tail, by Taylor
/// steps of exp(β a† − β* a).
pub(crate) fn displaced_amplitudes(psi: &[Complex64], beta: Complex64) -> Vec<Complex64> {
    let b = beta.norm();
    let dim = psi.len() + (b * b + 12.0 * b + 40.0).ceil() as usize;
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    v[..psi.len()].copy_from_slice(psi);
    if b == 0.0 {
        return v;
    }
    let steps = (2.0 * b * (dim as f64).sqrt()).ceil().max(1.0) as usize;
    let h = 1.0 / steps as f64;
    let sqrt: Vec<f64> = (0..=dim).map(|n| (n as f64).sqrt()).collect();
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        for n in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            if n > 0 {
                acc += beta * sqrt[n] * x[n - 1];
            }
            if n + 1 < dim {
                acc -= beta.conj() * sqrt[n + 1] * x[n + 1];
            }
            out[n] = acc;
        }
    };
    let mut term = vec![Complex64::new(0.0, 0.0); dim];
    let mut next = vec![Complex64::new(0.0, 0.0); dim];
    for _ in 0..steps {
        term.copy_from_slice(&v);
        for j in 1..80 {
            apply(&term, &mut next);
            let scale = h / j as f64;
            let mut size = 0.0;
            for n in 0..dim {
                term[n] = next[n] * scale;
                v[n] += term[n];
                size += term[n].norm_sqr();
            }
            if size < 1e-36 {
                break;
            }
        }
    }
    v
}

/// M₂ = (1/π) ∫ Q² d²α by quadrature.
pub fn m2_cv_quadrature(psi: &FockState, grid: &PlaneGrid) -> Result<f64> {
    let q2: Vec<f64> = grid.husimi_values(psi).iter().map(|x| x * x).collect();
    grid.integrate_values(&q2)
}

/// M₂ = ½ Σ_K |B_K|², B_K = Σ_L √(K!/(2^K L!(K−L)!)) ψ_L ψ_{K−L}.
pub fn m2_cv_closed(psi: &FockState) -> f64 {
    let a = psi.amplitudes();
    let n = a.len();
    let ln2 = 2f64.ln();
    let terms: Vec<f64> = (0..2 * n - 1)
        .map(|k| {
            let lo = k.saturating_sub(n - 1);
            let hi = k.min(n - 1);
            let lk = log_factorial(k as u64) - k as f64 * ln2;
            let b: Complex64 = (lo..=hi)
                .map(|l| a[l] * a[k - l] * (0.5 * (lk - log_factorial(l as u64) - log_factorial((k - l) as u64))).exp())
                .sum();
            0.5 * b.norm_sqr()
        })
        .collect();
    crate::par::pairwise_sum(&terms)
}

/// Inverse participation ratio R = 1/M₂.
pub fn ipr_cv(psi: &FockState) -> f64 {
    1.0 / m2_cv_closed(psi)
}

/// Global maximum of a Husimi function and where it sits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CvMaximum {
    pub value: f64,
    pub argmax: Complex64,
}

/// M∞ = max_α Q(α), by multistart quasi-Newton on ln Q.
///
/// Starts are the ten largest local maxima of Q on the state's plane grid.
pub fn m_infinity_cv(psi: &FockState) -> Result<CvMaximum> {
    let grid = PlaneGrid::for_state(psi);
    let q = grid.husimi_values(psi);
    let starts: Vec<Complex64> = grid_peaks(&grid, &q, 10).into_iter().map(|i| grid.node(i).0).collect();
    let opts = BfgsOptions { max_step: 0.5, ..Default::default() };
    let found = map_slice(&starts, |&z0| {
        let m = bfgs(
            |x, g| {
                let alpha = Complex64::new(x[0], x[1]);
                let (h, dh) = cv_overlap(psi, alpha);
                let q = h.norm_sqr();
                if q <= 0.0 {
                    g[0] = 0.0;
                    g[1] = 0.0;
                    return f64::INFINITY;
                }
                let ratio = dh / h;
                g[0] = -(-2.0 * x[0] + 2.0 * ratio.re);
                g[1] = -(-2.0 * x[1] + 2.0 * ratio.im);
                -q.ln()
            },
            &[z0.re, z0.im],
            &opts,
        );
        let alpha = Complex64::new(m.x[0], m.x[1]);
        CvMaximum { value: husimi_cv(psi, alpha), argmax: alpha }
    });
    best_of(found.into_iter().map(|m| (m.value, m))).ok_or_else(|| Error::DegenerateState("no maximization start".into()))
}

/// Picks the largest value; ties keep the earliest start.
pub(crate) fn best_of<T>(items: impl IntoIterator<Item = (f64, T)>) -> Option<T> {
    let mut best: Option<(f64, T)> = None;
    for (v, t) in items {
        if !v.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, t));
        }
    }
    best.map(|(_, t)| t)
}

/// Indices of the `count` largest discrete local maxima on a polar grid.
fn grid_peaks(grid: &PlaneGrid, q: &[f64], count: usize) -> Vec<usize> {
    let (nr, np) = (grid.n_radial(), grid.n_phi());
    let at = |i: usize, j: usize| q[i * np + j];
    let mut peaks: Vec<usize> = Vec::new();
    for i in 0..nr {
        for j in 0..np {
            let v = at(i, j);
            let mut neighbours = vec![at(i, (j + 1) % np), at(i, (j + np - 1) % np)];
            if i + 1 < nr {
                neighbours.push(at(i + 1, j));
            }
            if i > 0 {
                neighbours.push(at(i - 1, j));
            } else {
                // across the origin
                neighbours.push(at(0, (j + np / 2) % np));
            }
            if neighbours.iter().all(|&w| v >= w) {
                peaks.push(i * np + j);
            }
        }
    }
    if peaks.is_empty() {
        peaks = (0..q.len()).collect();
    }
    peaks.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    peaks.truncate(count);
    peaks
}

/// State families with a known M∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CvFamily {
    Coherent,
    SqueezedVacuum { r: f64 },
    Fock { n: u32 },
    /// Photon-added coherent state a†ᵐ|β⟩.
    PhotonAdded { beta_abs: f64, m: u32 },
    /// Even cat with real amplitude β; the closed form holds for 0 ≤ β ≤ 1.
    EvenCat { beta: f64 },
}

/// Closed-form M∞.
///
/// For photon-added states Q ∝ |α|^{2m} e^{−|α−β|²} peaks along β at
/// x = (|β|/2)(1 + √(1 + 4m/|β|²)), giving
/// M∞ = x^{2m} e^{−(x−|β|)²} / (m! L_m(−|β|²)).
pub fn m_infinity_cv_closed(family: CvFamily) -> Result<f64> {
    match family {
        CvFamily::Coherent => Ok(1.0),
        CvFamily::SqueezedVacuum { r } => Ok(1.0 / r.cosh()),
        CvFamily::Fock { n } => {
            let n64 = n as f64;
            let ln_n = if n == 0 { 0.0 } else { n64 * n64.ln() };
            Ok((-n64 + ln_n - log_factorial(n as u64)).exp())
        }
        CvFamily::PhotonAdded { beta_abs, m } => {
            if beta_abs < 0.0 {
                return Err(Error::domain("|β| must be nonnegative"));
            }
            let b = beta_abs;
            let mf = m as f64;
            let x = 0.5 * (b + (b * b + 4.0 * mf).sqrt());
            let ln_x = if m == 0 { 0.0 } else { 2.0 * mf * x.ln() };
            let ln_norm = log_factorial(m as u64) + laguerre(m, -b * b).ln();
            Ok((ln_x - (x - b).powi(2) - ln_norm).exp())
        }
        CvFamily::EvenCat { beta } => {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::domain("even-cat closed form needs 0 ≤ β ≤ 1"));
            }
            Ok(1.0 / (beta * beta).cosh())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_cat, make_coherent_cv, make_fock, make_gaussian_fock, make_photon_added, CatPhase, GaussianPure};
    use crate::specfun::digamma;
    use approx::assert_abs_diff_eq;

    fn squeezed(r: f64) -> FockState {
        make_gaussian_fock(GaussianPure::new(Complex64::new(0.0, 0.0), r, 0.0).unwrap(), 1e-15).unwrap()
    }

    #[test]
    fn wehrl_examples() {
        let coh = make_coherent_cv(Complex64::new(1.0, -0.5), 1e-15).unwrap();
        assert_abs_diff_eq!(wehrl_cv(&coh, &PlaneGrid::for_state(&coh)).unwrap(), 1.0, epsilon = 1e-6);
        let sq = squeezed(1.0);
        assert_abs_diff_eq!(wehrl_cv(&sq, &PlaneGrid::for_state(&sq)).unwrap(), 1.0 + 1f64.cosh().ln(), epsilon = 1e-6);
        let f1 = make_fock(1);
        let want = 2.0 - digamma(2.0).unwrap();
        assert_abs_diff_eq!(wehrl_cv(&f1, &PlaneGrid::for_state(&f1)).unwrap(), want, epsilon = 1e-6);
        assert_abs_diff_eq!(want, 1.5772157, epsilon = 1e-7);
    }

    #[test]
    fn m2_routes_agree() {
        let states = [
            make_coherent_cv(Complex64::new(0.3, 0.2), 1e-15).unwrap(),
            squeezed(1.0),
            make_fock(1),
            make_cat(Complex64::new(1.2, 0.0), CatPhase::Odd, 1e-15).unwrap(),
            make_photon_added(Complex64::new(0.7, 0.4), 2, 1e-15).unwrap(),
        ];
        for psi in &states {
            let quad = m2_cv_quadrature(psi, &PlaneGrid::for_state(psi)).unwrap();
            assert_abs_diff_eq!(quad, m2_cv_closed(psi), epsilon = 1e-9);
        }
        assert_abs_diff_eq!(ipr_cv(&states[0]), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ipr_cv(&states[1]), 2.0 * 1f64.cosh(), epsilon = 1e-9);
        assert_abs_diff_eq!(ipr_cv(&states[2]), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn m_infinity_examples() {
        let sq = squeezed(1.0);
        assert_abs_diff_eq!(m_infinity_cv(&sq).unwrap().value, 0.6480543, epsilon = 1e-7);
        assert_abs_diff_eq!(m_infinity_cv(&make_fock(2)).unwrap().value, 2.0 * (-2f64).exp(), epsilon = 1e-10);
        let cat = make_cat(Complex64::new(0.5, 0.0), CatPhase::Even, 1e-15).unwrap();
        let closed = m_infinity_cv_closed(CvFamily::EvenCat { beta: 0.5 }).unwrap();
        assert_abs_diff_eq!(closed, 0.9695436, epsilon = 1e-7);
        assert_abs_diff_eq!(m_infinity_cv(&cat).unwrap().value, closed, epsilon = 1e-9);
        let coh = make_coherent_cv(Complex64::new(-2.0, 1.0), 1e-15).unwrap();
        let m = m_infinity_cv(&coh).unwrap();
        assert_abs_diff_eq!(m.value, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!((m.argmax - Complex64::new(-2.0, 1.0)).norm(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn photon_added_closed_form() {
        for (b, m) in [(0.5, 1u32), (2.0, 3), (1.0, 2)] {
            let psi = make_photon_added(Complex64::new(b, 0.0), m as usize, 1e-15).unwrap();
            let closed = m_infinity_cv_closed(CvFamily::PhotonAdded { beta_abs: b, m }).unwrap();
            assert_abs_diff_eq!(m_infinity_cv(&psi).unwrap().value, closed, epsilon = 1e-9);
        }
        let fock = m_infinity_cv_closed(CvFamily::Fock { n: 3 }).unwrap();
        let pa = m_infinity_cv_closed(CvFamily::PhotonAdded { beta_abs: 0.0, m: 3 }).unwrap();
        assert_abs_diff_eq!(fock, pa, epsilon = 1e-15);
    }
}
