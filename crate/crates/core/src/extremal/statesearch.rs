//! Pure spin states maximizing the Wehrl entropy or minimizing M∞.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{minimize_over_states, random_amplitudes, restart_rng, run_restarts, SearchResult};
use crate::error::{Error, Result};
use crate::husimi::{coherent_row, SphereGrid};
use crate::measures::{m_infinity_spin, refined_peaks, wehrl_spin};
use crate::optim::BfgsOptions;
use crate::states::{SpinState, SphereVec};
use crate::stellar::{extract_constellation, DEFAULT_MERGE_TOL};

/// Softmax temperatures for the M∞ continuation.
pub const MINF_TEMPERATURES: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// States probed before the search to detect a constant objective.
const CONSTANT_PROBES: usize = 4;
const CONSTANT_TOL: f64 = 1e-10;

fn check_args(restarts: usize) -> Result<()> {
    if restarts == 0 {
        return Err(Error::domain("at least one restart is needed"));
    }
    Ok(())
}

/// Evaluates `f` on the first restart states; returns the first state and its
/// value if all values agree.
fn constant_probe(two_s: u32, seed: u64, f: impl Fn(&SpinState) -> Result<f64>) -> Result<Option<(SpinState, f64)>> {
    let d = two_s as usize + 1;
    let mut first = None;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..CONSTANT_PROBES {
        let psi = SpinState::new(two_s, random_amplitudes(d, &mut restart_rng(seed, i as u64)))?;
        let v = f(&psi)?;
        lo = lo.min(v);
        hi = hi.max(v);
        first.get_or_insert((psi, v));
    }
    Ok(if hi - lo < CONSTANT_TOL { first } else { None })
}

fn finish(state: SpinState, objective: f64, restarts_used: usize, converged: bool, constant: bool) -> SearchResult {
    let constellation = extract_constellation(&state, DEFAULT_MERGE_TOL).ok();
    SearchResult {
        state,
        objective,
        order_achieved: 0,
        restarts_used: restarts_used as u32,
        converged,
        constant_objective: constant,
        constellation,
    }
}

/// ⟨n_i|ψ⟩ for every row.
fn amplitudes_at(rows: &[Vec<Complex64>], psi: &[Complex64]) -> Vec<Complex64> {
    rows.iter().map(|r| r.iter().zip(psi).map(|(a, b)| a * b).sum()).collect()
}

/// Maximizes the Wehrl entropy over pure states of spin 2S.
///
/// The optimizer works on a fine quadrature of −∫ Q ln Q; the reported
/// objective is the entropy of the winner recomputed by [`wehrl_spin`].
pub fn maximize_wehrl(two_s: u32, restarts: usize, seed: u64) -> Result<SearchResult> {
    check_args(restarts)?;
    let eval_grid = SphereGrid::for_spin(two_s);
    if let Some((state, v)) = constant_probe(two_s, seed, |p| wehrl_spin(p, &eval_grid))? {
        return Ok(finish(state, v, CONSTANT_PROBES, true, true));
    }
    let grid = SphereGrid::new(2 * eval_grid.order());
    let nodes = grid.nodes();
    let rows: Vec<Vec<Complex64>> = nodes.iter().map(|n| coherent_row(two_s, n.dir)).collect();
    let c = (two_s as f64 + 1.0) / (4.0 * PI);
    let d = two_s as usize + 1;
    let objective = |psi: &[Complex64]| -> (f64, Vec<Complex64>) {
        let amps = amplitudes_at(&rows, psi);
        let mut f = 0.0;
        let mut g = vec![Complex64::new(0.0, 0.0); d];
        for ((r, a), node) in rows.iter().zip(&amps).zip(&nodes) {
            let q = a.norm_sqr();
            if q < 1e-300 {
                continue;
            }
            let lq = q.ln();
            f += node.weight * q * lq;
            let s = *a * (c * node.weight * (lq + 1.0));
            for k in 0..d {
                g[k] += r[k].conj() * s;
            }
        }
        (c * f, g)
    };
    let opts = BfgsOptions { grad_tol: 1e-11, max_iter: 2000, max_step: 0.5 };
    let (best, used) = run_restarts(
        restarts,
        |i| minimize_over_states(&random_amplitudes(d, &mut restart_rng(seed, i as u64)), &objective, &opts),
        |_| false,
        |r| r.1,
    )
    .expect("at least one restart");
    let state = SpinState::new(two_s, best.0)?;
    let entropy = wehrl_spin(&state, &eval_grid)?;
    Ok(finish(state, entropy, used, true, false))
}

/// Directions of the distinct local maxima of Q.
fn peak_directions(psi: &SpinState, max_iter: usize) -> Vec<SphereVec> {
    let opts = BfgsOptions { max_iter, grad_tol: 1e-12, max_step: 0.5 };
    let mut out: Vec<SphereVec> = Vec::new();
    for p in refined_peaks(psi, &opts) {
        if out.iter().all(|q| q.dot(p.argmax) < 1.0 - 1e-10) {
            out.push(p.argmax);
        }
    }
    out
}

/// τ ln Σ exp(Q_i/τ) over the rows, with its gradient.
fn softmax_objective(rows: &[Vec<Complex64>], psi: &[Complex64], tau: f64) -> (f64, Vec<Complex64>) {
    let amps = amplitudes_at(rows, psi);
    let q: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let top = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = q.iter().map(|v| ((v - top) / tau).exp()).collect();
    let z: f64 = e.iter().sum();
    let mut g = vec![Complex64::new(0.0, 0.0); psi.len()];
    for ((r, a), w) in rows.iter().zip(&amps).zip(&e) {
        if *w < 1e-300 {
            continue;
        }
        let s = *a * (w / z);
        for (gk, rk) in g.iter_mut().zip(r) {
            *gk += rk.conj() * s;
        }
    }
    (top + tau * z.ln(), g)
}

/// Softmax over the current local maxima of Q. By the envelope theorem each
/// maximum contributes the gradient of Q at its (fixed) location.
fn peak_softmax(two_s: u32, psi: &[Complex64], tau: f64, peak_iter: usize) -> (f64, Vec<Complex64>) {
    let Ok(state) = SpinState::new(two_s, psi.to_vec()) else {
        return (f64::INFINITY, vec![Complex64::new(0.0, 0.0); psi.len()]);
    };
    let rows: Vec<Vec<Complex64>> = peak_directions(&state, peak_iter).into_iter().map(|n| coherent_row(two_s, n)).collect();
    softmax_objective(&rows, psi, tau)
}

fn minimize_m_infinity_from(two_s: u32, init: Vec<Complex64>) -> Result<(Vec<Complex64>, f64)> {
    let opts = BfgsOptions { grad_tol: 1e-10, max_iter: 200, max_step: 0.3 };
    let mut psi = init;
    for &tau in MINF_TEMPERATURES.iter() {
        // peak locations only need first-order accuracy while τ is large
        let peak_iter = if tau >= 1e-3 { 60 } else { 400 };
        let objective = |p: &[Complex64]| peak_softmax(two_s, p, tau, peak_iter);
        psi = minimize_over_states(&psi, &objective, &opts).0;
    }
    let state = SpinState::new(two_s, psi)?;
    let value = m_infinity_spin(&state)?.value;
    Ok((state.amplitudes().to_vec(), value))
}

/// Minimizes M∞ = max_n Q(n) over pure states of spin 2S.
///
/// The maximum is smoothed to τ ln Σ_j exp(Q(m_j)/τ) over the local maxima
/// m_j of Q, which are re-located at every evaluation, with τ lowered stage
/// by stage. The
/// reported objective is the exact M∞ of the winner.
pub fn minimize_m_infinity(two_s: u32, restarts: usize, seed: u64) -> Result<SearchResult> {
    check_args(restarts)?;
    if let Some((state, v)) = constant_probe(two_s, seed, |p| Ok(m_infinity_spin(p)?.value))? {
        return Ok(finish(state, v, CONSTANT_PROBES, true, true));
    }
    let d = two_s as usize + 1;
    let (best, used) = run_restarts(
        restarts,
        |i| minimize_m_infinity_from(two_s, random_amplitudes(d, &mut restart_rng(seed, i as u64))),
        |_| false,
        |r| r.as_ref().map_or(f64::INFINITY, |r| r.1),
    )
    .expect("at least one restart");
    let (psi, value) = best?;
    Ok(finish(SpinState::new(two_s, psi)?, value, used, true, false))
}
