//! States whose low-order multipoles all vanish.

use num_complex::Complex64;
use serde::Serialize;

use super::sphere::{design_check, PointConfig};
use super::{minimize_over_states, random_amplitudes, restart_rng, run_restarts, SearchResult};
use crate::error::{Error, Result};
use crate::measures::{cumulative_a, tensor_basis};
use crate::optim::BfgsOptions;
use crate::states::SpinState;
use crate::stellar::{extract_constellation, DEFAULT_MERGE_TOL};

/// Objective threshold below which A_M counts as zero.
pub const KING_TOL: f64 = 1e-10;

/// Sparse form of T_Kq: entries t[col] at (col + q, col).
struct Tensor {
    q: i32,
    t: Vec<f64>,
}

fn tensors(two_s: u32, order: u32) -> Vec<Tensor> {
    let basis = tensor_basis(two_s);
    let d = two_s as usize + 1;
    let mut out = Vec::new();
    for k in 1..=order {
        for q in -(k as i32)..=(k as i32) {
            let m = basis.get(k, q);
            let t = (0..d)
                .map(|col| {
                    let row = col as i32 + q;
                    if row < 0 || row >= d as i32 {
                        0.0
                    } else {
                        m[(row as usize, col)].re
                    }
                })
                .collect();
            out.push(Tensor { q, t });
        }
    }
    out
}

/// A_M(ψ) = Σ_{K≤M} |⟨ψ|T_Kq|ψ⟩|² and its Wirtinger gradient
/// Σ (h* T ψ + h T† ψ).
fn a_m_objective(ts: &[Tensor], psi: &[Complex64]) -> (f64, Vec<Complex64>) {
    let d = psi.len() as i32;
    let mut f = 0.0;
    let mut g = vec![Complex64::new(0.0, 0.0); psi.len()];
    for t in ts {
        let mut h = Complex64::new(0.0, 0.0);
        for col in 0..d {
            let row = col + t.q;
            if row >= 0 && row < d {
                h += psi[row as usize].conj() * t.t[col as usize] * psi[col as usize];
            }
        }
        f += h.norm_sqr();
        for col in 0..d {
            let row = col + t.q;
            if row >= 0 && row < d {
                let c = t.t[col as usize];
                g[row as usize] += h.conj() * c * psi[col as usize];
                g[col as usize] += h * c * psi[row as usize];
            }
        }
    }
    (f, g)
}

/// Minimizes A_M over pure states of spin 2S from random starts.
///
/// Success means A_M < 1e-10; the reported order is the largest M' ≤ M with
/// A_{M'} below that threshold. A failure is not a proof of nonexistence.
pub fn find_king(two_s: u32, order: u32, restarts: usize, seed: u64) -> Result<SearchResult> {
    if order < 1 || order > two_s {
        return Err(Error::domain(format!("order M = {order} outside 1..=2S = {two_s}")));
    }
    if restarts == 0 {
        return Err(Error::domain("at least one restart is needed"));
    }
    let ts = tensors(two_s, order);
    let d = two_s as usize + 1;
    let opts = BfgsOptions { grad_tol: 1e-14, max_iter: 4000, max_step: 0.5 };
    let objective = |psi: &[Complex64]| a_m_objective(&ts, psi);
    let (best, used) = run_restarts(
        restarts,
        |i| {
            let mut rng = restart_rng(seed, i as u64);
            let init = random_amplitudes(d, &mut rng);
            minimize_over_states(&init, &objective, &opts)
        },
        |r| r.1 < KING_TOL,
        |r| r.1,
    )
    .expect("at least one restart");
    let state = SpinState::new(two_s, best.0)?;
    let rho = state.to_density();
    let objective = cumulative_a(&rho, order)?;
    let order_achieved = (1..=order).take_while(|&m| cumulative_a(&rho, m).is_ok_and(|a| a < KING_TOL)).last().unwrap_or(0);
    let constellation = extract_constellation(&state, DEFAULT_MERGE_TOL).ok();
    Ok(SearchResult {
        state,
        objective,
        order_achieved,
        restarts_used: used as u32,
        converged: objective < KING_TOL,
        constant_objective: false,
        constellation,
    })
}

/// Largest King order reached and the design strength of its constellation.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub two_s: u32,
    /// Largest M with a certified King (0 if none).
    pub m_max: u32,
    /// Largest t for which the King constellation is a spherical t-design.
    pub design_t: u32,
    pub agree: bool,
    pub king: Option<SearchResult>,
}

/// Runs find_king at M = 1, 2, … until it fails, then measures the design
/// strength of the last King's constellation. Reports, asserts nothing.
pub fn king_design_probe(two_s: u32, restarts: usize, seed: u64) -> Result<ProbeReport> {
    let mut m_max = 0;
    let mut king = None;
    for m in 1..=two_s {
        let r = find_king(two_s, m, restarts, seed)?;
        if !r.converged {
            break;
        }
        m_max = m;
        king = Some(r);
    }
    let mut design_t = 0;
    if let Some(c) = king.as_ref().and_then(|k| k.constellation.as_ref()) {
        let cfg = PointConfig { points: c.points().iter().map(|p| p.to_cartesian()).collect() };
        while design_t < 2 * two_s && design_check(&cfg, design_t + 1).pass {
            design_t += 1;
        }
    }
    Ok(ProbeReport { two_s, m_max, design_t, agree: m_max == design_t, king })
}
