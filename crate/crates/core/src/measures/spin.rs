//! Spin measures.

use num_complex::Complex64;
use serde::Serialize;

use super::cv::best_of;
use super::entropy_term;
use super::multipole::{multipoles_spin, partial_q_from_table, MultipoleTable};
use crate::error::{Error, Result};
use crate::husimi::{husimi_spin, SphereGrid, SpinQ};
use crate::optim::{bfgs, BfgsOptions};
use crate::par::{map_indexed, map_slice};
use crate::specfun::cg_stretched;
use crate::states::{SpinState, SphereVec};
use crate::stellar::{extract_constellation, horner, majorana_coefficients, sigma3, DEFAULT_MERGE_TOL};

/// S_W = −(2S+1)/(4π) ∫ Q ln Q dΩ.
///
/// For pure states Q vanishes at the Majorana stars m_i, and the log
/// singularities there are removed exactly: with σ_i(n) = (1 − n·m_i)/2,
/// Q/Π σ_i is smooth (constant, in fact) and is integrated on the grid, while
/// each (2S+1)/(4π) ∫ Q ln σ_i dΩ follows from the Legendre series
/// ln((1 − t)/2) = −1 − Σ_{l≥1} (2l+1)/(l(l+1)) P_l(t) and the partial
/// components Q^{(l)} as −1 − (2S+1) Σ_{l=1}^{2S} Q^{(l)}(m_i)/(l(l+1)).
/// Mixed states use plain quadrature.
pub fn wehrl_spin<S: SpinQ + ?Sized>(state: &S, grid: &SphereGrid) -> Result<f64> {
    if let Some(psi) = state.as_pure() {
        if let Ok(c) = extract_constellation(psi, DEFAULT_MERGE_TOL) {
            return wehrl_pure(psi, &c.points(), grid);
        }
    }
    wehrl_spin_quadrature(state, grid)
}

/// Plain quadrature of −(2S+1)/(4π) ∫ Q ln Q dΩ.
pub fn wehrl_spin_quadrature<S: SpinQ + ?Sized>(state: &S, grid: &SphereGrid) -> Result<f64> {
    grid.husimi_integral(state, |q| -entropy_term(q))
}

fn wehrl_pure(psi: &SpinState, zeros: &[SphereVec], grid: &SphereGrid) -> Result<f64> {
    let two_s = psi.two_s();
    let zs: Vec<[f64; 3]> = zeros.iter().map(|p| p.to_cartesian()).collect();
    let q = grid.husimi_values(psi);
    let h: Vec<f64> = map_indexed(q.len(), |i| {
        if q[i] <= 0.0 {
            return 0.0;
        }
        let v = grid.node(i).dir.to_cartesian();
        let ln_reg = q[i].ln() - zs.iter().map(|z| sigma3(v, *z).ln()).sum::<f64>();
        -q[i] * ln_reg
    });
    let smooth = grid.integrate_values(&h)? * (two_s as f64 + 1.0) / (4.0 * std::f64::consts::PI);
    let table = multipoles_spin(&psi.to_density());
    let d = two_s as f64 + 1.0;
    let mut potentials = 0.0;
    for z in zeros {
        let mut u = -1.0;
        for l in 1..=two_s {
            u -= d * partial_q_from_table(&table, two_s, l, *z)? / (l as f64 * (l as f64 + 1.0));
        }
        potentials += u;
    }
    Ok(smooth - potentials)
}

/// M₂ = (2S+1)/(4π) ∫ Q² dΩ by quadrature.
pub fn m2_spin_quadrature<S: SpinQ + ?Sized>(state: &S, grid: &SphereGrid) -> Result<f64> {
    grid.husimi_integral(state, |q| q * q)
}

/// M₂ = Σ_{Kq} (C_{SS,K0}^{SS})² |ρ_Kq|².
pub fn m2_spin_multipole(table: &MultipoleTable, two_s: u32) -> f64 {
    (0..=two_s).map(|k| cg_stretched(two_s, k).powi(2) * table.rank_weight(k)).sum()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpinMaximum {
    pub value: f64,
    pub argmax: SphereVec,
}

/// M∞ = max_n Q(n) for a pure state.
///
/// Starts: the ten largest discrete local maxima on the default sphere grid
/// and the antipodes of the Majorana stars. Each start is refined by
/// quasi-Newton on ln Q in a stereographic chart, ζ or 1/ζ, whichever keeps the
/// start inside the unit disc.
pub fn m_infinity_spin(psi: &SpinState) -> Result<SpinMaximum> {
    let opts = BfgsOptions { max_step: 0.5, ..Default::default() };
    best_of(refined_peaks(psi, &opts).into_iter().map(|m| (m.value, m))).ok_or_else(|| Error::DegenerateState("no maximization start".into()))
}

/// Local maxima of Q refined from every start used by [`m_infinity_spin`];
/// duplicates are not removed.
pub(crate) fn refined_peaks(psi: &SpinState, opts: &BfgsOptions) -> Vec<SpinMaximum> {
    let two_s = psi.two_s();
    let grid = SphereGrid::for_spin(two_s);
    let q = grid.husimi_values(psi);
    let mut starts: Vec<SphereVec> = sphere_peaks(&grid, &q, 10).into_iter().map(|i| grid.node(i).dir).collect();
    if let Ok(c) = extract_constellation(psi, DEFAULT_MERGE_TOL) {
        starts.extend(c.points().into_iter().map(|p| p.antipode()));
    }
    let a = majorana_coefficients(psi);
    let reversed: Vec<Complex64> = a.iter().rev().copied().collect();
    map_slice(&starts, |&n0| {
        let z0 = n0.zeta();
        let inverted = !(z0.norm() <= 1.0);
        let (coeffs, u0) = if inverted {
            (&reversed, if n0.theta >= std::f64::consts::PI { Complex64::new(0.0, 0.0) } else { 1.0 / z0 })
        } else {
            (&a, z0)
        };
        let s2 = two_s as f64;
        let m = bfgs(
            |x, g| {
                let u = Complex64::new(x[0], x[1]);
                let (p, dp) = horner(coeffs, u);
                let den = 1.0 + u.norm_sqr();
                let pn = p.norm_sqr();
                if pn <= 0.0 {
                    g[0] = 0.0;
                    g[1] = 0.0;
                    return f64::INFINITY;
                }
                let ratio = dp / p;
                g[0] = -(2.0 * ratio.re - 2.0 * s2 * x[0] / den);
                g[1] = -(-2.0 * ratio.im - 2.0 * s2 * x[1] / den);
                -(pn.ln() - s2 * den.ln())
            },
            &[u0.re, u0.im],
            opts,
        );
        let u = Complex64::new(m.x[0], m.x[1]);
        let dir = if inverted {
            if u.norm() == 0.0 {
                SphereVec::south()
            } else {
                SphereVec::from_zeta(1.0 / u)
            }
        } else {
            SphereVec::from_zeta(u)
        };
        SpinMaximum { value: husimi_spin(psi, dir), argmax: dir }
    })
}

/// Indices of the `count` largest discrete local maxima on a sphere grid.
fn sphere_peaks(grid: &SphereGrid, q: &[f64], count: usize) -> Vec<usize> {
    let nt = grid.order();
    let np = grid.len() / nt;
    let at = |i: usize, j: usize| q[i * np + j];
    let mut peaks = Vec::new();
    for i in 0..nt {
        for j in 0..np {
            let v = at(i, j);
            let mut nb = vec![at(i, (j + 1) % np), at(i, (j + np - 1) % np)];
            if i + 1 < nt {
                nb.push(at(i + 1, j));
            }
            if i > 0 {
                nb.push(at(i - 1, j));
            }
            if nb.iter().all(|&w| v >= w) {
                peaks.push(i * np + j);
            }
        }
    }
    peaks.sort_by(|&x, &y| q[y].total_cmp(&q[x]).then(x.cmp(&y)));
    peaks.truncate(count);
    peaks
}
