//! Searches for extremal spin states and point configurations on the sphere.
//!
//! Every stochastic search takes an explicit seed. Restart `i` draws from a
//! generator seeded by `(seed, i)`, restarts run in fixed-size batches, and the
//! winner is the best objective with ties going to the lowest restart index,
//! so results do not depend on the thread count.

mod kings;
mod queens;
mod sphere;
mod statesearch;

pub use kings::{find_king, king_design_probe, ProbeReport, KING_TOL};
pub use queens::{default_grid_size, find_queen, project_simplex, queen_weights_frank_wolfe, queen_weights_projected, search_queen, QueenFit, QueenProblem};
pub use sphere::{design_check, fibonacci_sphere, min_angle_cos, tammes, thomson, thomson_energy, DesignReport, PointConfig, SphereConfig};
pub use statesearch::{maximize_wehrl, minimize_m_infinity};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::optim::{bfgs, BfgsOptions};
use crate::par::map_indexed;
use crate::states::SpinState;
use crate::stellar::Constellation;

/// Restarts evaluated together before checking for success.
pub const RESTART_BATCH: usize = 8;

/// Outcome of a state search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    #[serde(serialize_with = "crate::io::serialize_spin_state", deserialize_with = "crate::io::deserialize_spin_state")]
    pub state: SpinState,
    pub objective: f64,
    /// For King searches, the largest M' with A_{M'} below threshold.
    pub order_achieved: u32,
    pub restarts_used: u32,
    pub converged: bool,
    /// Set when the objective takes the same value on every sampled state.
    pub constant_objective: bool,
    pub constellation: Option<Constellation>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for restart `index` of a search seeded with `seed`.
pub fn restart_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ index))
}

pub(crate) fn random_amplitudes(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..dim).map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))).collect()
}

/// Runs `restarts` independent attempts in batches, stopping after the first
/// batch containing a success. Returns the winner (lowest value, then lowest
/// index) and the number of restarts run.
pub(crate) fn run_restarts<T, F>(restarts: usize, run: F, success: impl Fn(&T) -> bool, value: impl Fn(&T) -> f64) -> Option<(T, usize)>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let mut best: Option<(f64, T)> = None;
    let mut used = 0;
    while used < restarts {
        let batch = RESTART_BATCH.min(restarts - used);
        let results = map_indexed(batch, |i| run(used + i));
        used += batch;
        let mut hit = false;
        for r in results {
            hit |= success(&r);
            let v = value(&r);
            if best.as_ref().is_none_or(|(b, _)| v < *b || (b.is_nan() && !v.is_nan())) {
                best = Some((v, r));
            }
        }
        if hit {
            break;
        }
    }
    best.map(|(_, t)| (t, used))
}

/// A smooth objective of a normalized state: value and ∂F/∂ψ*.
pub(crate) type StateObjective<'a> = dyn Fn(&[Complex64]) -> (f64, Vec<Complex64>) + Sync + 'a;

/// Minimizes F(v/|v|) over unnormalized amplitudes v by BFGS.
///
/// The global phase is gauge-fixed by keeping the initially largest amplitude
/// real, and a penalty (|v|² − 1)² removes the scale direction.
pub(crate) fn minimize_over_states(init: &[Complex64], objective: &StateObjective, opts: &BfgsOptions) -> (Vec<Complex64>, f64) {
    let d = init.len();
    let norm0 = init.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let (pivot, _) = init.iter().enumerate().fold((0, -1.0), |acc, (i, a)| if a.norm() > acc.1 { (i, a.norm()) } else { acc });
    let phase = Complex64::from_polar(1.0, -init[pivot].arg());
    let start: Vec<Complex64> = init.iter().map(|a| a * phase / norm0).collect();
    let unpack = |x: &[f64]| -> Vec<Complex64> {
        let mut v = Vec::with_capacity(d);
        let mut k = 0;
        for i in 0..d {
            if i == pivot {
                v.push(Complex64::new(x[k], 0.0));
                k += 1;
            } else {
                v.push(Complex64::new(x[k], x[k + 1]));
                k += 2;
            }
        }
        v
    };
    let mut x0 = Vec::with_capacity(2 * d - 1);
    for (i, a) in start.iter().enumerate() {
        x0.push(a.re);
        if i != pivot {
            x0.push(a.im);
        }
    }
    let m = bfgs(
        |x, grad| {
            let v = unpack(x);
            let n2: f64 = v.iter().map(|a| a.norm_sqr()).sum();
            let n = n2.sqrt();
            let psi: Vec<Complex64> = v.iter().map(|a| a / n).collect();
            let (f, g) = objective(&psi);
            let overlap: f64 = psi.iter().zip(&g).map(|(p, gi)| (p.conj() * gi).re).sum();
            let mut k = 0;
            for i in 0..d {
                let dv = (g[i] - psi[i] * overlap) / n + v[i] * (2.0 * (n2 - 1.0));
                grad[k] = 2.0 * dv.re;
                k += 1;
                if i != pivot {
                    grad[k] = 2.0 * dv.im;
                    k += 1;
                }
            }
            f + (n2 - 1.0).powi(2)
        },
        &x0,
        opts,
    );
    let v = unpack(&m.x);
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let psi: Vec<Complex64> = v.iter().map(|a| a / n).collect();
    let value = objective(&psi).0;
    (psi, value)
}
