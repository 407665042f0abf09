//! Husimi Q functions and the quadrature grids behind every integral measure.
//!
//! Measure conventions: oscillator integrals carry (1/π) d²α, spin integrals
//! carry (2S+1)/(4π) dΩ, so that both Husimi functions integrate to one.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{map_indexed, pairwise_sum};
use crate::specfun::{gauss_legendre, log_binomial, log_factorial};
use crate::states::{FockState, SpinDensity, SpinState, SphereVec};

/// Q(α) = |⟨α|ψ⟩|².
pub fn husimi_cv(psi: &FockState, alpha: Complex64) -> f64 {
    cv_overlap(psi, alpha).0.norm_sqr()
}

/// ⟨α|ψ⟩ and its derivative with respect to α* at fixed Gaussian prefactor,
/// d/dz [e^{−|α|²/2} Σ ψ_n zⁿ/√n!] with z = α*.
///
/// Each term is formed in log space so large |α| neither overflows nor
/// underflows prematurely.
pub fn cv_overlap(psi: &FockState, alpha: Complex64) -> (Complex64, Complex64) {
    let r = alpha.norm();
    let phi = -alpha.arg();
    let gauss = -0.5 * r * r;
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    if r == 0.0 {
        let amps = psi.amplitudes();
        return (amps[0], amps.get(1).copied().unwrap_or_default());
    }
    let ln_r = r.ln();
    for (n, a) in psi.amplitudes().iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let lf = log_factorial(n as u64);
        let t = Complex64::from_polar((gauss + n as f64 * ln_r - 0.5 * lf).exp(), n as f64 * phi);
        value += a * t;
        if n > 0 {
            // √n z^{n−1}/√(n−1)! = n zⁿ/√n! / z
            let lf1 = log_factorial(n as u64 - 1);
            let d = Complex64::from_polar(
                ((n as f64).ln() * 0.5 + gauss + (n - 1) as f64 * ln_r - 0.5 * lf1).exp(),
                (n - 1) as f64 * phi,
            );
            deriv += a * d;
        }
    }
    (value, deriv)
}

/// Conjugated coherent-state amplitudes ⟨n|S, m⟩*, i.e. the row vector v with
/// ⟨n|ψ⟩ = v·ψ.
pub fn coherent_row(two_s: u32, n: SphereVec) -> Vec<Complex64> {
    let (s, c) = (0.5 * n.theta).sin_cos();
    (0..=two_s)
        .map(|k| {
            let ck = (0.5 * log_binomial(two_s as u64, k as u64)).exp();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let modulus = sign * ck * s.powi(k as i32) * c.powi((two_s - k) as i32);
            Complex64::from_polar(modulus, k as f64 * n.phi)
        })
        .collect()
}

/// Anything with a spin Husimi function.
pub trait SpinQ: Sync {
    fn two_s(&self) -> u32;
    /// Q(n) given the coherent row of [`coherent_row`].
    fn q_from_row(&self, row: &[Complex64]) -> f64;

    /// The state vector, when the state is pure.
    fn as_pure(&self) -> Option<&SpinState> {
        None
    }

    fn q(&self, n: SphereVec) -> f64 {
        self.q_from_row(&coherent_row(self.two_s(), n))
    }
}

impl SpinQ for SpinState {
    fn two_s(&self) -> u32 {
        SpinState::two_s(self)
    }

    fn q_from_row(&self, row: &[Complex64]) -> f64 {
        row.iter().zip(self.amplitudes()).map(|(v, a)| v * a).sum::<Complex64>().norm_sqr()
    }

    fn as_pure(&self) -> Option<&SpinState> {
        Some(self)
    }
}

impl SpinQ for SpinDensity {
    fn two_s(&self) -> u32 {
        SpinDensity::two_s(self)
    }

    fn q_from_row(&self, row: &[Complex64]) -> f64 {
        let m: &DMatrix<Complex64> = self.matrix();
        let d = row.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            let mut inner = Complex64::new(0.0, 0.0);
            for j in 0..d {
                inner += m[(i, j)] * row[j].conj();
            }
            acc += row[i] * inner;
        }
        acc.re.max(0.0)
    }
}

/// Q_ρ(n) = ⟨n|ρ|n⟩ for a pure state or density matrix.
pub fn husimi_spin<S: SpinQ + ?Sized>(state: &S, n: SphereVec) -> f64 {
    state.q(n)
}

/// Gauss–Legendre in cos θ (order L) times a uniform φ rule with 2L points.
///
/// Exact for spherical polynomials of degree ≤ 2L − 1.
#[derive(Debug, Clone, Serialize)]
pub struct SphereGrid {
    order: usize,
    cos_theta: Vec<f64>,
    cos_weights: Vec<f64>,
    n_phi: usize,
}

/// One sphere node with its solid-angle weight (weights sum to 4π).
#[derive(Debug, Clone, Copy)]
pub struct SphereNode {
    pub dir: SphereVec,
    pub weight: f64,
}

impl SphereGrid {
    pub fn new(order: usize) -> Self {
        let order = order.max(1);
        let (x, w) = gauss_legendre(order);
        SphereGrid { order, cos_theta: x, cos_weights: w, n_phi: 2 * order }
    }

    /// Default order 2·(2S) + 16.
    pub fn for_spin(two_s: u32) -> Self {
        SphereGrid::new(2 * two_s as usize + 16)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same layout at twice the order.
    pub fn doubled(&self) -> Self {
        SphereGrid::new(2 * self.order)
    }

    /// Node `i`, ring-major.
    pub fn node(&self, i: usize) -> SphereNode {
        let (ring, j) = (i / self.n_phi, i % self.n_phi);
        let theta = self.cos_theta[ring].clamp(-1.0, 1.0).acos();
        let phi = 2.0 * PI * j as f64 / self.n_phi as f64;
        SphereNode { dir: SphereVec { theta, phi }, weight: self.cos_weights[ring] * 2.0 * PI / self.n_phi as f64 }
    }

    pub fn nodes(&self) -> Vec<SphereNode> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Plain ∫ f dΩ.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(SphereVec) -> f64 + Sync + Send,
    {
        let vals = map_indexed(self.len(), |i| {
            let node = self.node(i);
            (node.weight * f(node.dir), f(node.dir).is_finite())
        });
        weighted_total(&vals)
    }

    /// Σ wᵢ vᵢ for values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> Result<f64> {
        assert_eq!(values.len(), self.len(), "one value per node");
        let vals = map_indexed(self.len(), |i| (self.node(i).weight * values[i], values[i].is_finite()));
        weighted_total(&vals)
    }

    /// Q at every node.
    pub fn husimi_values<S: SpinQ + ?Sized>(&self, state: &S) -> Vec<f64> {
        let two_s = state.two_s();
        map_indexed(self.len(), |i| state.q_from_row(&coherent_row(two_s, self.node(i).dir)))
    }

    /// (2S+1)/(4π) ∫ g(Q(n)) dΩ.
    pub fn husimi_integral<S, G>(&self, state: &S, g: G) -> Result<f64>
    where
        S: SpinQ + ?Sized,
        G: Fn(f64) -> f64 + Sync + Send,
    {
        let two_s = state.two_s();
        let vals = map_indexed(self.len(), |i| {
            let node = self.node(i);
            let v = g(state.q_from_row(&coherent_row(two_s, node.dir)));
            (node.weight * v, v.is_finite())
        });
        Ok(weighted_total(&vals)? * (two_s as f64 + 1.0) / (4.0 * PI))
    }
}

fn weighted_total(vals: &[(f64, bool)]) -> Result<f64> {
    if let Some(i) = vals.iter().position(|v| !v.1) {
        return Err(Error::NonFinite(i));
    }
    let xs: Vec<f64> = vals.iter().map(|v| v.0).collect();
    Ok(pairwise_sum(&xs))
}

/// Which measure a sphere integral carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SphereMeasure {
    /// ∫ f dΩ.
    Plain,
    /// (2S+1)/(4π) ∫ f dΩ.
    Husimi { two_s: u32 },
}

/// ∫ f over the sphere with the requested measure.
pub fn integrate_sphere<F>(f: F, grid: &SphereGrid, measure: SphereMeasure) -> Result<f64>
where
    F: Fn(SphereVec) -> f64 + Sync + Send,
{
    let plain = grid.integrate(f)?;
    Ok(match measure {
        SphereMeasure::Plain => plain,
        SphereMeasure::Husimi { two_s } => plain * (two_s as f64 + 1.0) / (4.0 * PI),
    })
}

/// Polar grid on the disc |α| ≤ R: Gauss–Legendre in r on [0, R], uniform φ.
#[derive(Debug, Clone, Serialize)]
pub struct PlaneGrid {
    radius: f64,
    radii: Vec<f64>,
    radial_weights: Vec<f64>,
    n_phi: usize,
}

impl PlaneGrid {
    pub fn new(radius: f64, n_radial: usize, n_phi: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || n_radial == 0 || n_phi == 0 {
            return Err(Error::domain("plane grid needs R > 0 and positive node counts"));
        }
        let (x, w) = gauss_legendre(n_radial);
        let radii = x.iter().map(|x| 0.5 * radius * (x + 1.0)).collect();
        let radial_weights = w.iter().map(|w| 0.5 * radius * w).collect();
        Ok(PlaneGrid { radius, radii, radial_weights, n_phi })
    }

    /// Grid sized from the state's energy and covariance:
    /// R = max(√(n̄ + 10√(n̄+1) + 25), |⟨a⟩| + √(74 λ_max)), where λ_max is
    /// the largest variance of Q along any direction of the plane.
    pub fn for_state(psi: &FockState) -> Self {
        let nbar = psi.mean_photon_number();
        let a = psi.expect_a();
        let a2 = psi.expect_a2();
        // covariance of (Re α, Im α) under Q: ½⟨{Δa, Δa†}⟩-based moments
        let n_c = nbar - a.norm_sqr();
        let m_c = a2 - a * a;
        let lambda_max = 0.5 * (n_c + 1.0 + m_c.norm());
        let r_energy = (nbar + 10.0 * (nbar + 1.0).sqrt() + 25.0).sqrt();
        let r_cov = a.norm() + (74.0 * lambda_max).sqrt();
        let radius = r_energy.max(r_cov);
        let n_radial = 32 + (6.0 * radius).ceil() as usize;
        let n_phi = 64usize.max(2 * (psi.cutoff() + 1) + 32);
        PlaneGrid::new(radius, n_radial, n_phi).expect("positive radius")
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n_radial(&self) -> usize {
        self.radii.len()
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Twice the radial and angular node counts on the same disc.
    pub fn doubled(&self) -> Self {
        PlaneGrid::new(self.radius, 2 * self.radii.len(), 2 * self.n_phi).expect("valid grid")
    }

    /// Node `i` (ring-major) and its weight for the (1/π) d²α measure.
    pub fn node(&self, i: usize) -> (Complex64, f64) {
        let (ring, j) = (i / self.n_phi, i % self.n_phi);
        let r = self.radii[ring];
        let phi = 2.0 * PI * j as f64 / self.n_phi as f64;
        (Complex64::from_polar(r, phi), 2.0 * self.radial_weights[ring] * r / self.n_phi as f64)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i).1).collect()
    }

    /// (1/π) ∫ f d²α over the disc.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(Complex64) -> f64 + Sync + Send,
    {
        let vals = map_indexed(self.len(), |i| {
            let (z, w) = self.node(i);
            let v = f(z);
            (w * v, v.is_finite())
        });
        weighted_total(&vals)
    }

    /// Σ wᵢ vᵢ for values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> Result<f64> {
        assert_eq!(values.len(), self.len(), "one value per node");
        let vals: Vec<(f64, bool)> = (0..self.len()).map(|i| (self.node(i).1 * values[i], values[i].is_finite())).collect();
        weighted_total(&vals)
    }

    /// ⟨α|ψ⟩ at every node, ring by ring with one FFT per ring.
    pub fn overlap_values(&self, psi: &FockState) -> Vec<Complex64> {
        let n_phi = self.n_phi;
        let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n_phi);
        let lf: Vec<f64> = (0..psi.amplitudes().len()).map(|n| log_factorial(n as u64)).collect();
        let rings = map_indexed(self.radii.len(), |ring| {
            let r = self.radii[ring];
            let ln_r = r.ln();
            let mut buf = vec![Complex64::new(0.0, 0.0); n_phi];
            for (n, a) in psi.amplitudes().iter().enumerate() {
                if a.norm() == 0.0 {
                    continue;
                }
                // ψ_n e^{−r²/2} rⁿ/√n! folded onto the FFT bins
                let mag = (-0.5 * r * r + n as f64 * ln_r - 0.5 * lf[n]).exp();
                buf[n % n_phi] += a * mag;
            }
            fft.process(&mut buf);
            buf
        });
        rings.into_iter().flatten().collect()
    }

    /// Q at every node.
    pub fn husimi_values(&self, psi: &FockState) -> Vec<f64> {
        self.overlap_values(psi).iter().map(|z| z.norm_sqr()).collect()
    }
}

/// (1/π) ∫ f d²α on `grid`.
pub fn integrate_plane<F>(f: F, grid: &PlaneGrid) -> Result<f64>
where
    F: Fn(Complex64) -> f64 + Sync + Send,
{
    grid.integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{spherical_harmonic, HalfInt};
    use crate::states::{make_coherent_cv, make_dicke, make_fock, make_spin_coherent, random_spin_state};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn husimi_cv_examples() {
        let beta = Complex64::new(0.7, -1.1);
        let coh = make_coherent_cv(beta, 1e-15).unwrap();
        assert_abs_diff_eq!(husimi_cv(&coh, beta), 1.0, epsilon = 1e-12);
        let vac = make_fock(0);
        assert_abs_diff_eq!(husimi_cv(&vac, Complex64::new(1.0, 0.0)), (-1f64).exp(), epsilon = 1e-15);
        let one = make_fock(1);
        assert_abs_diff_eq!(husimi_cv(&one, Complex64::from_polar(1.0, 0.4)), (-1f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn husimi_spin_examples() {
        let zero = make_dicke(2, 0).unwrap();
        assert_abs_diff_eq!(husimi_spin(&zero, SphereVec::new(PI / 2.0, 0.3)), 0.5, epsilon = 1e-15);
        let n0 = SphereVec::new(1.3, 4.0);
        assert_abs_diff_eq!(husimi_spin(&make_spin_coherent(5, n0), n0), 1.0, epsilon = 1e-14);
        let up = make_dicke(2, 2).unwrap();
        assert_abs_diff_eq!(husimi_spin(&up, SphereVec::new(PI / 2.0, 0.0)), 0.25, epsilon = 1e-15);
        let rho = zero.to_density();
        assert_abs_diff_eq!(husimi_spin(&rho, SphereVec::new(1.0, 0.5)), husimi_spin(&zero, SphereVec::new(1.0, 0.5)), epsilon = 1e-15);
    }

    #[test]
    fn plane_integration_examples() {
        let vac = make_fock(0);
        let grid = PlaneGrid::for_state(&vac);
        let q = grid.husimi_values(&vac);
        assert_abs_diff_eq!(grid.integrate_values(&q).unwrap(), 1.0, epsilon = 1e-10);
        let q2: Vec<f64> = q.iter().map(|x| x * x).collect();
        assert_abs_diff_eq!(grid.integrate_values(&q2).unwrap(), 0.5, epsilon = 1e-10);
        let f5 = make_fock(5);
        let grid = PlaneGrid::for_state(&f5);
        assert_abs_diff_eq!(grid.integrate(|a| husimi_cv(&f5, a)).unwrap(), 1.0, epsilon = 1e-10);
        assert!(matches!(grid.integrate(|_| f64::NAN), Err(Error::NonFinite(_))));
    }

    #[test]
    fn fft_values_match_direct() {
        let psi = make_coherent_cv(Complex64::new(1.5, 0.5), 1e-14).unwrap();
        let grid = PlaneGrid::new(4.0, 5, 37).unwrap();
        let fast = grid.husimi_values(&psi);
        for i in (0..grid.len()).step_by(7) {
            let (z, _) = grid.node(i);
            assert_abs_diff_eq!(fast[i], husimi_cv(&psi, z), epsilon = 1e-14);
        }
    }

    #[test]
    fn sphere_integration_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_spin_state(7, &mut rng);
        let grid = SphereGrid::for_spin(7);
        assert_abs_diff_eq!(grid.husimi_integral(&psi, |q| q).unwrap(), 1.0, epsilon = 1e-12);
        let y21 = |n: SphereVec| spherical_harmonic(HalfInt::int(2), 1, n.theta, n.phi).unwrap().norm_sqr();
        assert_abs_diff_eq!(integrate_sphere(y21, &grid, SphereMeasure::Plain).unwrap(), 1.0, epsilon = 1e-12);
        let coh = make_spin_coherent(2, SphereVec::new(0.4, 0.1));
        let grid = SphereGrid::for_spin(2);
        assert_abs_diff_eq!(grid.husimi_integral(&coh, |q| q * q).unwrap(), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn spherical_harmonics_orthonormal_under_quadrature() {
        let grid = SphereGrid::new(21);
        let nodes = grid.nodes();
        let table: Vec<Vec<Complex64>> = nodes
            .iter()
            .map(|nd| {
                let mut row = Vec::new();
                let p = crate::specfun::normalized_legendre_table(20, nd.dir.theta);
                for l in 0..=20usize {
                    for q in -(l as i32)..=(l as i32) {
                        row.push(crate::specfun::ylm_from_table(&p, l, q, nd.dir.phi));
                    }
                }
                row
            })
            .collect();
        let count = table[0].len();
        let mut worst: f64 = 0.0;
        for a in 0..count {
            for b in a..count {
                let s: Complex64 = nodes.iter().zip(&table).map(|(nd, row)| row[a] * row[b].conj() * nd.weight).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - want).norm());
            }
        }
        assert!(worst < 1e-10, "worst defect {worst:e}");
    }

    #[test]
    fn resolution_of_unity() {
        for two_s in [1u32, 4, 10] {
            let grid = SphereGrid::for_spin(two_s);
            let d = two_s as usize + 1;
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            for nd in grid.nodes() {
                let v = coherent_row(two_s, nd.dir);
                for i in 0..d {
                    for j in 0..d {
                        // |n⟩⟨n| has entries ⟨i|n⟩⟨n|j⟩ = v_i* v_j
                        acc[(i, j)] += v[i].conj() * v[j] * nd.weight;
                    }
                }
            }
            let scale = (two_s as f64 + 1.0) / (4.0 * PI);
            for i in 0..d {
                for j in 0..d {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((acc[(i, j)] * scale - want).norm() < 1e-10);
                }
            }
        }
    }
}
