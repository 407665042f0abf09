//! Spin-S states in the |S, m⟩ basis, ordered m = −S..S.
//!
//! Bloch coherent states follow the antistereographic convention with
//! ζ = tan(θ/2) e^{iφ}:
//!
//! ⟨S, m|n⟩ = c_m (−1)^{S+m} sin^{S+m}(θ/2) cos^{S−m}(θ/2) e^{−i(S+m)φ},
//! with c_m = √binom(2S, S+m). The sign (−1)^{S+m} makes |n⟩ an eigenvector of
//! S·n with eigenvalue −S, so ⟨S⟩ = −S n and the state at θ = 0 is |S, −S⟩.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::log_binomial;

/// A point on the unit sphere in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereVec {
    pub theta: f64,
    pub phi: f64,
}

impl SphereVec {
    /// Wraps φ into [0, 2π) and clamps θ into [0, π].
    pub fn new(theta: f64, phi: f64) -> Self {
        let theta = theta.clamp(0.0, PI);
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        SphereVec { theta, phi }
    }

    pub fn north() -> Self {
        SphereVec { theta: 0.0, phi: 0.0 }
    }

    pub fn south() -> Self {
        SphereVec { theta: PI, phi: 0.0 }
    }

    /// Direction of a non-zero Cartesian vector.
    pub fn from_cartesian(v: [f64; 3]) -> Self {
        let rho = v[0].hypot(v[1]);
        SphereVec::new(rho.atan2(v[2]), v[1].atan2(v[0]))
    }

    pub fn to_cartesian(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn antipode(self) -> Self {
        SphereVec::new(PI - self.theta, self.phi + PI)
    }

    pub fn dot(self, other: SphereVec) -> f64 {
        let a = self.to_cartesian();
        let b = other.to_cartesian();
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    /// Stereographic coordinate ζ = tan(θ/2) e^{iφ}; infinite at the south pole.
    pub fn zeta(self) -> Complex64 {
        Complex64::from_polar((0.5 * self.theta).tan(), self.phi)
    }

    /// Inverse stereographic projection θ = 2 arctan|ζ|, φ = arg ζ.
    pub fn from_zeta(z: Complex64) -> Self {
        if !z.re.is_finite() || !z.im.is_finite() {
            return SphereVec::south();
        }
        SphereVec::new(2.0 * z.norm().atan(), z.arg())
    }
}

/// Rotates `v` by `angle` about `axis` (right-hand rule).
pub fn rotate_vector(v: [f64; 3], axis: SphereVec, angle: f64) -> [f64; 3] {
    let k = axis.to_cartesian();
    let (s, c) = angle.sin_cos();
    let kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    let cross = [k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]];
    [0, 1, 2].map(|i| v[i] * c + cross[i] * s + k[i] * kv * (1.0 - c))
}

/// A normalised pure spin state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    two_s: u32,
    amplitudes: Vec<Complex64>,
}

impl SpinState {
    /// Normalises `amplitudes` (ordered m = −S..S).
    pub fn new(two_s: u32, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != two_s as usize + 1 {
            return Err(Error::InvalidState(format!(
                "2S = {two_s} needs {} amplitudes, got {}",
                two_s + 1,
                amplitudes.len()
            )));
        }
        if let Some(i) = amplitudes.iter().position(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite amplitude at index {i}")));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(SpinState { two_s, amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    /// Amplitudes Ψ_m for m = −S..S; index k corresponds to m = k − S.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &SpinState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &SpinState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn to_density(&self) -> SpinDensity {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        SpinDensity { two_s: self.two_s, matrix: &v * v.adjoint() }
    }

    /// ⟨S_x⟩, ⟨S_y⟩, ⟨S_z⟩.
    pub fn expect_spin(&self) -> [f64; 3] {
        let s = self.two_s as f64 / 2.0;
        let psi = &self.amplitudes;
        let mut plus = Complex64::new(0.0, 0.0);
        let mut z = 0.0;
        for k in 0..psi.len() {
            let m = k as f64 - s;
            z += m * psi[k].norm_sqr();
            if k + 1 < psi.len() {
                let coef = (s * (s + 1.0) - m * (m + 1.0)).sqrt();
                plus += psi[k + 1].conj() * psi[k] * coef;
            }
        }
        [plus.re, plus.im, z]
    }
}

/// A spin density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinDensity {
    two_s: u32,
    matrix: DMatrix<Complex64>,
}

impl SpinDensity {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(two_s: u32, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = two_s as usize + 1;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidState(format!("density matrix must be {d}×{d}")));
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let sym = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = sym.clone().symmetric_eigenvalues();
        if let Some(min) = eig.iter().cloned().reduce(f64::min) {
            if min < -1e-10 {
                return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(SpinDensity { two_s, matrix: sym })
    }

    pub fn maximally_mixed(two_s: u32) -> Self {
        let d = two_s as usize + 1;
        SpinDensity { two_s, matrix: DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0) }
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().cloned().collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

impl From<&SpinState> for SpinDensity {
    fn from(psi: &SpinState) -> Self {
        psi.to_density()
    }
}

/// Dicke state |S, m⟩ from 2S and 2m.
pub fn make_dicke(two_s: u32, two_m: i32) -> Result<SpinState> {
    if two_m.unsigned_abs() > two_s || (two_s as i32 + two_m) % 2 != 0 {
        return Err(Error::domain(format!("m = {two_m}/2 is not a projection of S = {two_s}/2")));
    }
    let k = ((two_s as i32 + two_m) / 2) as usize;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); two_s as usize + 1];
    amplitudes[k] = Complex64::new(1.0, 0.0);
    Ok(SpinState { two_s, amplitudes })
}

/// Bloch coherent state |n⟩ (module convention: S·n|n⟩ = −S|n⟩).
pub fn make_spin_coherent(two_s: u32, n: SphereVec) -> SpinState {
    let (s, c) = (0.5 * n.theta).sin_cos();
    let amplitudes = (0..=two_s)
        .map(|k| {
            let ck = (0.5 * log_binomial(two_s as u64, k as u64)).exp();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let modulus = sign * ck * s.powi(k as i32) * c.powi((two_s - k) as i32);
            Complex64::from_polar(1.0, -(k as f64) * n.phi) * modulus
        })
        .collect();
    SpinState { two_s, amplitudes }
}

/// Haar-random pure state from independent complex Gaussian amplitudes.
pub fn random_spin_state<R: Rng + ?Sized>(two_s: u32, rng: &mut R) -> SpinState {
    let amplitudes: Vec<Complex64> = (0..=two_s)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    SpinState::new(two_s, amplitudes).expect("Gaussian sample is almost surely non-zero")
}

/// Dense S_x, S_y, S_z in the m = −S..S basis.
pub fn spin_matrices(two_s: u32) -> [DMatrix<Complex64>; 3] {
    let d = two_s as usize + 1;
    let s = two_s as f64 / 2.0;
    let mut plus = DMatrix::<Complex64>::zeros(d, d);
    let mut z = DMatrix::<Complex64>::zeros(d, d);
    for k in 0..d {
        let m = k as f64 - s;
        z[(k, k)] = Complex64::new(m, 0.0);
        if k + 1 < d {
            plus[(k + 1, k)] = Complex64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let minus = plus.adjoint();
    let x = (&plus + &minus) * Complex64::new(0.5, 0.0);
    let y = (&plus - &minus) * Complex64::new(0.0, -0.5);
    [x, y, z]
}

/// exp(iχ S·a) applied to ψ.
///
/// The Majorana constellation of the result is the constellation of ψ rotated
/// by −χ about `axis`.
pub fn rotate_spin(psi: &SpinState, axis: SphereVec, chi: f64) -> SpinState {
    let [sx, sy, sz] = spin_matrices(psi.two_s);
    let a = axis.to_cartesian();
    let gen = sx * Complex64::new(a[0], 0.0) + sy * Complex64::new(a[1], 0.0) + sz * Complex64::new(a[2], 0.0);
    let eig = gen.symmetric_eigen();
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, chi * l));
    let v = &eig.eigenvectors;
    let psi_v = nalgebra::DVector::from_column_slice(&psi.amplitudes);
    let coords = v.adjoint() * psi_v;
    let rotated = v * coords.component_mul(&phases.map(|p| p));
    SpinState { two_s: psi.two_s, amplitudes: rotated.iter().cloned().collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn apply(m: &DMatrix<Complex64>, psi: &SpinState) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        (m * v).iter().cloned().collect()
    }

    #[test]
    fn sphere_vec_roundtrips() {
        let v = SphereVec::new(1.1, -0.4);
        assert!(v.phi >= 0.0 && v.phi < 2.0 * PI);
        let w = SphereVec::from_cartesian(v.to_cartesian());
        assert_abs_diff_eq!(w.theta, v.theta, epsilon = 1e-14);
        assert_abs_diff_eq!(w.phi, v.phi, epsilon = 1e-14);
        let z = SphereVec::from_zeta(v.zeta());
        assert_abs_diff_eq!(z.theta, v.theta, epsilon = 1e-14);
        assert_abs_diff_eq!(v.dot(v.antipode()), -1.0, epsilon = 1e-14);
        assert_eq!(SphereVec::from_cartesian([0.0, 0.0, -2.0]).theta, PI);
    }

    #[test]
    fn dicke_examples() {
        let up = make_dicke(2, 2).unwrap();
        assert_eq!(up.amplitudes()[2], Complex64::new(1.0, 0.0));
        assert_eq!(make_dicke(2, 0).unwrap().amplitudes()[1], Complex64::new(1.0, 0.0));
        assert_eq!(make_dicke(4, 0).unwrap().amplitudes()[2], Complex64::new(1.0, 0.0));
        assert!(make_dicke(2, 1).is_err());
        assert!(make_dicke(2, 4).is_err());
    }

    #[test]
    fn coherent_poles_and_overlaps() {
        let north = make_spin_coherent(4, SphereVec::north());
        assert_abs_diff_eq!(north.amplitudes()[0].norm(), 1.0, epsilon = 1e-15);
        let south = make_spin_coherent(4, SphereVec::new(PI, 0.3));
        assert_abs_diff_eq!(south.amplitudes()[4].norm(), 1.0, epsilon = 1e-15);
        let want = Complex64::from_polar(1.0, -4.0 * 0.3);
        assert!((south.amplitudes()[4] - want).norm() < 1e-14);
        let n1 = SphereVec::new(0.7, 2.0);
        for two_s in 1..8 {
            let a = make_spin_coherent(two_s, n1);
            let b = make_spin_coherent(two_s, n1.antipode());
            assert!(a.fidelity(&b) < 1e-28);
            let n2 = SphereVec::new(2.1, 0.3);
            let c = make_spin_coherent(two_s, n2);
            let want = (0.5 * (1.0 + n1.dot(n2))).powi(two_s as i32);
            assert_abs_diff_eq!(a.fidelity(&c), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn coherent_is_lowest_eigenvector_along_n() {
        for two_s in 1..=10 {
            let s = two_s as f64 / 2.0;
            let [sx, sy, sz] = spin_matrices(two_s);
            for &(t, p) in &[(0.0, 0.0), (0.4, 1.0), (PI / 2.0, 4.0), (2.9, 5.5), (PI, 0.0)] {
                let n = SphereVec::new(t, p);
                let v = n.to_cartesian();
                let sn = &sx * Complex64::new(v[0], 0.0) + &sy * Complex64::new(v[1], 0.0) + &sz * Complex64::new(v[2], 0.0);
                let psi = make_spin_coherent(two_s, n);
                let out = apply(&sn, &psi);
                for (o, a) in out.iter().zip(psi.amplitudes()) {
                    assert!((o + a * s).norm() < 1e-12, "2S={two_s} θ={t}");
                }
            }
        }
    }

    #[test]
    fn spin_matrix_commutators() {
        let [x, y, z] = spin_matrices(5);
        let i = Complex64::new(0.0, 1.0);
        let c = &x * &y - &y * &x - &z * i;
        assert!(c.iter().all(|v| v.norm() < 1e-13));
        let casimir = &x * &x + &y * &y + &z * &z;
        let s = 2.5;
        for k in 0..6 {
            assert_abs_diff_eq!(casimir[(k, k)].re, s * (s + 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_spin_state(5, &mut rng);
        let axis = SphereVec::new(1.0, 2.0);
        let same = rotate_spin(&psi, axis, 0.0);
        assert!(same.amplitudes().iter().zip(psi.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-14));
        let full = rotate_spin(&psi, axis, 2.0 * PI);
        for (a, b) in full.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a + b).norm() < 1e-12);
        }
        let r = rotate_spin(&psi, axis, 0.77);
        let n: f64 = r.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotated_coherent_state_follows_the_vector_rotation() {
        let axis = SphereVec::new(0.9, 0.2);
        let n0 = SphereVec::new(0.3, 1.4);
        let chi = 1.1;
        let rotated = rotate_spin(&make_spin_coherent(6, n0), axis, chi);
        let target = SphereVec::from_cartesian(rotate_vector(n0.to_cartesian(), axis, -chi));
        assert_abs_diff_eq!(rotated.fidelity(&make_spin_coherent(6, target)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn density_validation() {
        let psi = make_dicke(2, 0).unwrap();
        let rho = SpinDensity::new(2, psi.to_density().matrix().clone()).unwrap();
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-15);
        let mm = SpinDensity::maximally_mixed(3);
        assert_abs_diff_eq!(mm.purity(), 0.25, epsilon = 1e-15);
        let bad = DMatrix::from_element(3, 3, Complex64::new(1.0, 0.0));
        assert!(SpinDensity::new(2, bad).is_err());
        let mut neg = DMatrix::<Complex64>::zeros(2, 2);
        neg[(0, 0)] = Complex64::new(1.5, 0.0);
        neg[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(SpinDensity::new(1, neg).is_err());
    }

    #[test]
    fn expect_spin_matches_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = random_spin_state(6, &mut rng);
        let mats = spin_matrices(6);
        let got = psi.expect_spin();
        for (i, m) in mats.iter().enumerate() {
            let v = apply(m, &psi);
            let e: Complex64 = psi.amplitudes().iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            assert_abs_diff_eq!(got[i], e.re, epsilon = 1e-13);
        }
    }
}
