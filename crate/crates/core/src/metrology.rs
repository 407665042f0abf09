//! Fisher information for displacement and rotation sensing, its average
//! over directions, and the direction-averaged Cramér–Rao bound.
//!
//! Probes are pure, so the quantum Fisher information is four times the
//! variance of the generator.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::error::Result;
use crate::husimi::SphereGrid;
use crate::states::{spin_matrices, FockState, SpinState, SphereVec};

/// Smallest covariance eigenvalue treated as nonzero.
pub const NULL_VARIANCE: f64 = 1e-12;

/// Quadrature covariance of x = (a + a†)/√2, p = (a − a†)/(i√2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovMatrix2 {
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl CovMatrix2 {
    pub fn of(psi: &FockState) -> Self {
        let n = psi.mean_photon_number();
        let a = psi.expect_a();
        let a2 = psi.expect_a2();
        CovMatrix2 {
            var_x: a2.re + n + 0.5 - 2.0 * a.re * a.re,
            var_p: -a2.re + n + 0.5 - 2.0 * a.im * a.im,
            cov_xp: a2.im - 2.0 * a.re * a.im,
        }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.var_x, self.cov_xp, self.cov_xp, self.var_p)
    }

    pub fn det(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.var_x + self.var_p);
        let half = (0.25 * (self.var_x - self.var_p).powi(2) + self.cov_xp * self.cov_xp).sqrt();
        [mean - half, mean + half]
    }

    /// λ_max/λ_min − 1; zero for isotropic covariance.
    pub fn isotropy_defect(&self) -> f64 {
        let [lo, hi] = self.eigenvalues();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo - 1.0
        }
    }
}

/// F(θ) = 4 uᵀ C u with u = (cos θ, −sin θ).
pub fn qfi_displacement(psi: &FockState, theta: f64) -> f64 {
    let c = CovMatrix2::of(psi);
    let (s, co) = theta.sin_cos();
    4.0 * (c.var_x * co * co - 2.0 * c.cov_xp * co * s + c.var_p * s * s)
}

/// F̄ = 2 + 4(⟨a†a⟩ − |⟨a⟩|²).
pub fn avg_qfi_cv(psi: &FockState) -> f64 {
    2.0 + 4.0 * (psi.mean_photon_number() - psi.expect_a().norm_sqr())
}

/// θ-average of [`qfi_displacement`] with an `n`-point uniform rule (exact for
/// n ≥ 3, since F is a trigonometric polynomial of degree two).
pub fn avg_qfi_cv_sampled(psi: &FockState, n: usize) -> f64 {
    (0..n).map(|j| qfi_displacement(psi, PI * j as f64 / n as f64)).sum::<f64>() / n as f64
}

/// (1/π)∫ dθ 1/F(θ) = 1/(4√det C), or +∞ when a quadrature variance vanishes.
pub fn avg_crb_cv(psi: &FockState) -> f64 {
    let c = CovMatrix2::of(psi);
    if c.eigenvalues()[0] < NULL_VARIANCE {
        return f64::INFINITY;
    }
    1.0 / (4.0 * c.det().sqrt())
}

/// Symmetrized spin covariance C_ij = ½⟨{S_i, S_j}⟩ − ⟨S_i⟩⟨S_j⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovMatrix3(pub Matrix3<f64>);

impl CovMatrix3 {
    pub fn of(psi: &SpinState) -> Self {
        let s = spin_matrices(psi.two_s());
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let sv: Vec<_> = s.iter().map(|m| m * &v).collect();
        let mean: Vec<f64> = sv.iter().map(|w| v.dotc(w).re).collect();
        let mut c = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                // ⟨S_i S_j⟩ = (S_i ψ)†(S_j ψ) since S_i is Hermitian
                c[(i, j)] = sv[i].dotc(&sv[j]).re - mean[i] * mean[j];
            }
        }
        CovMatrix3(0.5 * (c + c.transpose()))
    }

    /// Δ² = Var S_x + Var S_y + Var S_z.
    pub fn total_variance(&self) -> f64 {
        self.0.trace()
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut e: Vec<f64> = SymmetricEigen::new(self.0).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        [e[0], e[1], e[2]]
    }

    /// λ_max/λ_min − 1; zero for isotropic covariance.
    pub fn isotropy_defect(&self) -> f64 {
        let e = self.eigenvalues();
        if e[0] <= 0.0 {
            f64::INFINITY
        } else {
            e[2] / e[0] - 1.0
        }
    }

    pub fn quadratic_form(&self, n: [f64; 3]) -> f64 {
        let v = nalgebra::Vector3::from(n);
        (v.transpose() * self.0 * v)[(0, 0)]
    }
}

impl Serialize for CovMatrix3 {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<[f64; 3]> = (0..3).map(|i| [self.0[(i, 0)], self.0[(i, 1)], self.0[(i, 2)]]).collect();
        rows.serialize(ser)
    }
}

/// F(n) = 4 Var(S·n).
pub fn qfi_rotation(psi: &SpinState, axis: SphereVec) -> f64 {
    4.0 * CovMatrix3::of(psi).quadratic_form(axis.to_cartesian())
}

/// F̄ = (4/3) Δ².
pub fn avg_qfi_spin(psi: &SpinState) -> f64 {
    4.0 / 3.0 * CovMatrix3::of(psi).total_variance()
}

/// Average of 1/F(n) over axes, (1/4π) ∫ dΩ 1/(4 nᵀCn).
///
/// The integral diverges whenever C has a null direction, which is detected
/// from the spectrum and reported as +∞.
pub fn avg_crb_spin(psi: &SpinState, grid: &SphereGrid) -> Result<f64> {
    let c = CovMatrix3::of(psi);
    if c.eigenvalues()[0] < NULL_VARIANCE {
        return Ok(f64::INFINITY);
    }
    Ok(grid.integrate(|n| 1.0 / (4.0 * c.quadratic_form(n.to_cartesian())))? / (4.0 * PI))
}
