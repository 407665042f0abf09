//! Husimi-based quantumness measures for oscillator and spin states.

mod cv;
mod multipole;
mod spin;

pub use cv::{
    ipr_cv, log_potential, m2_cv_closed, m2_cv_quadrature, m_infinity_cv, m_infinity_cv_closed, wehrl_cv, wehrl_cv_quadrature, CvFamily, CvMaximum,
};
pub use multipole::{
    a_m_coherent_max, cumulative_a, cv_multipole_indicator, multipoles_spin, multipoles_spin_quadrature, partial_q,
    partial_q_from_table,
    tensor_basis, Flavor, MultipoleEntry, MultipoleTable, TensorBasis,
};
pub(crate) use spin::refined_peaks;
pub use spin::{m2_spin_multipole, m2_spin_quadrature, m_infinity_spin, wehrl_spin, wehrl_spin_quadrature, SpinMaximum};

/// x ln x with 0 ln 0 = 0; arguments below 1e-300 are clamped before the log.
pub(crate) fn entropy_term(q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else {
        q * q.max(1e-300).ln()
    }
}
