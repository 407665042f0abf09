//! State families for both systems.

pub mod cv;
pub mod spin;

pub use cv::{
    make_cat, make_coherent_cv, make_fock, make_gaussian_fock, make_photon_added, CatPhase, FockState,
    GaussianPure, DEFAULT_CUTOFF_TOL,
};
pub use spin::{
    make_dicke, make_spin_coherent, random_spin_state, rotate_spin, rotate_vector, spin_matrices,
    SpinDensity, SpinState, SphereVec,
};
