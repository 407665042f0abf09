//! Phase-space quantumness measures for continuous-variable (single-mode
//! oscillator) and spin-S states.
//!
//! Everything is organised around the Husimi Q function:
//!
//! - [`specfun`]: log-factorials, digamma, Laguerre, spherical harmonics,
//!   Clebsch–Gordan coefficients and Gauss–Legendre nodes.
//! - [`states`]: constructors for coherent, squeezed, Fock, cat, photon-added,
//!   Dicke and spin-coherent states, plus spin rotations.
//! - [`stellar`]: Bargmann/stellar functions and Majorana constellations.
//! - [`husimi`]: Q evaluation and the plane/sphere quadrature grids.
//! - [`measures`]: Wehrl entropy, second moment, Husimi maximum, multipoles,
//!   cumulative multipolar distribution.
//! - [`metrology`]: Fisher information and averaged Cramér–Rao bounds.
//! - [`extremal`]: Kings, Queens, Wehrl maximisers, M∞ minimisers, and the
//!   spherical design / Thomson / Tammes solvers.
//! - [`io`]: JSON schemas shared with the command-line front end.
//!
//! Data-parallel loops go through [`par`]; with the `parallel` feature off
//! they run sequentially and produce bit-identical results.

pub mod error;
pub mod extremal;
pub mod husimi;
pub mod io;
pub mod measures;
pub mod metrology;
pub mod optim;
pub mod par;
pub mod specfun;
pub mod states;
pub mod stellar;

pub use error::{Error, Result};
pub use num_complex::Complex64;
