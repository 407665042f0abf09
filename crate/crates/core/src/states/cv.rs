//! Single-mode oscillator states in a truncated Fock basis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{assoc_laguerre, log_factorial};

/// Default tail-mass tolerance used when choosing Fock cutoffs.
pub const DEFAULT_CUTOFF_TOL: f64 = 1e-14;

/// Largest Fock cutoff any constructor will produce.
pub const MAX_CUTOFF: usize = 8192;

/// A pure oscillator state ψ_0..ψ_N, normalised on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockState {
    amplitudes: Vec<Complex64>,
}

impl FockState {
    /// Normalises `amplitudes`; trailing exact zeros are kept.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        if let Some(i) = amplitudes.iter().position(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite amplitude at index {i}")));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(FockState { amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Highest occupied Fock index of the truncation.
    pub fn cutoff(&self) -> usize {
        self.amplitudes.len() - 1
    }

    /// Copy with the amplitude vector zero-padded to `cutoff`.
    pub fn padded(&self, cutoff: usize) -> FockState {
        let mut amplitudes = self.amplitudes.clone();
        if amplitudes.len() < cutoff + 1 {
            amplitudes.resize(cutoff + 1, Complex64::new(0.0, 0.0));
        }
        FockState { amplitudes }
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes.iter().enumerate().map(|(n, a)| n as f64 * a.norm_sqr()).sum()
    }

    /// ⟨a⟩.
    pub fn expect_a(&self) -> Complex64 {
        let psi = &self.amplitudes;
        (1..psi.len()).map(|n| psi[n - 1].conj() * psi[n] * (n as f64).sqrt()).sum()
    }

    /// ⟨a²⟩.
    pub fn expect_a2(&self) -> Complex64 {
        let psi = &self.amplitudes;
        (2..psi.len())
            .map(|n| psi[n - 2].conj() * psi[n] * ((n * (n - 1)) as f64).sqrt())
            .sum()
    }

    /// ⟨φ|ψ⟩ after padding both to a common cutoff.
    pub fn overlap(&self, other: &FockState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Parameters (β, r, θ) of the displaced squeezed state |β, ξ = r e^{iθ}⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPure {
    pub beta: Complex64,
    pub r: f64,
    pub theta_sq: f64,
}

impl GaussianPure {
    pub fn new(beta: Complex64, r: f64, theta_sq: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::domain(format!("squeeze modulus must be finite and ≥ 0, got {r}")));
        }
        Ok(GaussianPure { beta, r, theta_sq })
    }

    /// Coefficients (A, B, C) of the stellar function
    /// (1 − |A|²)^{1/4} exp(−A α²/2 + B α + C).
    pub fn stellar_coefficients(&self) -> (Complex64, Complex64, Complex64) {
        let a = Complex64::from_polar(self.r.tanh(), -self.theta_sq);
        let b = self.beta * (1.0 - a.norm_sqr()).sqrt();
        let c = 0.5 * (a.conj() * self.beta * self.beta - self.beta.norm_sqr());
        (a, b, c)
    }
}

/// Which superposition |β⟩ + c|−β⟩ to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CatPhase {
    Even,
    Odd,
    /// Yurke–Stoler family, c = cos θ.
    Angle(f64),
}

impl CatPhase {
    fn weight(self) -> f64 {
        match self {
            CatPhase::Even => 1.0,
            CatPhase::Odd => -1.0,
            CatPhase::Angle(t) => t.cos(),
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-3 {
        Ok(())
    } else {
        Err(Error::domain(format!("cutoff tolerance must lie in (0, 1e-3], got {tol}")))
    }
}

/// Generates terms until the estimated remainder is negligible, then keeps the
/// shortest prefix whose tail mass is below `tol`.
///
/// `min_n` is the index beyond which consecutive |ψ_n|² ratios are bounded by
/// `q < 1`; the remainder after the last generated term is bounded
/// geometrically from the larger of the final two terms.
fn truncate_series(mut term: impl FnMut(usize, &[Complex64]) -> Complex64, min_n: usize, q: f64, tol: f64) -> Result<FockState> {
    let hard_limit = 4 * MAX_CUTOFF;
    let mut terms: Vec<Complex64> = Vec::new();
    let mut total = 0.0;
    let mut remainder = f64::INFINITY;
    for n in 0..=hard_limit {
        let t = term(n, &terms);
        total += t.norm_sqr();
        terms.push(t);
        if n >= min_n && n >= 1 {
            let last = t.norm_sqr().max(terms[n - 1].norm_sqr());
            let est = 2.0 * last * q / (1.0 - q);
            if est < 1e-6 * tol * total {
                remainder = est;
                break;
            }
        }
    }
    if !remainder.is_finite() {
        return Err(Error::Truncation(format!("tail mass not below {tol:e} within {hard_limit} terms")));
    }
    let total = total + remainder;
    let mut tail = remainder;
    let mut cut = terms.len() - 1;
    for n in (0..terms.len()).rev() {
        // tail currently holds the mass strictly beyond index n
        if tail / total < tol {
            cut = n;
        } else {
            break;
        }
        tail += terms[n].norm_sqr();
    }
    if cut > MAX_CUTOFF {
        return Err(Error::Truncation(format!("cutoff {cut} exceeds the maximum {MAX_CUTOFF} at tolerance {tol:e}")));
    }
    terms.truncate(cut + 1);
    FockState::new(terms)
}

fn coherent_term(beta: Complex64, n: usize) -> Complex64 {
    let r2 = beta.norm_sqr();
    if r2 == 0.0 {
        return if n == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    let log_mod = -0.5 * r2 + n as f64 * beta.norm().ln() - 0.5 * log_factorial(n as u64);
    Complex64::from_polar(log_mod.exp(), n as f64 * beta.arg())
}

// index beyond which the Poisson ratio |β|²/(n+1) stays below 1/2
fn poisson_knee(mean: f64) -> usize {
    (2.0 * mean).ceil() as usize + 2
}

/// Coherent state |α⟩ with ψ_n = e^{−|α|²/2} αⁿ/√n!.
pub fn make_coherent_cv(alpha: Complex64, cutoff_tol: f64) -> Result<FockState> {
    check_tol(cutoff_tol)?;
    truncate_series(|n, _| coherent_term(alpha, n), poisson_knee(alpha.norm_sqr()), 0.5, cutoff_tol)
}

/// Number state |n⟩.
pub fn make_fock(n: usize) -> FockState {
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n + 1];
    amplitudes[n] = Complex64::new(1.0, 0.0);
    FockState { amplitudes }
}

/// Cat state (|β⟩ + c|−β⟩)/√N with N = 1 + c² + 2c e^{−2|β|²}.
pub fn make_cat(beta: Complex64, phase: CatPhase, cutoff_tol: f64) -> Result<FockState> {
    check_tol(cutoff_tol)?;
    let c = phase.weight();
    // expm1 keeps the odd-cat normaliser accurate as β → 0
    let norm = (1.0 + c) * (1.0 + c) + 2.0 * c * (-2.0 * beta.norm_sqr()).exp_m1();
    if !(norm > 1e-300) {
        return Err(Error::DegenerateState(format!("superposition |β⟩ + ({c})|−β⟩ vanishes at β = {beta}")));
    }
    let scale = 1.0 / norm.sqrt();
    truncate_series(
        |n, _| {
            let parity = if n % 2 == 0 { 1.0 + c } else { 1.0 - c };
            coherent_term(beta, n) * (parity * scale)
        },
        poisson_knee(beta.norm_sqr()),
        0.5,
        cutoff_tol,
    )
}

/// Photon-added coherent state a†ᵐ|β⟩ normalised by N = m! L_m(−|β|²).
pub fn make_photon_added(beta: Complex64, m: usize, cutoff_tol: f64) -> Result<FockState> {
    check_tol(cutoff_tol)?;
    let r2 = beta.norm_sqr();
    let log_norm = log_factorial(m as u64) + assoc_laguerre(m as u32, 0, -r2).ln();
    let knee = m + poisson_knee(r2) + (2.0 * (m as f64 * r2).sqrt()).ceil() as usize;
    truncate_series(
        |k, _| {
            if k < m {
                return Complex64::new(0.0, 0.0);
            }
            let n = k - m;
            if r2 == 0.0 {
                return if n == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            }
            let log_mod = -0.5 * r2 + n as f64 * beta.norm().ln() - log_factorial(n as u64)
                + 0.5 * log_factorial(k as u64)
                - 0.5 * log_norm;
            Complex64::from_polar(log_mod.exp(), n as f64 * beta.arg())
        },
        knee,
        0.75,
        cutoff_tol,
    )
}

/// Exact squared norm of the printed Gaussian stellar function, which is
/// normalised only on a sub-family of parameters.
fn gaussian_norm_sqr(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    let det = 1.0 - a.norm_sqr();
    let (ar, ai) = (a.re, a.im);
    let (b1, b2) = (b.re, -b.im);
    let quad = ((1.0 - ar) * b1 * b1 + 2.0 * ai * b1 * b2 + (1.0 + ar) * b2 * b2) / det;
    (2.0 * c.re + quad).exp()
}

/// Fock amplitudes of the Gaussian state with the stellar function
/// (1 − |A|²)^{1/4} exp(−Aα²/2 + Bα + C), built from its Taylor recurrence
/// h_{n+1} = (B h_n − A √n h_{n−1}) / √(n+1).
pub fn make_gaussian_fock(g: GaussianPure, cutoff_tol: f64) -> Result<FockState> {
    check_tol(cutoff_tol)?;
    if g.r > 6.0 {
        return Err(Error::Truncation(format!("squeeze modulus {} exceeds the supported maximum 6", g.r)));
    }
    let (a, b, c) = g.stellar_coefficients();
    let det = 1.0 - a.norm_sqr();
    let scale = gaussian_norm_sqr(a, b, c).sqrt();
    let h0 = c.exp() * det.powf(0.25) / scale;
    let mean = g.beta.norm_sqr() + g.r.sinh().powi(2);
    let q = a.norm().max(0.5).powf(0.5).min(0.999_999_999);
    let knee = poisson_knee(mean) + (8.0 / det.sqrt()).ceil() as usize;
    truncate_series(
        |n, prev| match n {
            0 => h0,
            1 => b * h0,
            _ => {
                let k = (n - 1) as f64;
                (b * prev[n - 1] - a * k.sqrt() * prev[n - 2]) / (k + 1.0).sqrt()
            }
        },
        knee,
        q,
        cutoff_tol,
    )
}
