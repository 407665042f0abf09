//! Special functions and coupling coefficients.
//!
//! Factorial ratios are always formed in log space and exponentiated once,
//! which keeps Clebsch–Gordan coefficients and normalisation constants finite
//! for spins well beyond 2S = 100.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An integer or half-integer, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt {
    pub twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt { twice }
    }

    pub const fn int(v: i32) -> Self {
        HalfInt { twice: 2 * v }
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// The integer value, if there is one.
    pub fn as_int(self) -> Option<i32> {
        self.is_integer().then_some(self.twice / 2)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

const LOG_FACT_TABLE: usize = 4096;

fn log_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LOG_FACT_TABLE);
        let mut exact: u64 = 1;
        t.push(0.0);
        for n in 1..LOG_FACT_TABLE as u64 {
            if n <= 20 {
                exact *= n;
                t.push((exact as f64).ln());
            } else {
                t.push(stirling_log_factorial(n as f64));
            }
        }
        t
    })
}

fn stirling_log_factorial(n: f64) -> f64 {
    // ln Γ(n+1) with the Stirling series; for n > 20 the truncation error is
    // below 1e-20 relative.
    let x = n + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

/// ln(n!).
pub fn log_factorial(n: u64) -> f64 {
    if (n as usize) < LOG_FACT_TABLE {
        log_fact_table()[n as usize]
    } else {
        stirling_log_factorial(n as f64)
    }
}

/// ln binom(n, k); `-inf` outside 0 ≤ k ≤ n.
pub fn log_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// ln Γ(n) for positive integer n; `+inf` at n = 0 (the pole).
pub fn log_gamma_int(n: i64) -> f64 {
    if n <= 0 {
        f64::INFINITY
    } else {
        log_factorial((n - 1) as u64)
    }
}

/// Digamma ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("digamma requires x > 0, got {x}")));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli tail: B2/2, B4/4, ... B14/14
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(acc + x.ln() - 0.5 / x - tail)
}

/// Associated Laguerre polynomial L_m^{(k)}(x) by the three-term recurrence.
pub fn assoc_laguerre(m: u32, k: i32, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for n in 1..m {
        let n = n as f64;
        let next = ((2.0 * n + 1.0 + k - x) * cur - (n + k) * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Ordinary Laguerre polynomial L_m(x).
pub fn laguerre(m: u32, x: f64) -> f64 {
    assoc_laguerre(m, 0, x)
}

/// Orthonormalised associated Legendre values `p[l][m]` for 0 ≤ m ≤ l ≤ lmax,
/// including the Condon–Shortley phase, such that Y_lm = p[l][m] e^{imφ}.
pub fn normalized_legendre_table(lmax: usize, theta: f64) -> Vec<Vec<f64>> {
    let (s, c) = theta.sin_cos();
    let mut p: Vec<Vec<f64>> = (0..=lmax).map(|l| vec![0.0; l + 1]).collect();
    p[0][0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        p[m][m] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..lmax {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * c * p[m][m];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[l][m] = a * (c * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// Orthonormal spherical harmonic Y_Kq(θ, φ) with the Condon–Shortley phase.
pub fn spherical_harmonic(k: HalfInt, q: i32, theta: f64, phi: f64) -> Result<Complex64> {
    let l = k
        .as_int()
        .filter(|&l| l >= 0)
        .ok_or_else(|| Error::domain(format!("spherical harmonic needs integer K ≥ 0, got {k}")))?;
    if q.abs() > l {
        return Err(Error::domain(format!("|q| = {} exceeds K = {l}", q.abs())));
    }
    let table = normalized_legendre_table(l as usize, theta);
    Ok(ylm_from_table(&table, l as usize, q, phi))
}

/// Y_lq from a precomputed [`normalized_legendre_table`].
pub fn ylm_from_table(table: &[Vec<f64>], l: usize, q: i32, phi: f64) -> Complex64 {
    let m = q.unsigned_abs() as usize;
    let y = Complex64::from_polar(table[l][m], m as f64 * phi);
    if q >= 0 {
        y
    } else if m % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    }
}

/// Clebsch–Gordan coefficient ⟨j1 m1; j2 m2 | J M⟩ by Racah's single-sum
/// formula. Selection-rule violations return exactly zero.
pub fn clebsch_gordan_general(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    let (tj1, tm1, tj2, tm2, tj, tm) = (j1.twice, m1.twice, j2.twice, m2.twice, j.twice, m.twice);
    if tj1 < 0 || tj2 < 0 || tj < 0 {
        return 0.0;
    }
    if tm1 + tm2 != tm || tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return 0.0;
    }
    if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj + tm) % 2 != 0 {
        return 0.0;
    }
    if tj > tj1 + tj2 || tj < (tj1 - tj2).abs() || (tj1 + tj2 + tj) % 2 != 0 {
        return 0.0;
    }
    // all of these are integers by the parity checks above
    let a = ((tj1 + tj2 - tj) / 2) as i64;
    let b = ((tj1 - tm1) / 2) as i64;
    let c = ((tj2 + tm2) / 2) as i64;
    let d = ((tj - tj2 + tm1) / 2) as i64;
    let e = ((tj - tj1 - tm2) / 2) as i64;
    let lf = |n: i64| log_factorial(n as u64);

    let log_pref = 0.5
        * (((tj + 1) as f64).ln() + lf(((tj + tj1 - tj2) / 2) as i64) + lf(((tj - tj1 + tj2) / 2) as i64) + lf(a)
            - lf(((tj1 + tj2 + tj) / 2 + 1) as i64)
            + lf(((tj + tm) / 2) as i64)
            + lf(((tj - tm) / 2) as i64)
            + lf(b)
            + lf(((tj1 + tm1) / 2) as i64)
            + lf(((tj2 - tm2) / 2) as i64)
            + lf(c));

    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let log_den = lf(k) + lf(a - k) + lf(b - k) + lf(c - k) + lf(d + k) + lf(e + k);
        let term = (log_pref - log_den).exp();
        sum += if k % 2 == 0 { term } else { -term };
    }
    sum
}

/// C_{S m, K q}^{S m_out}: couples spin S and rank K back to spin S.
pub fn clebsch_gordan(s: HalfInt, m: HalfInt, k: HalfInt, q: HalfInt, m_out: HalfInt) -> f64 {
    clebsch_gordan_general(s, m, k, q, s, m_out)
}

/// Closed form of C_{SS,K0}^{SS}, evaluated in log space.
pub fn cg_stretched(two_s: u32, k: u32) -> f64 {
    if k > two_s {
        return 0.0;
    }
    let n = two_s as u64;
    let k = k as u64;
    (0.5 * ((n + 1) as f64).ln() + log_factorial(n)
        - 0.5 * (log_factorial(n - k) + log_factorial(n + 1 + k)))
    .exp()
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss–Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Legendre polynomial P_l(x).
pub fn legendre(l: usize, x: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    legendre_with_derivative(l, x).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_factorial_examples() {
        assert_eq!(log_factorial(0), 0.0);
        assert_abs_diff_eq!(log_factorial(5), 120f64.ln(), epsilon = 1e-15);
        // 20! is exact in u64
        let f20: u64 = (1..=20).product();
        assert_abs_diff_eq!(log_factorial(20), (f20 as f64).ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(log_factorial(20), 42.335616460753485, epsilon = 1e-12);
    }

    #[test]
    fn log_factorial_table_matches_stirling_and_sums() {
        // Kahan-compensated sum of logs as an independent route.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for n in 1..=2000u64 {
            let y = (n as f64).ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            let rel = (log_factorial(n) - sum).abs() / sum.max(1.0);
            assert!(rel < 1e-14, "n = {n}: rel {rel}");
        }
    }

    #[test]
    fn digamma_examples_and_recurrence() {
        const EULER: f64 = 0.577_215_664_901_532_9;
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(2.0).unwrap(), 1.0 - EULER, epsilon = 1e-12);
        let harmonic9: f64 = (1..=9).map(|k| 1.0 / k as f64).sum();
        assert_abs_diff_eq!(digamma(10.0).unwrap(), harmonic9 - EULER, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(10.0).unwrap(), 2.251_752_589_066_721, epsilon = 1e-12);
        for x in [0.5, 1.0, 2.0, 7.3] {
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert_abs_diff_eq!(d, 1.0 / x, epsilon = 1e-12);
        }
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
    }

    fn binom_f(n: i64, k: i64) -> f64 {
        if k < 0 || k > n {
            return 0.0;
        }
        let mut r = 1.0;
        for i in 0..k {
            r *= (n - i) as f64 / (i + 1) as f64;
        }
        r
    }

    // explicit monomial expansion, the independent oracle for the recurrence
    fn laguerre_expansion(m: u32, k: i32, x: f64) -> f64 {
        let mut s = 0.0;
        let mut fact = 1.0;
        for i in 0..=m as i64 {
            if i > 0 {
                fact *= i as f64;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom_f(m as i64 + k as i64, m as i64 - i) * x.powi(i as i32) / fact;
        }
        s
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(assoc_laguerre(0, 0, 3.7), 1.0);
        assert_abs_diff_eq!(assoc_laguerre(1, 0, 2.0), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(laguerre_expansion(2, 1, 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(assoc_laguerre(2, 1, 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(laguerre(1, -1.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(laguerre(2, -1.0), 3.5, epsilon = 1e-15);
    }

    #[test]
    fn laguerre_recurrence_matches_expansion() {
        for m in 0..=8 {
            for k in 0..=4 {
                for &x in &[-2.5, -1.0, 0.0, 0.3, 1.0, 2.2, 4.0] {
                    let a = assoc_laguerre(m, k, x);
                    let b = laguerre_expansion(m, k, x);
                    assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "m={m} k={k} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn spherical_harmonic_examples() {
        let y00 = spherical_harmonic(HalfInt::int(0), 0, 0.7, 1.3).unwrap();
        assert_abs_diff_eq!(y00.re, 0.282_094_791_773_878_1, epsilon = 1e-15);
        let y10 = spherical_harmonic(HalfInt::int(1), 0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(y10.re, (3.0 / (4.0 * PI)).sqrt(), epsilon = 1e-15);
        let y21 = spherical_harmonic(HalfInt::int(2), 1, PI / 2.0, 0.4).unwrap();
        assert!(y21.norm() < 1e-16);
        assert!(spherical_harmonic(HalfInt::int(1), 2, 0.1, 0.1).is_err());
        assert!(spherical_harmonic(HalfInt::from_twice(1), 0, 0.1, 0.1).is_err());
    }

    #[test]
    fn spherical_harmonic_low_order_closed_forms() {
        let (t, p) = (0.83, 2.1);
        let y11 = spherical_harmonic(HalfInt::int(1), 1, t, p).unwrap();
        let want = -(3.0 / (8.0 * PI)).sqrt() * t.sin() * Complex64::from_polar(1.0, p);
        assert!((y11 - want).norm() < 1e-15);
        let y1m1 = spherical_harmonic(HalfInt::int(1), -1, t, p).unwrap();
        assert!((y1m1 + want.conj()).norm() < 1e-15);
        let y22 = spherical_harmonic(HalfInt::int(2), 2, t, p).unwrap();
        let want = 0.25 * (15.0 / (2.0 * PI)).sqrt() * t.sin().powi(2) * Complex64::from_polar(1.0, 2.0 * p);
        assert!((y22 - want).norm() < 1e-15);
    }

    #[test]
    fn cg_examples() {
        let s = HalfInt::int(1);
        assert_abs_diff_eq!(clebsch_gordan(s, s, HalfInt::ZERO, HalfInt::ZERO, s), 1.0, epsilon = 1e-15);
        let c = clebsch_gordan(s, s, HalfInt::int(2), HalfInt::ZERO, s);
        assert_abs_diff_eq!(c, 3f64.sqrt() * 2.0 / 120f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(c, 0.316_227_766_016_837_94, epsilon = 1e-14);
        // ⟨½ ½; ½ −½ | 1 0⟩ = 1/√2
        let h = HalfInt::from_twice(1);
        let v = clebsch_gordan_general(h, h, h, HalfInt::from_twice(-1), HalfInt::int(1), HalfInt::ZERO);
        assert_abs_diff_eq!(v, 0.5f64.sqrt(), epsilon = 1e-15);
        // selection rule: m_out != m + q
        assert_eq!(clebsch_gordan(s, HalfInt::ZERO, HalfInt::int(1), HalfInt::int(1), HalfInt::ZERO), 0.0);
    }

    #[test]
    fn cg_orthogonality_oracle() {
        let s = HalfInt::from_twice(3);
        let k = HalfInt::int(1);
        let q = HalfInt::int(1);
        // for fixed (K, q) the sum over m of squares is (2S+1)/(2K+1)
        let mut total = 0.0;
        for tm in (-3..=3).step_by(2) {
            let c = clebsch_gordan(s, HalfInt::from_twice(tm), k, q, HalfInt::from_twice(tm + 2));
            total += c * c;
        }
        assert_abs_diff_eq!(total * 3.0 / 4.0, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn cg_unitarity_in_coupled_basis() {
        // Σ_{m, q} C_{Sm,Kq}^{S M} C_{Sm,Kq}^{S M'} = δ_{MM'} for every K
        for two_s in 1..=8 {
            let s = HalfInt::from_twice(two_s);
            for kk in 0..=two_s {
                let k = HalfInt::int(kk);
                for tmo in (-two_s..=two_s).step_by(2) {
                    let mut total = 0.0;
                    for tm in (-two_s..=two_s).step_by(2) {
                        let tq = tmo - tm;
                        if tq.abs() > k.twice {
                            continue;
                        }
                        let c = clebsch_gordan(s, HalfInt::from_twice(tm), k, HalfInt::from_twice(tq), HalfInt::from_twice(tmo));
                        total += c * c;
                    }
                    assert!((total - 1.0).abs() < 1e-12, "2S={two_s} K={k} M={tmo}: {total}");
                }
            }
        }
    }

    #[test]
    fn cg_matches_stretched_closed_form() {
        for two_s in 0..=40u32 {
            let s = HalfInt::from_twice(two_s as i32);
            for k in 0..=two_s {
                let racah = clebsch_gordan(s, s, HalfInt::int(k as i32), HalfInt::ZERO, s);
                let closed = cg_stretched(two_s, k);
                assert!((racah - closed).abs() < 1e-12, "2S={two_s} K={k}: {racah} vs {closed}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        for p in 0..24 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert_abs_diff_eq!(got, want, epsilon = 1e-14);
        }
        let (x, _) = gauss_legendre(7);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert_abs_diff_eq!(x[3], 0.0, epsilon = 1e-16);
    }
}
