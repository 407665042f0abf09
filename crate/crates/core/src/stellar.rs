//! Stellar functions and Majorana constellations.
//!
//! For a spin state the overlap with a coherent state is
//! ⟨n|ψ⟩ = (1 + |ζ|²)^{−S} Σ_k a_k ζ^k with a_k = c_k (−1)^k ψ_k, k = S + m,
//! c_k = √binom(2S, k) and ζ = tan(θ/2) e^{iφ}. The zeros of this polynomial,
//! projected back to the sphere, are the stars: the directions in which the
//! Husimi function vanishes. A polynomial of degree 2S − d contributes d stars
//! at the south pole (ζ = ∞).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::log_binomial;
use crate::states::{FockState, SpinState, SphereVec};

/// Default chordal distance below which roots are merged.
pub const DEFAULT_MERGE_TOL: f64 = 1e-7;

/// Relative size below which an extreme polynomial coefficient counts as zero.
const COEFF_ZERO_REL: f64 = 1e-14;

/// A star and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Star {
    pub theta: f64,
    pub phi: f64,
    pub mult: u32,
}

impl Star {
    pub fn dir(&self) -> SphereVec {
        SphereVec::new(self.theta, self.phi)
    }
}

/// Majorana constellation of a spin-S pure state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    #[serde(rename = "two_S")]
    pub two_s: u32,
    pub stars: Vec<Star>,
    /// Stars at the projection pole ζ = ∞ (the south pole).
    pub infinity_mult: u32,
}

impl Constellation {
    /// Builds a constellation from directions, one star each; south-pole
    /// points are counted in `infinity_mult`.
    pub fn from_points(points: &[SphereVec]) -> Self {
        let mut stars = Vec::new();
        let mut infinity_mult = 0;
        for p in points {
            if p.theta >= std::f64::consts::PI {
                infinity_mult += 1;
            } else {
                stars.push(Star { theta: p.theta, phi: p.phi, mult: 1 });
            }
        }
        Constellation { two_s: points.len() as u32, stars, infinity_mult }
    }

    /// All 2S points, repeated by multiplicity, south-pole stars last.
    pub fn points(&self) -> Vec<SphereVec> {
        let mut out = Vec::with_capacity(self.two_s as usize);
        for s in &self.stars {
            for _ in 0..s.mult {
                out.push(s.dir());
            }
        }
        for _ in 0..self.infinity_mult {
            out.push(SphereVec::south());
        }
        out
    }

    pub fn is_consistent(&self) -> bool {
        self.stars.iter().map(|s| s.mult).sum::<u32>() + self.infinity_mult == self.two_s
    }
}

/// f_ψ(α) = Σ ψ_n αⁿ/√n!.
pub fn stellar_cv(psi: &FockState, alpha: Complex64) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for (n, a) in psi.amplitudes().iter().enumerate() {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        sum += a * term;
    }
    sum
}

/// Coefficients a_k = c_k (−1)^k ψ_k of the Majorana polynomial, low to high.
pub fn majorana_coefficients(psi: &SpinState) -> Vec<Complex64> {
    let two_s = psi.two_s() as u64;
    psi.amplitudes()
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let ck = (0.5 * log_binomial(two_s, k as u64)).exp();
            if k % 2 == 0 {
                a * ck
            } else {
                -a * ck
            }
        })
        .collect()
}

/// ⟨n(ζ)|ψ⟩ = (1 + |ζ|²)^{−S} Σ_k a_k ζ^k.
pub fn stellar_spin(psi: &SpinState, zeta: Complex64) -> Complex64 {
    let a = majorana_coefficients(psi);
    let poly = a.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * zeta + c);
    let s = psi.two_s() as f64 / 2.0;
    poly * (1.0 + zeta.norm_sqr()).powf(-s)
}

pub(crate) fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Newton refinement in the chart where the root is bounded: ζ itself for
/// |ζ| ≤ 1, w = 1/ζ (reversed coefficients) otherwise. Steps are accepted only
/// while the residual decreases.
fn polish_root(coeffs: &[Complex64], reversed: &[Complex64], root: Complex64) -> Complex64 {
    let inverted = root.norm() > 1.0 && !reversed.is_empty();
    let (poly, mut z) = if inverted { (reversed, root.inv()) } else { (coeffs, root) };
    let (mut p, mut dp) = horner(poly, z);
    for _ in 0..12 {
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let cand = z - step;
        let (pc, dpc) = horner(poly, cand);
        if pc.norm() >= p.norm() {
            break;
        }
        z = cand;
        p = pc;
        dp = dpc;
        if step.norm() <= 1e-17 * z.norm().max(1e-300) {
            break;
        }
    }
    if inverted {
        z.inv()
    } else {
        z
    }
}

/// All roots of Σ a_k z^k (a_0, a_n ≠ 0) by companion-matrix eigenvalues
/// after the scaling z = s x that equilibrates |a_0| and |a_n|, followed by
/// Newton polishing.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Ok(Vec::new());
    }
    let (a0, an) = (coeffs[0], coeffs[n]);
    if a0.norm() == 0.0 || an.norm() == 0.0 {
        return Err(Error::domain("polynomial_roots needs non-zero extreme coefficients"));
    }
    let log_s = (a0.norm().ln() - an.norm().ln()) / n as f64;
    let lead_log = an.norm().ln() + n as f64 * log_s;
    let lead_phase = Complex64::from_polar(1.0, an.arg());
    let monic: Vec<Complex64> = (0..n)
        .map(|k| {
            let c = coeffs[k];
            if c.norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let mag = (c.norm().ln() + k as f64 * log_s - lead_log).exp();
            Complex64::from_polar(mag, c.arg()) / lead_phase
        })
        .collect();
    let mut comp = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for (k, c) in monic.iter().enumerate() {
        comp[(k, n - 1)] = -c;
    }
    let eig = nalgebra::Schur::new(comp)
        .eigenvalues()
        .ok_or(Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
    let s = log_s.exp();
    let reversed: Vec<Complex64> = coeffs.iter().rev().cloned().collect();
    Ok(eig.iter().map(|x| polish_root(coeffs, &reversed, x * s)).collect())
}

/// Roots of the truncated stellar polynomial Σ ψ_n αⁿ/√n! of an oscillator
/// state (trailing and leading zeros removed; zeros at the origin included).
pub fn cv_polynomial_roots(psi: &FockState) -> Result<Vec<Complex64>> {
    let mut coeffs: Vec<Complex64> = Vec::with_capacity(psi.amplitudes().len());
    let mut log_fact = 0.0;
    for (n, a) in psi.amplitudes().iter().enumerate() {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        coeffs.push(a * (-0.5 * log_fact).exp());
    }
    while coeffs.last().is_some_and(|c| c.norm() == 0.0) {
        coeffs.pop();
    }
    let lead_zeros = coeffs.iter().take_while(|c| c.norm() == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); lead_zeros];
    roots.extend(polynomial_roots(&coeffs[lead_zeros..])?);
    Ok(roots)
}

fn sphere_point(z: Complex64) -> [f64; 3] {
    SphereVec::from_zeta(z).to_cartesian()
}

// ζ of a star, or w = 1/ζ when the star lies in the southern hemisphere
fn chart_coordinate(p: [f64; 3]) -> (bool, Complex64) {
    // ζ = (x + iy)/(1 + z) projected from the south pole; w = (x − iy)/(1 − z)
    if p[2] >= 0.0 {
        (false, Complex64::new(p[0], p[1]) / (1.0 + p[2]))
    } else {
        (true, Complex64::new(p[0], -p[1]) / (1.0 - p[2]))
    }
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn chordal(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Coefficients of the Majorana polynomial with the given stars, up to a
/// constant; south-pole stars lower the degree.
fn coefficients_from_points(two_s: u32, points: &[[f64; 3]]) -> Vec<Complex64> {
    let mut poly = vec![Complex64::new(0.0, 0.0); two_s as usize + 1];
    poly[0] = Complex64::new(1.0, 0.0);
    let mut deg = 0usize;
    for &p in points {
        let (inverted, c) = chart_coordinate(p);
        // factor (ζ − ω) in the north chart, (1 − ζ/ω) in the south chart
        let (lin, cst) = if inverted { (-c, Complex64::new(1.0, 0.0)) } else { (Complex64::new(1.0, 0.0), -c) };
        for k in (0..=deg + 1).rev() {
            let from_lower = if k > 0 { poly[k - 1] * lin } else { Complex64::new(0.0, 0.0) };
            let keep = if k <= deg { poly[k] * cst } else { Complex64::new(0.0, 0.0) };
            if k < poly.len() {
                poly[k] = from_lower + keep;
            }
        }
        deg = (deg + 1).min(two_s as usize);
    }
    poly
}

fn state_from_points(two_s: u32, points: &[[f64; 3]]) -> Result<SpinState> {
    let a = coefficients_from_points(two_s, points);
    let amps = a
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let ck = (0.5 * log_binomial(two_s as u64, k as u64)).exp();
            if k % 2 == 0 {
                c / ck
            } else {
                -c / ck
            }
        })
        .collect();
    SpinState::new(two_s, amps)
}

/// Pure state (up to global phase) whose constellation is `c`.
pub fn reconstruct_state(c: &Constellation) -> Result<SpinState> {
    if !c.is_consistent() {
        return Err(Error::InvalidState(format!(
            "constellation has {} stars for 2S = {}",
            c.stars.iter().map(|s| s.mult).sum::<u32>() + c.infinity_mult,
            c.two_s
        )));
    }
    let points: Vec<[f64; 3]> = c.points().iter().map(|p| p.to_cartesian()).collect();
    state_from_points(c.two_s, &points)
}

struct Cluster {
    points: Vec<[f64; 3]>,
    center: [f64; 3],
}

/// Mean of the chart coordinates of `points`, in whichever chart holds the
/// majority of them.
fn chart_mean(points: &[[f64; 3]]) -> [f64; 3] {
    let south = points.iter().filter(|p| p[2] < 0.0).count() * 2 > points.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for p in points {
        let (inv, c) = chart_coordinate(*p);
        acc += if south == inv { c } else { c.inv() };
    }
    let m = acc / points.len() as f64;
    let v = sphere_point(m);
    if south {
        // the point with w = m mirrors the point with ζ = m
        [v[0], -v[1], -v[2]]
    } else {
        v
    }
}

/// Majorana constellation of ψ.
///
/// Zero extreme coefficients (relative size below 1e-14) become stars at the
/// poles; the remaining roots come from [`polynomial_roots`]. Roots closer
/// than `tol` (chordal) are merged, and further merges are accepted while the
/// reconstructed state keeps fidelity ≥ 1 − 1e-13, which collects the
/// ε^{1/m}-spread clusters of m-fold roots.
pub fn extract_constellation(psi: &SpinState, tol: f64) -> Result<Constellation> {
    let two_s = psi.two_s();
    let a = majorana_coefficients(psi);
    let max = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::InvalidState("zero Majorana polynomial".into()));
    }
    let thresh = COEFF_ZERO_REL * max;
    let low = a.iter().take_while(|c| c.norm() <= thresh).count();
    let high = a.iter().rev().take_while(|c| c.norm() <= thresh).count();
    let mut clusters: Vec<Cluster> = Vec::new();
    let single = |p: [f64; 3]| Cluster { points: vec![p], center: p };
    for _ in 0..low {
        clusters.push(single([0.0, 0.0, 1.0]));
    }
    let core = &a[low..a.len() - high];
    for r in polynomial_roots(core)? {
        clusters.push(single(sphere_point(r)));
    }
    for _ in 0..high {
        clusters.push(single([0.0, 0.0, -1.0]));
    }

    let reversed: Vec<Complex64> = a.iter().rev().cloned().collect();
    let merged_center = |points: &[[f64; 3]]| -> [f64; 3] {
        if points.iter().all(|p| p[2].abs() >= 1.0 && p[2] == points[0][2]) {
            return points[0];
        }
        let c = normalize3(chart_mean(points));
        if c[2].abs() < 1.0 {
            refine_multiple_root(&a, &reversed, c, points.len())
        } else {
            c
        }
    };
    let fidelity_of = |cl: &[Cluster]| -> f64 {
        let mut pts = Vec::with_capacity(two_s as usize);
        for c in cl {
            for _ in 0..c.points.len() {
                pts.push(c.center);
            }
        }
        state_from_points(two_s, &pts).map(|s| s.fidelity(psi)).unwrap_or(0.0)
    };

    // Grow groups around each cluster by nearest neighbours; a group is merged
    // when it sits inside `tol` or when replacing it by one multiple star
    // leaves the state unchanged to 1e-13 in fidelity.
    const GROUP_RADIUS: f64 = 0.4;
    loop {
        let mut merged = false;
        'search: for i in 0..clusters.len() {
            let mut nb: Vec<(f64, usize)> = (0..clusters.len())
                .filter(|&j| j != i)
                .map(|j| (chordal(clusters[i].center, clusters[j].center), j))
                .collect();
            nb.sort_by(|x, y| x.0.total_cmp(&y.0));
            for k in 1..=nb.len() {
                let far = nb[k - 1].0;
                if far > GROUP_RADIUS {
                    break;
                }
                let mut members: Vec<usize> = nb[..k].iter().map(|x| x.1).collect();
                members.push(i);
                members.sort_unstable();
                let mut points = Vec::new();
                for &j in &members {
                    points.extend_from_slice(&clusters[j].points);
                }
                let center = merged_center(&points);
                let mut trial: Vec<Cluster> = clusters
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !members.contains(j))
                    .map(|(_, c)| Cluster { points: c.points.clone(), center: c.center })
                    .collect();
                trial.push(Cluster { points, center });
                if far < tol || fidelity_of(&trial) >= 1.0 - 1e-13 {
                    clusters = trial;
                    merged = true;
                    break 'search;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut stars = Vec::new();
    let mut infinity_mult = 0;
    for c in &clusters {
        let center = normalize3(c.center);
        let dir = SphereVec::from_cartesian(center);
        let mult = c.points.len() as u32;
        if center[2] <= -1.0 {
            infinity_mult += mult;
        } else {
            stars.push(Star { theta: dir.theta, phi: dir.phi, mult });
        }
    }
    stars.sort_by(|x, y| x.theta.total_cmp(&y.theta).then(x.phi.total_cmp(&y.phi)));
    Ok(Constellation { two_s, stars, infinity_mult })
}

fn derivative(coeffs: &[Complex64], order: usize) -> Vec<Complex64> {
    (order..coeffs.len())
        .map(|k| {
            let f: f64 = ((k - order + 1)..=k).map(|j| j as f64).product();
            coeffs[k] * f
        })
        .collect()
}

/// Newton on the (m−1)-th derivative, where an m-fold root is simple.
fn refine_multiple_root(coeffs: &[Complex64], reversed: &[Complex64], center: [f64; 3], m: usize) -> [f64; 3] {
    let (inverted, z0) = chart_coordinate(center);
    let base = if inverted { reversed } else { coeffs };
    let d = derivative(base, m - 1);
    if d.len() < 2 {
        return center;
    }
    let z = polish_root(&d, &[], z0);
    if !z.re.is_finite() || !z.im.is_finite() || (z - z0).norm() > 1e-3 * (1.0 + z0.norm()) {
        return center;
    }
    let p = sphere_point(z);
    if inverted {
        [p[0], -p[1], -p[2]]
    } else {
        p
    }
}

/// σ(ζ, ω) = |ζ − ω|² / ((1 + |ζ|²)(1 + |ω|²)), a quarter of the squared
/// chordal distance between the projected points.
pub fn chordal_sigma(a: Complex64, b: Complex64) -> f64 {
    let inf_a = !a.re.is_finite() || !a.im.is_finite();
    let inf_b = !b.re.is_finite() || !b.im.is_finite();
    match (inf_a, inf_b) {
        (true, true) => 0.0,
        (true, false) => 1.0 / (1.0 + b.norm_sqr()),
        (false, true) => 1.0 / (1.0 + a.norm_sqr()),
        (false, false) => ((a - b).norm_sqr() / ((1.0 + a.norm_sqr()) * (1.0 + b.norm_sqr()))).clamp(0.0, 1.0),
    }
}

/// σ between two sphere directions, (1 − n·ω)/2, with no chart singularity.
pub fn sphere_sigma(a: SphereVec, b: SphereVec) -> f64 {
    (0.5 * (1.0 - a.dot(b))).clamp(0.0, 1.0)
}

/// Product representation Q(n) = k_S Π_j σ(n, ω_j) of a spin Husimi function.
#[derive(Debug, Clone)]
pub struct ProductForm {
    stars: Vec<[f64; 3]>,
    k: f64,
}

impl ProductForm {
    pub fn new(psi: &SpinState) -> Result<Self> {
        let c = extract_constellation(psi, DEFAULT_MERGE_TOL)?;
        let stars: Vec<[f64; 3]> = c.points().iter().map(|p| p.to_cartesian()).collect();
        // reference point: the best-separated of a fixed set of directions
        let mut best = (f64::NEG_INFINITY, SphereVec::north());
        for i in 0..6 {
            for j in 0..12 {
                let p = SphereVec::new((i as f64 + 0.5) * std::f64::consts::PI / 6.0, j as f64 * std::f64::consts::PI / 6.0);
                let v = p.to_cartesian();
                let m = stars.iter().map(|s| sigma3(v, *s)).fold(f64::INFINITY, f64::min);
                if m > best.0 {
                    best = (m, p);
                }
            }
        }
        let q_ref = stellar_spin(psi, best.1.zeta()).norm_sqr();
        let v = best.1.to_cartesian();
        let prod: f64 = stars.iter().map(|s| sigma3(v, *s)).product();
        Ok(ProductForm { stars, k: q_ref / prod })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eval(&self, n: SphereVec) -> f64 {
        let v = n.to_cartesian();
        self.k * self.stars.iter().map(|s| sigma3(v, *s)).product::<f64>()
    }
}

// |a − b|²/4 rather than (1 − a·b)/2: exact zero at a star and no
// cancellation near one
pub(crate) fn sigma3(a: [f64; 3], b: [f64; 3]) -> f64 {
    0.25 * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
}

/// Q_ψ(n) from the product over stars.
pub fn husimi_product_form(psi: &SpinState, n: SphereVec) -> Result<f64> {
    Ok(ProductForm::new(psi)?.eval(n))
}

/// Constellation of `rotate_spin(ψ, axis, chi)` given that of ψ.
pub fn rotate_constellation(c: &Constellation, axis: SphereVec, chi: f64) -> Constellation {
    let pts: Vec<SphereVec> = c
        .points()
        .iter()
        .map(|p| SphereVec::from_cartesian(crate::states::rotate_vector(p.to_cartesian(), axis, -chi)))
        .collect();
    let mut out = Constellation::from_points(&pts);
    out.two_s = c.two_s;
    out
}

/// Minimum-cost perfect matching of a square cost matrix (Hungarian
/// algorithm); returns `assignment[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Largest chordal distance between matched points after the assignment that
/// minimises the total squared distance. Point sets must have equal size.
pub fn match_points(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    assert_eq!(a.len(), b.len(), "point sets differ in size");
    let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| chordal(*x, *y).powi(2)).collect()).collect();
    let asg = hungarian(&cost);
    asg.iter().enumerate().map(|(i, &j)| chordal(a[i], b[j])).fold(0.0, f64::max)
}

/// [`match_points`] for two constellations.
pub fn match_constellations(a: &Constellation, b: &Constellation) -> f64 {
    let pa: Vec<[f64; 3]> = a.points().iter().map(|p| p.to_cartesian()).collect();
    let pb: Vec<[f64; 3]> = b.points().iter().map(|p| p.to_cartesian()).collect();
    match_points(&pa, &pb)
}

/// Smallest chordal mismatch between two point sets over all rotations,
/// found by aligning ordered pairs of points and polishing nothing further;
/// adequate for rigid, well-separated configurations.
pub fn match_up_to_rotation(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    assert_eq!(a.len(), b.len(), "point sets differ in size");
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len();
    // anchor a pair in `a` that is far from collinear
    let (a0, a1) = {
        let mut best = (0, 0, -1.0);
        for j in 1..n {
            let c = cross(a[0], a[j]);
            let s = norm3(c);
            if s > best.2 {
                best = (0, j, s);
            }
        }
        (best.0, best.1)
    };
    let frame_a = frame(a[a0], a[a1]);
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if (dot3(b[i], b[j]) - dot3(a[a0], a[a1])).abs() > 1e-3 {
                continue;
            }
            let frame_b = frame(b[i], b[j]);
            let Some((fa, fb)) = frame_a.zip(frame_b) else { continue };
            // rotation R = Fb Faᵀ maps a onto b
            let rotated: Vec<[f64; 3]> = a
                .iter()
                .map(|p| {
                    let coords = [dot3(fa[0], *p), dot3(fa[1], *p), dot3(fa[2], *p)];
                    [0, 1, 2].map(|k| fb[0][k] * coords[0] + fb[1][k] * coords[1] + fb[2][k] * coords[2])
                })
                .collect();
            best = best.min(match_points(&rotated, b));
        }
    }
    if n == 1 {
        return 0.0;
    }
    best
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn frame(p: [f64; 3], q: [f64; 3]) -> Option<[[f64; 3]; 3]> {
    let e1 = normalize3(p);
    let c = cross(p, q);
    if norm3(c) < 1e-9 {
        // collinear pair: any perpendicular completes the frame
        let t = if e1[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e3 = normalize3(cross(e1, t));
        return Some([e1, cross(e3, e1), e3]);
    }
    let e3 = normalize3(c);
    Some([e1, cross(e3, e1), e3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_dicke, make_fock, make_spin_coherent, random_spin_state, rotate_spin};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn stellar_cv_examples() {
        let f3 = make_fock(3);
        assert_abs_diff_eq!(stellar_cv(&f3, c(1.0, 0.0)).re, 1.0 / 6f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(stellar_cv(&make_fock(0), c(2.0, -1.0)).re, 1.0, epsilon = 1e-15);
        let coh = crate::states::make_coherent_cv(c(1.0, 0.0), 1e-15).unwrap();
        // e^{−|β|²/2} e^{βα} at β = α = 1
        assert_abs_diff_eq!(stellar_cv(&coh, c(1.0, 0.0)).re, 0.5f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn stellar_spin_examples() {
        let low = make_dicke(4, -4).unwrap();
        assert_abs_diff_eq!(stellar_spin(&low, c(0.0, 0.0)).re, 1.0, epsilon = 1e-15);
        let zero = make_dicke(2, 0).unwrap();
        let a = majorana_coefficients(&zero);
        assert_eq!(a[0], c(0.0, 0.0));
        assert_abs_diff_eq!(a[1].norm(), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(a[2], c(0.0, 0.0));
    }

    #[test]
    fn stellar_spin_is_the_coherent_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = random_spin_state(7, &mut rng);
        let n = SphereVec::new(1.2, 0.4);
        let coh = make_spin_coherent(7, n);
        let direct = coh.inner(&psi);
        assert!((stellar_spin(&psi, n.zeta()) - direct).norm() < 1e-14);
    }

    #[test]
    fn constellation_examples() {
        let up = make_dicke(4, 4).unwrap();
        let cst = extract_constellation(&up, 1e-7).unwrap();
        assert_eq!(cst.stars.len(), 1);
        assert_eq!(cst.stars[0].mult, 4);
        assert_abs_diff_eq!(cst.stars[0].theta, 0.0, epsilon = 1e-15);

        let zero = make_dicke(2, 0).unwrap();
        let cst = extract_constellation(&zero, 1e-7).unwrap();
        assert_eq!(cst.infinity_mult, 1);
        assert_eq!(cst.stars.len(), 1);
        assert_abs_diff_eq!(cst.stars[0].theta, 0.0, epsilon = 1e-15);
        let back = reconstruct_state(&cst).unwrap();
        assert_abs_diff_eq!(back.fidelity(&zero), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coherent_constellation_collapses_to_antipode() {
        for two_s in 1..=12 {
            let n0 = SphereVec::new(1.0, 2.5);
            let cst = extract_constellation(&make_spin_coherent(two_s, n0), 1e-7).unwrap();
            assert_eq!(cst.stars.len(), 1, "2S = {two_s}: {cst:?}");
            assert_eq!(cst.stars[0].mult, two_s);
            let d = sphere_sigma(cst.stars[0].dir(), n0.antipode());
            assert!(d < 1e-16, "2S = {two_s}: σ = {d:e}");
        }
    }

    #[test]
    fn reconstruct_single_star_gives_coherent_state() {
        let star = SphereVec::new(2.0, 0.3);
        let cst = Constellation { two_s: 5, stars: vec![Star { theta: star.theta, phi: star.phi, mult: 5 }], infinity_mult: 0 };
        let psi = reconstruct_state(&cst).unwrap();
        let want = make_spin_coherent(5, star.antipode());
        assert_abs_diff_eq!(psi.fidelity(&want), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn roundtrip_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for two_s in 1..=20 {
            for _ in 0..20 {
                let psi = random_spin_state(two_s, &mut rng);
                let cst = extract_constellation(&psi, 1e-7).unwrap();
                assert!(cst.is_consistent());
                let back = reconstruct_state(&cst).unwrap();
                assert!(back.fidelity(&psi) >= 1.0 - 1e-9, "2S = {two_s}");
            }
        }
    }

    #[test]
    fn rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for two_s in [3, 6, 9] {
            let psi = random_spin_state(two_s, &mut rng);
            let axis = SphereVec::new(0.8, 2.2);
            let chi = 0.9;
            let direct = extract_constellation(&rotate_spin(&psi, axis, chi), 1e-7).unwrap();
            let moved = rotate_constellation(&extract_constellation(&psi, 1e-7).unwrap(), axis, chi);
            assert!(match_constellations(&direct, &moved) < 1e-8);
        }
    }

    #[test]
    fn sigma_examples() {
        let z = c(0.3, -0.7);
        assert_eq!(chordal_sigma(z, z), 0.0);
        let anti = -(z.conj()).inv();
        assert_abs_diff_eq!(chordal_sigma(z, anti), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chordal_sigma(c(0.0, 0.0), c(1.0, 0.0)), 0.5, epsilon = 1e-15);
        let (a, b) = (SphereVec::new(0.4, 1.0), SphereVec::new(2.0, 3.0));
        assert_abs_diff_eq!(chordal_sigma(a.zeta(), b.zeta()), sphere_sigma(a, b), epsilon = 1e-15);
    }

    #[test]
    fn product_form_examples() {
        let n0 = SphereVec::new(0.6, 1.0);
        let coh = make_spin_coherent(4, n0);
        assert!(husimi_product_form(&coh, n0.antipode()).unwrap() < 1e-30);
        let star = extract_constellation(&coh, 1e-7).unwrap().stars[0].dir();
        assert_eq!(husimi_product_form(&coh, star).unwrap(), 0.0);
        let zero = make_dicke(2, 0).unwrap();
        assert_abs_diff_eq!(husimi_product_form(&zero, SphereVec::new(PI / 2.0, 0.7)).unwrap(), 0.5, epsilon = 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for two_s in 1..=12 {
            let psi = random_spin_state(two_s, &mut rng);
            let form = ProductForm::new(&psi).unwrap();
            for t in 0..8 {
                let n = SphereVec::new(0.37 * t as f64 + 0.1, 1.3 * t as f64);
                let direct = stellar_spin(&psi, n.zeta()).norm_sqr();
                assert_abs_diff_eq!(form.eval(n), direct, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cv_gaussian_roots_escape() {
        let g = crate::states::GaussianPure::new(c(0.5, 0.2), 0.6, 0.4).unwrap();
        let psi = crate::states::make_gaussian_fock(g, 1e-14).unwrap();
        let mut prev = 0.0;
        for n in [4usize, 8, 16, 32] {
            let cut = FockState::new(psi.amplitudes()[..=n].to_vec()).unwrap();
            let roots = cv_polynomial_roots(&cut).unwrap();
            let smallest = roots.iter().map(|r| r.norm()).fold(f64::INFINITY, f64::min);
            assert!(smallest > prev, "N = {n}: {smallest} ≤ {prev}");
            prev = smallest;
        }
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn rotation_matching() {
        let tet = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]].map(normalize3);
        let axis = SphereVec::new(0.3, 0.9);
        let rot: Vec<[f64; 3]> = tet.iter().map(|p| crate::states::rotate_vector(*p, axis, 1.234)).collect();
        assert!(match_up_to_rotation(&tet, &rot) < 1e-12);
        let mut bent = rot.clone();
        bent[0] = normalize3([bent[0][0] + 0.1, bent[0][1], bent[0][2]]);
        assert!(match_up_to_rotation(&tet, &bent) > 1e-3);
    }
}
