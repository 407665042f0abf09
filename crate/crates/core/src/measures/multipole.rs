//! State multipoles ρ_Kq, partial Husimi components and cumulative
//! multipolar distributions.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::husimi::{SphereGrid, SpinQ};
use crate::par::map_indexed;
use crate::specfun::{cg_stretched, clebsch_gordan, log_binomial, log_factorial, normalized_legendre_table, ylm_from_table, HalfInt};
use crate::states::{FockState, SpinDensity, SphereVec};

/// The irreducible tensors T_Kq of one spin, K = 0..2S, q = −K..K.
///
/// T_Kq = √((2K+1)/(2S+1)) Σ_m C_{Sm,Kq}^{S,m+q} |S, m+q⟩⟨S, m|.
#[derive(Debug)]
pub struct TensorBasis {
    two_s: u32,
    ops: Vec<DMatrix<Complex64>>,
}

fn flat_index(k: u32, q: i32) -> usize {
    (k * k) as usize + (q + k as i32) as usize
}

impl TensorBasis {
    fn build(two_s: u32) -> Self {
        let d = two_s as usize + 1;
        let s = HalfInt::from_twice(two_s as i32);
        let mut ops = Vec::with_capacity(d * d);
        for k in 0..=two_s {
            let norm = ((2 * k + 1) as f64 / d as f64).sqrt();
            for q in -(k as i32)..=(k as i32) {
                let mut t = DMatrix::<Complex64>::zeros(d, d);
                for col in 0..d {
                    let row = col as i32 + q;
                    if row < 0 || row >= d as i32 {
                        continue;
                    }
                    let m = HalfInt::from_twice(2 * col as i32 - two_s as i32);
                    let m_out = HalfInt::from_twice(2 * row - two_s as i32);
                    let c = clebsch_gordan(s, m, HalfInt::int(k as i32), HalfInt::int(q), m_out);
                    t[(row as usize, col)] = Complex64::new(norm * c, 0.0);
                }
                ops.push(t);
            }
        }
        let basis = TensorBasis { two_s, ops };
        let defect = basis.orthonormality_defect();
        assert!(defect < 1e-12, "tensor basis for 2S = {two_s} not orthonormal: {defect:e}");
        basis
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn get(&self, k: u32, q: i32) -> &DMatrix<Complex64> {
        &self.ops[flat_index(k, q)]
    }

    /// max |Tr(T_Kq T†_K'q') − δ_KK' δ_qq'| over pairs sharing q; pairs with
    /// different q are structurally orthogonal.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let kmax = self.two_s as i32;
        for q in -kmax..=kmax {
            let ks: Vec<u32> = (q.unsigned_abs()..=self.two_s).collect();
            for (i, &k1) in ks.iter().enumerate() {
                for &k2 in &ks[i..] {
                    let ip = hs_inner(self.get(k1, q), self.get(k2, q));
                    let want = if k1 == k2 { 1.0 } else { 0.0 };
                    worst = worst.max((ip - want).norm());
                }
            }
        }
        worst
    }
}

/// Tr(A B†).
pub(crate) fn hs_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// The cached tensor basis for spin 2S; built and checked once per dimension.
pub fn tensor_basis(two_s: u32) -> Arc<TensorBasis> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<TensorBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("tensor cache poisoned").get(&two_s) {
        return b.clone();
    }
    let built = Arc::new(TensorBasis::build(two_s));
    cache.lock().expect("tensor cache poisoned").entry(two_s).or_insert(built).clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Spin,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultipoleEntry {
    #[serde(rename = "K")]
    pub k: HalfInt,
    pub q: HalfInt,
    pub value: Complex64,
}

/// Multipoles keyed by (K, q).
#[derive(Debug, Clone, PartialEq)]
pub struct MultipoleTable {
    pub flavor: Flavor,
    pub entries: BTreeMap<(HalfInt, HalfInt), Complex64>,
}

impl MultipoleTable {
    pub fn get(&self, k: HalfInt, q: HalfInt) -> Complex64 {
        self.entries.get(&(k, q)).copied().unwrap_or_default()
    }

    /// Integer-rank lookup for spin tables.
    pub fn spin(&self, k: u32, q: i32) -> Complex64 {
        self.get(HalfInt::int(k as i32), HalfInt::int(q))
    }

    pub fn to_entries(&self) -> Vec<MultipoleEntry> {
        self.entries.iter().map(|(&(k, q), &value)| MultipoleEntry { k, q, value }).collect()
    }

    /// Largest integer rank present.
    pub fn max_rank(&self) -> u32 {
        self.entries.keys().map(|(k, _)| k.twice / 2).max().unwrap_or(0).max(0) as u32
    }

    /// Σ_{K=1}^{M} Σ_q |ρ_Kq|².
    pub fn cumulative(&self, m: u32) -> f64 {
        self.entries
            .iter()
            .filter(|((k, _), _)| k.twice >= 2 && k.twice <= 2 * m as i32)
            .map(|(_, v)| v.norm_sqr())
            .sum()
    }

    /// Σ_q |ρ_Kq|² for one rank.
    pub fn rank_weight(&self, k: u32) -> f64 {
        self.entries.iter().filter(|((kk, _), _)| kk.twice == 2 * k as i32).map(|(_, v)| v.norm_sqr()).sum()
    }
}

impl Serialize for MultipoleTable {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = ser.serialize_struct("MultipoleTable", 2)?;
        st.serialize_field("flavor", &self.flavor)?;
        st.serialize_field("entries", &self.to_entries())?;
        st.end()
    }
}

/// ρ_Kq = Tr(ρ T†_Kq) for K = 0..2S.
pub fn multipoles_spin(rho: &SpinDensity) -> MultipoleTable {
    let two_s = rho.two_s();
    let basis = tensor_basis(two_s);
    let mut entries = BTreeMap::new();
    for k in 0..=two_s {
        for q in -(k as i32)..=(k as i32) {
            entries.insert((HalfInt::int(k as i32), HalfInt::int(q)), hs_inner(rho.matrix(), basis.get(k, q)));
        }
    }
    MultipoleTable { flavor: Flavor::Spin, entries }
}

/// √(4π/(2S+1)) C_{SS,K0}^{SS} (−1)^K: the factor in Q = Σ factor_K ρ_Kq Y_Kq.
fn husimi_factor(two_s: u32, k: u32) -> f64 {
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * (4.0 * PI / (two_s as f64 + 1.0)).sqrt() * cg_stretched(two_s, k)
}

/// Multipoles from spherical-harmonic projections of Q:
/// ρ_Kq = ∫ Y*_Kq Q dΩ / (√(4π/(2S+1)) C_{SS,K0}^{SS} (−1)^K).
pub fn multipoles_spin_quadrature<S: SpinQ + ?Sized>(state: &S, grid: &SphereGrid) -> Result<MultipoleTable> {
    let two_s = state.two_s();
    let q = grid.husimi_values(state);
    let nodes = grid.nodes();
    let kmax = two_s as usize;
    let width = (kmax + 1) * (kmax + 1);
    let per_node: Vec<Vec<Complex64>> = map_indexed(nodes.len(), |i| {
        let nd = nodes[i];
        let table = normalized_legendre_table(kmax, nd.dir.theta);
        let mut row = Vec::with_capacity(width);
        for k in 0..=kmax {
            for qq in -(k as i32)..=(k as i32) {
                row.push(ylm_from_table(&table, k, qq, nd.dir.phi).conj() * (q[i] * nd.weight));
            }
        }
        row
    });
    if let Some(i) = q.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut entries = BTreeMap::new();
    for k in 0..=two_s {
        let f = husimi_factor(two_s, k);
        for qq in -(k as i32)..=(k as i32) {
            let j = flat_index(k, qq);
            let re: Vec<f64> = per_node.iter().map(|r| r[j].re).collect();
            let im: Vec<f64> = per_node.iter().map(|r| r[j].im).collect();
            let v = Complex64::new(crate::par::pairwise_sum(&re), crate::par::pairwise_sum(&im)) / f;
            entries.insert((HalfInt::int(k as i32), HalfInt::int(qq)), v);
        }
    }
    Ok(MultipoleTable { flavor: Flavor::Spin, entries })
}

/// Q^{(K)}(n) = √(4π/(2S+1)) C_{SS,K0}^{SS} (−1)^K Σ_q ρ_Kq Y_Kq(n);
/// the components sum over K to Q(n).
pub fn partial_q(rho: &SpinDensity, k: u32, n: SphereVec) -> Result<f64> {
    let table = multipoles_spin(rho);
    partial_q_from_table(&table, rho.two_s(), k, n)
}

/// [`partial_q`] on an already computed table.
pub fn partial_q_from_table(table: &MultipoleTable, two_s: u32, k: u32, n: SphereVec) -> Result<f64> {
    if k > two_s {
        return Err(Error::domain(format!("rank {k} exceeds 2S = {two_s}")));
    }
    let p = normalized_legendre_table(k as usize, n.theta);
    let sum: Complex64 = (-(k as i32)..=(k as i32)).map(|q| table.spin(k, q) * ylm_from_table(&p, k as usize, q, n.phi)).sum();
    Ok(husimi_factor(two_s, k) * sum.re)
}

/// A_M = Σ_{K=1}^{M} Σ_q |ρ_Kq|² for 1 ≤ M ≤ 2S.
pub fn cumulative_a(rho: &SpinDensity, m: u32) -> Result<f64> {
    if m < 1 || m > rho.two_s() {
        return Err(Error::domain(format!("order M = {m} outside 1..=2S = {}", rho.two_s())));
    }
    Ok(multipoles_spin(rho).cumulative(m))
}

/// Largest A_M over pure states, attained by coherent states:
/// 2S/(2S+1) − Γ(2S+1)² / (Γ(2S−M) Γ(2S+M+2)), the second term absent at M = 2S.
pub fn a_m_coherent_max(two_s: u32, m: u32) -> f64 {
    let n = two_s as f64;
    let first = n / (n + 1.0);
    if m >= two_s {
        return first;
    }
    let ln = 2.0 * log_factorial(two_s as u64) - log_factorial((two_s - m - 1) as u64) - log_factorial((two_s + m + 1) as u64);
    first - ln.exp()
}

/// The unnormalized oscillator multipole indicator
/// Σ_n (−1)ⁿ ρ_{n+2q,n} √((n+2q)!/n!) binom(K+q, n+2q), halved when q = 0.
///
/// Only its vanishing is meaningful; the overall scale is arbitrary.
pub fn cv_multipole_indicator(psi: &FockState, k: HalfInt, q: HalfInt) -> Result<Complex64> {
    let (top, bottom) = (k.twice + q.twice, k.twice - q.twice);
    if top < 0 || bottom < 0 || top % 2 != 0 {
        return Err(Error::domain("K ± q must be nonnegative integers"));
    }
    let upper = (top / 2) as i64;
    let shift = q.twice as i64;
    let a = psi.amplitudes();
    let len = a.len() as i64;
    let mut sum = Complex64::new(0.0, 0.0);
    let start = 0.max(-shift);
    let mut n = start;
    while n < len && n + shift < len {
        let row = n + shift;
        if row > upper {
            break;
        }
        let rho = a[row as usize] * a[n as usize].conj();
        if rho.norm_sqr() > 0.0 {
            let mag = (0.5 * (log_factorial(row as u64) - log_factorial(n as u64)) + log_binomial(upper as u64, row as u64)).exp();
            sum += if n % 2 == 0 { rho * mag } else { -rho * mag };
        }
        n += 1;
    }
    if q.twice == 0 {
        sum *= 0.5;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::husimi::husimi_spin;
    use crate::states::{make_dicke, make_fock, make_spin_coherent, random_spin_state, SpinState};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_orthonormal_and_dipole_is_sz() {
        for two_s in 1..=8 {
            let b = tensor_basis(two_s);
            assert!(b.orthonormality_defect() < 1e-12);
            let s = two_s as f64 / 2.0;
            let sz = &crate::states::spin_matrices(two_s)[2];
            let scale = (3.0 / ((two_s as f64 + 1.0) * (s + 1.0) * s)).sqrt();
            let diff = b.get(1, 0) - sz * Complex64::new(scale, 0.0);
            assert!(diff.norm() < 1e-13);
        }
    }

    #[test]
    fn multipole_examples() {
        let mixed = multipoles_spin(&SpinDensity::maximally_mixed(3));
        for (&(k, _), v) in &mixed.entries {
            let want = if k.twice == 0 { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-14);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        }
        let zero = make_dicke(2, 0).unwrap().to_density();
        let t = multipoles_spin(&zero);
        for q in -1..=1 {
            assert!(t.spin(1, q).norm() < 1e-15);
        }
        let north = make_spin_coherent(2, SphereVec::north()).to_density();
        assert_abs_diff_eq!(multipoles_spin(&north).spin(1, 0).re, -(0.5f64).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn table_invariants_and_quadrature_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for two_s in [1u32, 4, 9] {
            let psi = random_spin_state(two_s, &mut rng);
            let rho = psi.to_density();
            let t = multipoles_spin(&rho);
            let total: f64 = t.entries.values().map(|v| v.norm_sqr()).sum();
            assert_abs_diff_eq!(total, rho.purity(), epsilon = 1e-12);
            for k in 0..=two_s {
                for q in 1..=(k as i32) {
                    let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                    assert!((t.spin(k, -q) - t.spin(k, q).conj() * sign).norm() < 1e-12);
                }
            }
            let quad = multipoles_spin_quadrature(&psi, &SphereGrid::for_spin(two_s)).unwrap();
            for (key, v) in &t.entries {
                assert!((quad.entries[key] - v).norm() < 1e-10);
            }
            let n = SphereVec::new(0.9, 2.2);
            let sum: f64 = (0..=two_s).map(|k| partial_q(&rho, k, n).unwrap()).sum();
            assert_abs_diff_eq!(sum, husimi_spin(&psi, n), epsilon = 1e-12);
        }
    }

    #[test]
    fn partial_components_of_dicke_zero() {
        let rho = make_dicke(2, 0).unwrap().to_density();
        let n = SphereVec::new(0.7, 1.0);
        assert_abs_diff_eq!(partial_q(&rho, 0, n).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(partial_q(&rho, 1, n).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(partial_q(&rho, 2, SphereVec::north()).unwrap(), -1.0 / 3.0, epsilon = 1e-14);
        assert!(partial_q(&rho, 3, n).is_err());
    }

    #[test]
    fn cumulative_examples() {
        let north = make_spin_coherent(2, SphereVec::new(0.3, 0.2)).to_density();
        assert_abs_diff_eq!(cumulative_a(&north, 1).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(a_m_coherent_max(2, 1), 0.5, epsilon = 1e-15);
        assert!(cumulative_a(&make_dicke(2, 0).unwrap().to_density(), 1).unwrap() < 1e-14);
        let psi = SpinState::new(3, vec![Complex64::new(1.0, 0.0); 4]).unwrap().to_density();
        let t = multipoles_spin(&psi);
        assert_abs_diff_eq!(t.cumulative(3) + t.spin(0, 0).norm_sqr(), psi.purity(), epsilon = 1e-13);
    }

    #[test]
    fn cv_indicator_examples() {
        let f2 = make_fock(2);
        assert_eq!(cv_multipole_indicator(&f2, HalfInt::int(1), HalfInt::ZERO).unwrap(), Complex64::new(0.0, 0.0));
        assert_abs_diff_eq!(cv_multipole_indicator(&f2, HalfInt::int(2), HalfInt::ZERO).unwrap().re, 0.5, epsilon = 1e-15);
        assert_eq!(cv_multipole_indicator(&f2, HalfInt::int(2), HalfInt::int(1)).unwrap(), Complex64::new(0.0, 0.0));
        assert!(cv_multipole_indicator(&f2, HalfInt::int(1), HalfInt::from_twice(1)).is_err());
    }
}
