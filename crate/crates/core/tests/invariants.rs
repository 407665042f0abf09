//! Property tests for invariances, feasibility and round trips.

use std::f64::consts::PI;

use proptest::prelude::*;
use quantumness::extremal::{
    fibonacci_sphere, find_king, project_simplex, queen_weights_projected, PointConfig, QueenProblem, SearchResult,
};
use quantumness::husimi::{PlaneGrid, SphereGrid};
use quantumness::io::{to_json, StateFile};
use quantumness::measures::{cumulative_a, m2_spin_multipole, m_infinity_spin, multipoles_spin, wehrl_spin};
use quantumness::metrology::CovMatrix3;
use quantumness::states::{rotate_spin, FockState, SpinState, SphereVec};
use quantumness::stellar::{extract_constellation, reconstruct_state, DEFAULT_MERGE_TOL};
use quantumness::Complex64;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn amplitudes(len: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
        .prop_filter("non-zero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn spin_state(max_two_s: u32) -> impl Strategy<Value = SpinState> {
    (1..=max_two_s).prop_flat_map(|two_s| amplitudes(two_s as usize + 1).prop_map(move |a| SpinState::new(two_s, a).unwrap()))
}

fn direction() -> impl Strategy<Value = SphereVec> {
    (-1.0..1.0f64, 0.0..2.0 * PI).prop_map(|(z, phi)| SphereVec::new(z.acos(), phi))
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn husimi_is_normalized(psi in spin_state(12), cv in amplitudes(1..8)) {
        let grid = SphereGrid::for_spin(psi.two_s());
        prop_assert!((grid.husimi_integral(&psi, |q| q).unwrap() - 1.0).abs() < 1e-10);
        let cv = FockState::new(cv).unwrap();
        let plane = PlaneGrid::for_state(&cv);
        prop_assert!((plane.integrate_values(&plane.husimi_values(&cv)).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spin_measures_are_rotation_invariant(psi in spin_state(8), axis in direction(), chi in 0.0..2.0 * PI) {
        let two_s = psi.two_s();
        let moved = rotate_spin(&psi, axis, chi);
        let grid = SphereGrid::for_spin(two_s);
        prop_assert!((wehrl_spin(&moved, &grid).unwrap() - wehrl_spin(&psi, &grid).unwrap()).abs() < 1e-9);
        let m2 = |p: &SpinState| m2_spin_multipole(&multipoles_spin(&p.to_density()), two_s);
        prop_assert!((m2(&moved) - m2(&psi)).abs() < 1e-9);
        let minf = |p: &SpinState| m_infinity_spin(p).unwrap().value;
        prop_assert!((minf(&moved) - minf(&psi)).abs() < 1e-9);
        let (a, b) = (psi.to_density(), moved.to_density());
        for m in 1..=two_s {
            prop_assert!((cumulative_a(&a, m).unwrap() - cumulative_a(&b, m).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn simplex_projection_is_feasible_and_closest(v in prop::collection::vec(-3.0..3.0f64, 1..40), seed in 0..1000u32) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let again = project_simplex(&p);
        prop_assert!(p.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-12));
        // any other simplex point is no closer
        let raw: Vec<f64> = (0..v.len()).map(|i| (((i as u32 + 1) * (seed + 7)) % 13) as f64 + 0.5).collect();
        let total: f64 = raw.iter().sum();
        let dist = |x: &[f64]| x.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        prop_assert!(dist(&p) <= dist(&raw.iter().map(|x| x / total).collect::<Vec<_>>()) + 1e-12);
    }

    #[test]
    fn queen_weights_improve_on_uniform(psi in spin_state(4)) {
        let dirs = fibonacci_sphere(200);
        let p = QueenProblem::new(&psi, &dirs);
        let (w, value) = queen_weights_projected(&p, None).unwrap();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let uniform = vec![1.0 / dirs.len() as f64; dirs.len()];
        prop_assert!(value <= p.value(&uniform) + 1e-12);
        prop_assert!((value - p.value(&w)).abs() < 1e-12);
    }

    #[test]
    fn point_configs_have_unit_norm(points in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), 1..30)) {
        let raw: Vec<[f64; 3]> = points.into_iter().map(|(x, y, z)| [x, y, z]).collect();
        prop_assume!(raw.iter().all(|p| p.iter().map(|c| c * c).sum::<f64>() > 1e-6));
        let c = PointConfig::new(raw).unwrap();
        prop_assert!(c.points.iter().all(|p| (p.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn states_round_trip(psi in spin_state(16), cv in amplitudes(1..12)) {
        let back = reconstruct_state(&extract_constellation(&psi, DEFAULT_MERGE_TOL).unwrap()).unwrap();
        prop_assert!(back.fidelity(&psi) > 1.0 - 1e-9);
        // loading renormalizes, which may move the last bit
        let same = |a: &[Complex64], b: &[Complex64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-15);
        let file = StateFile::Spin(psi.clone());
        let StateFile::Spin(back) = StateFile::from_json(&file.to_json().unwrap()).unwrap() else { panic!("system changed") };
        prop_assert!(same(back.amplitudes(), psi.amplitudes()));
        let cv = FockState::new(cv).unwrap();
        let file = StateFile::Cv(cv.clone());
        let StateFile::Cv(back) = StateFile::from_json(&file.to_json().unwrap()).unwrap() else { panic!("system changed") };
        prop_assert!(same(back.amplitudes(), cv.amplitudes()));
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn kings_are_unpolarized_and_isotropic(seed in any::<u64>(), case in 0..3usize) {
        let (two_s, order) = [(4, 2), (6, 2), (6, 3)][case];
        let king = find_king(two_s, order, 16, seed).unwrap();
        prop_assume!(king.converged);
        let mean = king.state.expect_spin();
        prop_assert!(mean.iter().all(|x| x.abs() < 1e-4));
        prop_assert!(CovMatrix3::of(&king.state).isotropy_defect() < 1e-4);
        let back: SearchResult = serde_json::from_str(&to_json(&king).unwrap()).unwrap();
        prop_assert!(back.state.fidelity(&king.state) > 1.0 - 1e-14);
        prop_assert_eq!(back.objective, king.objective);
        prop_assert_eq!(back.constellation, king.constellation);
    }
}
