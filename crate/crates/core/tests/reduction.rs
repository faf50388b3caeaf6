//! Cross-module properties: coset charts, full vs reduced evolution, and the
//! symplectic and phase layers on the same trajectories.

use proptest::prelude::*;

use riccati_core::coset::{coset_factorize, extract_z, reconstruct_u0, split_blocks, CosetPoint, Partition};
use riccati_core::dynamics::{evolve_state, evolve_unitary_from, BlockHamiltonian, HamiltonianSample};
use riccati_core::matcore::{max_abs, unitarity_residual, unitary_exp_step};
use riccati_core::phase::{angle_distance, geometric_phase_schrodinger, kinematic_phases, KinematicCurve};
use riccati_core::riccati::{integrate_matrix_riccati, integrate_reduced, vector_riccati_rhs, RayPoint, DEFAULT_GUARD};
use riccati_core::rng::SeededRng;
use riccati_core::symplectic::{hamiltonian_flow, pb_gamma_identities, SymplecticMatrices};
use riccati_core::{CMat, CVec, ToleranceProfile, C64};

fn prof() -> ToleranceProfile {
    ToleranceProfile::default()
}

fn partition_strategy() -> impl Strategy<Value = Partition> {
    (2usize..=6).prop_flat_map(|n| (1..n).prop_map(move |n1| Partition::new(n1, n - n1).unwrap()))
}

fn constant(part: Partition, seed: u64, scale: f64) -> BlockHamiltonian {
    let h = SeededRng::new(seed).hermitian(part.dim(), scale);
    BlockHamiltonian::constant(part, h, &prof()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chart_roundtrip(part in partition_strategy(), seed in any::<u64>()) {
        let p = prof();
        let mut rng = SeededRng::new(seed);
        let u = unitary_exp_step(&rng.hermitian(part.dim(), 0.3), 1.0, &p).unwrap();
        let bu = split_blocks(&u, part, &p).unwrap();
        let fact = coset_factorize(&bu, &p).unwrap();
        prop_assert!(max_abs(&(fact.reassemble() - &u)) < 1e-12);

        let zp = extract_z(&bu, &p).unwrap();
        let u0 = reconstruct_u0(&zp, &p).unwrap();
        prop_assert!(max_abs(&(u0.assemble() - fact.u0.assemble())) < 1e-12);
        prop_assert!(unitarity_residual(&u0.assemble()) < 1e-12);
        let again = extract_z(&u0, &p).unwrap();
        prop_assert!(max_abs(&(again.z() - zp.z())) < 1e-12);
    }

    #[test]
    fn matrix_riccati_tracks_full_evolution(part in partition_strategy(), seed in any::<u64>()) {
        let p = prof();
        let h = constant(part, seed, 0.4);
        let mut rng = SeededRng::new(seed ^ 0x5a5a);
        let z0 = CosetPoint::new(part, rng.complex_matrix(part.n1(), part.n2(), 0.2)).unwrap();
        let u0 = reconstruct_u0(&z0, &p).unwrap().assemble();
        let steps = 500;
        let red = integrate_matrix_riccati(&h, &z0, 0.0, 1.0, steps, DEFAULT_GUARD, &p).unwrap();
        prop_assume!(red.breakdown.is_none());
        prop_assume!(red.points.iter().all(|zp| max_abs(zp.z()) <= 3.0));
        let full = evolve_unitary_from(&h, &u0, 0.0, 1.0, steps, &p).unwrap();
        let chart = p.after_steps(steps);
        for (zp, u) in red.points.iter().zip(&full.unitaries).step_by(25) {
            let exact = extract_z(&split_blocks(u, part, &chart).unwrap(), &chart).unwrap();
            prop_assert!(max_abs(&(zp.z() - exact.z())) < 1e-8);
        }
    }

    #[test]
    fn ray_reduction_matches_column_case(n1 in 1usize..5, seed in any::<u64>()) {
        let p = prof();
        let part = Partition::ray(n1 + 1).unwrap();
        let h = constant(part, seed, 0.5);
        let z = SeededRng::new(seed.wrapping_add(1)).complex_vector(n1, 0.4);
        let ray = integrate_reduced(&h, &RayPoint::new(z.clone()).unwrap(), 0.0, 0.0, 1.0, 200, DEFAULT_GUARD, &p).unwrap();
        let column = CosetPoint::new(part, CMat::from_column_slice(n1, 1, z.as_slice())).unwrap();
        let matrix = integrate_matrix_riccati(&h, &column, 0.0, 1.0, 200, DEFAULT_GUARD, &p).unwrap();
        for (a, b) in ray.points.iter().zip(&matrix.points) {
            prop_assert!((a.z() - b.z().column(0)).norm() < 1e-13);
        }
    }

    #[test]
    fn reduced_state_reassembles_schrodinger_state(n in 2usize..6, seed in any::<u64>()) {
        let p = prof();
        let part = Partition::ray(n).unwrap();
        let h = constant(part, seed, 0.5);
        let mut rng = SeededRng::new(seed ^ 0xabc);
        let mut psi0 = rng.unit_vector(n);
        let eta = psi0[n - 1];
        prop_assume!(eta.norm() > 0.3);
        psi0.scale_mut(1.0 / psi0.norm());
        let (z0, a0) = RayPoint::from_state(&psi0).unwrap();
        let red = integrate_reduced(&h, &z0, a0, 0.0, 1.0, 1000, DEFAULT_GUARD, &p).unwrap();
        prop_assume!(red.breakdown.is_none());
        prop_assume!(red.points.iter().all(|q| q.z().norm() <= 3.0));
        let full = evolve_state(&h, &psi0, 0.0, 1.0, 1000, &p).unwrap();
        for k in (0..red.times.len()).step_by(50) {
            prop_assert!((red.state(k) - &full.states[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn flow_and_brackets_at_random_points(n1 in 1usize..5, seed in any::<u64>(), scale in 0.1f64..1.5) {
        let mut rng = SeededRng::new(seed);
        let pt = RayPoint::new(rng.complex_vector(n1, scale)).unwrap();
        let hs = HamiltonianSample::from_full(&rng.hermitian(n1 + 1, 1.0), Partition::ray(n1 + 1).unwrap()).unwrap();
        let rhs = vector_riccati_rhs(&pt, &hs).unwrap();
        let g = pt.gamma();
        prop_assert!((hamiltonian_flow(&pt, &hs).unwrap() - &rhs).norm() < 1e-11 * (1.0 + rhs.norm()));
        prop_assert!(SymplecticMatrices::at(&pt).inverse_residual() < 1e-13 * g);
        prop_assert!(pb_gamma_identities(&pt).unwrap().max() < 1e-13 * g.powi(3));
    }

    #[test]
    fn both_phase_routes_agree_on_open_trajectories(seed in any::<u64>(), t1 in 0.5f64..3.0) {
        let p = prof();
        let part = Partition::ray(2).unwrap();
        let h = constant(part, seed, 1.0);
        let z0 = RayPoint::new(CVec::from_element(1, C64::new(0.3, -0.2))).unwrap();
        let traj = integrate_reduced(&h, &z0, 0.4, 0.0, t1, 3000, DEFAULT_GUARD, &p).unwrap();
        prop_assume!(traj.breakdown.is_none());
        prop_assume!(traj.points.iter().all(|q| q.z().norm() <= 5.0));
        let schrodinger = geometric_phase_schrodinger(&traj, &h, 0.0, t1, &p).unwrap();
        let kinematic = kinematic_phases(&KinematicCurve::from_trajectory(&traj).unwrap()).unwrap();
        // Trapezoid line integral: O(h²), with a constant that grows with |z|.
        prop_assert!(angle_distance(schrodinger.phi_geometric, kinematic.phi_geometric) < 1e-5);
        prop_assert!(angle_distance(schrodinger.phi_total, kinematic.phi_total) < 1e-9);
        prop_assert!(schrodinger.additivity_residual() < 1e-12);
    }
}
