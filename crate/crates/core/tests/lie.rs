mod common;

use qcontrol::lie::{
    closed_loop_controllable, default_max_generations, is_nontrivial, lie_closure,
    observable_quantum, observable_semiclassical, open_loop_controllable, quantum_controllable,
    ControlSystem, Coupling, VerdictKind, DEFAULT_CLOSURE_TOL,
};
use qcontrol::operators::{pauli_x, pauli_z, ComplexMatrix, HermitianOperator};
use qcontrol::Error;

use common::{closure_dim_oracle, random_hermitian, rng};

fn herm(m: ComplexMatrix) -> HermitianOperator {
    HermitianOperator::new(m).unwrap()
}

fn closure_dim(gens: &[HermitianOperator]) -> usize {
    let n = gens[0].dim();
    lie_closure(gens, DEFAULT_CLOSURE_TOL, default_max_generations(n))
        .unwrap()
        .dim_found
}

#[test]
fn two_paulis_generate_all_of_su2() {
    let gens = vec![herm(pauli_z()), herm(pauli_x())];
    let report = lie_closure(&gens, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert_eq!(report.dim_found, 3);
    assert!(report.full);
    assert_eq!(report.full_dim, 3);
    // One round discovers the third direction, the next adds nothing.
    assert_eq!(report.generations, 1);
    assert_eq!(closure_dim_oracle(&gens, 2), 3);
}

#[test]
fn closure_basis_is_orthonormal_and_traceless() {
    let gens = vec![herm(pauli_z()), herm(pauli_x())];
    let report = lie_closure(&gens, DEFAULT_CLOSURE_TOL, 4).unwrap();
    for (i, a) in report.basis.iter().enumerate() {
        assert!(a.matrix().trace().unwrap().norm() < 1e-10);
        for (j, b) in report.basis.iter().enumerate() {
            let inner = a.matrix().hs_inner(b.matrix()).unwrap();
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((inner.re - expect).abs() < 1e-9 && inner.im.abs() < 1e-9);
        }
    }
}

#[test]
fn commuting_diagonal_set_stays_three_dimensional() {
    let zz = pauli_z().kron(&pauli_z());
    let zi = pauli_z().kron(&ComplexMatrix::identity(2));
    let iz = ComplexMatrix::identity(2).kron(&pauli_z());
    let gens = vec![herm(zi), herm(iz), herm(zz)];
    let report = lie_closure(&gens, DEFAULT_CLOSURE_TOL, 16).unwrap();
    assert_eq!(report.dim_found, 3);
    assert!(!report.full);
    assert_eq!(report.full_dim, 15);
    assert_eq!(report.generations, 0);
    assert_eq!(closure_dim_oracle(&gens, 4), 3);
}

#[test]
fn embedded_single_spin_algebra_stays_three_dimensional() {
    let xi = pauli_x().kron(&ComplexMatrix::identity(2));
    let yi = pauli_z().kron(&ComplexMatrix::identity(2));
    let gens = vec![herm(xi), herm(yi)];
    assert_eq!(closure_dim(&gens), 3);
    assert_eq!(closure_dim_oracle(&gens, 4), 3);
}

#[test]
fn random_two_generator_sets_reach_full_dimension() {
    for n in [2usize, 3, 4] {
        for seed in 0..21 {
            let mut r = rng(1000 * n as u64 + seed);
            let gens = vec![random_hermitian(&mut r, n), random_hermitian(&mut r, n)];
            let report =
                lie_closure(&gens, DEFAULT_CLOSURE_TOL, default_max_generations(n)).unwrap();
            assert!(
                report.full,
                "n={} seed={} reached only {} of {}",
                n, seed, report.dim_found, report.full_dim
            );
            assert_eq!(report.dim_found, closure_dim_oracle(&gens, n));
        }
    }
}

#[test]
fn structured_mixed_instances_agree_with_rank_oracle() {
    let zz = herm(pauli_z().kron(&pauli_z()));
    let x1 = herm(pauli_x().kron(&ComplexMatrix::identity(2)));
    let x2 = herm(ComplexMatrix::identity(2).kron(&pauli_x()));
    let sum_x = herm(
        pauli_x()
            .kron(&ComplexMatrix::identity(2))
            .add(&ComplexMatrix::identity(2).kron(&pauli_x()))
            .unwrap(),
    );
    let cases: Vec<Vec<HermitianOperator>> = vec![
        vec![zz.clone(), x1.clone()],
        vec![zz.clone(), sum_x],
        vec![zz, x1, x2],
    ];
    for gens in cases {
        assert_eq!(closure_dim(&gens), closure_dim_oracle(&gens, 4));
    }
}

#[test]
fn scalar_generators_are_ignored() {
    let identity = ComplexMatrix::identity(2);
    let shifted = pauli_z().add(&identity.scale_re(5.0)).unwrap();
    // A pure scalar contributes nothing; a shifted generator contributes
    // its traceless part.
    let gens = vec![herm(identity), herm(shifted), herm(pauli_x())];
    assert_eq!(closure_dim(&gens), 3);
    assert!(!is_nontrivial(&herm(ComplexMatrix::identity(2))));
    assert!(is_nontrivial(&herm(pauli_z())));
}

#[test]
fn scalar_only_generators_close_to_dimension_zero() {
    let gens = vec![herm(ComplexMatrix::identity(3))];
    let report = lie_closure(&gens, DEFAULT_CLOSURE_TOL, 9).unwrap();
    assert_eq!(report.dim_found, 0);
    assert!(!report.full);
    assert!(matches!(
        lie_closure(&[], DEFAULT_CLOSURE_TOL, 9),
        Err(Error::NoGenerators)
    ));
}

#[test]
fn generation_budget_is_enforced() {
    // Random 4x4 pairs need more than one round to fill su(4); verify the
    // budget of one round either completes early or reports
    // non-stabilization, never silently truncates.
    let mut r = rng(77);
    let gens = vec![random_hermitian(&mut r, 4), random_hermitian(&mut r, 4)];
    let unconstrained = lie_closure(&gens, DEFAULT_CLOSURE_TOL, 16).unwrap();
    assert!(unconstrained.full);
    assert!(unconstrained.generations >= 2);
    match lie_closure(&gens, DEFAULT_CLOSURE_TOL, 1) {
        Err(Error::ClosureNotStabilized {
            max_generations,
            dim_found,
            full_dim,
        }) => {
            assert_eq!(max_generations, 1);
            assert!(dim_found < full_dim);
        }
        other => panic!("expected non-stabilization, got {:?}", other.map(|r| r.dim_found)),
    }
}

fn spin_system() -> ControlSystem {
    // One driven spin measured in z and coupled to a controller spin.
    ControlSystem::new(
        2,
        herm(pauli_z().scale_re(0.5)),
        vec![herm(pauli_x())],
        vec![herm(pauli_z())],
        vec![Coupling {
            system: herm(pauli_z()),
            controller: herm(pauli_z()),
        }],
    )
    .unwrap()
}

#[test]
fn driven_spin_passes_all_five_verdicts() {
    let sys = spin_system();
    let open = open_loop_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert!(open.answer);
    assert_eq!(open.kind, VerdictKind::OpenLoopSemiclassical);
    assert_eq!(open.closure.dim_found, 3);
    let closed = closed_loop_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert!(closed.answer);
    let quantum = quantum_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert!(quantum.answer);
    assert!(quantum.notes.iter().any(|n| n.contains("union")));
    assert!(observable_semiclassical(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap().answer);
    assert!(observable_quantum(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap().answer);
}

#[test]
fn missing_measurement_blocks_closed_loop_only() {
    let sys = ControlSystem::new(
        2,
        herm(pauli_z().scale_re(0.5)),
        vec![herm(pauli_x())],
        vec![],
        vec![Coupling {
            system: herm(pauli_z()),
            controller: herm(pauli_z()),
        }],
    )
    .unwrap();
    let open = open_loop_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert!(open.answer);
    let closed = closed_loop_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert!(!closed.answer);
    assert!(closed
        .reasons
        .iter()
        .any(|r| r == "no nontrivial measurement"));
    let quantum = quantum_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert!(quantum.answer);
}

#[test]
fn missing_coupling_blocks_quantum_only() {
    let sys = ControlSystem::new(
        2,
        herm(pauli_z().scale_re(0.5)),
        vec![herm(pauli_x())],
        vec![herm(pauli_z())],
        vec![],
    )
    .unwrap();
    assert!(closed_loop_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap().answer);
    let quantum = quantum_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert!(!quantum.answer);
    assert!(quantum.reasons.iter().any(|r| r == "no nontrivial coupling"));
}

#[test]
fn scalar_coupling_side_does_not_count() {
    let sys = ControlSystem::new(
        2,
        herm(pauli_z().scale_re(0.5)),
        vec![herm(pauli_x())],
        vec![],
        vec![Coupling {
            system: herm(pauli_z()),
            controller: herm(ComplexMatrix::identity(2)),
        }],
    )
    .unwrap();
    let quantum = quantum_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap();
    assert!(!quantum.answer);
    assert!(quantum.reasons.iter().any(|r| r == "no nontrivial coupling"));
}

#[test]
fn drift_only_system_fails_everything() {
    let sys = ControlSystem::new(2, herm(pauli_z()), vec![], vec![], vec![]).unwrap();
    assert!(!open_loop_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap().answer);
    assert!(!closed_loop_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap().answer);
    assert!(!quantum_controllable(&sys, DEFAULT_CLOSURE_TOL, 4).unwrap().answer);
}

#[test]
fn control_system_serde_round_trips() {
    let sys = spin_system();
    let json = serde_json::to_string(&sys).unwrap();
    let back: ControlSystem = serde_json::from_str(&json).unwrap();
    assert_eq!(back, sys);
    // Lists are optional on the wire.
    let minimal = format!(
        "{{\"dim\":2,\"drift\":{}}}",
        serde_json::to_string(&herm(pauli_z())).unwrap()
    );
    let parsed: ControlSystem = serde_json::from_str(&minimal).unwrap();
    assert!(parsed.controls().is_empty());
    assert!(parsed.measurements().is_empty());
}

#[test]
fn control_system_rejects_mismatched_operator_dimensions() {
    let bad = ControlSystem::new(
        2,
        herm(pauli_z()),
        vec![herm(pauli_x().kron(&pauli_x()))],
        vec![],
        vec![],
    );
    assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
}
