mod common;

use num_complex::Complex64;
use rand::Rng;

use qcontrol::operators::{
    embed, expm, pauli_x, pauli_z, ComplexMatrix, HermitianOperator, TensorSpace,
};
use qcontrol::state::{
    apply_unitary, basis_state, entanglement_entropy, fidelity, make_pure,
    measurement_distribution, purity, sample_measurement, QuantumState, PROB_FLOOR,
};
use qcontrol::Error;

use common::{
    binomial_band, naive_mul, random_hermitian, random_mixed_state, random_pure_state, rng,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn qubit() -> TensorSpace {
    TensorSpace::qubits(1).unwrap()
}

#[test]
fn construction_rejects_malformed_density_matrices() {
    let space = qubit();
    // Wrong trace.
    let double = ComplexMatrix::identity(2);
    assert!(matches!(
        QuantumState::from_density(space.clone(), double),
        Err(Error::InvalidState { .. })
    ));
    // Negative eigenvalue, trace one.
    let mut indefinite = ComplexMatrix::zeros(2, 2);
    indefinite[(0, 0)] = c(1.5, 0.0);
    indefinite[(1, 1)] = c(-0.5, 0.0);
    assert!(matches!(
        QuantumState::from_density(space.clone(), indefinite),
        Err(Error::InvalidState { .. })
    ));
    // Not hermitian.
    let mut skew = ComplexMatrix::zeros(2, 2);
    skew[(0, 0)] = c(1.0, 0.0);
    skew[(0, 1)] = c(0.3, 0.0);
    assert!(QuantumState::from_density(space, skew).is_err());
}

#[test]
fn make_pure_normalizes_and_rejects_zero() {
    let space = qubit();
    let state = make_pure(&space, &[c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
    let amps = state.amplitudes().unwrap();
    assert!((amps[0].re - 0.6).abs() < 1e-12);
    assert!((amps[1].re - 0.8).abs() < 1e-12);
    assert!(matches!(
        make_pure(&space, &[c(0.0, 0.0), c(0.0, 0.0)]),
        Err(Error::ZeroStateVector)
    ));
}

#[test]
fn unitary_application_matches_conjugation_oracle() {
    let mut r = rng(31);
    let space = TensorSpace::qubits(2).unwrap();
    for _ in 0..10 {
        let state = random_mixed_state(&mut r, &space);
        let u = expm(&random_hermitian(&mut r, 4), 0.7).unwrap();
        let moved = apply_unitary(&state, &u, &[0, 1]).unwrap();
        let expect = naive_mul(&naive_mul(u.matrix(), state.rho()), &u.matrix().adjoint());
        assert!(moved.rho().approx_eq(&expect, 1e-10));
        assert!((purity(&moved) - purity(&state)).abs() < 1e-10);
    }
}

#[test]
fn local_unitary_leaves_other_factors_alone() {
    let mut r = rng(32);
    let space = TensorSpace::qubits(2).unwrap();
    let state = random_pure_state(&mut r, &space);
    let u = expm(&HermitianOperator::new(pauli_x()).unwrap(), 0.9).unwrap();
    let moved = apply_unitary(&state, &u, &[1]).unwrap();
    let full = embed(u.matrix(), &space, 1).unwrap();
    let expect = naive_mul(&naive_mul(&full, state.rho()), &full.adjoint());
    assert!(moved.rho().approx_eq(&expect, 1e-10));
    assert!(moved.amplitudes().is_some());
}

#[test]
fn measurement_distribution_obeys_born_rule() {
    let mut r = rng(33);
    let space = TensorSpace::new(vec![2, 3]).unwrap();
    for _ in 0..10 {
        let state = random_mixed_state(&mut r, &space);
        let observable = random_hermitian(&mut r, 6);
        let dist = measurement_distribution(&state, &observable, &[0, 1], "m").unwrap();
        let total: f64 = dist.outcomes.iter().map(|o| o.probability).sum();
        assert!(total > 1.0 - 1e-9 - dist.omitted as f64 * PROB_FLOOR);
        assert!(total < 1.0 + 1e-9);
        // Eigenvalues strictly descending across outcomes.
        for pair in dist.outcomes.windows(2) {
            assert!(pair[0].eigenvalue > pair[1].eigenvalue);
        }
        for outcome in &dist.outcomes {
            assert!(outcome.probability > PROB_FLOOR);
            let trace = outcome.post_state.rho().trace().unwrap();
            assert!((trace.re - 1.0).abs() < 1e-9 && trace.im.abs() < 1e-12);
        }
    }
}

#[test]
fn degenerate_observable_clusters_eigenvalues() {
    let mut r = rng(34);
    let space = TensorSpace::qubits(2).unwrap();
    let state = random_pure_state(&mut r, &space);
    // z on the first qubit has two doubly degenerate eigenvalues +-1.
    let observable = HermitianOperator::new(pauli_z().kron(&ComplexMatrix::identity(2))).unwrap();
    let dist = measurement_distribution(&state, &observable, &[0, 1], "m").unwrap();
    assert_eq!(dist.outcomes.len() + dist.omitted, 2);
    let up = &dist.outcomes[0];
    assert!((up.eigenvalue - 1.0).abs() < 1e-10);
    // The projector keeps both controller components: probability equals
    // the total weight of the first-qubit-up block.
    let expect: f64 = state.rho()[(0, 0)].re + state.rho()[(1, 1)].re;
    assert!((up.probability - expect).abs() < 1e-10);
}

#[test]
fn measurement_on_eigenstate_is_non_demolition() {
    let mut r = rng(35);
    let space = qubit();
    let state = random_pure_state(&mut r, &space);
    let observable = HermitianOperator::new(pauli_z()).unwrap();
    let dist = measurement_distribution(&state, &observable, &[0], "m").unwrap();
    for outcome in &dist.outcomes {
        let again = measurement_distribution(&outcome.post_state, &observable, &[0], "m").unwrap();
        assert_eq!(again.outcomes.len(), 1);
        assert_eq!(again.outcomes[0].cluster_index, outcome.cluster_index);
        assert!((again.outcomes[0].probability - 1.0).abs() < 1e-10);
        assert!(again.outcomes[0]
            .post_state
            .approx_eq(&outcome.post_state, 1e-9));
    }
}

#[test]
fn omitted_outcomes_keep_cluster_indices_stable() {
    let space = qubit();
    let down = basis_state(&space, 1).unwrap();
    let observable = HermitianOperator::new(pauli_z()).unwrap();
    let dist = measurement_distribution(&down, &observable, &[0], "m").unwrap();
    // The +1 outcome has zero probability and is dropped, but the -1
    // outcome keeps its position in the full eigenvalue ordering.
    assert_eq!(dist.outcomes.len(), 1);
    assert_eq!(dist.omitted, 1);
    assert_eq!(dist.outcomes[0].cluster_index, 1);
    assert!((dist.outcomes[0].eigenvalue + 1.0).abs() < 1e-12);
}

#[test]
fn partial_measurement_preserves_the_unmeasured_factor() {
    // Measure qubit 0 of (a|0> + b|1>) (x) |psi>: the post states keep
    // |psi> intact on qubit 1.
    let space = TensorSpace::qubits(2).unwrap();
    let psi = [c(0.28, 0.0), c(0.96, 0.0)];
    let amps = [
        psi[0].scale(0.6),
        psi[1].scale(0.6),
        psi[0].scale(0.8),
        psi[1].scale(0.8),
    ];
    let state = make_pure(&space, &amps).unwrap();
    let observable = HermitianOperator::new(pauli_z()).unwrap();
    let dist = measurement_distribution(&state, &observable, &[0], "m").unwrap();
    assert_eq!(dist.outcomes.len(), 2);
    assert!((dist.outcomes[0].probability - 0.36).abs() < 1e-12);
    assert!((dist.outcomes[1].probability - 0.64).abs() < 1e-12);
    let expect_up = make_pure(&space, &[psi[0], psi[1], c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert!(dist.outcomes[0].post_state.approx_eq(&expect_up, 1e-10));
}

#[test]
fn sampling_is_reproducible_and_statistically_sound() {
    let space = qubit();
    let state = make_pure(&space, &[c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
    let observable = HermitianOperator::new(pauli_z()).unwrap();
    for seed in 0..3 {
        let n = 2000;
        let mut count_up = 0;
        for t in 0..n {
            let mut r = rng(seed * 10_000 + t);
            let outcome = sample_measurement(&state, &observable, &[0], "m", &mut r).unwrap();
            if outcome.cluster_index == 0 {
                count_up += 1;
            }
        }
        let (lo, hi) = binomial_band(0.36, n as usize);
        assert!(
            (count_up as f64) > lo && (count_up as f64) < hi,
            "seed {}: {} ups outside [{:.1}, {:.1}]",
            seed,
            count_up,
            lo,
            hi
        );
    }
    // Identical seeds give identical outcomes.
    let mut r1 = rng(99);
    let mut r2 = rng(99);
    for _ in 0..50 {
        let o1 = sample_measurement(&state, &observable, &[0], "m", &mut r1).unwrap();
        let o2 = sample_measurement(&state, &observable, &[0], "m", &mut r2).unwrap();
        assert_eq!(o1.cluster_index, o2.cluster_index);
    }
}

#[test]
fn fidelity_agrees_with_pure_overlap() {
    let mut r = rng(36);
    let space = TensorSpace::qubits(2).unwrap();
    for _ in 0..10 {
        let a = random_pure_state(&mut r, &space);
        let b = random_pure_state(&mut r, &space);
        let overlap: Complex64 = a
            .amplitudes()
            .unwrap()
            .iter()
            .zip(b.amplitudes().unwrap())
            .map(|(x, y)| x.conj() * y)
            .sum();
        let expect = overlap.norm_sqr();
        assert!((fidelity(&a, &b).unwrap() - expect).abs() < 1e-10);
        // Mixed-path evaluation agrees with the pure fast path.
        let a_mixed = QuantumState::from_density(space.clone(), a.rho().clone()).unwrap();
        assert!((fidelity(&a_mixed, &b).unwrap() - expect).abs() < 1e-8);
    }
}

#[test]
fn fidelity_is_symmetric_and_normalized() {
    let mut r = rng(37);
    let space = qubit();
    for _ in 0..10 {
        let a = random_mixed_state(&mut r, &space);
        let b = random_mixed_state(&mut r, &space);
        let ab = fidelity(&a, &b).unwrap();
        let ba = fidelity(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-8);
        assert!((0.0..=1.0).contains(&ab));
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn fidelity_of_commuting_states_matches_classical_formula() {
    let space = qubit();
    let diag = |p: f64| {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = c(p, 0.0);
        m[(1, 1)] = c(1.0 - p, 0.0);
        QuantumState::from_density(space.clone(), m).unwrap()
    };
    let (p, q): (f64, f64) = (0.3, 0.7);
    let expect = ((p * q).sqrt() + ((1.0 - p) * (1.0 - q)).sqrt()).powi(2);
    assert!((fidelity(&diag(p), &diag(q)).unwrap() - expect).abs() < 1e-10);
}

#[test]
fn purity_tracks_mixedness() {
    let mut r = rng(38);
    let space = qubit();
    let pure = random_pure_state(&mut r, &space);
    assert!((purity(&pure) - 1.0).abs() < 1e-10);
    let maximally_mixed =
        QuantumState::from_density(space.clone(), ComplexMatrix::identity(2).scale_re(0.5))
            .unwrap();
    assert!((purity(&maximally_mixed) - 0.5).abs() < 1e-12);
    let mixed = random_mixed_state(&mut r, &space);
    let p = purity(&mixed);
    assert!((0.5 - 1e-12..1.0).contains(&p));
}

#[test]
fn entropy_of_known_states() {
    let two = TensorSpace::qubits(2).unwrap();
    let inv = 1.0 / 2.0f64.sqrt();
    let bell = make_pure(&two, &[c(inv, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(inv, 0.0)]).unwrap();
    assert!((entanglement_entropy(&bell, &[0]).unwrap() - 1.0).abs() < 1e-10);
    let product = basis_state(&two, 2).unwrap();
    assert!(entanglement_entropy(&product, &[0]).unwrap().abs() < 1e-10);

    let three = TensorSpace::qubits(3).unwrap();
    let mut ghz = vec![c(0.0, 0.0); 8];
    ghz[0] = c(inv, 0.0);
    ghz[7] = c(inv, 0.0);
    let ghz = make_pure(&three, &ghz).unwrap();
    assert!((entanglement_entropy(&ghz, &[0]).unwrap() - 1.0).abs() < 1e-10);

    let w_amp = 1.0 / 3.0f64.sqrt();
    let mut w = vec![c(0.0, 0.0); 8];
    w[1] = c(w_amp, 0.0);
    w[2] = c(w_amp, 0.0);
    w[4] = c(w_amp, 0.0);
    let w = make_pure(&three, &w).unwrap();
    let h = -(1.0 / 3.0f64) * (1.0f64 / 3.0).log2() - (2.0 / 3.0f64) * (2.0f64 / 3.0).log2();
    assert!((entanglement_entropy(&w, &[0]).unwrap() - h).abs() < 1e-10);
}

#[test]
fn entropy_is_symmetric_across_the_cut() {
    let mut r = rng(39);
    let space = TensorSpace::new(vec![2, 3]).unwrap();
    for _ in 0..10 {
        let state = random_pure_state(&mut r, &space);
        let left = entanglement_entropy(&state, &[0]).unwrap();
        let right = entanglement_entropy(&state, &[1]).unwrap();
        assert!((left - right).abs() < 1e-8);
    }
}

#[test]
fn entropy_rejects_mixed_global_states() {
    let mut r = rng(40);
    let space = TensorSpace::qubits(2).unwrap();
    let mixed = random_mixed_state(&mut r, &space);
    assert!(matches!(
        entanglement_entropy(&mixed, &[0]),
        Err(Error::MixedGlobalState { .. })
    ));
}

#[test]
fn state_serde_round_trips_both_representations() {
    let mut r = rng(41);
    let space = TensorSpace::qubits(2).unwrap();
    let pure = random_pure_state(&mut r, &space);
    let json = serde_json::to_string(&pure).unwrap();
    assert!(json.contains("\"pure\""));
    let back: QuantumState = serde_json::from_str(&json).unwrap();
    assert!(back.approx_eq(&pure, 1e-12));
    assert!(back.amplitudes().is_some());

    let mixed = random_mixed_state(&mut r, &space);
    let json = serde_json::to_string(&mixed).unwrap();
    let back: QuantumState = serde_json::from_str(&json).unwrap();
    assert!(back.approx_eq(&mixed, 1e-12));
    assert!(back.amplitudes().is_none());
}

#[test]
fn state_serde_rejects_inconsistent_payloads() {
    // Neither representation present.
    assert!(serde_json::from_str::<QuantumState>("{\"dims\":[2]}").is_err());
    // Unnormalized rho.
    let bad = "{\"dims\":[2],\"rho\":{\"dim_rows\":2,\"dim_cols\":2,\"entries\":[[2,0],[0,0],[0,0],[0,0]]}}";
    assert!(serde_json::from_str::<QuantumState>(bad).is_err());
}

#[test]
fn rng_stream_matches_known_counts() {
    // The sampler consumes exactly one uniform draw per measurement.
    let space = qubit();
    let state = make_pure(&space, &[c(inv2(), 0.0), c(inv2(), 0.0)]).unwrap();
    let observable = HermitianOperator::new(pauli_z()).unwrap();
    let mut r1 = rng(7);
    let mut r2 = rng(7);
    let _ = sample_measurement(&state, &observable, &[0], "m", &mut r1).unwrap();
    let first: f64 = r2.random();
    let _ = first;
    let a: u64 = r1.random();
    let b: u64 = r2.random();
    assert_eq!(a, b);
}

fn inv2() -> f64 {
    1.0 / 2.0f64.sqrt()
}
