//! Feedback-protocol step language and executors.
//!
//! A protocol is an ordered list of steps over a fixed tensor space:
//! unitaries, conditional flips, projective measurements, classical
//! branching on recorded outcomes, and Hamiltonian evolution. Two
//! executors run protocols exactly: [`run_enumerate`] expands every
//! measurement outcome into a weighted trajectory, [`run_sampled`] draws
//! seeded Monte-Carlo trajectories. The built-ins realize the canonical
//! worked examples of semiclassical and coherent feedback control, and
//! [`verify_state_transfer`] certifies that a coherent protocol moves the
//! system state, entanglements included, onto the controller.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    embed_multi, expm, hermitian_eigen, partial_trace, pauli_x, pauli_z, svd, ComplexMatrix,
    HermitianOperator, TensorSpace, UnitaryOperator,
};
use crate::state::{
    apply_unitary, make_pure, measurement_distribution, sample_measurement, MeasurementOutcome,
    QuantumState,
};

/// Maximum number of enumerated trajectories.
pub const BRANCH_CAP: usize = 4096;
/// A transfer is certified when the probe fidelity reaches `1 - this`.
pub const TRANSFER_TOL: f64 = 1e-9;
/// Name of the deterministic generator behind sampled runs.
pub const GENERATOR_NAME: &str = "chacha12";

/// One step of a feedback protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProtocolStep {
    /// Apply `u` on the listed factors (in the given order).
    Unitary {
        u: UnitaryOperator,
        targets: Vec<usize>,
    },
    /// Flip the target qubit iff the control qubit is in basis state
    /// `control_value`.
    #[serde(rename = "cflip")]
    ConditionalFlip {
        control: usize,
        control_value: usize,
        target: usize,
    },
    /// Projective non-demolition measurement, outcome stored under
    /// `record_key`.
    Measure {
        observable: HermitianOperator,
        targets: Vec<usize>,
        record_key: String,
    },
    /// Run the steps of the case matching the recorded outcome index of
    /// `record_key`; outcomes with no case run nothing.
    Branch {
        record_key: String,
        #[serde(deserialize_with = "deserialize_cases")]
        cases: BTreeMap<usize, Vec<ProtocolStep>>,
    },
    /// Evolve the whole space under `exp(-i H t)`.
    Evolve {
        hamiltonian: HermitianOperator,
        duration: f64,
    },
}

/// JSON object keys are strings, so outcome indices arrive as `"0"`,
/// `"1"`, ... and are parsed back to integers here.
fn deserialize_cases<'de, D>(
    deserializer: D,
) -> std::result::Result<BTreeMap<usize, Vec<ProtocolStep>>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw = BTreeMap::<String, Vec<ProtocolStep>>::deserialize(deserializer)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse::<usize>()
                .map(|k| (k, v))
                .map_err(|_| serde::de::Error::custom(format!("case key \"{}\" is not an outcome index", k)))
        })
        .collect()
}

/// A validated step sequence over a fixed tensor space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ProtocolSchema", into = "ProtocolSchema")]
pub struct Protocol {
    space: TensorSpace,
    label: String,
    steps: Vec<ProtocolStep>,
}

/// Wire format: factor dimensions, label, steps.
#[derive(Serialize, Deserialize)]
struct ProtocolSchema {
    dims: Vec<usize>,
    label: String,
    steps: Vec<ProtocolStep>,
}

impl TryFrom<ProtocolSchema> for Protocol {
    type Error = Error;

    fn try_from(s: ProtocolSchema) -> Result<Self> {
        Protocol::new(TensorSpace::new(s.dims)?, &s.label, s.steps)
    }
}

impl From<Protocol> for ProtocolSchema {
    fn from(p: Protocol) -> ProtocolSchema {
        ProtocolSchema {
            dims: p.space.dims().to_vec(),
            label: p.label,
            steps: p.steps,
        }
    }
}

impl Protocol {
    /// Validates every step against the space and checks that each branch
    /// references a measurement made earlier on its own execution path.
    pub fn new(space: TensorSpace, label: &str, steps: Vec<ProtocolStep>) -> Result<Self> {
        let mut defined = BTreeSet::new();
        validate_steps(&space, &steps, &mut defined)?;
        Ok(Protocol {
            space,
            label: label.to_string(),
            steps,
        })
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn steps(&self) -> &[ProtocolStep] {
        &self.steps
    }

    /// True when no execution path contains a measurement.
    pub fn is_measurement_free(&self) -> bool {
        fn free(steps: &[ProtocolStep]) -> bool {
            steps.iter().all(|s| match s {
                ProtocolStep::Measure { .. } => false,
                ProtocolStep::Branch { cases, .. } => cases.values().all(|c| free(c)),
                _ => true,
            })
        }
        free(&self.steps)
    }
}

fn check_targets(space: &TensorSpace, targets: &[usize], op_dim: usize) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidProtocol {
            context: "step has no target factors".into(),
        });
    }
    let mut seen = BTreeSet::new();
    let mut dim = 1;
    for &t in targets {
        dim *= space.factor_dim(t)?;
        if !seen.insert(t) {
            return Err(Error::InvalidProtocol {
                context: format!("duplicate target factor {}", t),
            });
        }
    }
    if dim != op_dim {
        return Err(Error::DimensionMismatch {
            context: format!(
                "operator of dimension {} on targets spanning dimension {}",
                op_dim, dim
            ),
        });
    }
    Ok(())
}

fn validate_steps(
    space: &TensorSpace,
    steps: &[ProtocolStep],
    defined: &mut BTreeSet<String>,
) -> Result<()> {
    for step in steps {
        match step {
            ProtocolStep::Unitary { u, targets } => check_targets(space, targets, u.dim())?,
            ProtocolStep::ConditionalFlip {
                control,
                control_value,
                target,
            } => {
                if control == target {
                    return Err(Error::InvalidProtocol {
                        context: format!("conditional flip with control = target = {}", control),
                    });
                }
                let control_dim = space.factor_dim(*control)?;
                let target_dim = space.factor_dim(*target)?;
                if control_dim != 2 || target_dim != 2 {
                    return Err(Error::NonQubitFactor {
                        control_dim,
                        target_dim,
                    });
                }
                if *control_value > 1 {
                    return Err(Error::InvalidProtocol {
                        context: format!("control value {} on a qubit", control_value),
                    });
                }
            }
            ProtocolStep::Measure {
                observable,
                targets,
                record_key,
            } => {
                check_targets(space, targets, observable.dim())?;
                defined.insert(record_key.clone());
            }
            ProtocolStep::Branch { record_key, cases } => {
                if !defined.contains(record_key) {
                    return Err(Error::MalformedBranch {
                        key: record_key.clone(),
                    });
                }
                // Keys recorded inside a case are visible only within it:
                // other cases never run on the same path, and later steps
                // cannot rely on a measurement only some cases make.
                for case_steps in cases.values() {
                    let mut inner = defined.clone();
                    validate_steps(space, case_steps, &mut inner)?;
                }
            }
            ProtocolStep::Evolve {
                hamiltonian,
                duration,
            } => {
                if hamiltonian.dim() != space.total_dim() {
                    return Err(Error::DimensionMismatch {
                        context: format!(
                            "evolution hamiltonian of dimension {} on a space of dimension {}",
                            hamiltonian.dim(),
                            space.total_dim()
                        ),
                    });
                }
                if !duration.is_finite() {
                    return Err(Error::InvalidProtocol {
                        context: "evolution duration must be finite".into(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Unitary that flips `target` iff `control` holds `control_value`,
/// embedded into the full space. An involution: applying it twice is the
/// identity.
pub fn conditional_flip_unitary(
    space: &TensorSpace,
    control: usize,
    control_value: usize,
    target: usize,
) -> Result<UnitaryOperator> {
    if control == target {
        return Err(Error::InvalidProtocol {
            context: format!("conditional flip with control = target = {}", control),
        });
    }
    let control_dim = space.factor_dim(control)?;
    let target_dim = space.factor_dim(target)?;
    if control_dim != 2 || target_dim != 2 {
        return Err(Error::NonQubitFactor {
            control_dim,
            target_dim,
        });
    }
    if control_value > 1 {
        return Err(Error::InvalidProtocol {
            context: format!("control value {} on a qubit", control_value),
        });
    }
    // Local basis on (control, target): |c t>.
    let local = ComplexMatrix::from_fn(4, 4, |row, col| {
        let (cr, tr) = (row / 2, row % 2);
        let (cc, tc) = (col / 2, col % 2);
        let flipped = if cc == control_value { 1 - tc } else { tc };
        if cr == cc && tr == flipped {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    UnitaryOperator::new(embed_multi(&local, space, &[control, target])?)
}

/// Recorded measurement result: which eigenvalue cluster fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub eigenvalue: f64,
    pub outcome_index: usize,
}

/// One execution path through a protocol.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryResult {
    pub final_state: QuantumState,
    pub records: BTreeMap<String, MeasurementRecord>,
    pub probability: f64,
    pub seed_info: String,
}

fn record_outcome(
    records: &mut BTreeMap<String, MeasurementRecord>,
    key: &str,
    outcome: &MeasurementOutcome,
) {
    records.insert(
        key.to_string(),
        MeasurementRecord {
            eigenvalue: outcome.eigenvalue,
            outcome_index: outcome.cluster_index,
        },
    );
}

fn apply_deterministic(
    space: &TensorSpace,
    state: &QuantumState,
    step: &ProtocolStep,
) -> Result<QuantumState> {
    match step {
        ProtocolStep::Unitary { u, targets } => apply_unitary(state, u, targets),
        ProtocolStep::ConditionalFlip {
            control,
            control_value,
            target,
        } => {
            let u = conditional_flip_unitary(space, *control, *control_value, *target)?;
            let all: Vec<usize> = (0..space.n_factors()).collect();
            apply_unitary(state, &u, &all)
        }
        ProtocolStep::Evolve {
            hamiltonian,
            duration,
        } => {
            let u = expm(hamiltonian, *duration)?;
            let all: Vec<usize> = (0..space.n_factors()).collect();
            apply_unitary(state, &u, &all)
        }
        ProtocolStep::Measure { .. } | ProtocolStep::Branch { .. } => unreachable!(
            "measure and branch are handled by the executors"
        ),
    }
}

fn branch_continuation(
    cases: &BTreeMap<usize, Vec<ProtocolStep>>,
    outcome_index: usize,
    tail: &[ProtocolStep],
) -> Vec<ProtocolStep> {
    let case_steps = cases.get(&outcome_index).map(Vec::as_slice).unwrap_or(&[]);
    case_steps.iter().chain(tail.iter()).cloned().collect()
}

fn enumerate_steps(
    space: &TensorSpace,
    state: QuantumState,
    probability: f64,
    records: BTreeMap<String, MeasurementRecord>,
    steps: &[ProtocolStep],
    out: &mut Vec<TrajectoryResult>,
) -> Result<()> {
    let Some((first, tail)) = steps.split_first() else {
        if out.len() == BRANCH_CAP {
            return Err(Error::BranchCapExceeded { cap: BRANCH_CAP });
        }
        out.push(TrajectoryResult {
            final_state: state,
            records,
            probability,
            seed_info: "enumerate".to_string(),
        });
        return Ok(());
    };
    match first {
        ProtocolStep::Measure {
            observable,
            targets,
            record_key,
        } => {
            let dist = measurement_distribution(&state, observable, targets, record_key)?;
            for outcome in dist.outcomes {
                let mut next_records = records.clone();
                record_outcome(&mut next_records, record_key, &outcome);
                enumerate_steps(
                    space,
                    outcome.post_state,
                    probability * outcome.probability,
                    next_records,
                    tail,
                    out,
                )?;
            }
            Ok(())
        }
        ProtocolStep::Branch { record_key, cases } => {
            let record = records
                .get(record_key)
                .ok_or_else(|| Error::MalformedBranch {
                    key: record_key.clone(),
                })?;
            let continuation = branch_continuation(cases, record.outcome_index, tail);
            enumerate_steps(space, state, probability, records, &continuation, out)
        }
        _ => {
            let next = apply_deterministic(space, &state, first)?;
            enumerate_steps(space, next, probability, records, tail, out)
        }
    }
}

/// Expands every measurement outcome depth-first into one weighted
/// trajectory, ordered by descending eigenvalue at each branch point.
/// Probabilities over all trajectories sum to 1 (minus any outcomes below
/// the probability floor).
pub fn run_enumerate(initial: &QuantumState, p: &Protocol) -> Result<Vec<TrajectoryResult>> {
    if initial.space() != p.space() {
        return Err(Error::DimensionMismatch {
            context: "initial state space does not match protocol space".into(),
        });
    }
    let mut out = Vec::new();
    enumerate_steps(
        p.space(),
        initial.clone(),
        1.0,
        BTreeMap::new(),
        p.steps(),
        &mut out,
    )?;
    Ok(out)
}

fn sample_steps(
    space: &TensorSpace,
    state: QuantumState,
    probability: f64,
    records: BTreeMap<String, MeasurementRecord>,
    steps: &[ProtocolStep],
    rng: &mut ChaCha12Rng,
) -> Result<(QuantumState, BTreeMap<String, MeasurementRecord>, f64)> {
    let Some((first, tail)) = steps.split_first() else {
        return Ok((state, records, probability));
    };
    match first {
        ProtocolStep::Measure {
            observable,
            targets,
            record_key,
        } => {
            let outcome = sample_measurement(&state, observable, targets, record_key, rng)?;
            let mut next_records = records;
            record_outcome(&mut next_records, record_key, &outcome);
            sample_steps(
                space,
                outcome.post_state,
                probability * outcome.probability,
                next_records,
                tail,
                rng,
            )
        }
        ProtocolStep::Branch { record_key, cases } => {
            let record = records
                .get(record_key)
                .ok_or_else(|| Error::MalformedBranch {
                    key: record_key.clone(),
                })?;
            let continuation = branch_continuation(cases, record.outcome_index, tail);
            sample_steps(space, state, probability, records, &continuation, rng)
        }
        _ => {
            let next = apply_deterministic(space, &state, first)?;
            sample_steps(space, next, probability, records, tail, rng)
        }
    }
}

/// Draws `n_trajectories` Monte-Carlo runs. Trajectory `t` uses stream `t`
/// of a ChaCha12 generator seeded with `seed`, so results are
/// reproducible and independent of execution order.
pub fn run_sampled(
    initial: &QuantumState,
    p: &Protocol,
    seed: u64,
    n_trajectories: usize,
) -> Result<Vec<TrajectoryResult>> {
    if initial.space() != p.space() {
        return Err(Error::DimensionMismatch {
            context: "initial state space does not match protocol space".into(),
        });
    }
    (0..n_trajectories)
        .map(|t| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let (final_state, records, probability) = sample_steps(
                p.space(),
                initial.clone(),
                1.0,
                BTreeMap::new(),
                p.steps(),
                &mut rng,
            )?;
            Ok(TrajectoryResult {
                final_state,
                records,
                probability,
                seed_info: format!("{}:seed={}:stream={}", GENERATOR_NAME, seed, t),
            })
        })
        .collect()
}

/// Measure-and-correct on one qubit: measure along z, and if the spin
/// came out up, flip it down with a pi pulse.
pub fn builtin_semiclassical_flip() -> Protocol {
    let space = TensorSpace::qubits(1).expect("one qubit");
    let pi_pulse = expm(
        &HermitianOperator::new(pauli_x()).expect("pauli x is hermitian"),
        std::f64::consts::FRAC_PI_2,
    )
    .expect("pi pulse is unitary");
    let steps = vec![
        ProtocolStep::Measure {
            observable: HermitianOperator::new(pauli_z()).expect("pauli z is hermitian"),
            targets: vec![0],
            record_key: "m".to_string(),
        },
        ProtocolStep::Branch {
            record_key: "m".to_string(),
            cases: BTreeMap::from([(
                0,
                vec![ProtocolStep::Unitary {
                    u: pi_pulse,
                    targets: vec![0],
                }],
            )]),
        },
    ];
    Protocol::new(space, "semiclassical_flip", steps).expect("static protocol is valid")
}

/// Coherent feedback on (system, controller), both starting roles as
/// qubits: flip the controller conditioned on the system, then flip the
/// system conditioned on the controller. Moves `a|up> + b|down>` from the
/// system onto the controller with no measurement anywhere.
pub fn builtin_quantum_controller() -> Protocol {
    let space = TensorSpace::qubits(2).expect("two qubits");
    let steps = vec![
        ProtocolStep::ConditionalFlip {
            control: 0,
            control_value: 0,
            target: 1,
        },
        ProtocolStep::ConditionalFlip {
            control: 1,
            control_value: 0,
            target: 0,
        },
    ];
    Protocol::new(space, "quantum_controller", steps).expect("static protocol is valid")
}

/// Coherent feedback on three qubits that exchanges the states of factors
/// 0 and 1 (three conditional flips compose to a swap) while never acting
/// on factor 2, so any entanglement with factor 2 moves along.
pub fn builtin_entanglement_transfer() -> Protocol {
    let space = TensorSpace::qubits(3).expect("three qubits");
    let steps = vec![
        ProtocolStep::ConditionalFlip {
            control: 0,
            control_value: 0,
            target: 1,
        },
        ProtocolStep::ConditionalFlip {
            control: 1,
            control_value: 0,
            target: 0,
        },
        ProtocolStep::ConditionalFlip {
            control: 0,
            control_value: 0,
            target: 1,
        },
    ];
    Protocol::new(space, "entanglement_transfer", steps).expect("static protocol is valid")
}

/// Outcome of the entangled-probe transfer check.
#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub transferred: bool,
    pub fidelity: f64,
    /// Local basis change on the controller under which the transfer is
    /// exact, when one exists.
    pub controller_unitary: ComplexMatrix,
    pub tol_used: f64,
}

/// Certifies that a measurement-free protocol transfers the system
/// factor's state, entanglements included, onto the controller factor.
///
/// The system starts maximally entangled with an external reference; the
/// remaining protocol factors start in `rest_initial` (a pure state over
/// the non-system factors in ascending order). After the run, the
/// reference-controller pair must be maximally entangled up to a local
/// unitary on the controller, which is found by polar decomposition and
/// reported.
pub fn verify_state_transfer(
    p: &Protocol,
    system_factor: usize,
    controller_factor: usize,
    rest_initial: &QuantumState,
) -> Result<TransferReport> {
    let n_factors = p.space().n_factors();
    if system_factor == controller_factor {
        return Err(Error::InvalidProtocol {
            context: "system and controller must be distinct factors".into(),
        });
    }
    let d_sys = p.space().factor_dim(system_factor)?;
    let d_ctl = p.space().factor_dim(controller_factor)?;
    if d_sys != d_ctl {
        return Err(Error::DimensionMismatch {
            context: format!(
                "system dimension {} vs controller dimension {}",
                d_sys, d_ctl
            ),
        });
    }
    if !p.is_measurement_free() {
        return Err(Error::MeasurementInTransferProtocol);
    }
    let rest_factors: Vec<usize> = (0..n_factors).filter(|&f| f != system_factor).collect();
    let rest_dims: Vec<usize> = rest_factors.iter().map(|&f| p.space().dims()[f]).collect();
    if rest_initial.space().dims() != rest_dims.as_slice() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "rest state dims {:?} do not match non-system factors {:?}",
                rest_initial.space().dims(),
                rest_dims
            ),
        });
    }
    let rest_amps = rest_initial.amplitudes().ok_or(Error::InvalidState {
        context: "probe construction requires a pure rest state".into(),
    })?;
    let rest_space = rest_initial.space();

    // Extended space: reference factor prepended, protocol factors shifted
    // by one.
    let mut ext_dims = vec![d_sys];
    ext_dims.extend_from_slice(p.space().dims());
    let ext_space = TensorSpace::new(ext_dims)?;
    let ext_dim = ext_space.total_dim();
    let scale = 1.0 / (d_sys as f64).sqrt();
    let mut amps = vec![Complex64::new(0.0, 0.0); ext_dim];
    for (flat, amp) in amps.iter_mut().enumerate() {
        let multi = ext_space.unravel(flat);
        if multi[0] != multi[system_factor + 1] {
            continue;
        }
        let rest_multi: Vec<usize> = rest_factors.iter().map(|&f| multi[f + 1]).collect();
        *amp = rest_amps[rest_space.ravel(&rest_multi)] * scale;
    }
    let probe = make_pure(&ext_space, &amps)?;

    let shifted = Protocol::new(
        ext_space.clone(),
        p.label(),
        shift_steps(p.steps(), 1),
    )?;
    let trajectories = run_enumerate(&probe, &shifted)?;
    let final_state = &trajectories
        .first()
        .expect("measurement-free run yields one trajectory")
        .final_state;

    let keep = if controller_factor + 1 > 0 {
        vec![0, controller_factor + 1]
    } else {
        unreachable!()
    };
    let (rho_rc, _) = partial_trace(final_state.rho(), &ext_space, &keep)?;

    // Closest maximally entangled state (1/sqrt(d)) sum_r |r> W|r>: the
    // optimal W is the polar unitary of M^T, where M is the amplitude
    // matrix of the dominant eigenvector of rho_rc.
    let (_, vectors) = hermitian_eigen(&rho_rc)?;
    let d = d_sys;
    let m = ComplexMatrix::from_fn(d, d, |r, c| vectors[(r * d + c, 0)]);
    let (x, _, y_t) = svd(&m.transpose())?;
    let w = x.mul(&y_t)?;

    let mut phi = ComplexMatrix::zeros(d * d, 1);
    for r in 0..d {
        for c in 0..d {
            phi[(r * d + c, 0)] = w[(c, r)] * scale;
        }
    }
    let mut fid = Complex64::new(0.0, 0.0);
    for i in 0..d * d {
        for j in 0..d * d {
            fid += phi[(i, 0)].conj() * rho_rc[(i, j)] * phi[(j, 0)];
        }
    }
    let fidelity = fid.re.clamp(0.0, 1.0);
    Ok(TransferReport {
        transferred: fidelity >= 1.0 - TRANSFER_TOL,
        fidelity,
        controller_unitary: w,
        tol_used: TRANSFER_TOL,
    })
}

fn shift_steps(steps: &[ProtocolStep], by: usize) -> Vec<ProtocolStep> {
    steps
        .iter()
        .map(|s| match s {
            ProtocolStep::Unitary { u, targets } => ProtocolStep::Unitary {
                u: u.clone(),
                targets: targets.iter().map(|t| t + by).collect(),
            },
            ProtocolStep::ConditionalFlip {
                control,
                control_value,
                target,
            } => ProtocolStep::ConditionalFlip {
                control: control + by,
                control_value: *control_value,
                target: target + by,
            },
            ProtocolStep::Measure {
                observable,
                targets,
                record_key,
            } => ProtocolStep::Measure {
                observable: observable.clone(),
                targets: targets.iter().map(|t| t + by).collect(),
                record_key: record_key.clone(),
            },
            ProtocolStep::Branch { record_key, cases } => ProtocolStep::Branch {
                record_key: record_key.clone(),
                cases: cases
                    .iter()
                    .map(|(k, v)| (*k, shift_steps(v, by)))
                    .collect(),
            },
            ProtocolStep::Evolve { .. } => s.clone(),
        })
        .collect()
}
