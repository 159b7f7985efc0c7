//! Commutator-generated operator algebras and controllability verdicts.
//!
//! The central computation is [`lie_closure`]: starting from a set of
//! Hermitian generators, repeatedly adjoin `i[a, b]` until the span
//! stabilizes. A system is fully controllable exactly when the traceless
//! part of that closure spans su(N), i.e. has dimension N^2 - 1. The five
//! verdict functions package the rank condition for open-loop and
//! closed-loop semiclassical control, semiclassical observation, and
//! coherent quantum control and observation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{commutator, ComplexMatrix, HermitianOperator};

/// Default relative threshold for accepting a new closure direction.
pub const DEFAULT_CLOSURE_TOL: f64 = 1e-9;
/// Relative threshold below which an operator counts as a scalar multiple
/// of the identity.
pub const NONTRIVIAL_TOL: f64 = 1e-9;
/// Commutators of unit-norm basis elements below this norm are numerically
/// zero, not new directions.
const COMMUTATOR_NOISE_FLOOR: f64 = 1e-13;

/// Default generation cap for an N-dimensional system.
pub fn default_max_generations(dim: usize) -> usize {
    dim * dim
}

/// Interaction term `O (x) O'` between system and controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub system: HermitianOperator,
    pub controller: HermitianOperator,
}

/// A Hamiltonian system together with the operator handles a controller
/// has on it: applied potentials, measured observables, and coherent
/// couplings to a controller of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ControlSystemSchema")]
pub struct ControlSystem {
    dim: usize,
    drift: HermitianOperator,
    controls: Vec<HermitianOperator>,
    measurements: Vec<HermitianOperator>,
    couplings: Vec<Coupling>,
}

#[derive(Deserialize)]
struct ControlSystemSchema {
    dim: usize,
    drift: HermitianOperator,
    #[serde(default)]
    controls: Vec<HermitianOperator>,
    #[serde(default)]
    measurements: Vec<HermitianOperator>,
    #[serde(default)]
    couplings: Vec<Coupling>,
}

impl TryFrom<ControlSystemSchema> for ControlSystem {
    type Error = Error;

    fn try_from(s: ControlSystemSchema) -> Result<Self> {
        ControlSystem::new(s.dim, s.drift, s.controls, s.measurements, s.couplings)
    }
}

impl ControlSystem {
    /// Validates that every system-side operator matches `dim`. Controller
    /// sides of couplings may have any (square) dimension.
    pub fn new(
        dim: usize,
        drift: HermitianOperator,
        controls: Vec<HermitianOperator>,
        measurements: Vec<HermitianOperator>,
        couplings: Vec<Coupling>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpace {
                context: format!("system dimension must be >= 2, got {}", dim),
            });
        }
        let check = |label: &str, op: &HermitianOperator| -> Result<()> {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("{} has dimension {} but system has {}", label, op.dim(), dim),
                });
            }
            Ok(())
        };
        check("drift", &drift)?;
        for (i, c) in controls.iter().enumerate() {
            check(&format!("control {}", i), c)?;
        }
        for (i, m) in measurements.iter().enumerate() {
            check(&format!("measurement {}", i), m)?;
        }
        for (i, c) in couplings.iter().enumerate() {
            check(&format!("coupling {} system side", i), &c.system)?;
        }
        Ok(ControlSystem {
            dim,
            drift,
            controls,
            measurements,
            couplings,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self) -> &HermitianOperator {
        &self.drift
    }

    pub fn controls(&self) -> &[HermitianOperator] {
        &self.controls
    }

    pub fn measurements(&self) -> &[HermitianOperator] {
        &self.measurements
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }
}

/// Result of a closure computation: an orthonormal traceless basis of the
/// generated algebra and how it was reached.
#[derive(Debug, Clone, Serialize)]
pub struct LieClosureReport {
    pub dim_found: usize,
    pub full_dim: usize,
    pub full: bool,
    pub generations: usize,
    pub tol_used: f64,
    pub basis: Vec<HermitianOperator>,
}

/// Which of the five control-theoretic questions a verdict answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    OpenLoopSemiclassical,
    ClosedLoopSemiclassical,
    ObservableSemiclassical,
    ControllableQuantum,
    ObservableQuantum,
}

impl VerdictKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictKind::OpenLoopSemiclassical => "open_loop_semiclassical",
            VerdictKind::ClosedLoopSemiclassical => "closed_loop_semiclassical",
            VerdictKind::ObservableSemiclassical => "observable_semiclassical",
            VerdictKind::ControllableQuantum => "controllable_quantum",
            VerdictKind::ObservableQuantum => "observable_quantum",
        }
    }
}

/// Answer to one controllability or observability question, with the
/// closure evidence and the failed clauses if any.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub answer: bool,
    pub closure: LieClosureReport,
    pub reasons: Vec<String>,
    pub notes: Vec<String>,
}

/// True when `op` is not a scalar multiple of the identity: its traceless
/// part is larger than `NONTRIVIAL_TOL` relative to the operator norm.
pub fn is_nontrivial(op: &HermitianOperator) -> bool {
    let norm = op.matrix().frobenius_norm();
    if norm == 0.0 {
        return false;
    }
    let traceless = op
        .matrix()
        .traceless_part()
        .expect("hermitian operators are square");
    traceless.frobenius_norm() > NONTRIVIAL_TOL * norm
}

/// Orthonormal-basis accumulator under the Hilbert-Schmidt inner product.
struct HsBasis {
    elements: Vec<ComplexMatrix>,
}

impl HsBasis {
    fn new() -> Self {
        HsBasis { elements: Vec::new() }
    }

    /// Gram-Schmidt with a second pass; accepts when the residual exceeds
    /// `tol` times the candidate's pre-projection norm. Real projection
    /// coefficients keep Hermitian candidates exactly Hermitian.
    fn try_add(&mut self, candidate: ComplexMatrix, pre_norm: f64, tol: f64) -> bool {
        if pre_norm == 0.0 {
            return false;
        }
        let mut v = candidate;
        for _ in 0..2 {
            for b in &self.elements {
                let coef = b.hs_inner(&v).expect("matched dimensions").re;
                v = v
                    .sub(&b.scale_re(coef))
                    .expect("matched dimensions");
            }
        }
        let residual = v.frobenius_norm();
        if residual <= tol * pre_norm {
            return false;
        }
        self.elements.push(v.scale_re(1.0 / residual));
        true
    }
}

/// Computes the algebra generated from `generators` by `i[.,.]`,
/// reported as an orthonormal basis of its traceless part.
///
/// Breadth-first: each round commutes every element of the basis as of the
/// round's start with every element of the newest generation, in
/// deterministic order. Stops when a round adds nothing or the basis
/// reaches dimension N^2 - 1; errors if `max_generations` rounds pass
/// while directions are still being added.
pub fn lie_closure(
    generators: &[HermitianOperator],
    tol: f64,
    max_generations: usize,
) -> Result<LieClosureReport> {
    let n = generators.first().ok_or(Error::NoGenerators)?.dim();
    for g in generators {
        if g.dim() != n {
            return Err(Error::DimensionMismatch {
                context: format!("generators of dimension {} and {}", n, g.dim()),
            });
        }
    }
    let full_dim = n * n - 1;
    let mut basis = HsBasis::new();
    for g in generators {
        let norm = g.matrix().frobenius_norm();
        let traceless = g.matrix().traceless_part()?;
        let pre = traceless.frobenius_norm();
        if pre <= NONTRIVIAL_TOL * norm {
            continue;
        }
        basis.try_add(traceless, pre, tol);
    }

    let mut generations = 0;
    let mut prev_start = 0;
    let mut prev_end = basis.elements.len();
    let mut rounds = 0;
    while prev_start < prev_end && basis.elements.len() < full_dim {
        if rounds == max_generations {
            return Err(Error::ClosureNotStabilized {
                max_generations,
                dim_found: basis.elements.len(),
                full_dim,
            });
        }
        rounds += 1;
        let round_start = basis.elements.len();
        for b_idx in prev_start..prev_end {
            for a_idx in 0..round_start {
                if a_idx == b_idx {
                    continue;
                }
                let comm = commutator(&basis.elements[a_idx], &basis.elements[b_idx])?
                    .scale(Complex64::new(0.0, 1.0));
                let cand = comm.traceless_part()?;
                let pre = cand.frobenius_norm();
                if pre <= COMMUTATOR_NOISE_FLOOR {
                    continue;
                }
                basis.try_add(cand, pre, tol);
                if basis.elements.len() == full_dim {
                    break;
                }
            }
            if basis.elements.len() == full_dim {
                break;
            }
        }
        if basis.elements.len() > round_start {
            generations += 1;
        }
        prev_start = round_start;
        prev_end = basis.elements.len();
    }

    let dim_found = basis.elements.len();
    let basis = basis
        .elements
        .into_iter()
        .map(HermitianOperator::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(LieClosureReport {
        dim_found,
        full_dim,
        full: dim_found == full_dim,
        generations,
        tol_used: tol,
        basis,
    })
}

fn control_algebra_generators(sys: &ControlSystem) -> Vec<HermitianOperator> {
    let mut gens = vec![sys.drift().clone()];
    gens.extend(sys.controls().iter().cloned());
    gens
}

/// A drift plus applied potentials can steer the system to any unitary
/// exactly when their commutator closure is full.
pub fn open_loop_controllable(
    sys: &ControlSystem,
    tol: f64,
    max_generations: usize,
) -> Result<Verdict> {
    let closure = lie_closure(&control_algebra_generators(sys), tol, max_generations)?;
    let answer = closure.full;
    let reasons = if answer {
        Vec::new()
    } else {
        vec![format!(
            "drift and controls generate dimension {} of {}",
            closure.dim_found, closure.full_dim
        )]
    };
    Ok(Verdict {
        kind: VerdictKind::OpenLoopSemiclassical,
        answer,
        closure,
        reasons,
        notes: Vec::new(),
    })
}

/// Closed-loop control by measurement feedback needs (i) at least one
/// measurement that is not a scalar, and (ii) full open-loop control.
pub fn closed_loop_controllable(
    sys: &ControlSystem,
    tol: f64,
    max_generations: usize,
) -> Result<Verdict> {
    let open = open_loop_controllable(sys, tol, max_generations)?;
    let has_measurement = sys.measurements().iter().any(is_nontrivial);
    let mut reasons = Vec::new();
    if !has_measurement {
        reasons.push("no nontrivial measurement".to_string());
    }
    reasons.extend(open.reasons);
    Ok(Verdict {
        kind: VerdictKind::ClosedLoopSemiclassical,
        answer: has_measurement && open.answer,
        closure: open.closure,
        reasons,
        notes: Vec::new(),
    })
}

/// A semiclassical controller can observe the system exactly when it can
/// control it in closed loop.
pub fn observable_semiclassical(
    sys: &ControlSystem,
    tol: f64,
    max_generations: usize,
) -> Result<Verdict> {
    let mut verdict = closed_loop_controllable(sys, tol, max_generations)?;
    verdict.kind = VerdictKind::ObservableSemiclassical;
    Ok(verdict)
}

/// Coherent quantum control needs (i) at least one coupling whose system
/// and controller sides are both nontrivial, and (ii) a full closure of
/// the system-side operators.
///
/// The closure generators are the union of drift, controls, and coupling
/// system sides; the verdict notes record this convention.
pub fn quantum_controllable(
    sys: &ControlSystem,
    tol: f64,
    max_generations: usize,
) -> Result<Verdict> {
    let mut gens = control_algebra_generators(sys);
    gens.extend(sys.couplings().iter().map(|c| c.system.clone()));
    let closure = lie_closure(&gens, tol, max_generations)?;
    let has_coupling = sys
        .couplings()
        .iter()
        .any(|c| is_nontrivial(&c.system) && is_nontrivial(&c.controller));
    let mut reasons = Vec::new();
    if !has_coupling {
        reasons.push("no nontrivial coupling".to_string());
    }
    if !closure.full {
        reasons.push(format!(
            "system-side operators generate dimension {} of {}",
            closure.dim_found, closure.full_dim
        ));
    }
    Ok(Verdict {
        kind: VerdictKind::ControllableQuantum,
        answer: has_coupling && closure.full,
        closure,
        reasons,
        notes: vec![
            "closure generators are the union of drift, controls, and coupling system sides"
                .to_string(),
        ],
    })
}

/// A quantum controller can observe the system exactly when it can
/// control it.
pub fn observable_quantum(
    sys: &ControlSystem,
    tol: f64,
    max_generations: usize,
) -> Result<Verdict> {
    let mut verdict = quantum_controllable(sys, tol, max_generations)?;
    verdict.kind = VerdictKind::ObservableQuantum;
    Ok(verdict)
}
