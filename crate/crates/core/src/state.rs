//! Exact quantum states and the operations the simulator needs: unitary
//! application, projective non-demolition measurement, and state metrics.
//!
//! States carry a density matrix always, plus the amplitude vector when
//! the state is known pure; operations keep the pure representation alive
//! whenever the physics does. All invariants (hermiticity, unit trace,
//! positivity, pure-state consistency) are checked at construction, so a
//! `QuantumState` in hand is always valid.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    embed_multi, hermitian_eigen, partial_trace, ComplexMatrix, HermitianOperator, TensorSpace,
    UnitaryOperator,
};

/// Tolerance on hermiticity, unit trace, and pure-state consistency.
const STATE_TOL: f64 = 1e-10;
/// Density-matrix eigenvalues may round off slightly below zero.
const PSD_TOL: f64 = 1e-9;
/// Relative gap (to the spectral range) below which eigenvalues of an
/// observable belong to one degenerate outcome.
pub const EIG_CLUSTER_TOL: f64 = 1e-8;
/// Outcomes with probability at or below this are dropped and counted.
pub const PROB_FLOOR: f64 = 1e-12;
/// Reduced-state eigenvalues below this contribute no entropy.
const ENTROPY_EIG_FLOOR: f64 = 1e-12;
/// Purity slack for deciding a global state is pure.
const PURITY_TOL: f64 = 1e-8;

/// Exact state of a multi-factor system: a density matrix, plus the
/// amplitude vector when the state is known pure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "StateSchema", into = "StateSchema")]
pub struct QuantumState {
    space: TensorSpace,
    rho: ComplexMatrix,
    pure_amplitudes: Option<Vec<Complex64>>,
}

/// Wire format: factor dimensions plus either amplitudes or a density
/// matrix.
#[derive(Serialize, Deserialize)]
struct StateSchema {
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pure: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<ComplexMatrix>,
}

impl TryFrom<StateSchema> for QuantumState {
    type Error = Error;

    fn try_from(s: StateSchema) -> Result<Self> {
        let space = TensorSpace::new(s.dims)?;
        match (s.pure, s.rho) {
            (Some(amps), None) => {
                let amplitudes: Vec<Complex64> = amps
                    .iter()
                    .map(|[re, im]| Complex64::new(*re, *im))
                    .collect();
                make_pure(&space, &amplitudes)
            }
            (None, Some(rho)) => QuantumState::from_density(space, rho),
            _ => Err(Error::InvalidState {
                context: "state file must carry exactly one of \"pure\" or \"rho\"".into(),
            }),
        }
    }
}

impl From<QuantumState> for StateSchema {
    fn from(state: QuantumState) -> StateSchema {
        let dims = state.space.dims().to_vec();
        match state.pure_amplitudes {
            Some(amps) => StateSchema {
                dims,
                pure: Some(amps.iter().map(|z| [z.re, z.im]).collect()),
                rho: None,
            },
            None => StateSchema {
                dims,
                pure: None,
                rho: Some(state.rho),
            },
        }
    }
}

impl QuantumState {
    /// Validates and wraps a density matrix.
    pub fn from_density(space: TensorSpace, rho: ComplexMatrix) -> Result<Self> {
        Self::build(space, rho, None)
    }

    fn build(
        space: TensorSpace,
        rho: ComplexMatrix,
        pure_amplitudes: Option<Vec<Complex64>>,
    ) -> Result<Self> {
        let n = space.total_dim();
        if rho.rows() != n || rho.cols() != n {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "density matrix is {}x{} but space has dimension {}",
                    rho.rows(),
                    rho.cols(),
                    n
                ),
            });
        }
        rho.ensure_finite()?;
        let herm_dev = rho.hermitian_deviation()?;
        if herm_dev > STATE_TOL {
            return Err(Error::InvalidState {
                context: format!("density matrix hermiticity deviation {:.3e}", herm_dev),
            });
        }
        let trace = rho.trace()?;
        if (trace - Complex64::new(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::InvalidState {
                context: format!("density matrix trace {:.12} != 1", trace.re),
            });
        }
        let (eigenvalues, _) = hermitian_eigen(&rho)?;
        if let Some(&lowest) = eigenvalues.last() {
            if lowest < -PSD_TOL {
                return Err(Error::InvalidState {
                    context: format!("density matrix has eigenvalue {:.3e}", lowest),
                });
            }
        }
        if let Some(amps) = &pure_amplitudes {
            let norm_sq: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            if (norm_sq - 1.0).abs() > STATE_TOL {
                return Err(Error::InvalidState {
                    context: format!("pure amplitudes have norm^2 {:.12}", norm_sq),
                });
            }
            let outer =
                ComplexMatrix::from_fn(n, n, |i, j| amps[i] * amps[j].conj());
            if !rho.approx_eq(&outer, STATE_TOL) {
                return Err(Error::InvalidState {
                    context: "density matrix does not match pure amplitudes".into(),
                });
            }
        }
        Ok(QuantumState {
            space,
            rho,
            pure_amplitudes,
        })
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    /// Amplitudes, when the state is tracked as pure.
    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        self.pure_amplitudes.as_deref()
    }

    /// Density-matrix comparison, hence insensitive to global phase.
    pub fn approx_eq(&self, other: &QuantumState, tol: f64) -> bool {
        self.space == other.space && self.rho.approx_eq(&other.rho, tol)
    }
}

/// Normalizes an amplitude vector into a pure state.
pub fn make_pure(space: &TensorSpace, amplitudes: &[Complex64]) -> Result<QuantumState> {
    let n = space.total_dim();
    if amplitudes.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!(
                "{} amplitudes for a space of dimension {}",
                amplitudes.len(),
                n
            ),
        });
    }
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::ZeroStateVector);
    }
    let amps: Vec<Complex64> = amplitudes.iter().map(|z| z / norm).collect();
    let rho = ComplexMatrix::from_fn(n, n, |i, j| amps[i] * amps[j].conj());
    QuantumState::build(space.clone(), rho, Some(amps))
}

/// Pure basis state `|index>`.
pub fn basis_state(space: &TensorSpace, index: usize) -> Result<QuantumState> {
    let n = space.total_dim();
    if index >= n {
        return Err(Error::DimensionMismatch {
            context: format!("basis index {} in dimension {}", index, n),
        });
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); n];
    amps[index] = Complex64::new(1.0, 0.0);
    make_pure(space, &amps)
}

/// Applies a unitary on the listed factors: `rho -> U rho U^dag`, with the
/// amplitude vector carried along when the state is pure.
pub fn apply_unitary(
    state: &QuantumState,
    u: &UnitaryOperator,
    targets: &[usize],
) -> Result<QuantumState> {
    let full = embed_multi(u.matrix(), state.space(), targets)?;
    match state.amplitudes() {
        Some(amps) => {
            let n = state.space().total_dim();
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (i, slot) in out.iter_mut().enumerate() {
                for (j, a) in amps.iter().enumerate() {
                    *slot += full[(i, j)] * a;
                }
            }
            let rho = ComplexMatrix::from_fn(n, n, |i, j| out[i] * out[j].conj());
            QuantumState::build(state.space().clone(), rho, Some(out))
        }
        None => {
            let rho = full.mul(state.rho())?.mul(&full.adjoint())?;
            QuantumState::build(state.space().clone(), rho, None)
        }
    }
}

/// One projective outcome: the degenerate eigenvalue observed, its Born
/// probability, and the renormalized post-measurement state.
///
/// `cluster_index` is the outcome's position over all eigenvalue clusters
/// of the observable in descending order, so it stays stable even when
/// zero-probability outcomes are omitted from a distribution.
#[derive(Debug, Clone, Serialize)]
pub struct MeasurementOutcome {
    pub observable_label: String,
    pub cluster_index: usize,
    pub eigenvalue: f64,
    pub probability: f64,
    pub post_state: QuantumState,
}

/// Full outcome enumeration, ordered by descending eigenvalue, with the
/// count of outcomes dropped for negligible probability.
#[derive(Debug, Clone, Serialize)]
pub struct MeasurementDistribution {
    pub outcomes: Vec<MeasurementOutcome>,
    pub omitted: usize,
}

/// Enumerates the projective non-demolition measurement of `m` on the
/// listed factors: eigenvalues clustered within [`EIG_CLUSTER_TOL`]
/// (relative to the spectral range) share one eigenspace projector `P`,
/// giving probability `tr(P rho P)` and post state `P rho P / p`.
pub fn measurement_distribution(
    state: &QuantumState,
    m: &HermitianOperator,
    targets: &[usize],
    label: &str,
) -> Result<MeasurementDistribution> {
    let (values, vectors) = hermitian_eigen(m.matrix())?;
    let d = m.dim();
    let range = values.first().copied().unwrap_or(0.0) - values.last().copied().unwrap_or(0.0);
    let gap_tol = EIG_CLUSTER_TOL * range;

    // Eigenvalues arrive in descending order; consecutive gaps <= gap_tol
    // merge into one degenerate cluster.
    let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
    for (idx, &value) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some((_, members))
                if (values[*members.last().expect("non-empty cluster")] - value) <= gap_tol =>
            {
                members.push(idx);
            }
            _ => clusters.push((0.0, vec![idx])),
        }
    }
    for (rep, members) in clusters.iter_mut() {
        *rep = members.iter().map(|&i| values[i]).sum::<f64>() / members.len() as f64;
    }

    let mut outcomes = Vec::new();
    let mut omitted = 0;
    for (cluster_index, (eigenvalue, members)) in clusters.into_iter().enumerate() {
        let mut projector = ComplexMatrix::zeros(d, d);
        for &k in &members {
            for i in 0..d {
                for j in 0..d {
                    let contrib = vectors[(i, k)] * vectors[(j, k)].conj();
                    projector[(i, j)] += contrib;
                }
            }
        }
        let full_p = embed_multi(&projector, state.space(), targets)?;
        let (probability, post) = match state.amplitudes() {
            Some(amps) => {
                let n = state.space().total_dim();
                let mut proj_amps = vec![Complex64::new(0.0, 0.0); n];
                for (i, slot) in proj_amps.iter_mut().enumerate() {
                    for (j, a) in amps.iter().enumerate() {
                        *slot += full_p[(i, j)] * a;
                    }
                }
                let p: f64 = proj_amps.iter().map(|z| z.norm_sqr()).sum();
                (p, PostState::Pure(proj_amps))
            }
            None => {
                let prp = full_p.mul(state.rho())?.mul(&full_p)?;
                let p = prp.trace()?.re;
                (p, PostState::Density(prp))
            }
        };
        if probability <= PROB_FLOOR {
            omitted += 1;
            continue;
        }
        let post_state = match post {
            PostState::Pure(amps) => {
                let scale = probability.sqrt();
                let amps: Vec<Complex64> = amps.iter().map(|z| z / scale).collect();
                make_pure(state.space(), &amps)?
            }
            PostState::Density(prp) => {
                QuantumState::from_density(state.space().clone(), prp.scale_re(1.0 / probability))?
            }
        };
        outcomes.push(MeasurementOutcome {
            observable_label: label.to_string(),
            cluster_index,
            eigenvalue,
            probability,
            post_state,
        });
    }
    Ok(MeasurementDistribution { outcomes, omitted })
}

enum PostState {
    Pure(Vec<Complex64>),
    Density(ComplexMatrix),
}

/// Draws one outcome by inverse CDF over the descending-eigenvalue
/// ordering of [`measurement_distribution`].
pub fn sample_measurement(
    state: &QuantumState,
    m: &HermitianOperator,
    targets: &[usize],
    label: &str,
    rng: &mut impl Rng,
) -> Result<MeasurementOutcome> {
    let dist = measurement_distribution(state, m, targets, label)?;
    if dist.outcomes.is_empty() {
        return Err(Error::InvalidState {
            context: "measurement produced no outcome above the probability floor".into(),
        });
    }
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    for outcome in &dist.outcomes {
        acc += outcome.probability;
        if draw < acc {
            return Ok(outcome.clone());
        }
    }
    Ok(dist
        .outcomes
        .into_iter()
        .last()
        .expect("non-empty outcomes"))
}

fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(m)?;
    let n = m.rows();
    let mut d = ComplexMatrix::zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        d[(i, i)] = Complex64::new(v.max(0.0).sqrt(), 0.0);
    }
    vectors.mul(&d)?.mul(&vectors.adjoint())
}

/// Uhlmann fidelity `(tr sqrt(sqrt(a) b sqrt(a)))^2`; for two pure states
/// this is the squared overlap `|<a|b>|^2`.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.space() != b.space() {
        return Err(Error::DimensionMismatch {
            context: "fidelity of states on different spaces".into(),
        });
    }
    if let (Some(av), Some(bv)) = (a.amplitudes(), b.amplitudes()) {
        let overlap: Complex64 = av.iter().zip(bv).map(|(x, y)| x.conj() * y).sum();
        return Ok(overlap.norm_sqr().clamp(0.0, 1.0));
    }
    let sa = psd_sqrt(a.rho())?;
    let inner = sa.mul(b.rho())?.mul(&sa)?;
    let (values, _) = hermitian_eigen(&inner)?;
    // Eigenvalues at the numerical noise floor would contribute
    // sqrt(eps)-sized spurious terms; drop them before the square root.
    let floor = values.first().map_or(0.0, |&top| top.max(0.0) * 1e-14);
    let root_sum: f64 = values
        .iter()
        .filter(|&&v| v > floor)
        .map(|&v| v.sqrt())
        .sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// `tr(rho^2)`: 1 for pure states, 1/N for the maximally mixed state.
pub fn purity(state: &QuantumState) -> f64 {
    state
        .rho()
        .hs_inner(state.rho())
        .expect("square density matrix")
        .re
}

/// Entanglement entropy in bits of a pure global state across the cut:
/// the von Neumann entropy of the reduced state on the kept factors.
pub fn entanglement_entropy(state: &QuantumState, cut: &[usize]) -> Result<f64> {
    let p = purity(state);
    if (p - 1.0).abs() > PURITY_TOL {
        return Err(Error::MixedGlobalState { purity: p });
    }
    let (reduced, _) = partial_trace(state.rho(), state.space(), cut)?;
    let (values, _) = hermitian_eigen(&reduced)?;
    let entropy = values
        .iter()
        .filter(|&&v| v > ENTROPY_EIG_FLOOR)
        .map(|&v| -v * v.log2())
        .sum::<f64>();
    Ok(entropy.max(0.0))
}
