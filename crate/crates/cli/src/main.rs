//! Command-line interface binding the analysis and simulation layers:
//! controllability verdicts for system files, protocol execution,
//! built-in example reproduction, and pulse-level validation.
//!
//! Reports are JSON on stdout (optionally copied to a file); a short
//! human-readable summary goes to stderr. Every report embeds the schema
//! version, seed, generator name, and the tolerances in force, so a rerun
//! with the same inputs reproduces it byte for byte.
//!
//! Exit codes: 0 success, 1 validation verdict FAIL, 2 input error,
//! 3 algorithm non-convergence, 4 resource cap exceeded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use qcontrol::error::Error;
use qcontrol::lie::{
    closed_loop_controllable, default_max_generations, observable_quantum,
    observable_semiclassical, open_loop_controllable, quantum_controllable, ControlSystem,
    Verdict, DEFAULT_CLOSURE_TOL,
};
use qcontrol::operators::partial_trace;
use qcontrol::protocol::{
    builtin_entanglement_transfer, builtin_quantum_controller, builtin_semiclassical_flip,
    run_enumerate, run_sampled, Protocol, ProtocolStep, TrajectoryResult, GENERATOR_NAME,
};
use qcontrol::pulse::{
    validate_selective_pulse, PulseValidationReport, SpinPairParams, PROPAGATOR_UNIT_TOL,
    STEP_TOL,
};
use qcontrol::state::{
    basis_state, entanglement_entropy, fidelity, make_pure, purity, QuantumState, PROB_FLOOR,
};

const SCHEMA_VERSION: &str = "1";
/// Displayed-state reproduction threshold for the built-in examples.
const EXAMPLE_FIDELITY_TOL: f64 = 1e-9;
/// Entrywise tolerance on the intermediate reduced state of the two-spin
/// example.
const REDUCED_STATE_TOL: f64 = 1e-10;
/// Tolerance on the 1.000-bit entanglement entropy of the transfer
/// example.
const ENTROPY_TOL: f64 = 1e-9;
/// Tolerance on enumerated trajectory probabilities.
const PROBABILITY_TOL: f64 = 1e-12;
/// A selective pulse passes validation at or above this gate fidelity.
const PULSE_FIDELITY_THRESHOLD: f64 = 0.99;
/// Amplitude sweep for pulse validation, as fractions of the coupling.
const SWEEP_FRACTIONS: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];

#[derive(Parser)]
#[command(
    name = "qcontrol",
    version,
    about = "Controllability verdicts and exact simulation of quantum feedback protocols"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide all five controllability/observability verdicts for a
    /// control-system file.
    Check(CheckArgs),
    /// Execute a protocol file on an initial-state file.
    Simulate(SimulateArgs),
    /// Reproduce the built-in feedback examples and grade them against
    /// their expected final states.
    Examples(ExamplesArgs),
    /// Validate that selective pi-pulses realize the conditional flip.
    Pulse(PulseArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Seed recorded in the report and used for any sampling.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Control-system description (JSON).
    system: PathBuf,
    /// Closure tolerance for the algebra rank decision.
    #[arg(long = "tol.closure", default_value_t = DEFAULT_CLOSURE_TOL)]
    tol_closure: f64,
    /// Commutator-generation budget; defaults to dim^2.
    #[arg(long)]
    max_generations: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    /// Follow every measurement branch with its exact probability.
    Enumerate,
    /// Draw seeded Monte-Carlo trajectories.
    Sample,
}

#[derive(Args)]
struct SimulateArgs {
    /// Protocol description (JSON).
    protocol: PathBuf,
    /// Initial state (JSON).
    state: PathBuf,
    /// Execution strategy.
    #[arg(long, value_enum, default_value_t = Mode::Enumerate)]
    mode: Mode,
    /// Number of trajectories in sample mode.
    #[arg(long = "n", default_value_t = 1000)]
    n_trajectories: usize,
    /// Optional target state; each trajectory reports its fidelity to it.
    #[arg(long)]
    target: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ExamplesArgs {
    /// System amplitude on |up>, as "re,im".
    #[arg(long, value_parser = parse_complex, default_value = "0.6,0")]
    alpha: Complex64,
    /// System amplitude on |down>, as "re,im".
    #[arg(long, value_parser = parse_complex, default_value = "0.8,0")]
    beta: Complex64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct PulseArgs {
    /// First spin resonance frequency, rad/s.
    #[arg(long, default_value_t = 1000.0 * std::f64::consts::PI)]
    omega: f64,
    /// Second spin resonance frequency, rad/s.
    #[arg(long, default_value_t = 600.0 * std::f64::consts::PI)]
    omega_prime: f64,
    /// Scalar coupling strength, rad/s.
    #[arg(long, default_value_t = 40.0 * std::f64::consts::PI)]
    gamma: f64,
    /// Drive amplitude for the primary validation point, rad/s.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    amplitude: f64,
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_complex(text: &str) -> Result<Complex64, String> {
    let (re, im) = text
        .split_once(',')
        .ok_or_else(|| format!("expected \"re,im\", got \"{text}\""))?;
    let re: f64 = re.trim().parse().map_err(|e| format!("real part: {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("imaginary part: {e}"))?;
    Ok(Complex64::new(re, im))
}

/// A terminal failure: message for stderr plus the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: String) -> Failure {
        Failure { code: 2, message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::ClosureNotStabilized { .. }
            | Error::StepCountTooSmall { .. }
            | Error::EigenFailure => 3,
            Error::BranchCapExceeded { .. } => 4,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Envelope shared by all reports; `payload` is command-specific.
#[derive(Serialize)]
struct Report<T: Serialize> {
    schema_version: &'static str,
    command: &'static str,
    seed: u64,
    generator: &'static str,
    tolerances: BTreeMap<&'static str, f64>,
    #[serde(flatten)]
    payload: T,
}

fn emit<T: Serialize>(report: &Report<T>, out: &Option<PathBuf>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Failure::input(format!("serializing report: {e}")))?;
    text.push('\n');
    if let Some(path) = out {
        fs::write(path, &text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    print!("{text}");
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Parses a JSON value, keeping serde's line/column diagnostics.
fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Examples(args) => cmd_examples(args),
        Command::Pulse(args) => cmd_pulse(args),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[derive(Serialize)]
struct CheckPayload {
    system_dim: usize,
    max_generations: usize,
    verdicts: Vec<Verdict>,
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, Failure> {
    let text = read_to_string(&args.system)?;
    let system: ControlSystem = parse_json(&args.system, &text)?;
    let tol = args.tol_closure;
    let max_gen = args
        .max_generations
        .unwrap_or_else(|| default_max_generations(system.dim()));
    let verdicts = vec![
        open_loop_controllable(&system, tol, max_gen)?,
        closed_loop_controllable(&system, tol, max_gen)?,
        observable_semiclassical(&system, tol, max_gen)?,
        quantum_controllable(&system, tol, max_gen)?,
        observable_quantum(&system, tol, max_gen)?,
    ];
    for v in &verdicts {
        eprintln!(
            "{}: {} (closure dimension {} of {})",
            v.kind.as_str(),
            if v.answer { "yes" } else { "no" },
            v.closure.dim_found,
            v.closure.full_dim
        );
    }
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "check",
        seed: args.common.seed,
        generator: GENERATOR_NAME,
        tolerances: BTreeMap::from([("closure", tol)]),
        payload: CheckPayload {
            system_dim: system.dim(),
            max_generations: max_gen,
            verdicts,
        },
    };
    emit(&report, &args.common.out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TrajectoryReport {
    index: usize,
    #[serde(flatten)]
    result: TrajectoryResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity_to_target: Option<f64>,
}

#[derive(Serialize)]
struct SimulatePayload {
    protocol_label: String,
    mode: Mode,
    total_probability: f64,
    trajectories: Vec<TrajectoryReport>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, Failure> {
    let protocol: Protocol = parse_json(&args.protocol, &read_to_string(&args.protocol)?)?;
    let initial: QuantumState = parse_json(&args.state, &read_to_string(&args.state)?)?;
    let target: Option<QuantumState> = match &args.target {
        Some(path) => Some(parse_json(path, &read_to_string(path)?)?),
        None => None,
    };
    let results = match args.mode {
        Mode::Enumerate => run_enumerate(&initial, &protocol)?,
        Mode::Sample => {
            if args.n_trajectories == 0 {
                return Err(Failure::input(
                    "sample mode needs at least one trajectory (--n >= 1)".into(),
                ));
            }
            run_sampled(&initial, &protocol, args.common.seed, args.n_trajectories)?
        }
    };
    let total_probability: f64 = results.iter().map(|t| t.probability).sum();
    let trajectories = results
        .into_iter()
        .enumerate()
        .map(|(index, result)| {
            let fidelity_to_target = target
                .as_ref()
                .map(|t| fidelity(&result.final_state, t))
                .transpose()?;
            Ok(TrajectoryReport {
                index,
                result,
                fidelity_to_target,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    eprintln!(
        "{}: {} trajectories, total probability {:.9}",
        protocol.label(),
        trajectories.len(),
        total_probability
    );
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        seed: args.common.seed,
        generator: GENERATOR_NAME,
        tolerances: BTreeMap::from([("probability_floor", PROB_FLOOR)]),
        payload: SimulatePayload {
            protocol_label: protocol.label().to_string(),
            mode: args.mode,
            total_probability,
            trajectories,
        },
    };
    emit(&report, &args.common.out)?;
    Ok(ExitCode::SUCCESS)
}

/// One snapshot along an example's execution.
#[derive(Serialize)]
struct Stage {
    name: String,
    state: QuantumState,
    purity: f64,
    /// Entanglement entropy of the first factor against the rest, when
    /// the state is pure and has more than one factor.
    #[serde(skip_serializing_if = "Option::is_none")]
    system_entropy: Option<f64>,
    /// Diagonal of the reduced first-factor state.
    #[serde(skip_serializing_if = "Option::is_none")]
    reduced_system_diagonal: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct ExampleBlock {
    label: String,
    stages: Vec<Stage>,
    /// Worst fidelity of a produced final state against its expected one.
    fidelity: f64,
    pass: bool,
    checks: Vec<String>,
}

#[derive(Serialize)]
struct ExamplesPayload {
    alpha: [f64; 2],
    beta: [f64; 2],
    examples: Vec<ExampleBlock>,
    passed: usize,
    total: usize,
}

/// Runs each prefix of a measurement-free protocol to capture the state
/// after every step.
fn prefix_states(initial: &QuantumState, p: &Protocol) -> Result<Vec<QuantumState>, Failure> {
    let mut states = vec![initial.clone()];
    for k in 1..=p.steps().len() {
        let prefix = Protocol::new(p.space().clone(), p.label(), p.steps()[..k].to_vec())?;
        let mut runs = run_enumerate(initial, &prefix)?;
        debug_assert_eq!(runs.len(), 1, "measurement-free protocols have one path");
        states.push(runs.pop().expect("one trajectory").final_state);
    }
    Ok(states)
}

fn stage_from_state(name: &str, state: &QuantumState) -> Result<Stage, Failure> {
    let multi_factor = state.space().n_factors() > 1;
    let system_entropy = if multi_factor && purity(state) > 1.0 - 1e-12 {
        Some(entanglement_entropy(state, &[0])?)
    } else {
        None
    };
    let reduced_system_diagonal = if multi_factor {
        let (reduced, _) = partial_trace(state.rho(), state.space(), &[0])?;
        Some((0..reduced.rows()).map(|i| reduced[(i, i)].re).collect())
    } else {
        None
    };
    Ok(Stage {
        name: name.to_string(),
        state: state.clone(),
        purity: purity(state),
        system_entropy,
        reduced_system_diagonal,
    })
}

/// Factors referenced by any step of a protocol.
fn touched_factors(steps: &[ProtocolStep]) -> Vec<usize> {
    fn visit(steps: &[ProtocolStep], acc: &mut Vec<usize>) {
        for step in steps {
            match step {
                ProtocolStep::Unitary { targets, .. } => acc.extend(targets),
                ProtocolStep::ConditionalFlip {
                    control, target, ..
                } => acc.extend([*control, *target]),
                ProtocolStep::Measure { targets, .. } => acc.extend(targets),
                ProtocolStep::Branch { cases, .. } => {
                    for steps in cases.values() {
                        visit(steps, acc);
                    }
                }
                ProtocolStep::Evolve { .. } => {}
            }
        }
    }
    let mut acc = Vec::new();
    visit(steps, &mut acc);
    acc.sort_unstable();
    acc.dedup();
    acc
}

/// Two-spin coherent transfer: (a|up> + b|down>)(x)|down'> ends as
/// |down>(x)(a|up'> + b|down'>), with the intermediate reduced system
/// state fully decohered to diag(|a|^2, |b|^2).
fn two_spin_example(alpha: Complex64, beta: Complex64) -> Result<ExampleBlock, Failure> {
    let p = builtin_quantum_controller();
    let zero = Complex64::new(0.0, 0.0);
    let initial = make_pure(p.space(), &[zero, alpha, zero, beta])?;
    let expected = make_pure(p.space(), &[zero, zero, alpha, beta])?;
    let states = prefix_states(&initial, &p)?;
    let names = ["initial", "after_first_flip", "final"];
    let stages = names
        .iter()
        .zip(&states)
        .map(|(name, s)| stage_from_state(name, s))
        .collect::<Result<Vec<_>, _>>()?;

    let fid = fidelity(states.last().expect("final state"), &expected)?;
    let (reduced, _) = partial_trace(states[1].rho(), p.space(), &[0])?;
    let reduced_error = (reduced[(0, 0)].re - alpha.norm_sqr())
        .abs()
        .max((reduced[(1, 1)].re - beta.norm_sqr()).abs())
        .max(reduced[(0, 1)].norm())
        .max(reduced[(1, 0)].norm());

    let mut checks = Vec::new();
    let fid_ok = fid >= 1.0 - EXAMPLE_FIDELITY_TOL;
    checks.push(format!(
        "final state matches |down>(x)(a|up'> + b|down'>): fidelity {fid:.12} ({})",
        if fid_ok { "ok" } else { "FAIL" }
    ));
    let reduced_ok = reduced_error <= REDUCED_STATE_TOL;
    checks.push(format!(
        "intermediate reduced system equals diag(|a|^2, |b|^2): max deviation {reduced_error:.3e} ({})",
        if reduced_ok { "ok" } else { "FAIL" }
    ));
    Ok(ExampleBlock {
        label: p.label().to_string(),
        stages,
        fidelity: fid,
        pass: fid_ok && reduced_ok,
        checks,
    })
}

/// Semiclassical flip: measurement decoheres the ensemble, the
/// conditioned pulse re-purifies it onto |down>.
fn semiclassical_example(alpha: Complex64, beta: Complex64) -> Result<ExampleBlock, Failure> {
    let p = builtin_semiclassical_flip();
    let initial = make_pure(p.space(), &[alpha, beta])?;
    let down = basis_state(p.space(), 1)?;

    // Ensemble-averaged state after each step: the average over branches
    // weighted by Born probabilities.
    let mut stages = vec![stage_from_state("initial", &initial)?];
    for (k, name) in [(1, "after_measurement"), (2, "final")] {
        let prefix = Protocol::new(p.space().clone(), p.label(), p.steps()[..k].to_vec())?;
        let runs = run_enumerate(&initial, &prefix)?;
        let mut avg = initial.rho().scale_re(0.0);
        for t in &runs {
            avg = avg.add(&t.final_state.rho().scale_re(t.probability))?;
        }
        let averaged = QuantumState::from_density(p.space().clone(), avg)?;
        stages.push(stage_from_state(name, &averaged)?);
    }

    let runs = run_enumerate(&initial, &p)?;
    let mut checks = Vec::new();
    let mut pass = true;
    let mut worst_fid = 1.0f64;
    for t in &runs {
        let expected_prob = match t.records["m"].outcome_index {
            0 => alpha.norm_sqr(),
            _ => beta.norm_sqr(),
        };
        let prob_ok = (t.probability - expected_prob).abs() <= PROBABILITY_TOL;
        let fid = fidelity(&t.final_state, &down)?;
        worst_fid = worst_fid.min(fid);
        let fid_ok = fid >= 1.0 - EXAMPLE_FIDELITY_TOL;
        checks.push(format!(
            "outcome {}: probability {:.12} vs Born rule {:.12} ({}), final-state fidelity to |down> {:.12} ({})",
            t.records["m"].outcome_index,
            t.probability,
            expected_prob,
            if prob_ok { "ok" } else { "FAIL" },
            fid,
            if fid_ok { "ok" } else { "FAIL" }
        ));
        pass = pass && prob_ok && fid_ok;
    }
    Ok(ExampleBlock {
        label: p.label().to_string(),
        stages,
        fidelity: worst_fid,
        pass,
        checks,
    })
}

/// Three-spin transfer: moves (a, b) from the first spin onto the second
/// while handing the first spin the Bell correlation with the third.
fn three_spin_example(alpha: Complex64, beta: Complex64) -> Result<ExampleBlock, Failure> {
    let p = builtin_entanglement_transfer();
    let zero = Complex64::new(0.0, 0.0);
    let inv = 1.0 / 2.0f64.sqrt();
    let mut initial = vec![zero; 8];
    initial[0] = alpha.scale(inv);
    initial[3] = alpha.scale(inv);
    initial[4] = beta.scale(inv);
    initial[7] = beta.scale(inv);
    let initial = make_pure(p.space(), &initial)?;
    let mut expect = vec![zero; 8];
    expect[0] = alpha.scale(inv);
    expect[2] = beta.scale(inv);
    expect[5] = alpha.scale(inv);
    expect[7] = beta.scale(inv);
    let expected = make_pure(p.space(), &expect)?;

    let states = prefix_states(&initial, &p)?;
    let names = ["initial", "after_first_flip", "after_second_flip", "final"];
    let stages = names
        .iter()
        .zip(&states)
        .map(|(name, s)| stage_from_state(name, s))
        .collect::<Result<Vec<_>, _>>()?;

    let final_state = states.last().expect("final state");
    let fid = fidelity(final_state, &expected)?;
    let entropy = entanglement_entropy(final_state, &[0])?;
    let touched = touched_factors(p.steps());

    let mut checks = Vec::new();
    let fid_ok = fid >= 1.0 - EXAMPLE_FIDELITY_TOL;
    checks.push(format!(
        "final state matches Bell(1,3)(x)(a|up'> + b|down'>): fidelity {fid:.12} ({})",
        if fid_ok { "ok" } else { "FAIL" }
    ));
    let entropy_ok = (entropy - 1.0).abs() <= ENTROPY_TOL;
    checks.push(format!(
        "first spin's entanglement entropy reaches 1.000 bit: {entropy:.12} ({})",
        if entropy_ok { "ok" } else { "FAIL" }
    ));
    let untouched_ok = !touched.contains(&2);
    checks.push(format!(
        "no step acts on the third spin: touched factors {:?} ({})",
        touched,
        if untouched_ok { "ok" } else { "FAIL" }
    ));
    Ok(ExampleBlock {
        label: p.label().to_string(),
        stages,
        fidelity: fid,
        pass: fid_ok && entropy_ok && untouched_ok,
        checks,
    })
}

fn cmd_examples(args: ExamplesArgs) -> Result<ExitCode, Failure> {
    let norm = (args.alpha.norm_sqr() + args.beta.norm_sqr()).sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Failure::input(
            "alpha and beta must have a finite nonzero norm".into(),
        ));
    }
    let alpha = args.alpha.unscale(norm);
    let beta = args.beta.unscale(norm);

    let examples = vec![
        two_spin_example(alpha, beta)?,
        semiclassical_example(alpha, beta)?,
        three_spin_example(alpha, beta)?,
    ];
    let passed = examples.iter().filter(|e| e.pass).count();
    let total = examples.len();
    for e in &examples {
        eprintln!(
            "{}: {} (fidelity {:.12})",
            e.label,
            if e.pass { "PASS" } else { "FAIL" },
            e.fidelity
        );
    }
    eprintln!("{passed}/{total} PASS");

    let all_pass = passed == total;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "examples",
        seed: args.common.seed,
        generator: GENERATOR_NAME,
        tolerances: BTreeMap::from([
            ("fidelity", EXAMPLE_FIDELITY_TOL),
            ("reduced_state", REDUCED_STATE_TOL),
            ("entropy", ENTROPY_TOL),
            ("probability", PROBABILITY_TOL),
        ]),
        payload: ExamplesPayload {
            alpha: [alpha.re, alpha.im],
            beta: [beta.re, beta.im],
            examples,
            passed,
            total,
        },
    };
    emit(&report, &args.common.out)?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct PulsePayload {
    point: PulseValidationReport,
    sweep: Vec<PulseValidationReport>,
    best_fidelity: f64,
    /// Whether fidelity never decreased along the sweep toward weaker
    /// drives.
    monotone_toward_weak_drive: bool,
    pass: bool,
}

fn cmd_pulse(args: PulseArgs) -> Result<ExitCode, Failure> {
    let params = SpinPairParams::new(args.omega, args.omega_prime, args.gamma)?;
    let point = validate_selective_pulse(&params, args.amplitude)?;
    let sweep = SWEEP_FRACTIONS
        .iter()
        .map(|f| validate_selective_pulse(&params, f * args.gamma.abs()))
        .collect::<Result<Vec<_>, Error>>()?;

    let best_fidelity = sweep
        .iter()
        .map(|r| r.fidelity)
        .fold(point.fidelity, f64::max);
    let monotone = sweep.windows(2).all(|w| w[1].fidelity >= w[0].fidelity);
    let pass = best_fidelity >= PULSE_FIDELITY_THRESHOLD;

    eprintln!(
        "validation point: amplitude {:.6e} rad/s, fidelity {:.9}, {} steps",
        point.pulse.amplitude(),
        point.fidelity,
        point.steps_used
    );
    for r in &sweep {
        eprintln!(
            "sweep: amplitude {:.6e} rad/s, fidelity {:.9}{}",
            r.pulse.amplitude(),
            r.fidelity,
            if r.warnings.is_empty() {
                String::new()
            } else {
                format!(" ({})", r.warnings.join("; "))
            }
        );
    }
    eprintln!(
        "best fidelity {best_fidelity:.9}: {}",
        if pass { "PASS" } else { "FAIL" }
    );

    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "pulse",
        seed: args.common.seed,
        generator: GENERATOR_NAME,
        tolerances: BTreeMap::from([
            ("step", STEP_TOL),
            ("propagator_unitarity", PROPAGATOR_UNIT_TOL),
            ("fidelity_threshold", PULSE_FIDELITY_THRESHOLD),
        ]),
        payload: PulsePayload {
            point,
            sweep,
            best_fidelity,
            monotone_toward_weak_drive: monotone,
            pass,
        },
    };
    emit(&report, &args.common.out)?;
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
