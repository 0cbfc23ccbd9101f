// SPDX-License-Identifier: Apache-2.0

//! Measurement protocols: the ideal entangling circuit and schedule-driven
//! pulse sequences, plus ensemble averaging and field-response slopes.
//!
//! Every protocol starts from the sensor in `|0⟩`, opens the interferometer
//! with a central π/2 pulse about y and closes it with a central π/2 pulse
//! about x before reading `P₁`.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, configuration_weights, sample_configuration, DarkFrame, FieldWaveform, SpinSystem};
use crate::quantum::{
    apply_controlled_local, apply_local, central_coherence, local_unitary_matrix, matvec, probability_central_one, rotation_matrix,
    target_sites, Axis, Propagator, StateVector, Target, C64,
};
use crate::seeds::trial_rng;
use crate::seqlang::{expand_wahuha, PulseEvent, Schedule};

/// Durations are rounded to multiples of `2⁻⁴⁴` of the sensing period so
/// repeated intervals share one cached propagator.
const DURATION_QUANTUM: f64 = 5.684_341_886_080_802e-14; // 2^-44

/// Longest pulse-block period searched for when compressing repeated steps.
const MAX_PERIOD: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolResult {
    pub p1: f64,
    pub signal: f64,
    pub final_state: Option<StateVector>,
    pub phase_estimate: Option<f64>,
}

impl ProtocolResult {
    fn from_state(state: StateVector) -> Self {
        let p1 = probability_central_one(&state);
        let signal = (2.0 * p1 - 1.0).clamp(-1.0, 1.0);
        Self {
            p1,
            signal,
            final_state: Some(state),
            phase_estimate: Some(signal.asin()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProtocolKind {
    IdealCircuit { gate_angles: Vec<f64> },
    Scheduled { schedule: Schedule },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub tau: f64,
    pub waveform: FieldWaveform,
}

impl ProtocolSpec {
    pub fn ideal_circuit(gate_angles: Vec<f64>, tau: f64, waveform: FieldWaveform) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self {
            kind: ProtocolKind::IdealCircuit { gate_angles },
            tau,
            waveform,
        })
    }

    pub fn scheduled(schedule: Schedule, tau: f64, waveform: FieldWaveform) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self {
            kind: ProtocolKind::Scheduled { schedule },
            tau,
            waveform,
        })
    }

    pub fn with_amplitude(&self, b: f64) -> Self {
        Self {
            kind: self.kind.clone(),
            tau: self.tau,
            waveform: self.waveform.with_amplitude(b),
        }
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self {
            kind: self.kind.clone(),
            tau,
            waveform: self.waveform.clone(),
        })
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::Inconsistent(format!("sensing time {tau} must be positive and finite")))
    }
}

fn open_interferometer(state: &mut StateVector) {
    apply_local(state.amplitudes_mut(), 0, &rotation_matrix(Axis::Y, FRAC_PI_2));
}

fn close_interferometer(state: &mut StateVector) {
    apply_local(state.amplitudes_mut(), 0, &rotation_matrix(Axis::X, FRAC_PI_2));
}

fn check_initial(system: &SpinSystem, initial: &StateVector) -> Result<()> {
    if initial.n_spins() != system.n_spins() {
        return Err(Error::DimensionMismatch {
            expected: system.n_spins(),
            found: initial.n_spins(),
        });
    }
    Ok(())
}

/// Field-term diagonal `κ S_z + ξ Σ I_zⁱ` (per unit field) in the computational basis.
fn field_diagonal(system: &SpinSystem) -> Vec<f64> {
    let n = system.n_spins();
    (0..1usize << n)
        .map(|k| {
            let central = if k & 1 == 1 { 0.5 } else { -0.5 };
            let dark: f64 = (1..n).map(|s| if k >> s & 1 == 0 { 1.0 } else { -1.0 }).sum();
            system.kappa_s() * central + system.xi() * dark
        })
        .collect()
}

/// Entangle, sense, swap arms, disentangle, read out.
///
/// The gates `exp(−iφᵢ I_xⁱ)` act on dark spin `i` when the sensor is in
/// `|1⟩`; the field acts through `b(κ S_z + ξ Σ I_z)` only.
pub fn run_ideal_circuit(
    system: &SpinSystem,
    gate_angles: &[f64],
    waveform: &FieldWaveform,
    tau: f64,
    initial: &StateVector,
) -> Result<ProtocolResult> {
    check_tau(tau)?;
    check_initial(system, initial)?;
    if system.n_dark() > crate::model::MAX_EXACT_DARK {
        return Err(Error::DimensionCap {
            n_dark: system.n_dark(),
            cap: crate::model::MAX_EXACT_DARK,
        });
    }
    if gate_angles.len() != system.n_dark() {
        return Err(Error::DimensionMismatch {
            expected: system.n_dark(),
            found: gate_angles.len(),
        });
    }
    let gates: Vec<Matrix2<C64>> = gate_angles.iter().map(|&phi| rotation_matrix(Axis::X, 2.0 * phi)).collect();
    let entangle = |state: &mut StateVector| {
        for (i, g) in gates.iter().enumerate() {
            apply_controlled_local(state.amplitudes_mut(), i + 1, g);
        }
    };
    let accumulated = waveform.integral(0.0, 1.0, tau);
    let mut state = initial.clone();
    open_interferometer(&mut state);
    entangle(&mut state);
    for (a, d) in state.amplitudes_mut().iter_mut().zip(field_diagonal(system)) {
        *a *= C64::from_polar(1.0, -d * accumulated);
    }
    apply_local(state.amplitudes_mut(), 0, &rotation_matrix(Axis::X, std::f64::consts::PI));
    entangle(&mut state);
    close_interferometer(&mut state);
    Ok(ProtocolResult::from_state(state))
}

/// Runs a pulse schedule with exact free evolution between pulses.
pub fn run_schedule(
    system: &SpinSystem,
    schedule: &Schedule,
    waveform: &FieldWaveform,
    tau: f64,
    initial: &StateVector,
    include_bath: bool,
) -> Result<ProtocolResult> {
    CompiledProgram::new(system, schedule, waveform, tau, include_bath)?.run(initial)
}

/// Runs either protocol kind.
pub fn run(system: &SpinSystem, spec: &ProtocolSpec, initial: &StateVector, include_bath: bool) -> Result<ProtocolResult> {
    match &spec.kind {
        ProtocolKind::IdealCircuit { gate_angles } => {
            run_ideal_circuit(system, gate_angles, &spec.waveform, spec.tau, initial)
        }
        ProtocolKind::Scheduled { schedule } => {
            run_schedule(system, schedule, &spec.waveform, spec.tau, initial, include_bath)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct StepKey {
    group: usize,
    quanta: u64,
    b_bits: u64,
}

/// Pulses applied at one instant: `(site, 2×2 unitary)` in listing order.
type PulseGroup = Vec<(usize, Matrix2<C64>)>;

#[derive(Clone, Debug)]
enum Backend {
    /// No bath flip-flops: the Hamiltonian is diagonal in the lab frame.
    Diagonal {
        groups: Vec<PulseGroup>,
        phases: Vec<Vec<C64>>,
        steps: Vec<(usize, usize)>,
    },
    /// Dense fused step unitaries, applied in order.
    Dense { matrices: Vec<DMatrix<C64>>, order: Vec<usize> },
}

/// A schedule bound to a system, waveform and sensing time, reduced to a
/// sequence of cached step operators that can be applied to many initial
/// states.
#[derive(Clone, Debug)]
pub struct CompiledProgram {
    n_spins: usize,
    backend: Backend,
}

impl CompiledProgram {
    pub fn new(
        system: &SpinSystem,
        schedule: &Schedule,
        waveform: &FieldWaveform,
        tau: f64,
        include_bath: bool,
    ) -> Result<Self> {
        check_tau(tau)?;
        let n_spins = system.n_spins();
        if system.n_dark() > crate::model::MAX_EXACT_DARK {
            return Err(Error::DimensionCap {
                n_dark: system.n_dark(),
                cap: crate::model::MAX_EXACT_DARK,
            });
        }
        let (groups, keys) = plan_steps(schedule, waveform, n_spins)?;
        let frames = vec![DarkFrame::Z; system.n_dark()];
        let dense = include_bath && system.has_bath();
        let backend = if !dense {
            let base = build_hamiltonian(system, 0.0, &frames, false)?;
            let diag0: Vec<f64> = (0..base.dim()).map(|k| base.entries()[(k, k)].re).collect();
            let diagb = field_diagonal(system);
            let mut index: HashMap<(u64, u64), usize> = HashMap::new();
            let mut phases = Vec::new();
            let mut steps = Vec::with_capacity(keys.len());
            for key in &keys {
                let slot = *index.entry((key.quanta, key.b_bits)).or_insert_with(|| {
                    let d = key.quanta as f64 * DURATION_QUANTUM * tau;
                    let b = f64::from_bits(key.b_bits);
                    phases.push(
                        diag0
                            .iter()
                            .zip(&diagb)
                            .map(|(h0, hb)| C64::from_polar(1.0, -(h0 + b * hb) * d))
                            .collect(),
                    );
                    phases.len() - 1
                });
                steps.push((key.group, slot));
            }
            Backend::Diagonal { groups, phases, steps }
        } else {
            let mut propagators: HashMap<u64, Propagator> = HashMap::new();
            let mut group_matrices: HashMap<usize, DMatrix<C64>> = HashMap::new();
            let mut index: HashMap<StepKey, usize> = HashMap::new();
            let mut matrices = Vec::new();
            let mut seq = Vec::with_capacity(keys.len());
            for key in &keys {
                if let Some(&i) = index.get(key) {
                    seq.push(i);
                    continue;
                }
                if !propagators.contains_key(&key.b_bits) {
                    let h = build_hamiltonian(system, f64::from_bits(key.b_bits), &frames, true)?;
                    propagators.insert(key.b_bits, Propagator::new(&h)?);
                }
                let free = propagators[&key.b_bits].unitary(key.quanta as f64 * DURATION_QUANTUM * tau);
                let pulses = group_matrices
                    .entry(key.group)
                    .or_insert_with(|| local_unitary_matrix(&groups[key.group], n_spins));
                matrices.push(free * &*pulses);
                index.insert(*key, matrices.len() - 1);
                seq.push(matrices.len() - 1);
            }
            let order = compress(&seq, &mut matrices);
            Backend::Dense { matrices, order }
        };
        Ok(Self { n_spins, backend })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Applies the schedule (pulses and free evolution, no opening or
    /// closing pulses) to `state`.
    pub fn evolve(&self, state: &StateVector) -> Result<StateVector> {
        if state.n_spins() != self.n_spins {
            return Err(Error::DimensionMismatch {
                expected: self.n_spins,
                found: state.n_spins(),
            });
        }
        let mut out = state.clone();
        match &self.backend {
            Backend::Diagonal { groups, phases, steps } => {
                let amps = out.amplitudes_mut();
                for &(group, slot) in steps {
                    for (site, m) in &groups[group] {
                        apply_local(amps, *site, m);
                    }
                    for (a, p) in amps.iter_mut().zip(&phases[slot]) {
                        *a *= p;
                    }
                }
            }
            Backend::Dense { matrices, order } => {
                let mut scratch = vec![C64::new(0.0, 0.0); out.dim()];
                for &i in order {
                    matvec(&matrices[i], out.amplitudes(), &mut scratch);
                    out.amplitudes_mut().copy_from_slice(&scratch);
                }
            }
        }
        Ok(out)
    }

    /// State just before the closing π/2 pulse.
    pub fn pre_readout(&self, initial: &StateVector) -> Result<StateVector> {
        let mut state = initial.clone();
        open_interferometer(&mut state);
        self.evolve(&state)
    }

    /// Sensor coherence `2 Σ a(0,d)·conj(a(1,d))` just before readout.
    pub fn coherence(&self, initial: &StateVector) -> Result<C64> {
        Ok(central_coherence(&self.pre_readout(initial)?))
    }

    pub fn run(&self, initial: &StateVector) -> Result<ProtocolResult> {
        let mut state = self.pre_readout(initial)?;
        close_interferometer(&mut state);
        Ok(ProtocolResult::from_state(state))
    }
}

/// Splits `[0, 1]` at pulse times and waveform breakpoints. Each step is a
/// pulse group applied at the start of an interval followed by free
/// evolution under the field value at that instant.
fn plan_steps(schedule: &Schedule, waveform: &FieldWaveform, n_spins: usize) -> Result<(Vec<PulseGroup>, Vec<StepKey>)> {
    let mut times: Vec<f64> = vec![0.0, 1.0];
    times.extend(schedule.events().iter().map(|e| e.t_frac));
    times.extend(waveform.breakpoints());
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut groups: Vec<PulseGroup> = vec![Vec::new()];
    let mut group_ids: HashMap<Vec<(Target, Axis, u64)>, usize> = HashMap::new();
    let mut events = schedule.events().iter().peekable();
    let mut keys = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let mut here: Vec<&PulseEvent> = Vec::new();
        while let Some(e) = events.next_if(|e| e.t_frac == t) {
            here.push(e);
        }
        let group = if here.is_empty() {
            0
        } else {
            let signature: Vec<_> = here.iter().map(|e| (e.target, e.axis, e.angle_deg.to_bits())).collect();
            match group_ids.get(&signature) {
                Some(&g) => g,
                None => {
                    let mut ops = Vec::new();
                    for e in &here {
                        let sites = target_sites(e.target, n_spins).map_err(|_| {
                            Error::Inconsistent(format!("pulse target {} needs more dark spins", e.target))
                        })?;
                        let m = rotation_matrix(e.axis, e.angle_rad());
                        ops.extend(sites.into_iter().map(|s| (s, m)));
                    }
                    groups.push(ops);
                    group_ids.insert(signature, groups.len() - 1);
                    groups.len() - 1
                }
            }
        };
        let (quanta, b) = match times.get(k + 1) {
            Some(&next) => (((next - t) / DURATION_QUANTUM).round() as u64, waveform.value_at(t)),
            None => (0, 0.0),
        };
        if group == 0 && quanta == 0 {
            continue;
        }
        keys.push(StepKey {
            group,
            quanta,
            b_bits: (b + 0.0).to_bits(),
        });
    }
    Ok((groups, keys))
}

/// Replaces runs of a repeating block (period ≤ 8, at least three repeats)
/// by one block power computed by repeated squaring. Returns the operator
/// order to apply; new block matrices are appended to `matrices`.
fn compress(seq: &[usize], matrices: &mut Vec<DMatrix<C64>>) -> Vec<usize> {
    let mut order = Vec::new();
    let mut i = 0;
    while i < seq.len() {
        let mut best = (1, 1);
        for p in 1..=MAX_PERIOD.min(seq.len() - i) {
            let block = &seq[i..i + p];
            let mut count = 1;
            while i + (count + 1) * p <= seq.len() && &seq[i + count * p..i + (count + 1) * p] == block {
                count += 1;
            }
            if count >= 3 && p * count > best.0 * best.1 {
                best = (p, count);
            }
        }
        let (p, count) = best;
        if count == 1 {
            order.push(seq[i]);
            i += 1;
            continue;
        }
        let mut block = matrices[seq[i]].clone();
        for &j in &seq[i + 1..i + p] {
            block = &matrices[j] * block;
        }
        matrices.push(matrix_power(block, count));
        order.push(matrices.len() - 1);
        i += p * count;
    }
    order
}

fn matrix_power(mut base: DMatrix<C64>, mut exp: usize) -> DMatrix<C64> {
    let mut acc: Option<DMatrix<C64>> = None;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => &base * a,
            });
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    acc.expect("power of at least one")
}

/// Named schedules. Parameterized names take the cycle count in
/// parentheses, e.g. `echo_wahuha(8)`.
pub fn builtin_schedule(name: &str) -> Result<Schedule> {
    let unknown = || Error::UnknownSchedule(name.to_string());
    let (base, cycles) = match name.split_once('(') {
        Some((base, rest)) => {
            let n = rest
                .strip_suffix(')')
                .and_then(|n| n.trim().parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .ok_or_else(unknown)?;
            (base, Some(n))
        }
        None => (name, None),
    };
    let pulse = |t, target, axis, angle| PulseEvent {
        t_frac: t,
        target,
        axis,
        angle_deg: angle,
    };
    let echo = || pulse(0.5, Target::Central, Axis::X, 180.0);
    let assisted = || {
        vec![
            pulse(0.25, Target::DarkAll, Axis::Y, 90.0),
            echo(),
            pulse(0.5, Target::DarkAll, Axis::MinusY, 90.0),
            pulse(0.75, Target::DarkAll, Axis::Y, 90.0),
            pulse(1.0, Target::DarkAll, Axis::MinusY, 90.0),
        ]
    };
    let events = match (base, cycles) {
        ("spin_echo", None) => vec![echo()],
        ("assisted_echo", None) => assisted(),
        ("fid", None) => vec![],
        ("echo_wahuha", Some(n)) => {
            let mut ev = vec![echo()];
            ev.extend(expand_wahuha(0.0, 0.5, n)?);
            ev.extend(expand_wahuha(0.5, 1.0, n)?);
            ev
        }
        ("fid_wahuha", Some(n)) => {
            let mut ev = expand_wahuha(0.0, 0.5, n)?;
            ev.extend(expand_wahuha(0.5, 1.0, n)?);
            ev
        }
        ("assisted_wahuha", Some(n)) => {
            let per_quarter = n.div_ceil(2);
            let mut ev = assisted();
            for q in 0..4 {
                ev.extend(expand_wahuha(q as f64 * 0.25, (q + 1) as f64 * 0.25, per_quarter)?);
            }
            ev
        }
        _ => return Err(unknown()),
    };
    Ok(Schedule::new(name, events))
}

/// How initial dark-spin configurations are drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum Ensemble {
    /// Every configuration, weighted by its probability.
    Exact,
    /// `trials` independent draws; trial `k` uses seed stream `(seed, k)`.
    Sampled { trials: usize, seed: u64 },
    /// `pairs` draws, each together with its global spin flip. Unbiased only
    /// for an unpolarized bath.
    Antithetic { pairs: usize, seed: u64 },
}

impl Ensemble {
    /// `(configuration, weight)` pairs; weights sum to one.
    pub fn members(&self, system: &SpinSystem) -> Result<Vec<(usize, f64)>> {
        match *self {
            Ensemble::Exact => Ok(configuration_weights(system.n_dark(), system.polarization())),
            Ensemble::Sampled { trials, seed } => {
                if trials == 0 {
                    return Err(Error::Config("ensemble needs at least one trial".into()));
                }
                let w = 1.0 / trials as f64;
                Ok((0..trials as u64)
                    .map(|k| (sample_configuration(system, &mut trial_rng(seed, 0, k)), w))
                    .collect())
            }
            Ensemble::Antithetic { pairs, seed } => {
                if pairs == 0 {
                    return Err(Error::Config("ensemble needs at least one pair".into()));
                }
                if system.polarization() != 0.0 {
                    return Err(Error::Config("antithetic pairing requires P = 0".into()));
                }
                let mask = (1usize << system.n_dark()) - 1;
                let w = 0.5 / pairs as f64;
                Ok((0..pairs as u64)
                    .flat_map(|k| {
                        let c = sample_configuration(system, &mut trial_rng(seed, 0, k));
                        [(c, w), (!c & mask, w)]
                    })
                    .collect())
            }
        }
    }
}

/// Ensemble-averaged signal `S̄ = 2P̄₁ − 1` at the protocol's field amplitude.
pub fn mean_signal(system: &SpinSystem, spec: &ProtocolSpec, members: &[(usize, f64)], include_bath: bool) -> Result<f64> {
    let n = system.n_dark();
    let program = match &spec.kind {
        ProtocolKind::Scheduled { schedule } => Some(CompiledProgram::new(
            system,
            schedule,
            &spec.waveform,
            spec.tau,
            include_bath,
        )?),
        ProtocolKind::IdealCircuit { .. } => None,
    };
    let mut terms = Vec::with_capacity(members.len());
    for &(config, w) in members {
        let initial = crate::model::configuration_state(n, config)?;
        let result = match (&program, &spec.kind) {
            (Some(p), _) => p.run(&initial)?,
            (None, ProtocolKind::IdealCircuit { gate_angles }) => {
                run_ideal_circuit(system, gate_angles, &spec.waveform, spec.tau, &initial)?
            }
            (None, ProtocolKind::Scheduled { .. }) => unreachable!(),
        };
        terms.push(w * result.signal);
    }
    Ok(pairwise_sum(&terms))
}

/// Field step for finite differences: `max(κ, n·ξ)·τ·δb = 10⁻⁴`.
pub fn slope_step(system: &SpinSystem, tau: f64) -> Result<f64> {
    let scale = system.kappa_s().abs().max(system.n_dark() as f64 * system.xi().abs()) * tau;
    if !(scale > 0.0) {
        return Err(Error::DegenerateStep(
            "sensor and dark field couplings are both zero".into(),
        ));
    }
    Ok(1e-4 / scale)
}

/// `dS̄/db` at `b = 0` by central difference, with the same initial
/// configurations at `±δb`.
pub fn response_slope(system: &SpinSystem, spec: &ProtocolSpec, ensemble: &Ensemble, include_bath: bool) -> Result<f64> {
    let db = slope_step(system, spec.tau)?;
    let members = ensemble.members(system)?;
    let plus = mean_signal(system, &spec.with_amplitude(db), &members, include_bath)?;
    let minus = mean_signal(system, &spec.with_amplitude(-db), &members, include_bath)?;
    Ok((plus - minus) / (2.0 * db))
}

/// Deterministic tree summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Complex counterpart of [`pairwise_sum`].
pub fn pairwise_sum_complex(values: &[C64]) -> C64 {
    match values.len() {
        0 => C64::new(0.0, 0.0),
        1 => values[0],
        n => pairwise_sum_complex(&values[..n / 2]) + pairwise_sum_complex(&values[n / 2..]),
    }
}

/// Ensemble-averaged sensor coherence before readout.
pub fn mean_coherence(program: &CompiledProgram, n_dark: usize, members: &[(usize, f64)]) -> Result<C64> {
    let mut terms = Vec::with_capacity(members.len());
    for &(config, w) in members {
        let initial = crate::model::configuration_state(n_dark, config)?;
        terms.push(program.coherence(&initial)? * w);
    }
    Ok(pairwise_sum_complex(&terms))
}
