// SPDX-License-Identifier: Apache-2.0

//! Closed-form predictors and the pair-cluster approximation to bath-induced
//! signal decay.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{configuration_state, FieldWaveform, SpinSystem};
use crate::protocol::{mean_coherence, pairwise_sum, CompiledProgram, Ensemble};
use crate::quantum::{Target, C64};
use crate::seqlang::Schedule;

/// Below this magnitude a single-spin product is treated as fully decayed
/// and the pair correction is dropped.
const PAIR_GUARD: f64 = 1e-3;

/// Reference coherences below this are reported as inconsistent.
const COHERENCE_FLOOR: f64 = 1e-12;

/// `2·θ_d·Σ sin²(φᵢ) + θ_s`.
pub fn phase_ideal(theta_d: f64, gate_angles: &[f64], theta_s: f64) -> f64 {
    2.0 * theta_d * gate_angles.iter().map(|p| p.sin().powi(2)).sum::<f64>() + theta_s
}

/// `(θ_s, θ_d)` accumulated in the ideal circuit: `θ_d = ξ∫b dt` and
/// `θ_s = −κ∫b dt`. The sensor sign follows from `S_z = |1⟩⟨1| − 1/2`
/// and the π pulse about x that swaps the arms.
pub fn ideal_circuit_phases(system: &SpinSystem, waveform: &FieldWaveform, tau: f64) -> (f64, f64) {
    let b_int = waveform.integral(0.0, 1.0, tau);
    (-system.kappa_s() * b_int, system.xi() * b_int)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePrediction {
    /// Phase per unit sensing time; multiply by `tau` for the accumulated phase.
    pub phi: f64,
    pub theta_s_bar: f64,
    pub theta_d_bar: f64,
    /// `2·P·θ̄_d·sin²(λᵢτ/4)` for each dark spin.
    pub per_spin: Vec<f64>,
    pub tau: f64,
}

impl PhasePrediction {
    pub fn accumulated(&self) -> f64 {
        self.phi * self.tau
    }
}

/// Finite-polarization phase of the assisted echo:
/// `Φ = θ̄_s + 2P·θ̄_d·Σ sin²(λᵢτ/4)` with
/// `θ̄_s = (κ/τ)[∫₀^{τ/2} − ∫_{τ/2}^τ] b dt` and `θ̄_d = (ξ/τ)∫_{τ/2}^{3τ/4} b dt`.
pub fn phase_assisted(system: &SpinSystem, waveform: &FieldWaveform, tau: f64) -> PhasePrediction {
    let theta_s_bar =
        system.kappa_s() / tau * (waveform.integral(0.0, 0.5, tau) - waveform.integral(0.5, 1.0, tau));
    let theta_d_bar = system.xi() / tau * waveform.integral(0.5, 0.75, tau);
    let p = system.polarization();
    let per_spin: Vec<f64> = system
        .lambda()
        .iter()
        .map(|l| 2.0 * p * theta_d_bar * (l * tau / 4.0).sin().powi(2))
        .collect();
    PhasePrediction {
        phi: theta_s_bar + per_spin.iter().sum::<f64>(),
        theta_s_bar,
        theta_d_bar,
        per_spin,
        tau,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingClassification {
    pub n_sc: usize,
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    /// `Σ'(λᵢτ)²/8` over the weak spins.
    pub weak_sum: f64,
    pub intermediate: Vec<usize>,
}

/// Strong: `|λᵢτ| ≥ π`. Weak: `|λᵢτ| ≤ 1`. Anything else is intermediate.
pub fn classify_couplings(lambda: &[f64], tau: f64) -> CouplingClassification {
    let mut out = CouplingClassification {
        n_sc: 0,
        strong: vec![],
        weak: vec![],
        weak_sum: 0.0,
        intermediate: vec![],
    };
    for (i, l) in lambda.iter().enumerate() {
        let x = (l * tau).abs();
        if x >= PI {
            out.strong.push(i);
        } else if x <= 1.0 {
            out.weak.push(i);
            out.weak_sum += x * x / 8.0;
        } else {
            out.intermediate.push(i);
        }
    }
    out.n_sc = out.strong.len();
    out
}

/// `δb_min = 1/(|slope|·√(T/τ))`: unit per-shot signal noise over `T/τ` shots.
pub fn sensitivity_min_field(slope: f64, total_time: f64, tau: f64) -> Result<f64> {
    if slope == 0.0 {
        return Err(Error::ZeroSlope);
    }
    if !(tau > 0.0) || !(total_time >= tau) {
        return Err(Error::Config(format!(
            "need T >= tau > 0 (T = {total_time}, tau = {tau})"
        )));
    }
    Ok(1.0 / (slope.abs() * (total_time / tau).sqrt()))
}

fn pairs(system: &SpinSystem) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    let n = system.n_dark();
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j, system.kappa_bath()[i][j])))
}

/// `1 − (τ⁴/8)·Σ_{i<j}(1−P²)κᵢⱼ²(λᵢ−λⱼ)²`.
pub fn fidelity_echo_series(system: &SpinSystem, tau: f64) -> f64 {
    let l = system.lambda();
    let p2 = system.polarization().powi(2);
    let sum: f64 = pairs(system)
        .map(|(i, j, k)| (1.0 - p2) * k * k * (l[i] - l[j]).powi(2))
        .sum();
    1.0 - tau.powi(4) / 8.0 * sum
}

/// `1 − (τ⁴/128)·Σ_{i<j}κᵢⱼ²[7(λᵢ²+λⱼ²) + 12λᵢλⱼ + P²(λᵢ+2λⱼ)(2λᵢ+λⱼ)]`.
pub fn fidelity_assisted_series(system: &SpinSystem, tau: f64) -> f64 {
    let l = system.lambda();
    let p2 = system.polarization().powi(2);
    let sum: f64 = pairs(system)
        .map(|(i, j, k)| {
            let (a, b) = (l[i], l[j]);
            k * k * (7.0 * (a * a + b * b) + 12.0 * a * b + p2 * (a + 2.0 * b) * (2.0 * a + b))
        })
        .sum();
    1.0 - tau.powi(4) / 128.0 * sum
}

fn zero_field() -> FieldWaveform {
    FieldWaveform::dc(0.0)
}

fn ensemble_coherence(system: &SpinSystem, schedule: &Schedule, tau: f64, include_bath: bool) -> Result<C64> {
    let program = CompiledProgram::new(system, schedule, &zero_field(), tau, include_bath)?;
    mean_coherence(&program, system.n_dark(), &Ensemble::Exact.members(system)?)
}

/// Sensor coherence of an uncoupled sensor under the same pulses.
fn reference_coherence(system: &SpinSystem, schedule: &Schedule, tau: f64) -> Result<C64> {
    let free = system.with_lambda(vec![0.0; system.n_dark()])?.without_bath();
    ensemble_coherence(&free, schedule, tau, false)
}

/// Ensemble state fidelity of the sensor at the end of `schedule`, relative
/// to the same run without bath couplings: `(1 + Re(c·ĉ₀*))/2`, where `c` is
/// the averaged coherence and `ĉ₀` the unit-normalized bath-free coherence.
pub fn exact_fidelity(system: &SpinSystem, schedule: &Schedule, tau: f64) -> Result<f64> {
    let c = ensemble_coherence(system, schedule, tau, true)?;
    let c0 = ensemble_coherence(&system.without_bath(), schedule, tau, false)?;
    if c0.norm() < COHERENCE_FLOOR {
        return Err(Error::Inconsistent("bath-free run has no coherence left".into()));
    }
    Ok((1.0 + (c * (c0 / c0.norm()).conj()).re) / 2.0)
}

/// Complex decay factor `c̄/c_ref` of a (sub)system at zero field.
fn decay_factor(system: &SpinSystem, schedule: &Schedule, tau: f64) -> Result<C64> {
    let c_ref = reference_coherence(system, schedule, tau)?;
    Ok(ensemble_coherence(system, schedule, tau, true)? / c_ref)
}

/// Normalized zero-field signal of the full system by exact evolution.
pub fn exact_signal(system: &SpinSystem, schedule: &Schedule, tau: f64) -> Result<f64> {
    Ok(decay_factor(system, schedule, tau)?.re)
}

fn check_collective(schedule: &Schedule) -> Result<()> {
    if schedule.events().iter().any(|e| matches!(e.target, Target::Dark(_))) {
        return Err(Error::Inconsistent(
            "cluster expansion needs collective dark pulses only".into(),
        ));
    }
    Ok(())
}

/// Per-configuration zero-field decay factors `c(s)/c_ref` of a subsystem,
/// indexed by its local configuration bits.
fn configuration_factors(system: &SpinSystem, schedule: &Schedule, tau: f64, c_ref: C64) -> Result<Vec<C64>> {
    let program = CompiledProgram::new(system, schedule, &zero_field(), tau, true)?;
    (0..1usize << system.n_dark())
        .map(|s| Ok(program.coherence(&configuration_state(system.n_dark(), s)?)? / c_ref))
        .collect()
}

/// Cluster estimate of the complex decay factor for each member
/// configuration: `Πᵢ Lᵢ(sᵢ) · Π_{i<j} L_ij(sᵢ,sⱼ)/(Lᵢ(sᵢ)·Lⱼ(sⱼ))`.
fn cluster_terms(system: &SpinSystem, schedule: &Schedule, tau: f64, members: &[(usize, f64)]) -> Result<Vec<C64>> {
    check_collective(schedule)?;
    let n = system.n_dark();
    let c_ref = reference_coherence(&system.subsystem(&[0])?, schedule, tau)?;
    if c_ref.norm() < COHERENCE_FLOOR {
        return Err(Error::Inconsistent("uncoupled sensor has no coherence left".into()));
    }
    let singles = (0..n)
        .map(|i| configuration_factors(&system.subsystem(&[i])?, schedule, tau, c_ref))
        .collect::<Result<Vec<_>>>()?;
    let mut corrections = Vec::new();
    for (i, j, k) in pairs(system) {
        if k == 0.0 {
            continue;
        }
        let pair = configuration_factors(&system.subsystem(&[i, j])?, schedule, tau, c_ref)?;
        let w: Vec<C64> = (0..4)
            .map(|s| {
                let product = singles[i][s & 1] * singles[j][s >> 1];
                if product.norm() < PAIR_GUARD {
                    C64::new(1.0, 0.0)
                } else {
                    pair[s] / product
                }
            })
            .collect();
        corrections.push((i, j, w));
    }
    Ok(members
        .iter()
        .map(|&(config, _)| {
            let bit = |i: usize| config >> i & 1;
            let mut total = (0..n).fold(C64::new(1.0, 0.0), |acc, i| acc * singles[i][bit(i)]);
            for (i, j, w) in &corrections {
                total *= w[bit(*i) | bit(*j) << 1];
            }
            total
        })
        .collect())
}

fn cluster_point(system: &SpinSystem, schedule: &Schedule, t: f64, ensemble: &Ensemble, members: &[(usize, f64)]) -> Result<CurvePoint> {
    let terms = cluster_terms(system, schedule, t, members)?;
    let weighted: Vec<f64> = terms.iter().zip(members).map(|(c, &(_, w))| w * c.re).collect();
    let mean = pairwise_sum(&weighted);
    let stderr = match ensemble {
        Ensemble::Sampled { trials, .. } if *trials > 1 => {
            let m = *trials as f64;
            let dev: Vec<f64> = terms.iter().map(|c| (c.re - mean).powi(2)).collect();
            (pairwise_sum(&dev) / (m - 1.0) / m).sqrt()
        }
        _ => 0.0,
    };
    Ok(CurvePoint { t, mean, stderr })
}

/// Leading-order cluster estimate of the normalized signal at one time,
/// averaged over the ensemble's initial configurations. Every factor comes
/// from an exact run of a one- or two-spin subsystem.
pub fn cluster_signal_at(system: &SpinSystem, schedule: &Schedule, tau: f64, ensemble: &Ensemble) -> Result<f64> {
    let members = ensemble.members(system)?;
    Ok(cluster_point(system, schedule, tau, ensemble, &members)?.mean)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayMetrics {
    /// First `1/e` crossing; `None` when the curve never crosses (censored).
    pub t_1e: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

impl DecayMetrics {
    pub fn is_censored(&self) -> bool {
        self.t_1e.is_none()
    }
}

/// Cluster-expansion decay curve of one system over `times` (each time is
/// the total sequence duration τ). The same configurations are used at
/// every time; sampled ensembles report the standard error of the mean.
pub fn cluster_signal(system: &SpinSystem, schedule: &Schedule, times: &[f64], ensemble: &Ensemble) -> Result<DecayMetrics> {
    let members = ensemble.members(system)?;
    let curve = times
        .iter()
        .map(|&t| cluster_point(system, schedule, t, ensemble, &members))
        .collect::<Result<Vec<_>>>()?;
    decay_time(curve)
}

/// Linear-interpolated first crossing of `1/e`, with the curve taken as
/// 1 at `t = 0`.
pub fn decay_time(curve: Vec<CurvePoint>) -> Result<DecayMetrics> {
    if curve.windows(2).any(|w| !(w[0].t < w[1].t)) || curve.first().is_some_and(|p| p.t < 0.0) {
        return Err(Error::Config("curve times must be non-negative and strictly increasing".into()));
    }
    let level = (-1.0f64).exp();
    let mut prev = (0.0, 1.0);
    let mut t_1e = None;
    for p in &curve {
        if p.mean < level {
            let (t0, s0) = prev;
            t_1e = Some(if s0 == p.mean {
                p.t
            } else {
                t0 + (s0 - level) / (s0 - p.mean) * (p.t - t0)
            });
            break;
        }
        prev = (p.t, p.mean);
    }
    Ok(DecayMetrics { t_1e, curve })
}
