// SPDX-License-Identifier: Apache-2.0

//! Invariant suite behind `simulate validate`.

use std::f64::consts::PI;

use centralspin::analysis::{cluster_signal_at, exact_signal, sensitivity_min_field};
use centralspin::model::{build_hamiltonian, configuration_state, DarkFrame};
use centralspin::protocol::{builtin_schedule, mean_signal, response_slope, run_schedule, slope_step, Ensemble};
use centralspin::quantum::{evolve, Axis, Target};
use centralspin::seeds::{trial_rng, trial_seed};
use centralspin::seqlang::{parse, serialize};
use centralspin::{FieldWaveform, ProtocolSpec, PulseEvent, Schedule, SpinSystem, StateVector, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = centralspin::Result<(bool, String)>;

fn check(name: &'static str, f: impl FnOnce() -> Outcome) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn random_system(rng: &mut ChaCha8Rng, n: usize, polarization: f64) -> centralspin::Result<SpinSystem> {
    let lambda = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            k[i][j] = rng.gen_range(-1.0..1.0);
            k[j][i] = k[i][j];
        }
    }
    SpinSystem::with_bath(lambda, k, rng.gen_range(0.2..1.0), 1.0, polarization)
}

fn scheduled(name: &str, tau: f64, wf: FieldWaveform) -> centralspin::Result<ProtocolSpec> {
    ProtocolSpec::scheduled(builtin_schedule(name)?, tau, wf)
}

fn random_schedule(rng: &mut ChaCha8Rng) -> Schedule {
    let axes = [Axis::X, Axis::Y, Axis::Z, Axis::MinusX, Axis::MinusY];
    let events = (0..rng.gen_range(0..20))
        .map(|_| PulseEvent {
            t_frac: rng.gen_range(0.0..=1.0),
            target: match rng.gen_range(0..3) {
                0 => Target::Central,
                1 => Target::DarkAll,
                _ => Target::Dark(rng.gen_range(0..8)),
            },
            axis: axes[rng.gen_range(0..axes.len())],
            angle_deg: rng.gen_range(-360.0..360.0),
        })
        .collect();
    Schedule::new("generated", events)
}

/// Runs every invariant with randomness drawn from `seed`.
pub fn run_suite(seed: u64) -> Vec<Check> {
    let rng = |k: u64| trial_rng(seed, 100, k);
    vec![
        check("hamiltonian_hermitian", || {
            let mut worst = 0.0f64;
            let mut r = rng(0);
            for _ in 0..20 {
                let s = random_system(&mut r, 3, 0.0)?;
                let frames: Vec<DarkFrame> = (0..3).map(|i| if i % 2 == 0 { DarkFrame::Z } else { DarkFrame::X }).collect();
                let m = build_hamiltonian(&s, r.gen_range(-1.0..1.0), &frames, true)?;
                worst = worst.max((m.entries() - m.entries().adjoint()).norm());
            }
            Ok((worst < 1e-12, format!("max |H - H†| = {worst:e}")))
        }),
        check("evolution_preserves_norm", || {
            let mut r = rng(1);
            let s = random_system(&mut r, 3, 0.0)?;
            let raw: Vec<C64> = (0..16).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
            let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let psi = StateVector::from_amplitudes(4, raw.iter().map(|a| a / norm).collect())?;
            let h = build_hamiltonian(&s, 0.3, &[DarkFrame::Z; 3], true)?;
            let dev = (evolve(&psi, &h, 7.3)?.norm() - 1.0).abs();
            Ok((dev < 1e-10, format!("|norm - 1| = {dev:e}")))
        }),
        check("ideal_slope_is_2n_xi_tau", || {
            let (xi, tau) = (0.7, 1.3);
            let mut worst = 0.0f64;
            for n in 1..=4 {
                let s = SpinSystem::new(vec![0.0; n], xi, 0.0, 1.0)?;
                let spec = ProtocolSpec::ideal_circuit(vec![PI / 2.0; n], tau, FieldWaveform::dc(0.0))?;
                let slope = response_slope(&s, &spec, &Ensemble::Exact, false)?;
                worst = worst.max((slope / (2.0 * n as f64 * xi * tau) - 1.0).abs());
            }
            Ok((worst < 1e-6, format!("max relative error {worst:e}")))
        }),
        check("echo_cancels_static_sensor_field", || {
            let s = SpinSystem::new(vec![0.8, -2.0], 0.0, 1.0, 1.0)?;
            let slope = response_slope(&s, &scheduled("spin_echo", 3.0, FieldWaveform::dc(0.0))?, &Ensemble::Exact, false)?;
            Ok((slope.abs() < 1e-9, format!("slope {slope:e}")))
        }),
        check("builtins_refocus_at_zero_field", || {
            let mut r = rng(2);
            let s = random_system(&mut r, 3, 0.0)?;
            let mut worst = 0.0f64;
            for name in ["spin_echo", "assisted_echo", "echo_wahuha(2)", "assisted_wahuha(2)"] {
                let sched = builtin_schedule(name)?;
                for c in 0..8 {
                    let out = run_schedule(&s.without_bath(), &sched, &FieldWaveform::dc(0.0), 1.7, &configuration_state(3, c)?, false)?;
                    worst = worst.max(out.signal.abs());
                }
            }
            Ok((worst < 1e-9, format!("max |signal| {worst:e}")))
        }),
        check("signal_odd_in_field", || {
            let s = SpinSystem::new(vec![2.3, -4.1], 0.6, 1.0, 0.4)?;
            let members = Ensemble::Exact.members(&s)?;
            let spec = scheduled("assisted_echo", 1.2, FieldWaveform::echo_square(0.0))?;
            let db = slope_step(&s, spec.tau)?;
            let plus = mean_signal(&s, &spec.with_amplitude(db), &members, false)?;
            let minus = mean_signal(&s, &spec.with_amplitude(-db), &members, false)?;
            let even = (plus + minus).abs();
            Ok((even < 10.0 * db * db, format!("|S(db) + S(-db)| = {even:e}")))
        }),
        check("unpolarized_assisted_equals_echo", || {
            let s = SpinSystem::new(vec![6.1, -2.5, 3.3], 0.5, 1.0, 0.0)?;
            let wf = FieldWaveform::echo_square(0.0);
            let a = response_slope(&s, &scheduled("assisted_echo", 1.0, wf.clone())?, &Ensemble::Exact, false)?;
            let e = response_slope(&s, &scheduled("spin_echo", 1.0, wf)?, &Ensemble::Exact, false)?;
            let rel = (a / e - 1.0).abs();
            Ok((rel < 0.005, format!("relative difference {rel:e}")))
        }),
        check("assisted_slope_sign_robust", || {
            let s = SpinSystem::new(vec![7.0, -3.9, 5.2], 0.5, 1.0, 1.0)?;
            let spec = scheduled("assisted_echo", 1.0, FieldWaveform::dc(0.0))?;
            let base = response_slope(&s, &spec, &Ensemble::Exact, false)?;
            let mut worst = 0.0f64;
            for mask in 1..8u32 {
                let flipped = s.lambda().iter().enumerate().map(|(i, l)| if mask >> i & 1 == 1 { -l } else { *l }).collect();
                let v = response_slope(&s.with_lambda(flipped)?, &spec, &Ensemble::Exact, false)?;
                worst = worst.max((v / base - 1.0).abs());
            }
            Ok((worst < 0.005, format!("max relative change {worst:e}")))
        }),
        check("schedule_round_trip", || {
            let mut r = rng(3);
            let mut failures = 0;
            for _ in 0..200 {
                let s = random_schedule(&mut r);
                match parse(&serialize(&s)) {
                    Ok(back) if back.events() == s.events() => {}
                    _ => failures += 1,
                }
            }
            Ok((failures == 0, format!("{failures} of 200 failed")))
        }),
        check("cluster_exact_for_single_pair", || {
            let s = SpinSystem::with_bath(vec![1.3, -2.2], vec![vec![0.0, 0.7], vec![0.7, 0.0]], 1.0, 1.0, 0.3)?;
            let mut worst = 0.0f64;
            for name in ["spin_echo", "assisted_echo", "echo_wahuha(2)"] {
                let sched = builtin_schedule(name)?;
                for tau in [0.4, 1.1, 2.5] {
                    let d = (cluster_signal_at(&s, &sched, tau, &Ensemble::Exact)? - exact_signal(&s, &sched, tau)?).abs();
                    worst = worst.max(d);
                }
            }
            Ok((worst < 1e-10, format!("max difference {worst:e}")))
        }),
        check("min_field_scale_consistent", || {
            let a = sensitivity_min_field(2.5, 100.0, 0.5)?;
            let b = sensitivity_min_field(7.5, 100.0, 0.5)?;
            let rel = (a / b - 3.0).abs() / 3.0;
            Ok((rel < 1e-12, format!("relative error {rel:e}")))
        }),
        check("trial_seeds_distinct", || {
            let mut seeds: Vec<u64> = (0..10_000).map(|k| trial_seed(seed, 0, k)).collect();
            seeds.sort_unstable();
            seeds.dedup();
            Ok((seeds.len() == 10_000, format!("{} distinct of 10000", seeds.len())))
        }),
    ]
}
