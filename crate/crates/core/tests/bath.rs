// SPDX-License-Identifier: Apache-2.0

use centralspin::analysis::{
    cluster_signal, cluster_signal_at, exact_fidelity, exact_signal, fidelity_assisted_series, fidelity_echo_series,
};
use centralspin::model::{build_hamiltonian, sample_geometry, DarkFrame, DEFAULT_EXCLUSION_FRACTION};
use centralspin::protocol::{builtin_schedule, CompiledProgram, Ensemble};
use centralspin::quantum::{apply_rotation, evolve, fidelity};
use centralspin::seqlang::expand_wahuha;
use centralspin::{FieldWaveform, Schedule, SpinSystem, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(lambda: [f64; 2], kappa: f64, p: f64) -> SpinSystem {
    SpinSystem::with_bath(lambda.to_vec(), vec![vec![0.0, kappa], vec![kappa, 0.0]], 0.0, 0.0, p).unwrap()
}

fn random_bath(rng: &mut ChaCha8Rng, n: usize, p: f64) -> SpinSystem {
    let lambda = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            k[i][j] = rng.gen_range(-1.0..1.0);
            k[j][i] = k[i][j];
        }
    }
    SpinSystem::with_bath(lambda, k, 0.0, 0.0, p).unwrap()
}

/// Least-squares slope of log|residual| against log τ.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn echo_fidelity_example_matches_exact_evolution() {
    let system = pair([1.0, 3.0], 0.2, 0.0);
    let echo = builtin_schedule("spin_echo").unwrap();
    let exact = exact_fidelity(&system, &echo, 0.1).unwrap();
    let series = fidelity_echo_series(&system, 0.1);
    assert!((series - (1.0 - 2e-6)).abs() < 1e-15);
    assert!((exact - series).abs() < 1e-8, "{exact} vs {series}");
}

#[test]
fn echo_series_residual_is_higher_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let echo = builtin_schedule("spin_echo").unwrap();
    for _ in 0..5 {
        let p = rng.gen_range(-0.9..0.9);
        let system = random_bath(&mut rng, 3, p);
        let points: Vec<(f64, f64)> = (0..6)
            .map(|k| {
                let tau = 0.02 * 10f64.powf(k as f64 / 5.0);
                let r = (exact_fidelity(&system, &echo, tau).unwrap() - fidelity_echo_series(&system, tau)).abs();
                (tau, r)
            })
            .collect();
        assert!(loglog_slope(&points) >= 4.5, "{points:?}");
    }
}

#[test]
fn fidelity_is_one_without_bath() {
    let system = SpinSystem::new(vec![1.0, -2.0, 0.5], 0.0, 0.0, 0.0).unwrap();
    for name in ["spin_echo", "assisted_echo"] {
        let f = exact_fidelity(&system, &builtin_schedule(name).unwrap(), 0.7).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }
    assert_eq!(fidelity_assisted_series(&system, 0.7), 1.0);
}

#[test]
fn assisted_series_polarized_term_matches_exact() {
    // Isolates the P² coefficient on single pairs; larger baths add
    // three-spin cross terms at finite P that the series does not carry.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let assisted = builtin_schedule("assisted_echo").unwrap();
    for _ in 0..3 {
        let unpolarized = random_bath(&mut rng, 2, 0.0);
        let polarized = unpolarized.with_polarization(1.0).unwrap();
        let tau = 0.005;
        let exact = exact_fidelity(&unpolarized, &assisted, tau).unwrap() - exact_fidelity(&polarized, &assisted, tau).unwrap();
        let series = fidelity_assisted_series(&unpolarized, tau) - fidelity_assisted_series(&polarized, tau);
        assert!((exact / series - 1.0).abs() < 0.05 || series.abs() < 1e-14, "{exact} vs {series}");
    }
}

#[test]
fn cluster_is_exact_for_a_single_pair() {
    let system = pair([1.7, -0.6], 0.45, 0.0);
    for name in ["fid", "spin_echo", "assisted_echo", "echo_wahuha(2)", "assisted_wahuha(2)", "fid_wahuha(2)"] {
        let s = builtin_schedule(name).unwrap();
        for tau in [0.3, 1.0, 2.5] {
            let c = cluster_signal_at(&system, &s, tau, &Ensemble::Exact).unwrap();
            let e = exact_signal(&system, &s, tau).unwrap();
            assert!((c - e).abs() < 1e-10, "{name} τ={tau}: {c} vs {e}");
        }
    }
}

#[test]
fn cluster_is_exact_when_one_pair_is_coupled() {
    let mut k = vec![vec![0.0; 4]; 4];
    k[1][3] = 0.6;
    k[3][1] = 0.6;
    let system = SpinSystem::with_bath(vec![1.1, -0.4, 2.2, 0.9], k, 0.0, 0.0, 0.3).unwrap();
    for name in ["fid", "spin_echo", "assisted_echo"] {
        let s = builtin_schedule(name).unwrap();
        let c = cluster_signal_at(&system, &s, 1.3, &Ensemble::Exact).unwrap();
        let e = exact_signal(&system, &s, 1.3).unwrap();
        assert!((c - e).abs() < 1e-10, "{name}: {c} vs {e}");
    }
}

#[test]
fn uncoupled_bath_does_not_decay_under_echo() {
    let system = SpinSystem::new(vec![1.1, -0.4, 2.2], 0.0, 0.0, 0.0).unwrap();
    for name in ["spin_echo", "assisted_echo", "echo_wahuha(3)"] {
        let m = cluster_signal(&system, &builtin_schedule(name).unwrap(), &[0.5, 1.0, 2.0, 4.0], &Ensemble::Exact).unwrap();
        assert!(m.is_censored());
        assert!(m.curve.iter().all(|p| (p.mean - 1.0).abs() < 1e-12), "{name}");
    }
}

#[test]
fn cluster_captures_leading_decay_for_five_spins() {
    // pair terms carry the whole leading short-time decay
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let side = 5f64.cbrt();
    let g = sample_geometry(5, side, DEFAULT_EXCLUSION_FRACTION * side, &mut rng).unwrap();
    let system = SpinSystem::from_geometry(&g, 1.0, 1.0, 0.0).unwrap();
    for name in ["spin_echo", "assisted_echo", "fid"] {
        let s = builtin_schedule(name).unwrap();
        let mut tau = 0.2;
        while 1.0 - exact_signal(&system, &s, tau).unwrap() > 1e-5 {
            tau /= 2.0;
        }
        let e = 1.0 - exact_signal(&system, &s, tau).unwrap();
        let c = 1.0 - cluster_signal_at(&system, &s, tau, &Ensemble::Exact).unwrap();
        assert!((c / e - 1.0).abs() < 0.01, "{name} τ={tau}: {c} vs {e}");
    }
}

#[test]
fn compiled_evolution_matches_naive_oracle_for_five_spins() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let side = 5f64.cbrt();
    let g = sample_geometry(5, side, DEFAULT_EXCLUSION_FRACTION * side, &mut rng).unwrap();
    let system = SpinSystem::from_geometry(&g, 0.3, 1.0, 0.0).unwrap();
    let frames = vec![DarkFrame::Z; 5];
    for name in ["spin_echo", "assisted_echo", "echo_wahuha(2)"] {
        let s = builtin_schedule(name).unwrap();
        let tau = 0.7;
        let psi = StateVector::basis(6, 0b101100).unwrap();
        let got = CompiledProgram::new(&system, &s, &FieldWaveform::dc(0.0), tau, true).unwrap().evolve(&psi).unwrap();
        let h = build_hamiltonian(&system, 0.0, &frames, true).unwrap();
        let mut want = psi.clone();
        let mut t = 0.0;
        for e in s.events() {
            want = evolve(&want, &h, (e.t_frac - t) * tau).unwrap();
            want = apply_rotation(&want, e.target, e.axis, e.angle_rad()).unwrap();
            t = e.t_frac;
        }
        want = evolve(&want, &h, (1.0 - t) * tau).unwrap();
        assert!((fidelity(&got, &want).unwrap() - 1.0).abs() < 1e-10, "{name}");
    }
}

#[test]
fn cluster_rejects_single_spin_pulses() {
    let s = centralspin::seqlang::parse("pulse 0.5 dark[0] x 180").unwrap();
    assert!(cluster_signal_at(&pair([1.0, 2.0], 0.1, 0.0), &s, 1.0, &Ensemble::Exact).is_err());
}

#[test]
fn wahuha_suppresses_bath_dynamics() {
    let system = SpinSystem::with_bath(vec![0.0, 0.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]], 0.0, 0.0, 0.0).unwrap();
    let cycle = Schedule::new("wahuha", expand_wahuha(0.0, 1.0, 1).unwrap());
    let free = Schedule::new("free", vec![]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t_cyc in [0.05, 0.1, 0.2, 0.3] {
        for _ in 0..4 {
            let amps: Vec<centralspin::C64> =
                (0..8).map(|_| centralspin::C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let psi = StateVector::from_amplitudes(3, amps.iter().map(|a| a / norm).collect()).unwrap();
            let evolve = |s: &Schedule| {
                CompiledProgram::new(&system, s, &FieldWaveform::dc(0.0), t_cyc, true).unwrap().evolve(&psi).unwrap()
            };
            let with = fidelity(&psi, &evolve(&cycle)).unwrap();
            let without = fidelity(&psi, &evolve(&free)).unwrap();
            assert!(with > without, "t_cyc={t_cyc}: {with} <= {without}");
        }
    }
}
