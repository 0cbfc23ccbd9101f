// SPDX-License-Identifier: Apache-2.0

use centralspin::analysis::sensitivity_min_field;
use centralspin::model::{build_hamiltonian, dipolar_couplings, DarkFrame, Geometry};
use centralspin::quantum::{evolve, Axis, Target};
use centralspin::seqlang::{parse, serialize};
use centralspin::{PulseEvent, Schedule, SpinSystem, StateVector, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn target() -> impl Strategy<Value = Target> {
    prop_oneof![Just(Target::Central), Just(Target::DarkAll), (0usize..12).prop_map(Target::Dark)]
}

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z), Just(Axis::MinusX), Just(Axis::MinusY)]
}

fn event() -> impl Strategy<Value = PulseEvent> {
    (0.0f64..=1.0, target(), axis(), -720.0f64..720.0).prop_map(|(t, target, axis, angle)| PulseEvent {
        t_frac: t,
        target,
        axis,
        angle_deg: angle,
    })
}

fn system(max_dark: usize) -> impl Strategy<Value = SpinSystem> {
    (1..=max_dark, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                k[i][j] = rng.gen_range(-2.0..2.0);
                k[j][i] = k[i][j];
            }
        }
        SpinSystem::with_bath(lambda, k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            .unwrap()
    })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(events in prop::collection::vec(event(), 0..40)) {
        let s = Schedule::new("generated", events);
        let text = serialize(&s);
        let back = parse(&text).unwrap();
        prop_assert_eq!(back.events(), s.events());
        prop_assert_eq!(serialize(&back), text);
    }

    #[test]
    fn parsing_is_total(lines in prop::collection::vec("[a-z0-9 .\\[\\]=#-]{0,30}", 0..8)) {
        let text = lines.join("\n");
        if let Err(e) = parse(&text) {
            prop_assert!(e.line >= 1 && e.line <= lines.len().max(1));
        }
    }

    #[test]
    fn hamiltonian_is_hermitian(system in system(5), b in -3.0f64..3.0, frame_bits in any::<u16>(), bath in any::<bool>()) {
        let frames: Vec<DarkFrame> = (0..system.n_dark())
            .map(|i| if frame_bits >> i & 1 == 1 { DarkFrame::X } else { DarkFrame::Z })
            .collect();
        let h = build_hamiltonian(&system, b, &frames, bath).unwrap();
        let m = h.entries();
        prop_assert!((m - m.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn evolution_preserves_norm(system in system(4), t in 0.0f64..5.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1usize << system.n_spins();
        let raw: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = StateVector::from_amplitudes(system.n_spins(), raw.iter().map(|a| a / norm).collect()).unwrap();
        let frames = vec![DarkFrame::X; system.n_dark()];
        let h = build_hamiltonian(&system, 0.4, &frames, true).unwrap();
        let out = evolve(&psi, &h, t).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn min_field_scales_inversely_with_slope(slope in 1e-3f64..1e3, c in 1e-2f64..1e2, tau in 0.1f64..10.0, shots in 1.0f64..1e4) {
        let t = tau * shots;
        let a = sensitivity_min_field(slope, t, tau).unwrap();
        let b = sensitivity_min_field(c * slope, t, tau).unwrap();
        prop_assert!((b * c / a - 1.0).abs() < 1e-12);
    }
}

#[test]
fn dipolar_factor_averages_out_over_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 20_000;
    let positions: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).sqrt();
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect();
    // one spin at a time so the pair loop stays trivial
    let mean: f64 = positions
        .iter()
        .map(|p| dipolar_couplings(&Geometry { side: 3.0, positions: vec![*p] }).unwrap().0[0])
        .sum::<f64>()
        / n as f64;
    // (1 − 3cos²θ) has variance 4/5 over the sphere
    assert!(mean.abs() < 4.0 * (0.8 / n as f64).sqrt(), "{mean}");
}
