use std::f64::consts::PI;

use adiabat::analysis::{adiabaticity_bound, decompose, dynamic_phases, epsilon, u_adia};
use adiabat::noise::{sample_trace, NoiseModel};
use adiabat::paths::{geometric_function, GaugeFn};
use adiabat::propagate::{evolve_state, propagate};
use adiabat::qcore::{expm_herm, two_pi_mhz};
use adiabat::runner::{run, with_parameter, builtin, GapSpec, NoiseSpec, PathSpec, ProtocolSpec, Scenario, StateSpec, SCHEMA_VERSION};
use adiabat::schedules::{back_forth, compile_continuous, compile_hybrid, compile_jumping, jumping_points, DriveTimeline};
use adiabat::{fidelity, AdiabaticPath, GapSchedule, HermitianOp, PureState, C64};
use proptest::prelude::*;

fn state2() -> impl Strategy<Value = PureState> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-zero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
        .prop_map(|(a, b, c, d)| PureState::new(vec![C64::new(a, b), C64::new(c, d)]).unwrap())
}

fn herm2() -> impl Strategy<Value = HermitianOp> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, x, y, z)| {
        HermitianOp::new(nalgebra::DMatrix::identity(2, 2) * C64::new(a, 0.0))
            .unwrap()
            .add(&HermitianOp::sigma_x().scale(x))
            .unwrap()
            .add(&HermitianOp::sigma_y().scale(y))
            .unwrap()
            .add(&HermitianOp::sigma_z().scale(z))
            .unwrap()
    })
}

fn path() -> impl Strategy<Value = AdiabaticPath> {
    prop_oneof![
        (0.1..2.0f64).prop_map(|g| AdiabaticPath::xy_geodesic(g * PI).unwrap()),
        (0.05..0.95f64, 0.1..2.0f64).prop_map(|(t, g)| AdiabaticPath::latitude(t * PI, g * PI).unwrap()),
        (0.5..10.0f64, 0.2..1.0f64).prop_map(|(d, g)| AdiabaticPath::lz_path(two_pi_mhz(d), g * PI).unwrap()),
    ]
}

fn external_path() -> impl Strategy<Value = AdiabaticPath> {
    prop_oneof![
        (0.1..2.0f64).prop_map(|g| AdiabaticPath::xy_geodesic(g * PI).unwrap()),
        (0.05..0.95f64, 0.1..2.0f64).prop_map(|(t, g)| AdiabaticPath::latitude(t * PI, g * PI).unwrap()),
    ]
}

fn gauge() -> impl Strategy<Value = GaugeFn> {
    (-PI..PI, -4.0..4.0f64, -1.5..1.5f64, 0.0..8.0f64)
        .prop_map(|(offset, slope, amplitude, frequency)| GaugeFn { offset, slope, amplitude, frequency })
}

/// Forward pass of one of the protocol families, repeated back and forth.
fn timeline() -> impl Strategy<Value = DriveTimeline> {
    (external_path(), 0.5..10.0f64, 0.05..2.0f64, 0usize..4, 1usize..9, 0.0..1.0f64, 1usize..4).prop_map(
        |(p, w_mhz, t_us, kind, n, r, reps)| {
            let w = two_pi_mhz(w_mhz);
            let t = t_us * 1e-6;
            let fwd = match kind {
                0 => compile_continuous(&p, &GapSchedule::Constant { omega0: w }, t, None).unwrap(),
                1 => compile_continuous(&p, &GapSchedule::modulated(w, t).unwrap(), t, None).unwrap(),
                2 => compile_jumping(&p, w, n).unwrap(),
                _ => compile_hybrid(&p, w, n, r).unwrap(),
            };
            back_forth(&fwd, reps).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fidelity_unitary_invariant(a in state2(), b in state2(), h in herm2(), t in -2.0..2.0f64) {
        let u = expm_herm(&h, t).unwrap();
        let f0 = fidelity(&a, &b).unwrap();
        let f1 = fidelity(&u.apply(&a).unwrap(), &u.apply(&b).unwrap()).unwrap();
        prop_assert!((f0 - f1).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&f0));
        prop_assert!((f0 - fidelity(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!((f0 - fidelity(&a.with_phase(1.3), &b.with_phase(-0.4)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn expm_composes(h in herm2(), t1 in -1.0..1.0f64, t2 in -1.0..1.0f64) {
        let a = expm_herm(&h, t1).unwrap().compose(&expm_herm(&h, t2).unwrap()).unwrap();
        let b = expm_herm(&h, t1 + t2).unwrap();
        prop_assert!(a.distance(&b) < 1e-11);
        prop_assert!(b.unitarity_deviation() < 1e-10);
    }

    #[test]
    fn eigenframe_orthonormal(p in path(), lam in 0.0..=1.0f64) {
        let a = p.eigenstate(0, lam).unwrap();
        let b = p.eigenstate(1, lam).unwrap();
        prop_assert!(a.norm_deviation() < 1e-10 && b.norm_deviation() < 1e-10);
        prop_assert!(a.inner(&b).unwrap().norm() < 1e-10);
        let c = p.eigenstate(0, (lam + 1e-4).min(1.0)).unwrap();
        prop_assert!(fidelity(&a, &c).unwrap() >= 1.0 - 1e-6);
    }

    #[test]
    fn coupling_modulus_gauge_invariant(p in path(), g1 in gauge(), g2 in gauge(), lam in 0.05..0.95f64) {
        let re = p.regauged(vec![g1, g2]).unwrap();
        let a = geometric_function(&p, 0, 1, lam).unwrap().norm();
        let b = geometric_function(&re, 0, 1, lam).unwrap().norm();
        prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
    }

    #[test]
    fn geodesic_coupling_constant(g in 0.1..2.0f64, l1 in 0.02..0.98f64, l2 in 0.02..0.98f64) {
        let p = AdiabaticPath::xy_geodesic(g * PI).unwrap();
        let a = geometric_function(&p, 0, 1, l1).unwrap().norm();
        let b = geometric_function(&p, 0, 1, l2).unwrap().norm();
        prop_assert!((a - b).abs() < 1e-8);
        prop_assert!((a - g * PI / 2.0).abs() < 1e-8);
    }

    #[test]
    fn lz_matches_meridian(d in 0.5..10.0f64, lam in 0.0..=1.0f64) {
        let p = AdiabaticPath::lz_path(two_pi_mhz(d), PI).unwrap();
        let (c, s) = ((PI * lam / 2.0).cos(), (PI * lam / 2.0).sin());
        let meridian = PureState::new(vec![C64::new(s, 0.0), C64::new(c, 0.0)]).unwrap();
        prop_assert!(fidelity(&p.eigenstate(0, lam).unwrap(), &meridian).unwrap() >= 1.0 - 1e-10);
    }

    #[test]
    fn timeline_is_consistent(tl in timeline()) {
        prop_assert!(tl.segments().iter().all(|s| s.duration >= 0.0));
        let sum: f64 = tl.segments().iter().map(|s| s.duration).sum();
        prop_assert!((sum - tl.total_time()).abs() <= 1e-12 * tl.total_time());
        let u = propagate(&tl).unwrap();
        prop_assert!(u.unitarity_deviation() <= 1e-10);
    }

    #[test]
    fn propagation_composes(tl in timeline(), f in 0.05..0.95f64) {
        let t = f * tl.total_time();
        let a = propagate(&tl.slice(0.0, t)).unwrap();
        let b = propagate(&tl.slice(t, tl.total_time())).unwrap();
        let whole = propagate(&tl).unwrap();
        prop_assert!(b.compose(&a).unwrap().distance(&whole) < 1e-9);
    }

    #[test]
    fn decomposition_invariants(tl in timeline()) {
        let rep = decompose(&tl).unwrap();
        prop_assert!(rep.reconstruction_error <= 1e-10);
        prop_assert!(rep.ode_extract_distance <= 1e-6);
        prop_assert!(adiabaticity_bound(&rep).holds);
        let rec = dynamic_phases(&tl).unwrap();
        prop_assert_eq!(rec.phi(0, 0.0).unwrap(), 0.0);
        prop_assert_eq!(rec.gamma(0, 0.0).unwrap(), 0.0);
        let s = rec.total_arc();
        prop_assert!((rec.phi(0, s).unwrap() + rec.phi(1, s).unwrap()).abs() <= 1e-9 * rec.phi(0, s).unwrap().abs().max(1.0));
        prop_assert!((epsilon(&rec, 0, 1, s).unwrap() - epsilon(&rec, 1, 0, s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn epsilon_gauge_invariant(g1 in gauge(), g2 in gauge(), w in 0.5..10.0f64, lam in 0.0..=1.0f64) {
        let p = AdiabaticPath::xy_geodesic(PI).unwrap();
        let re = p.regauged(vec![g1, g2]).unwrap();
        let gap = GapSchedule::modulated(two_pi_mhz(w), 1e-6).unwrap();
        let a = dynamic_phases(&compile_continuous(&p, &gap, 1e-6, None).unwrap()).unwrap();
        let b = dynamic_phases(&compile_continuous(&re, &gap, 1e-6, None).unwrap()).unwrap();
        prop_assert!((epsilon(&a, 0, 1, lam).unwrap() - epsilon(&b, 0, 1, lam).unwrap()).abs() <= 1e-8);
        // physical target unchanged
        let ua = u_adia(&a, 1.0).unwrap();
        let ub = u_adia(&b, 1.0).unwrap();
        let psi = PureState::y();
        prop_assert!(fidelity(&ua.apply(&psi).unwrap(), &ub.apply(&psi).unwrap()).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn jumping_half_path_phase(n in 1usize..40, w in 0.5..10.0f64, p in external_path()) {
        let pts = jumping_points(n).unwrap();
        for k in pts.windows(2) {
            prop_assert!((k[1] - k[0] - 1.0 / n as f64).abs() <= 1e-15);
        }
        let tl = compile_jumping(&p, two_pi_mhz(w), n).unwrap();
        let rec = dynamic_phases(&tl).unwrap();
        prop_assert!((rec.phase_difference(rec.total_arc()).unwrap() - n as f64 * PI).abs() < 1e-9);
    }

    #[test]
    fn hybrid_endpoints_segment_identical(n in 1usize..12, w in 0.5..10.0f64, p in external_path()) {
        let w = two_pi_mhz(w);
        let c = compile_continuous(&p, &GapSchedule::Constant { omega0: w }, n as f64 * PI / w, None).unwrap();
        let (h0, h1) = (compile_hybrid(&p, w, n, 0.0).unwrap(), compile_hybrid(&p, w, n, 1.0).unwrap());
        let j = compile_jumping(&p, w, n).unwrap();
        prop_assert_eq!(h0.segments(), c.segments());
        prop_assert_eq!(h1.segments(), j.segments());
    }

    #[test]
    fn trajectory_invariants(tl in timeline(), psi in state2(), n in 2usize..40) {
        let tr = evolve_state(&psi, &tl, n).unwrap();
        prop_assert_eq!(tr.samples.len(), n);
        prop_assert_eq!(&tr.samples[0].state, &psi);
        for w in tr.samples.windows(2) {
            prop_assert!(w[1].t > w[0].t);
        }
        prop_assert!(tr.samples.iter().all(|s| s.state.norm_deviation() <= 1e-10));
    }

    #[test]
    fn noise_traces_deterministic(seed in any::<u64>(), rel in 0.0..1.0f64, t_us in 0.05..3.0f64) {
        for m in [
            NoiseModel::WhiteGaussianAmplitude { rel_std: rel, dwell: 10e-9 },
            NoiseModel::OuAmplitude { rel_std: rel, tau_c: 100e-9, dwell: 10e-9 },
            NoiseModel::StaticGaussianDetuning { sigma: two_pi_mhz(rel) },
        ] {
            let a = sample_trace(&m, t_us * 1e-6, seed).unwrap();
            let b = sample_trace(&m, t_us * 1e-6, seed).unwrap();
            prop_assert_eq!(&a.values, &b.values);
            prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn scenario_roundtrip(g in 0.1..2.0f64, w in 0.1..20.0f64, n in 1usize..20, reps in 1usize..7, seed in any::<u64>(),
                          rel in 0.0..1.0f64, comp in any::<bool>(), re in -1.0..1.0f64, im in -1.0..1.0f64) {
        let sc = Scenario {
            schema_version: SCHEMA_VERSION,
            name: "rt".into(),
            description: "round trip".into(),
            path: PathSpec::XyGeodesic { theta_g_pi: g },
            gap: GapSpec::Crossing { omega0_mhz: w, a: rel * 3.0 },
            protocol: ProtocolSpec::Hybrid { n, r_jump: rel },
            repeats: reps,
            compensate: comp,
            initial_states: vec![StateSpec::Custom { re: vec![re, 1.0], im: vec![im, 0.0] }],
            noise: vec![NoiseSpec::WhiteGaussianAmplitude { rel_std: rel, dwell_ns: 10.0 / (1.0 + rel) }],
            samples: 11,
            seed,
            n_traj: 10,
            lambda_clip: None,
        };
        let back = Scenario::from_json(&sc.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &sc);
        prop_assert_eq!(back.hash().unwrap(), sc.hash().unwrap());
    }
}

#[test]
fn deviation_shrinks_with_constant_gap_time() {
    let p = AdiabaticPath::xy_geodesic(2.0 * PI).unwrap();
    let w = two_pi_mhz(6.0);
    let devs: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|t| decompose(&compile_continuous(&p, &GapSchedule::Constant { omega0: w }, t * 1e-6, None).unwrap()).unwrap().deviation_norm)
        .collect();
    for d in devs.windows(2) {
        assert!(d[1] <= d[0] * 1.0001, "{devs:?}");
    }
}

#[test]
fn fig1d_example() {
    let r = run(&builtin("fig1d").unwrap()).unwrap();
    assert!(r.states[0].final_fid_eig >= 0.99);
    let omega_t = two_pi_mhz(6.0) * r.timeline.total_time();
    assert!(r.report.epsilon_final <= 2.0 / omega_t + 1e-3);
}

#[test]
fn fig4b_unit_fidelity_for_all_n() {
    let base = builtin("fig4b").unwrap();
    for n in 1..=10 {
        let r = run(&with_parameter(&base, "N", n as f64).unwrap()).unwrap();
        for s in &r.states {
            assert!((1.0 - s.final_fidelity).abs() < 1e-9, "N={n} {}: {}", s.label, s.final_fidelity);
        }
    }
}

#[test]
fn fig4a_transfer_peaks() {
    let base = builtin("fig4a").unwrap();
    for k in 1..=3 {
        let r = run(&with_parameter(&base, "k", k as f64).unwrap()).unwrap();
        assert!((1.0 - r.states[0].final_fidelity).abs() < 1e-9, "k={k}");
    }
}

#[test]
fn robustness_improves_with_n() {
    let base = builtin("s3").unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for n in [1.0, 2.0, 5.0, 10.0] {
        let r = run(&with_parameter(&base, "N", n).unwrap()).unwrap();
        let e = r.states[0].ensemble.as_ref().unwrap();
        let (inf, se) = (1.0 - e.final_mean(), e.final_stderr());
        if let Some((p, pse)) = prev {
            assert!(inf <= p + 2.0 * (se * se + pse * pse).sqrt(), "N={n}: {inf} after {p}");
        }
        prev = Some((inf, se));
    }
}

#[test]
fn berry_phase_latitudes() {
    for theta in [PI / 6.0, PI / 4.0, PI / 2.0] {
        let p = AdiabaticPath::latitude(theta, 2.0 * PI).unwrap();
        let g = adiabat::paths::berry_phase(&p, 0, 1.0).unwrap();
        let want = PI * (theta.cos() - 1.0);
        let d = (g - want).rem_euclid(2.0 * PI);
        assert!(d.min(2.0 * PI - d) < 1e-6, "theta={theta}: {g} vs {want}");
    }
}
